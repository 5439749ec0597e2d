#include "mpmlite/transfer.hpp"

#include "mpmlite/constitutive.hpp"
#include "mpmlite/errors.hpp"
#include "mpmlite/parallel.hpp"

#include <tbb/parallel_sort.h>

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <utility>

namespace mpmlite {

template <int dim>
std::vector<Mat<dim>> particle_stresses(const std::vector<Particle<dim>>& particles,
                                        const std::vector<MaterialModel>& materials) {
  std::vector<Mat<dim>> tau(particles.size());
  parallel_for(particles.size(), [&](std::size_t p) {
    const Particle<dim>& pt = particles[p];
    const MaterialModel& m = materials[static_cast<std::size_t>(pt.material)];
    Mat<dim> t;
    if (m.is_fluid()) {
      if (!(pt.J > 0.0)) throw ConstitutiveError(p, "fluid volume ratio J <= 0");
      t = water_pressure(pt.J, m.bulk) * Mat<dim>::Identity();
    } else {
      if (!(pt.F.determinant() > 0.0)) throw ConstitutiveError(p, "det F <= 0");
      t = kirchhoff_stress<dim>(m, pt.F);
    }
    if (!t.allFinite()) throw ConstitutiveError(p, "non-finite stress");
    tau[p] = t;
  });
  return tau;
}

template <int dim>
UnloadReport unload(const std::vector<Particle<dim>>& particles, const std::vector<MaterialModel>& materials,
                    GridState<dim>& state, const UnloadOptions& opt) {
  return unload<dim>(particles, particle_stresses<dim>(particles, materials), materials, state, opt);
}

namespace {

template <int dim>
std::vector<std::int64_t> sorted_unique(std::vector<std::int64_t> keys) {
  tbb::parallel_sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

template <int dim>
struct SlotAccum {
  int material;
  Accumulator<double> volume;
  Accumulator<Mat<dim>> vtau;
};

}  // namespace

template <int dim>
UnloadReport unload(const std::vector<Particle<dim>>& particles, const std::vector<Mat<dim>>& stresses,
                    const std::vector<MaterialModel>& materials, GridState<dim>& state, const UnloadOptions& opt) {
  constexpr int kCorners = corner_count(dim);
  const GridDesc<dim>& grid = state.grid;
  const bool comp = opt.deterministic;
  const std::size_t np = particles.size();
  (void)materials;

  state.clear();
  UnloadReport report;
  if (np == 0) return report;

  // locate particles in the center lattice
  std::vector<IVec<dim>> base(np);
  state.particle_weights.resize(np);
  parallel_for(np, [&](std::size_t p) {
    const Q1Coords<dim> q = q1_locate(particles[p].x, grid);
    base[p] = q.base;
    for (int b = 0; b < kCorners; ++b) state.particle_weights[p][b] = q.weight(b);
  });

  // bin particles by base cell; ties keep particle order
  std::vector<std::pair<std::int64_t, int>> order(np);
  parallel_for(np, [&](std::size_t p) { order[p] = {grid.cell_linear(base[p]), static_cast<int>(p)}; });
  tbb::parallel_sort(order.begin(), order.end());
  std::vector<int> bucket_start;
  std::vector<int> bucket_particles(np);
  LatticeIndex<dim> bucket_index(grid.dims, state.storage);
  for (std::size_t k = 0; k < np; ++k) {
    bucket_particles[k] = order[k].second;
    if (k == 0 || order[k].first != order[k - 1].first) {
      bucket_index.insert(base[static_cast<std::size_t>(order[k].second)], static_cast<int>(bucket_start.size()));
      bucket_start.push_back(static_cast<int>(k));
    }
  }
  bucket_start.push_back(static_cast<int>(np));

  // candidate cells: every corner of every occupied base
  std::vector<std::int64_t> cand_keys;
  cand_keys.reserve((bucket_start.size() - 1) * kCorners);
  for (std::size_t b = 0; b + 1 < bucket_start.size(); ++b) {
    const IVec<dim>& c0 = base[static_cast<std::size_t>(bucket_particles[static_cast<std::size_t>(bucket_start[b])])];
    for (int bits = 0; bits < kCorners; ++bits) cand_keys.push_back(grid.cell_linear(c0 + corner_offset<dim>(bits)));
  }
  cand_keys = sorted_unique<dim>(std::move(cand_keys));
  const std::size_t nc = cand_keys.size();
  report.candidate_cells = nc;

  // particle -> center gather
  std::vector<double> cm(nc);
  std::vector<Vec<dim>> cv(nc);
  std::vector<Mat<dim>> cG(nc);
  std::vector<std::vector<CellSlot<dim>>> cslots(nc);
  const bool merged = opt.mode == TransferMode::Explicit;
  parallel_for(
      nc,
      [&](std::size_t i) {
        const IVec<dim> c = GridDesc<dim>::delinearize(cand_keys[i], grid.dims);
        const Vec<dim> xc = grid.cell_center(c);
        Accumulator<double> m(0.0, comp);
        Accumulator<Vec<dim>> mv(Vec<dim>::Zero(), comp);
        Accumulator<Mat<dim>> mG(Mat<dim>::Zero(), comp);
        std::vector<SlotAccum<dim>> acc;
        for (int bits = 0; bits < kCorners; ++bits) {
          const int bucket = bucket_index.find(c - corner_offset<dim>(bits));
          if (bucket < 0) continue;
          for (int k = bucket_start[bucket]; k < bucket_start[bucket + 1]; ++k) {
            const std::size_t p = static_cast<std::size_t>(bucket_particles[static_cast<std::size_t>(k)]);
            const Particle<dim>& pt = particles[p];
            const double w = state.particle_weights[p][bits];
            const double wm = w * pt.mass;
            m.add(wm);
            if (opt.affine) {
              mv.add(wm * (pt.v + pt.G * (xc - pt.x)));
              mG.add(wm * pt.G);
            } else {
              mv.add(wm * pt.v);
            }
            const int mat = merged ? -1 : pt.material;
            auto it = std::find_if(acc.begin(), acc.end(), [&](const SlotAccum<dim>& s) { return s.material == mat; });
            if (it == acc.end()) {
              acc.push_back({mat, Accumulator<double>(0.0, comp), Accumulator<Mat<dim>>(Mat<dim>::Zero(), comp)});
              it = acc.end() - 1;
            }
            const double wv = w * pt.volume;
            it->volume.add(wv);
            it->vtau.add(wv * stresses[p]);
          }
        }
        cm[i] = m.value();
        if (cm[i] > 0.0) {
          cv[i] = mv.value() / cm[i];
          cG[i] = mG.value() / cm[i];
        } else {
          cv[i].setZero();
          cG[i].setZero();
        }
        std::sort(acc.begin(), acc.end(),
                  [](const SlotAccum<dim>& a, const SlotAccum<dim>& b) { return a.material < b.material; });
        cslots[i].reserve(acc.size());
        for (const SlotAccum<dim>& s : acc) {
          CellSlot<dim> slot;
          slot.material = s.material;
          slot.volume = s.volume.value();
          if (slot.volume > 0.0) {
            const Mat<dim> t = s.vtau.value() / slot.volume;
            slot.tau = 0.5 * (t + t.transpose());
          }
          cslots[i].push_back(slot);
        }
      },
      64);

  // deactivate cells with negligible mass
  std::vector<double> masses(np);
  for (std::size_t p = 0; p < np; ++p) masses[p] = particles[p].mass;
  std::nth_element(masses.begin(), masses.begin() + static_cast<std::ptrdiff_t>(np / 2), masses.end());
  const double threshold = 1e-14 * masses[np / 2];

  for (std::size_t i = 0; i < nc; ++i) {
    if (!(cm[i] >= threshold) || cm[i] <= 0.0) {
      ++report.deactivated_cells;
      continue;
    }
    const IVec<dim> c = GridDesc<dim>::delinearize(cand_keys[i], grid.dims);
    state.cell_index.insert(c, static_cast<int>(state.cell_coord.size()));
    state.cell_coord.push_back(c);
    state.cell_mass.push_back(cm[i]);
    state.cell_v.push_back(cv[i]);
    state.cell_G.push_back(cG[i]);
    for (const CellSlot<dim>& s : cslots[i]) state.slots.push_back(s);
    state.slot_begin.push_back(static_cast<int>(state.slots.size()));
  }
  const std::size_t ncells = state.cell_coord.size();

  state.particle_cells.resize(np);
  parallel_for(np, [&](std::size_t p) {
    for (int bits = 0; bits < kCorners; ++bits)
      state.particle_cells[p][bits] = state.cell_index.find(base[p] + corner_offset<dim>(bits));
  });

  // nodes: corners of active cells
  std::vector<std::int64_t> node_keys;
  node_keys.reserve(ncells * kCorners);
  for (const IVec<dim>& c : state.cell_coord)
    for (int bits = 0; bits < kCorners; ++bits) node_keys.push_back(grid.node_linear(c + corner_offset<dim>(bits)));
  node_keys = sorted_unique<dim>(std::move(node_keys));
  const std::size_t nn = node_keys.size();
  state.node_coord.resize(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    state.node_coord[n] = GridDesc<dim>::delinearize(node_keys[n], grid.node_dims());
    state.node_index.insert(state.node_coord[n], static_cast<int>(n));
  }
  state.cell_nodes.resize(ncells);
  parallel_for(ncells, [&](std::size_t c) {
    for (int bits = 0; bits < kCorners; ++bits)
      state.cell_nodes[c][bits] = state.node_index.find(state.cell_coord[c] + corner_offset<dim>(bits));
  });
  state.node_cells.resize(nn);
  parallel_for(nn, [&](std::size_t n) {
    for (int bits = 0; bits < kCorners; ++bits)
      state.node_cells[n][bits] = state.cell_index.find(state.node_coord[n] - corner_offset<dim>(bits));
  });

  // center -> node gather
  constexpr double w_ic = q1_weight_center_to_node(dim);
  state.node_mass.resize(nn);
  state.node_v.resize(nn);
  parallel_for(nn, [&](std::size_t n) {
    Accumulator<double> m(0.0, comp);
    Accumulator<Vec<dim>> mv(Vec<dim>::Zero(), comp);
    for (int bits = 0; bits < kCorners; ++bits) {
      const int c = state.node_cells[n][bits];
      if (c < 0) continue;
      const double wm = w_ic * state.cell_mass[static_cast<std::size_t>(c)];
      m.add(wm);
      if (opt.affine)
        mv.add(wm * (state.cell_v[static_cast<std::size_t>(c)] +
                     state.cell_G[static_cast<std::size_t>(c)] * state.corner_offset_position(bits)));
      else
        mv.add(wm * state.cell_v[static_cast<std::size_t>(c)]);
    }
    state.node_mass[n] = m.value();
    state.node_v[n] = mv.value() / m.value();
  });
  state.node_v_old = state.node_v;
  state.node_force.assign(nn, Vec<dim>::Zero());
  state.node_constraint.assign(nn, -1);
  return report;
}

template <int dim>
void nodes_to_centers(GridState<dim>& state) {
  constexpr int kCorners = corner_count(dim);
  constexpr double w_ic = q1_weight_center_to_node(dim);
  const double dx = state.grid.dx;
  parallel_for(state.cell_count(), [&](std::size_t c) {
    Vec<dim> v = Vec<dim>::Zero();
    Mat<dim> G = Mat<dim>::Zero();
    for (int bits = 0; bits < kCorners; ++bits) {
      const Vec<dim>& vi = state.node_v[static_cast<std::size_t>(state.cell_nodes[c][bits])];
      v += w_ic * vi;
      G += vi * q1_grad_corner<dim>(bits, dx).transpose();
    }
    state.cell_v[c] = v;
    state.cell_G[c] = G;
  });
}

namespace {

template <int dim>
void advance_particle(Particle<dim>& pt, const MaterialModel& m, double dt, std::atomic<std::size_t>& inverted,
                      std::atomic<std::size_t>& projected) {
  if (m.is_fluid()) {
    const double factor = 1.0 + dt * pt.G.trace();
    if (!(factor > 0.0)) inverted.fetch_add(1, std::memory_order_relaxed);
    pt.J *= factor;
    return;
  }
  const Mat<dim> A = Mat<dim>::Identity() + dt * pt.G;
  if (!(A.determinant() > 0.0)) inverted.fetch_add(1, std::memory_order_relaxed);
  pt.F = A * pt.F;
  if (m.has_plasticity() && pt.F.determinant() > 0.0) {
    PolarSvd<dim> svd = polar_svd<dim>(pt.F);
    if (project_plastic<dim>(m, svd.sigma)) {
      pt.F = svd.U * svd.sigma.asDiagonal() * svd.V.transpose();
      projected.fetch_add(1, std::memory_order_relaxed);
    }
  }
}

}  // namespace

template <int dim>
LoadReport load(GridState<dim>& state, std::vector<Particle<dim>>& particles,
                const std::vector<MaterialModel>& materials, double dt) {
  constexpr int kCorners = corner_count(dim);
  nodes_to_centers(state);
  std::atomic<std::size_t> inverted{0}, projected{0};
  parallel_for(particles.size(), [&](std::size_t p) {
    Particle<dim>& pt = particles[p];
    Vec<dim> v = Vec<dim>::Zero();
    Mat<dim> G = Mat<dim>::Zero();
    for (int bits = 0; bits < kCorners; ++bits) {
      const int c = state.particle_cells[p][bits];
      if (c < 0) continue;
      const double w = state.particle_weights[p][bits];
      v += w * state.cell_v[static_cast<std::size_t>(c)];
      G += w * state.cell_G[static_cast<std::size_t>(c)];
    }
    pt.v = v;
    pt.G = G;
    pt.x += dt * v;
    advance_particle(pt, materials[static_cast<std::size_t>(pt.material)], dt, inverted, projected);
  });
  return {inverted.load(), projected.load()};
}

template <int dim>
LoadReport load_flip_pic(GridState<dim>& state, std::vector<Particle<dim>>& particles,
                         const std::vector<MaterialModel>& materials, double dt, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("FLIP blend must lie in [0, 1]");
  constexpr int kCorners = corner_count(dim);
  constexpr double w_ic = q1_weight_center_to_node(dim);
  nodes_to_centers(state);
  std::vector<Vec<dim>> cell_dv(state.cell_count());
  parallel_for(state.cell_count(), [&](std::size_t c) {
    Vec<dim> dv = Vec<dim>::Zero();
    for (int bits = 0; bits < kCorners; ++bits) {
      const std::size_t n = static_cast<std::size_t>(state.cell_nodes[c][bits]);
      dv += w_ic * (state.node_v[n] - state.node_v_old[n]);
    }
    cell_dv[c] = dv;
  });
  std::atomic<std::size_t> inverted{0}, projected{0};
  parallel_for(particles.size(), [&](std::size_t p) {
    Particle<dim>& pt = particles[p];
    Vec<dim> v_pic = Vec<dim>::Zero(), dv = Vec<dim>::Zero();
    Mat<dim> G = Mat<dim>::Zero();
    for (int bits = 0; bits < kCorners; ++bits) {
      const int c = state.particle_cells[p][bits];
      if (c < 0) continue;
      const double w = state.particle_weights[p][bits];
      v_pic += w * state.cell_v[static_cast<std::size_t>(c)];
      dv += w * cell_dv[static_cast<std::size_t>(c)];
      G += w * state.cell_G[static_cast<std::size_t>(c)];
    }
    pt.v = alpha * (pt.v + dv) + (1.0 - alpha) * v_pic;
    pt.G = G;
    pt.x += dt * v_pic;
    advance_particle(pt, materials[static_cast<std::size_t>(pt.material)], dt, inverted, projected);
  });
  return {inverted.load(), projected.load()};
}

template <int dim>
Eigen::Vector3d cross3(const Vec<dim>& x, const Vec<dim>& v) {
  if constexpr (dim == 2)
    return {0.0, 0.0, x.x() * v.y() - x.y() * v.x()};
  else
    return x.cross(v);
}

template <int dim>
Eigen::Vector3d affine_spin(const Mat<dim>& A) {
  if constexpr (dim == 2)
    return {0.0, 0.0, A(1, 0) - A(0, 1)};
  else
    return {A(2, 1) - A(1, 2), A(0, 2) - A(2, 0), A(1, 0) - A(0, 1)};
}

template <int dim>
Mat<dim> two_hop_moment(const Vec<dim>& x, const GridDesc<dim>& grid) {
  const Q1Coords<dim> q = q1_locate(x, grid);
  Mat<dim> D = (0.25 * grid.dx * grid.dx) * Mat<dim>::Identity();
  for (int bits = 0; bits < corner_count(dim); ++bits) {
    const Vec<dim> r = grid.cell_center(q.base + corner_offset<dim>(bits)) - x;
    D += q.weight(bits) * r * r.transpose();
  }
  return D;
}

template <int dim>
Vec<dim> particle_momentum(const std::vector<Particle<dim>>& particles, bool compensated) {
  return reduce_sum<Vec<dim>>(
      particles.size(), Vec<dim>::Zero(), [&](std::size_t p) -> Vec<dim> { return particles[p].mass * particles[p].v; },
      compensated);
}

template <int dim>
Eigen::Vector3d particle_angular_momentum(const std::vector<Particle<dim>>& particles, const GridDesc<dim>& grid,
                                          bool compensated) {
  return reduce_sum<Eigen::Vector3d>(
      particles.size(), Eigen::Vector3d::Zero(),
      [&](std::size_t p) -> Eigen::Vector3d {
        const Particle<dim>& pt = particles[p];
        const Mat<dim> D = two_hop_moment<dim>(pt.x, grid);
        return pt.mass * (cross3<dim>(pt.x, pt.v) + affine_spin<dim>(pt.G * D));
      },
      compensated);
}

template <int dim>
Vec<dim> node_momentum(const GridState<dim>& state, bool compensated) {
  return reduce_sum<Vec<dim>>(
      state.node_count(), Vec<dim>::Zero(),
      [&](std::size_t n) -> Vec<dim> { return state.node_mass[n] * state.node_v[n]; }, compensated);
}

template <int dim>
Eigen::Vector3d node_angular_momentum(const GridState<dim>& state, bool compensated) {
  return reduce_sum<Eigen::Vector3d>(
      state.node_count(), Eigen::Vector3d::Zero(),
      [&](std::size_t n) -> Eigen::Vector3d {
        return state.node_mass[n] * cross3<dim>(state.grid.node_position(state.node_coord[n]), state.node_v[n]);
      },
      compensated);
}

template <int dim>
TransferStats<dim> momentum_report(const std::vector<Particle<dim>>& particles,
                                   const std::vector<Mat<dim>>& stresses, const GridState<dim>& state,
                                   std::size_t material_count) {
  TransferStats<dim> s;
  s.momentum_particles = particle_momentum<dim>(particles);
  s.angular_particles = particle_angular_momentum<dim>(particles, state.grid);
  s.momentum_nodes = node_momentum<dim>(state);
  s.angular_nodes = node_angular_momentum<dim>(state);
  const double dx2 = 0.25 * state.grid.dx * state.grid.dx;
  s.momentum_cells = reduce_sum<Vec<dim>>(state.cell_count(), Vec<dim>::Zero(), [&](std::size_t c) -> Vec<dim> {
    return state.cell_mass[c] * state.cell_v[c];
  });
  s.angular_cells =
      reduce_sum<Eigen::Vector3d>(state.cell_count(), Eigen::Vector3d::Zero(), [&](std::size_t c) -> Eigen::Vector3d {
        const Vec<dim> xc = state.grid.cell_center(state.cell_coord[c]);
        return state.cell_mass[c] * (cross3<dim>(xc, state.cell_v[c]) + affine_spin<dim>(dx2 * state.cell_G[c]));
      });

  s.vtau_particles.assign(material_count, Mat<dim>::Zero());
  s.vtau_cells.assign(material_count, Mat<dim>::Zero());
  std::vector<KahanSum<Mat<dim>>> pk(material_count, KahanSum<Mat<dim>>(Mat<dim>::Zero()));
  KahanSum<Mat<dim>> ptot(Mat<dim>::Zero()), ctot(Mat<dim>::Zero());
  if (stresses.size() == particles.size()) {
    for (std::size_t p = 0; p < particles.size(); ++p) {
      const Mat<dim> vt = particles[p].volume * stresses[p];
      pk[static_cast<std::size_t>(particles[p].material)].add(vt);
      ptot.add(vt);
    }
  }
  std::vector<KahanSum<Mat<dim>>> ck(material_count, KahanSum<Mat<dim>>(Mat<dim>::Zero()));
  for (const CellSlot<dim>& slot : state.slots) {
    const Mat<dim> vt = slot.volume * slot.tau;
    if (slot.material >= 0) ck[static_cast<std::size_t>(slot.material)].add(vt);
    ctot.add(vt);
  }
  for (std::size_t k = 0; k < material_count; ++k) {
    s.vtau_particles[k] = pk[k].sum;
    s.vtau_cells[k] = ck[k].sum;
  }
  s.vtau_particles_total = ptot.sum;
  s.vtau_cells_total = ctot.sum;
  return s;
}

#define MPMLITE_INSTANTIATE(D)                                                                                     \
  template std::vector<Mat<D>> particle_stresses<D>(const std::vector<Particle<D>>&,                               \
                                                    const std::vector<MaterialModel>&);                            \
  template UnloadReport unload<D>(const std::vector<Particle<D>>&, const std::vector<MaterialModel>&, GridState<D>&, \
                                  const UnloadOptions&);                                                           \
  template UnloadReport unload<D>(const std::vector<Particle<D>>&, const std::vector<Mat<D>>&,                     \
                                  const std::vector<MaterialModel>&, GridState<D>&, const UnloadOptions&);         \
  template void nodes_to_centers<D>(GridState<D>&);                                                                \
  template LoadReport load<D>(GridState<D>&, std::vector<Particle<D>>&, const std::vector<MaterialModel>&, double); \
  template LoadReport load_flip_pic<D>(GridState<D>&, std::vector<Particle<D>>&, const std::vector<MaterialModel>&, \
                                       double, double);                                                            \
  template Eigen::Vector3d cross3<D>(const Vec<D>&, const Vec<D>&);                                                \
  template Eigen::Vector3d affine_spin<D>(const Mat<D>&);                                                          \
  template Mat<D> two_hop_moment<D>(const Vec<D>&, const GridDesc<D>&);                                            \
  template Vec<D> particle_momentum<D>(const std::vector<Particle<D>>&, bool);                                     \
  template Eigen::Vector3d particle_angular_momentum<D>(const std::vector<Particle<D>>&, const GridDesc<D>&, bool); \
  template Vec<D> node_momentum<D>(const GridState<D>&, bool);                                                     \
  template Eigen::Vector3d node_angular_momentum<D>(const GridState<D>&, bool);                                    \
  template TransferStats<D> momentum_report<D>(const std::vector<Particle<D>>&, const std::vector<Mat<D>>&,        \
                                               const GridState<D>&, std::size_t);

MPMLITE_INSTANTIATE(2)
MPMLITE_INSTANTIATE(3)
#undef MPMLITE_INSTANTIATE

}  // namespace mpmlite
