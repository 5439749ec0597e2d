#include "mpmlite/integrator.hpp"

#include "mpmlite/errors.hpp"
#include "mpmlite/parallel.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace mpmlite {

// --- boundary conditions ----------------------------------------------------

template <int dim>
void add_node_constraint(GridState<dim>& state, std::size_t n, BoundaryCondition bc, const Vec<dim>& normal,
                         const Vec<dim>& velocity) {
  int& idx = state.node_constraint[n];
  if (idx < 0) {
    idx = static_cast<int>(state.constraints.size());
    NodeConstraint<dim> c;
    c.node = static_cast<int>(n);
    c.P = Mat<dim>::Identity();
    c.target.setZero();
    state.constraints.push_back(c);
  }
  NodeConstraint<dim>& c = state.constraints[static_cast<std::size_t>(idx)];
  if (bc == BoundaryCondition::Sticky) {
    c.P.setZero();
    c.target = velocity;
    return;
  }
  Vec<dim> m = c.P * normal;
  const double len = m.norm();
  if (len < 1e-8) return;
  m /= len;
  c.P -= m * m.transpose();
  c.target += m * m.dot(velocity);
}

template <int dim>
void mark_boundary_nodes(GridState<dim>& state, const std::vector<Collider<dim>>& colliders,
                         const DomainBoundary& walls, double t) {
  state.constraints.clear();
  state.node_constraint.assign(state.node_count(), -1);
  const IVec<dim> nd = state.grid.node_dims();
  for (std::size_t n = 0; n < state.node_count(); ++n) {
    const IVec<dim>& i = state.node_coord[n];
    if (walls.condition) {
      for (int a = 0; a < dim; ++a) {
        Vec<dim> normal = Vec<dim>::Zero();
        if (i[a] <= walls.cells)
          normal[a] = 1.0;
        else if (i[a] >= nd[a] - 1 - walls.cells)
          normal[a] = -1.0;
        else
          continue;
        add_node_constraint<dim>(state, n, *walls.condition, normal, Vec<dim>::Zero());
      }
    }
    if (colliders.empty()) continue;
    const Vec<dim> x = state.grid.node_position(i);
    for (const Collider<dim>& col : colliders)
      if (col.phi(x, t) <= 0.0) add_node_constraint<dim>(state, n, col.condition, col.normal_at(x, t), col.velocity);
  }
}

template <int dim>
void apply_boundary_conditions(const GridState<dim>& state, NodeField<dim>& v) {
  for (const NodeConstraint<dim>& c : state.constraints) {
    Vec<dim>& vi = v[static_cast<std::size_t>(c.node)];
    vi = c.P * vi + c.target;
  }
}

template <int dim>
void project_directions(const GridState<dim>& state, NodeField<dim>& d) {
  for (const NodeConstraint<dim>& c : state.constraints) {
    Vec<dim>& di = d[static_cast<std::size_t>(c.node)];
    di = c.P * di;
  }
}

// --- explicit ---------------------------------------------------------------

template <int dim>
void explicit_step(GridState<dim>& state, double dt, const Vec<dim>& gravity) {
  constexpr int kCorners = corner_count(dim);
  const double dx = state.grid.dx;
  state.node_force.assign(state.node_count(), Vec<dim>::Zero());
  std::atomic<long long> bad_node{-1};
  parallel_for(state.node_count(), [&](std::size_t n) {
    Vec<dim> f = Vec<dim>::Zero();
    for (int bits = 0; bits < kCorners; ++bits) {
      const int c = state.node_cells[n][bits];
      if (c < 0) continue;
      const Vec<dim> grad = q1_grad_corner<dim>(bits, dx);
      for (int s = state.slot_begin[static_cast<std::size_t>(c)]; s < state.slot_begin[static_cast<std::size_t>(c) + 1];
           ++s) {
        const CellSlot<dim>& slot = state.slots[static_cast<std::size_t>(s)];
        if (!slot.active) continue;
        f -= slot.volume * (slot.tau * grad);
      }
    }
    if (!f.allFinite()) bad_node.store(static_cast<long long>(n));
    state.node_force[n] = f;
    state.node_v[n] += dt * f / state.node_mass[n] + dt * gravity;
  });
  if (bad_node.load() >= 0) {
    const std::size_t n = static_cast<std::size_t>(bad_node.load());
    for (int bits = 0; bits < kCorners; ++bits) {
      const int c = state.node_cells[n][bits];
      if (c >= 0) spdlog::error("non-finite force at node {} from cell {}", n, c);
    }
    throw NumericalError("non-finite nodal force at node " + std::to_string(n));
  }
  apply_boundary_conditions(state, state.node_v);
}

template <int dim>
double cfl_time_step(const std::vector<Particle<dim>>& particles, const std::vector<MaterialModel>& materials,
                     double dx, double cfl) {
  double c = 0.0;
  for (const MaterialModel& m : materials) c = std::max(c, m.wave_speed(dim));
  double vmax = 0.0;
  for (const Particle<dim>& p : particles) vmax = std::max(vmax, p.v.norm());
  const double denom = c + vmax;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return cfl * dx / denom;
}

// --- bases --------------------------------------------------------------------

template <int dim>
BaseReport build_stretch_bases(GridState<dim>& state, const std::vector<MaterialModel>& materials) {
  std::atomic<std::size_t> fallbacks{0}, clamps{0}, one{0}, three{0};
  parallel_for(state.slots.size(), [&](std::size_t s) {
    CellSlot<dim>& slot = state.slots[s];
    if (slot.material < 0) throw ContractViolation("stretch bases need per-material slots (implicit unload)");
    slot.active = true;
    slot.base.setIdentity();
    slot.J_base = 1.0;
    if (!(slot.volume > 0.0)) {
      slot.base_ref = slot.base;
      return;
    }
    const MaterialModel& m = materials[static_cast<std::size_t>(slot.material)];
    try {
      if (!slot.tau.allFinite()) throw InversionDomainError("non-finite cell stress");
      CardanoBranch branch = CardanoBranch::OneReal;
      bool clamped = false;
      const SpectralStretch<dim> S = invert_stress<dim>(m, slot.tau, &branch, &clamped);
      if (m.is_fluid()) {
        slot.J_base = std::pow(S.sigma[0], dim);
        if (clamped) clamps.fetch_add(1, std::memory_order_relaxed);
      } else if (dim == 3 && m.kind == EnergyKind::SplitNeoHookean) {
        (branch == CardanoBranch::OneReal ? one : three).fetch_add(1, std::memory_order_relaxed);
      }
      slot.base = S.assemble();
    } catch (const InversionDomainError&) {
      slot.base.setIdentity();
      slot.active = false;
      fallbacks.fetch_add(1, std::memory_order_relaxed);
    }
    slot.base_ref = slot.base;
  });
  return {fallbacks.load(), clamps.load(), one.load(), three.load()};
}

// --- incremental potential ----------------------------------------------------

template <int dim>
IncrementalPotential<dim>::IncrementalPotential(const GridState<dim>& state, const std::vector<MaterialModel>& materials,
                                                double dt, const Vec<dim>& gravity, bool deterministic)
    : state_(state), materials_(materials), dt_(dt), gravity_(gravity), deterministic_(deterministic) {}

template <int dim>
Mat<dim> IncrementalPotential<dim>::cell_gradient(const NodeField<dim>& v, std::size_t c) const {
  Mat<dim> G = Mat<dim>::Zero();
  for (int bits = 0; bits < corner_count(dim); ++bits)
    G += v[static_cast<std::size_t>(state_.cell_nodes[c][bits])] * q1_grad_corner<dim>(bits, state_.grid.dx).transpose();
  return G;
}

template <int dim>
double IncrementalPotential<dim>::energy(const NodeField<dim>& v) const {
  const double inertia = reduce_sum<double>(
      state_.node_count(), 0.0,
      [&](std::size_t n) {
        const double m = state_.node_mass[n];
        return 0.5 * m * (v[n] - state_.node_v_old[n]).squaredNorm() - dt_ * m * gravity_.dot(v[n]);
      },
      deterministic_);
  const double elastic = reduce_sum<double>(
      state_.cell_count(), 0.0,
      [&](std::size_t c) {
        const Mat<dim> A = Mat<dim>::Identity() + dt_ * cell_gradient(v, c);
        double e = 0.0;
        for (int s = state_.slot_begin[c]; s < state_.slot_begin[c + 1]; ++s) {
          const CellSlot<dim>& slot = state_.slots[static_cast<std::size_t>(s)];
          if (!slot.active || !(slot.volume > 0.0)) continue;
          e += slot.volume *
               energy_density<dim>(materials_[static_cast<std::size_t>(slot.material)], Mat<dim>(A * slot.base));
        }
        return e;
      },
      deterministic_);
  if (!std::isfinite(elastic)) return std::numeric_limits<double>::infinity();
  return inertia + elastic;
}

template <int dim>
template <class CellMatrix>
void IncrementalPotential<dim>::gather_to_nodes(CellMatrix&& cell_matrix, NodeField<dim>& out) const {
  std::vector<Mat<dim>> M(state_.cell_count());
  parallel_for(state_.cell_count(), [&](std::size_t c) { M[c] = cell_matrix(c); }, 64);
  const double dx = state_.grid.dx;
  parallel_for(state_.node_count(), [&](std::size_t n) {
    Vec<dim> acc = Vec<dim>::Zero();
    for (int bits = 0; bits < corner_count(dim); ++bits) {
      const int c = state_.node_cells[n][bits];
      if (c >= 0) acc += M[static_cast<std::size_t>(c)] * q1_grad_corner<dim>(bits, dx);
    }
    out[n] += acc;
  });
}

template <int dim>
void IncrementalPotential<dim>::gradient(const NodeField<dim>& v, NodeField<dim>& g) const {
  g.resize(state_.node_count());
  parallel_for(state_.node_count(), [&](std::size_t n) {
    const double m = state_.node_mass[n];
    g[n] = m * (v[n] - state_.node_v_old[n]) - dt_ * m * gravity_;
  });
  gather_to_nodes(
      [&](std::size_t c) {
        const Mat<dim> A = Mat<dim>::Identity() + dt_ * cell_gradient(v, c);
        Mat<dim> M = Mat<dim>::Zero();
        for (int s = state_.slot_begin[c]; s < state_.slot_begin[c + 1]; ++s) {
          const CellSlot<dim>& slot = state_.slots[static_cast<std::size_t>(s)];
          if (!slot.active || !(slot.volume > 0.0)) continue;
          const PolarSvd<dim> svd = polar_svd<dim>(Mat<dim>(A * slot.base));
          const PrincipalResponse<dim> r =
              principal_response<dim>(materials_[static_cast<std::size_t>(slot.material)], svd.sigma);
          const Mat<dim> P = svd.U * r.dpsi.asDiagonal() * svd.V.transpose();
          M += (slot.volume * dt_) * P * slot.base.transpose();
        }
        return M;
      },
      g);
}

template <int dim>
void IncrementalPotential<dim>::linearize(const NodeField<dim>& v, bool psd_projection) {
  constexpr auto pairs = principal_pairs<dim>();
  lin_.resize(state_.slots.size());
  parallel_for(state_.cell_count(), [&](std::size_t c) {
    const Mat<dim> A = Mat<dim>::Identity() + dt_ * cell_gradient(v, c);
    for (int s = state_.slot_begin[c]; s < state_.slot_begin[c + 1]; ++s) {
      const CellSlot<dim>& slot = state_.slots[static_cast<std::size_t>(s)];
      SlotLinearization& L = lin_[static_cast<std::size_t>(s)];
      L.U.setIdentity();
      L.V.setIdentity();
      L.H.setZero();
      L.a.fill(0.0);
      L.b.fill(0.0);
      if (!slot.active || !(slot.volume > 0.0)) continue;
      const Mat<dim> F = A * slot.base;
      if (!(F.determinant() > 0.0)) continue;
      const PolarSvd<dim> svd = polar_svd<dim>(F);
      const PrincipalResponse<dim> r =
          principal_response<dim>(materials_[static_cast<std::size_t>(slot.material)], svd.sigma);
      L.U = svd.U;
      L.V = svd.V;
      L.H = r.d2psi;
      if (psd_projection) {
        Eigen::SelfAdjointEigenSolver<Mat<dim>> es(L.H);
        L.H = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
      }
      for (int k = 0; k < PrincipalResponse<dim>::kPairs; ++k) {
        const int i = pairs[k][0], j = pairs[k][1];
        double plus = r.pair_plus[k];
        double minus = (r.dpsi[i] + r.dpsi[j]) / (svd.sigma[i] + svd.sigma[j]);
        if (psd_projection) {
          plus = std::max(plus, 0.0);
          minus = std::max(minus, 0.0);
        }
        L.a[k] = 0.5 * (plus + minus);
        L.b[k] = 0.5 * (plus - minus);
      }
    }
  }, 64);
}

template <int dim>
Mat<dim> IncrementalPotential<dim>::slot_dP(const SlotLinearization& L, const Mat<dim>& dF) const {
  constexpr auto pairs = principal_pairs<dim>();
  const Mat<dim> dFh = L.U.transpose() * dF * L.V;
  Mat<dim> dPh = Mat<dim>::Zero();
  const Vec<dim> diag = L.H * dFh.diagonal();
  for (int i = 0; i < dim; ++i) dPh(i, i) = diag[i];
  for (int k = 0; k < PrincipalResponse<dim>::kPairs; ++k) {
    const int i = pairs[k][0], j = pairs[k][1];
    dPh(i, j) = L.a[k] * dFh(i, j) + L.b[k] * dFh(j, i);
    dPh(j, i) = L.b[k] * dFh(i, j) + L.a[k] * dFh(j, i);
  }
  return L.U * dPh * L.V.transpose();
}

template <int dim>
void IncrementalPotential<dim>::hessian_vector(const NodeField<dim>& dv, NodeField<dim>& out) const {
  out.resize(state_.node_count());
  parallel_for(state_.node_count(), [&](std::size_t n) { out[n] = state_.node_mass[n] * dv[n]; });
  gather_to_nodes(
      [&](std::size_t c) {
        const Mat<dim> dG = cell_gradient(dv, c);
        Mat<dim> M = Mat<dim>::Zero();
        for (int s = state_.slot_begin[c]; s < state_.slot_begin[c + 1]; ++s) {
          const CellSlot<dim>& slot = state_.slots[static_cast<std::size_t>(s)];
          if (!slot.active || !(slot.volume > 0.0)) continue;
          const Mat<dim> dP = slot_dP(lin_[static_cast<std::size_t>(s)], Mat<dim>(dt_ * dG * slot.base));
          M += (slot.volume * dt_) * dP * slot.base.transpose();
        }
        return M;
      },
      out);
}

template <int dim>
void IncrementalPotential<dim>::diagonal(NodeField<dim>& out) const {
  out.resize(state_.node_count());
  const double dx = state_.grid.dx;
  parallel_for(state_.node_count(), [&](std::size_t n) {
    Vec<dim> d = Vec<dim>::Constant(state_.node_mass[n]);
    for (int bits = 0; bits < corner_count(dim); ++bits) {
      const int c = state_.node_cells[n][bits];
      if (c < 0) continue;
      const Vec<dim> grad = q1_grad_corner<dim>(bits, dx);
      for (int s = state_.slot_begin[static_cast<std::size_t>(c)]; s < state_.slot_begin[static_cast<std::size_t>(c) + 1];
           ++s) {
        const CellSlot<dim>& slot = state_.slots[static_cast<std::size_t>(s)];
        if (!slot.active || !(slot.volume > 0.0)) continue;
        const Vec<dim> q = dt_ * slot.base.transpose() * grad;
        for (int a = 0; a < dim; ++a) {
          Mat<dim> dF = Mat<dim>::Zero();
          dF.row(a) = q.transpose();
          const double h = (slot_dP(lin_[static_cast<std::size_t>(s)], dF) * q)[a];
          d[a] += slot.volume * std::max(h, 0.0);
        }
      }
    }
    out[n] = d;
  });
}

template <int dim>
double dot(const NodeField<dim>& a, const NodeField<dim>& b, bool compensated) {
  return reduce_sum<double>(a.size(), 0.0, [&](std::size_t n) { return a[n].dot(b[n]); }, compensated);
}

// --- plasticity ---------------------------------------------------------------

template <int dim>
double fixed_point_plasticity_update(GridState<dim>& state, const std::vector<MaterialModel>& materials,
                                     const NodeField<dim>& v, double dt) {
  std::vector<double> residual(state.cell_count(), 0.0);
  const double dx = state.grid.dx;
  parallel_for(state.cell_count(), [&](std::size_t c) {
    Mat<dim> G = Mat<dim>::Zero();
    for (int bits = 0; bits < corner_count(dim); ++bits)
      G += v[static_cast<std::size_t>(state.cell_nodes[c][bits])] * q1_grad_corner<dim>(bits, dx).transpose();
    const Mat<dim> A = Mat<dim>::Identity() + dt * G;
    double res = 0.0;
    for (int s = state.slot_begin[c]; s < state.slot_begin[c + 1]; ++s) {
      CellSlot<dim>& slot = state.slots[static_cast<std::size_t>(s)];
      if (!slot.active || !(slot.volume > 0.0) || slot.material < 0) continue;
      const MaterialModel& m = materials[static_cast<std::size_t>(slot.material)];
      if (!m.has_plasticity() || m.is_fluid()) continue;
      Mat<dim> next = slot.base_ref;
      const Mat<dim> Ftr = A * slot.base_ref;
      if (Ftr.determinant() > 0.0) {
        PolarSvd<dim> svd = polar_svd<dim>(Ftr);
        if (project_plastic<dim>(m, svd.sigma)) next = A.inverse() * svd.U * svd.sigma.asDiagonal() * svd.V.transpose();
      }
      res = std::max(res, (next - slot.base).norm());
      slot.base = next;
    }
    residual[c] = res;
  });
  double r = 0.0;
  for (double x : residual) r = std::max(r, x);
  return r;
}

// --- Newton -------------------------------------------------------------------

namespace {

template <int dim>
void axpy(double a, const NodeField<dim>& x, NodeField<dim>& y) {
  parallel_for(y.size(), [&](std::size_t n) { y[n] += a * x[n]; });
}

}  // namespace

template <int dim>
NewtonReport implicit_step(GridState<dim>& state, const std::vector<MaterialModel>& materials, double dt,
                           const Vec<dim>& gravity, const SolverConfig& cfg, bool deterministic) {
  NewtonReport rep;
  const std::size_t nn = state.node_count();
  if (nn == 0) {
    rep.converged = true;
    return rep;
  }
  IncrementalPotential<dim> pot(state, materials, dt, gravity, deterministic);
  const bool plastic =
      cfg.fixed_point_plasticity && std::any_of(materials.begin(), materials.end(), [](const MaterialModel& m) {
        return m.has_plasticity() && !m.is_fluid();
      });

  NodeField<dim> v(nn);
  for (std::size_t n = 0; n < nn; ++n) v[n] = state.node_v_old[n] + dt * gravity;
  apply_boundary_conditions(state, v);
  double E = pot.energy(v);
  if (!std::isfinite(E)) {
    v = state.node_v_old;
    apply_boundary_conditions(state, v);
    E = pot.energy(v);
    if (!std::isfinite(E)) throw NumericalError("incremental potential is not finite at the initial guess");
  }

  double scale = 0.0;
  for (std::size_t n = 0; n < nn; ++n)
    scale += state.node_mass[n] * (state.node_v_old[n].norm() + dt * gravity.norm());
  const double abs_floor = cfg.newton_abs_tol * std::max(scale, 1e-300);

  NodeField<dim> g(nn), d(nn), r(nn), z(nn), p(nn), Hp(nn), diag(nn), vt(nn), gt(nn);
  double g0 = 0.0;
  for (int it = 0;; ++it) {
    pot.gradient(v, g);
    project_directions(state, g);
    const double gn = std::sqrt(dot(g, g, deterministic));
    if (it == 0) {
      g0 = gn;
      rep.initial_residual = gn;
    }
    rep.residual = gn;
    if (gn <= cfg.newton_tol * g0 || gn <= abs_floor) {
      rep.converged = true;
      break;
    }
    if (it >= cfg.newton_max_iters) break;

    pot.linearize(v, cfg.psd_projection);
    pot.diagonal(diag);

    // preconditioned CG on H d = -g in the constrained subspace
    const auto precondition = [&](const NodeField<dim>& in, NodeField<dim>& out) {
      parallel_for(nn, [&](std::size_t n) { out[n] = in[n].cwiseQuotient(diag[n]); });
      project_directions(state, out);
    };
    const auto apply_H = [&](const NodeField<dim>& in, NodeField<dim>& out) {
      pot.hessian_vector(in, out);
      project_directions(state, out);
    };
    for (std::size_t n = 0; n < nn; ++n) {
      d[n].setZero();
      r[n] = -g[n];
    }
    const double target = cfg.pcg_tol * gn;
    precondition(r, z);
    p = z;
    double rz = dot(r, z, deterministic);
    bool restarted = false;
    for (int k = 0; k < cfg.pcg_max_iters; ++k) {
      apply_H(p, Hp);
      const double pHp = dot(p, Hp, deterministic);
      ++rep.pcg_iters;
      if (!(pHp > 0.0) || !std::isfinite(pHp)) {
        if (restarted) break;
        restarted = true;
        ++rep.pcg_restarts;
        pot.diagonal(diag);
        apply_H(d, Hp);
        for (std::size_t n = 0; n < nn; ++n) r[n] = -g[n] - Hp[n];
        precondition(r, z);
        p = z;
        rz = dot(r, z, deterministic);
        continue;
      }
      const double alpha = rz / pHp;
      axpy(alpha, p, d);
      axpy(-alpha, Hp, r);
      if (std::sqrt(dot(r, r, deterministic)) <= target) break;
      precondition(r, z);
      const double rz_new = dot(r, z, deterministic);
      const double beta = rz_new / rz;
      rz = rz_new;
      parallel_for(nn, [&](std::size_t n) { p[n] = z[n] + beta * p[n]; });
    }

    double gd = dot(g, d, deterministic);
    if (!(gd < 0.0)) {
      precondition(g, d);
      for (auto& x : d) x = -x;
      gd = dot(g, d, deterministic);
    }

    double step = 1.0;
    bool accepted = false;
    double Et = E;
    for (int ls = 0; ls < (cfg.line_search ? 30 : 1); ++ls) {
      for (std::size_t n = 0; n < nn; ++n) vt[n] = v[n] + step * d[n];
      Et = pot.energy(vt);
      if (!cfg.line_search ? std::isfinite(Et) : (Et <= E + 1e-4 * step * gd)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted && cfg.line_search) {
      // near convergence the Armijo decrease drops below the roundoff of E;
      // take the full step if it lowers the projected gradient instead
      for (std::size_t n = 0; n < nn; ++n) vt[n] = v[n] + d[n];
      Et = pot.energy(vt);
      if (std::isfinite(Et) && std::abs(Et - E) <= 1e-12 * std::abs(E)) {
        pot.gradient(vt, gt);
        project_directions(state, gt);
        if (std::sqrt(dot(gt, gt, deterministic)) < gn) {
          accepted = true;
          step = 1.0;
        }
      }
    }
    if (!accepted) {
      ++rep.line_search_failures;
      spdlog::warn("line search stalled at Newton iteration {} (residual {:.3e})", it, gn);
      break;
    }
    v.swap(vt);
    E = Et;
    rep.energies.push_back(E);
    ++rep.newton_iters;
    if (plastic) {
      rep.fixed_point_residual = fixed_point_plasticity_update(state, materials, v, dt);
      if (rep.fixed_point_residual > 0.0) E = pot.energy(v);
    }
    spdlog::trace("newton {}: |g| {:.3e} step {:.3g} E {:.9e} fixed-point {:.3e}", it, gn, step, E,
                  rep.fixed_point_residual);
  }
  if (!rep.converged) spdlog::debug("Newton stopped at residual {:.3e} (initial {:.3e})", rep.residual, g0);
  apply_boundary_conditions(state, v);
  state.node_v = v;
  return rep;
}

#define MPMLITE_INSTANTIATE(D)                                                                                      \
  template void add_node_constraint<D>(GridState<D>&, std::size_t, BoundaryCondition, const Vec<D>&, const Vec<D>&); \
  template void mark_boundary_nodes<D>(GridState<D>&, const std::vector<Collider<D>>&, const DomainBoundary&,      \
                                       double);                                                                     \
  template void apply_boundary_conditions<D>(const GridState<D>&, NodeField<D>&);                                  \
  template void project_directions<D>(const GridState<D>&, NodeField<D>&);                                         \
  template void explicit_step<D>(GridState<D>&, double, const Vec<D>&);                                            \
  template double cfl_time_step<D>(const std::vector<Particle<D>>&, const std::vector<MaterialModel>&, double,     \
                                   double);                                                                         \
  template BaseReport build_stretch_bases<D>(GridState<D>&, const std::vector<MaterialModel>&);                    \
  template class IncrementalPotential<D>;                                                                           \
  template double dot<D>(const NodeField<D>&, const NodeField<D>&, bool);                                          \
  template double fixed_point_plasticity_update<D>(GridState<D>&, const std::vector<MaterialModel>&,               \
                                                   const NodeField<D>&, double);                                    \
  template NewtonReport implicit_step<D>(GridState<D>&, const std::vector<MaterialModel>&, double, const Vec<D>&,  \
                                         const SolverConfig&, bool);

MPMLITE_INSTANTIATE(2)
MPMLITE_INSTANTIATE(3)
#undef MPMLITE_INSTANTIATE

}  // namespace mpmlite
