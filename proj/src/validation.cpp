#include "mpmlite/validation.hpp"

#include "mpmlite/errors.hpp"
#include "mpmlite/integrator.hpp"
#include "mpmlite/parallel.hpp"
#include "mpmlite/transfer.hpp"

#include <Eigen/Geometry>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace mpmlite {

// --- oracle -----------------------------------------------------------------

template <int dim>
ApicOracleState<dim> apic_b2_p2g(const std::vector<Particle<dim>>& particles, const GridDesc<dim>& grid) {
  ApicOracleState<dim> out;
  out.grid = grid;
  out.index.reset(grid.node_dims(), LatticeStorage::Sparse);
  std::vector<Vec<dim>> momentum;
  // sequential scatter: the oracle favors a fixed summation order over speed
  for (const Particle<dim>& p : particles) {
    for (const KernelEntry<dim>& e : b2_weights_particle_to_nodes<dim>(p.x, grid)) {
      if (e.weight <= 0.0) continue;
      int slot = out.index.find(e.index);
      if (slot < 0) {
        slot = static_cast<int>(out.node_coord.size());
        out.index.insert(e.index, slot);
        out.node_coord.push_back(e.index);
        out.node_mass.push_back(0.0);
        momentum.push_back(Vec<dim>::Zero());
      }
      const auto s = static_cast<std::size_t>(slot);
      const Vec<dim> r = grid.node_position(e.index) - p.x;
      out.node_mass[s] += e.weight * p.mass;
      momentum[s] += e.weight * p.mass * (p.v + p.G * r);
    }
  }
  out.node_v.resize(out.node_coord.size());
  for (std::size_t n = 0; n < out.node_coord.size(); ++n) out.node_v[n] = momentum[n] / out.node_mass[n];
  return out;
}

template <int dim>
std::vector<ApicOracleParticle<dim>> apic_b2_g2p(const NodeVelocityFn<dim>& node_v,
                                                 const std::vector<Particle<dim>>& particles,
                                                 const GridDesc<dim>& grid) {
  std::vector<ApicOracleParticle<dim>> out(particles.size());
  const double floor = 1e-12 * std::pow(grid.dx, 2 * dim);
  parallel_for(particles.size(), [&](std::size_t p) {
    ApicOracleParticle<dim>& o = out[p];
    const Vec<dim>& xp = particles[p].x;
    for (const KernelEntry<dim>& e : b2_weights_particle_to_nodes<dim>(xp, grid)) {
      const Vec<dim> r = grid.node_position(e.index) - xp;
      const Vec<dim> vi = node_v(e.index);
      o.v += e.weight * vi;
      o.M += e.weight * vi * r.transpose();
      o.D += e.weight * r * r.transpose();
    }
    if (!(std::abs(o.D.determinant()) > floor)) throw ContractViolation("apic_b2_g2p: singular D_p");
    o.C = o.M * o.D.inverse();
  });
  return out;
}

template <int dim>
std::vector<ApicOracleParticle<dim>> apic_b2_g2p(const ApicOracleState<dim>& nodes,
                                                 const std::vector<Particle<dim>>& particles) {
  return apic_b2_g2p<dim>(
      [&](const IVec<dim>& i) -> Vec<dim> {
        const int s = nodes.find(i);
        if (s < 0) throw ContractViolation("apic_b2_g2p: stencil node missing from the nodal field");
        return nodes.node_v[static_cast<std::size_t>(s)];
      },
      particles, nodes.grid);
}

// --- reports ----------------------------------------------------------------

bool ConvergenceReport::all_zero() const {
  for (double e : error)
    if (e != 0.0) return false;
  return true;
}

bool ConvergenceReport::all_positive() const {
  for (double e : error)
    if (!(e > 0.0)) return false;
  return !error.empty();
}

double fit_loglog_slope(const std::vector<double>& h, const std::vector<double>& error) {
  if (h.size() != error.size() || h.size() < 2) throw ContractViolation("fit_loglog_slope: need >= 2 pairs");
  const double n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (!(h[k] > 0.0) || !(error[k] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = std::log(h[k]), y = std::log(error[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void finalize_report(ConvergenceReport& r) {
  r.slope = fit_loglog_slope(r.h, r.error);
  r.pair_slopes.clear();
  r.pair_ratios.clear();
  for (std::size_t k = 0; k + 1 < r.h.size(); ++k) {
    const double ratio = r.error[k] / r.error[k + 1];
    r.pair_ratios.push_back(ratio);
    r.pair_slopes.push_back(std::log(ratio) / std::log(r.h[k] / r.h[k + 1]));
  }
}

void write_study_table(const std::filesystem::path& path, const ConvergenceReport& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write study table " + path.string());
  out.precision(17);
  out << r.variable << ",discrepancy,pair_slope,fitted_slope\n";
  for (std::size_t k = 0; k < r.h.size(); ++k) {
    out << r.h[k] << ',' << r.error[k] << ',';
    if (k > 0 && k - 1 < r.pair_slopes.size()) out << r.pair_slopes[k - 1];
    out << ',' << r.slope << '\n';
  }
}

// --- fields -----------------------------------------------------------------

template <int dim>
VelocityField<dim> trig_field(double k) {
  // phases keep the field generic with respect to the lattice
  static constexpr double phase[3] = {0.3, 1.1, 2.0};
  VelocityField<dim> f;
  f.value = [k](const Vec<dim>& x) {
    Vec<dim> v;
    for (int a = 0; a < dim; ++a) {
      const int b = (a + 1) % dim;
      v[a] = std::sin(k * x[a] + phase[a]) * std::cos(k * x[b] + phase[b]) / k;
    }
    return v;
  };
  f.gradient = [k](const Vec<dim>& x) {
    Mat<dim> G = Mat<dim>::Zero();
    for (int a = 0; a < dim; ++a) {
      const int b = (a + 1) % dim;
      const double sa = std::sin(k * x[a] + phase[a]), ca = std::cos(k * x[a] + phase[a]);
      const double sb = std::sin(k * x[b] + phase[b]), cb = std::cos(k * x[b] + phase[b]);
      G(a, a) += ca * cb;
      G(a, b) += -sa * sb;
    }
    return G;
  };
  return f;
}

template <int dim>
VelocityField<dim> affine_field(const Mat<dim>& A, const Vec<dim>& b) {
  VelocityField<dim> f;
  f.value = [A, b](const Vec<dim>& x) -> Vec<dim> { return A * x + b; };
  f.gradient = [A](const Vec<dim>&) -> Mat<dim> { return A; };
  return f;
}

// --- transfer order ---------------------------------------------------------

namespace {

template <int dim>
bool inside(const Vec<dim>& x, const Vec<dim>& lo, const Vec<dim>& hi) {
  for (int a = 0; a < dim; ++a)
    if (x[a] < lo[a] || x[a] > hi[a]) return false;
  return true;
}

// sum_c w_cp w_ic over the centers c that have node i as a corner
template <int dim>
double two_hop_weight(const std::array<KernelEntry<dim>, corner_count(dim)>& centers, const IVec<dim>& node) {
  double w = 0.0;
  for (const KernelEntry<dim>& c : centers) {
    const IVec<dim> off = node - c.index;
    bool corner = true;
    for (int a = 0; a < dim; ++a) corner = corner && (off[a] == 0 || off[a] == 1);
    if (corner) w += c.weight * q1_weight_center_to_node(dim);
  }
  return w;
}

}  // namespace

template <int dim>
TransferOrderResult transfer_order_study(const VelocityField<dim>& field, const TransferOrderOptions& opt) {
  if (opt.levels < 2) throw ContractViolation("transfer_order_study: need >= 2 levels");
  TransferOrderResult res;
  res.p2g_v.id = "transfer_p2g_v";
  res.g2p_v.id = "transfer_g2p_v";
  res.g2p_G.id = "transfer_g2p_G";

  const MaterialModel mat = MaterialModel::stvk_hencky(1e3, 0.3, 1e3);
  const std::vector<MaterialModel> mats{mat};
  const Vec<dim> patch_lo = Vec<dim>::Constant(0.3);
  const Vec<dim> patch_hi = patch_lo + Vec<dim>::Constant(opt.patch_cells * opt.dx0);
  const double bound_scale = std::pow(1.5, dim);

  for (int level = 0; level < opt.levels; ++level) {
    const double dx = opt.dx0 / std::pow(2.0, level);
    const int n_patch = opt.patch_cells << level;
    const int pad = opt.margin_cells + 3;

    GridDesc<dim> grid;
    grid.dx = dx;
    grid.origin = patch_lo - Vec<dim>::Constant(pad * dx);
    grid.dims = IVec<dim>::Constant(n_patch + 2 * pad);

    Shape<dim> box;
    box.kind = ShapeKind::Box;
    box.lo = patch_lo - Vec<dim>::Constant(opt.margin_cells * dx);
    box.hi = patch_hi + Vec<dim>::Constant(opt.margin_cells * dx);
    box.ppc = opt.ppc;
    box.jitter = 1.0;
    std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(level));
    std::vector<Particle<dim>> particles = seed_particles<dim>(box, mat, grid, rng);
    for (Particle<dim>& p : particles) {
      p.v = field.value(p.x);
      p.G = field.gradient(p.x);
    }
    res.particles_per_level.push_back(particles.size());

    // P2G
    GridState<dim> state(grid, LatticeStorage::Sparse);
    UnloadOptions uo;
    uo.mode = TransferMode::Explicit;
    uo.affine = true;
    uo.deterministic = true;
    unload<dim>(particles, mats, state, uo);
    const ApicOracleState<dim> oracle = apic_b2_p2g<dim>(particles, grid);
    double e_p2g = 0.0;
    for (std::size_t n = 0; n < oracle.node_coord.size(); ++n) {
      const IVec<dim>& i = oracle.node_coord[n];
      if (!inside<dim>(grid.node_position(i), patch_lo, patch_hi)) continue;
      const int s = state.node_index.find(i);
      if (s < 0) throw ContractViolation("transfer_order_study: patch node missing from the two-hop grid");
      e_p2g = std::max(e_p2g, (state.node_v[static_cast<std::size_t>(s)] - oracle.node_v[n]).norm());
    }

    // G2P with the analytic field sampled at nodes
    for (std::size_t n = 0; n < state.node_count(); ++n)
      state.node_v[n] = field.value(grid.node_position(state.node_coord[n]));
    std::vector<Particle<dim>> loaded = particles;
    load<dim>(state, loaded, mats, 0.0);
    const auto ref = apic_b2_g2p<dim>([&](const IVec<dim>& i) { return field.value(grid.node_position(i)); },
                                      particles, grid);
    double e_v = 0.0, e_G = 0.0;
    for (std::size_t p = 0; p < particles.size(); ++p) {
      if (!inside<dim>(particles[p].x, patch_lo, patch_hi)) continue;
      e_v = std::max(e_v, (loaded[p].v - ref[p].v).norm());
      e_G = std::max(e_G, (loaded[p].G - ref[p].C).norm());

      const auto centers = q1_weights_particle_to_centers<dim>(particles[p].x, grid);
      for (const KernelEntry<dim>& b : b2_weights_particle_to_nodes<dim>(particles[p].x, grid)) {
        const double two_hop = two_hop_weight<dim>(centers, b.index);
        ++res.weight_checks;
        if (b.weight > bound_scale * two_hop * (1.0 + 1e-12) + 1e-15) ++res.weight_violations;
      }
    }

    for (ConvergenceReport* r : {&res.p2g_v, &res.g2p_v, &res.g2p_G}) r->h.push_back(dx);
    res.p2g_v.error.push_back(e_p2g);
    res.g2p_v.error.push_back(e_v);
    res.g2p_G.error.push_back(e_G);
  }
  for (ConvergenceReport* r : {&res.p2g_v, &res.g2p_v, &res.g2p_G}) finalize_report(*r);
  return res;
}

// --- rotation gap -----------------------------------------------------------

RotationGapResult rotation_gap_study(const RotationGapOptions& opt) {
  constexpr int dim = 3;
  RotationGapResult res;
  res.keep.id = "rotation_gap";
  res.keep.variable = "dt";
  res.keep_right.id = "rotation_gap_right";
  res.keep_right.variable = "dt";

  const MaterialModel mat = MaterialModel::stvk_hencky(opt.youngs, opt.poisson, opt.density);
  const std::vector<MaterialModel> mats{mat};

  GridDesc<dim> grid;
  grid.dx = opt.dx;
  grid.dims = IVec<dim>::Constant(opt.block_cells + 8);
  Shape<dim> box;
  box.lo = Vec<dim>::Constant(4 * opt.dx);
  box.hi = Vec<dim>::Constant((4 + opt.block_cells) * opt.dx);
  box.ppc = opt.ppc;
  std::mt19937_64 rng(opt.seed);
  std::vector<Particle<dim>> particles = seed_particles<dim>(box, mat, grid, rng);

  const Mat<dim> R =
      Eigen::AngleAxisd(opt.angle_deg * std::numbers::pi / 180.0, opt.axis.normalized()).toRotationMatrix();
  const Mat<dim> S_phys = opt.stretch.asDiagonal();
  const Mat<dim> F = R * S_phys;
  Mat<dim> G = Mat<dim>::Zero();
  G(0, 1) = -opt.spin + opt.shear;
  G(1, 0) = opt.spin;
  const Vec<dim> center = 0.5 * (box.lo + box.hi);
  for (Particle<dim>& p : particles) {
    p.F = F;
    p.v = G * (p.x - center);
    p.G = G;
  }

  GridState<dim> base(grid, LatticeStorage::Sparse);
  UnloadOptions uo;
  uo.mode = TransferMode::Implicit;
  uo.deterministic = true;
  unload<dim>(particles, mats, base, uo);
  mark_boundary_nodes<dim>(base, {}, DomainBoundary{}, 0.0);
  build_stretch_bases<dim>(base, mats);

  SolverConfig solver;
  solver.newton_max_iters = 100;
  solver.newton_tol = 1e-10;
  solver.pcg_max_iters = 5000;
  solver.pcg_tol = 1e-10;
  const Vec<dim> gravity = Vec<dim>::Zero();

  for (double dt : opt.dts) {
    GridState<dim> drop = base;
    const NewtonReport nd = implicit_step<dim>(drop, mats, dt, gravity, solver, true);
    res.newton_iters.push_back(nd.newton_iters);
    res.converged = res.converged && nd.converged;

    GridState<dim> keep = base;
    GridState<dim> keep_right = base;
    for (std::size_t k = 0; k < base.slots.size(); ++k) {
      keep.slots[k].base = keep.slots[k].base_ref = R * base.slots[k].base;
      keep_right.slots[k].base = keep_right.slots[k].base_ref = base.slots[k].base * R;
    }
    const NewtonReport nk = implicit_step<dim>(keep, mats, dt, gravity, solver, true);
    const NewtonReport nr = implicit_step<dim>(keep_right, mats, dt, gravity, solver, true);
    res.converged = res.converged && nk.converged && nr.converged;

    double gap = 0.0, gap_right = 0.0;
    for (std::size_t n = 0; n < base.node_count(); ++n) {
      gap = std::max(gap, (keep.node_v[n] - drop.node_v[n]).norm());
      gap_right = std::max(gap_right, (keep_right.node_v[n] - drop.node_v[n]).norm());
    }
    res.keep.h.push_back(dt);
    res.keep.error.push_back(gap);
    res.keep_right.h.push_back(dt);
    res.keep_right.error.push_back(gap_right);
  }
  finalize_report(res.keep);
  finalize_report(res.keep_right);
  return res;
}

// --- momentum ---------------------------------------------------------------

SceneConfig<3> two_cube_scene(double dx, int ppc, double v0, double dt) {
  SceneConfig<3> cfg;
  cfg.grid.dx = dx;
  cfg.grid.dims = IVec<3>(static_cast<int>(std::lround(0.6 / dx)), static_cast<int>(std::lround(0.2 / dx)),
                          static_cast<int>(std::lround(0.2 / dx)));
  cfg.dt_step = dt;
  cfg.dt_frame = dt;
  cfg.deterministic = true;
  cfg.materials.push_back(MaterialModel::stvk_hencky(5e3, 0.3, 1e3));
  for (int side = 0; side < 2; ++side) {
    Shape<3> s;
    const double x0 = side == 0 ? 0.18 : 0.32;
    s.lo = Vec<3>(x0, 0.05, 0.05);
    s.hi = Vec<3>(x0 + 0.1, 0.15, 0.15);
    s.ppc = ppc;
    s.velocity = Vec<3>(side == 0 ? v0 : -v0, 0.0, 0.0);
    cfg.shapes.push_back(s);
  }
  return cfg;
}

SceneConfig<3> rotating_rod_scene(double dx, int ppc, double omega, double dt) {
  SceneConfig<3> cfg;
  cfg.grid.dx = dx;
  cfg.grid.dims = IVec<3>(static_cast<int>(std::lround(0.2 / dx)), static_cast<int>(std::lround(0.2 / dx)),
                          static_cast<int>(std::lround(0.5 / dx)));
  cfg.dt_step = dt;
  cfg.dt_frame = dt;
  cfg.deterministic = true;
  cfg.materials.push_back(MaterialModel::stvk_hencky(5e3, 0.3, 1e3));
  Shape<3> rod;
  rod.kind = ShapeKind::Cylinder;
  rod.center = Vec<3>(0.1, 0.1, 0.25);
  rod.radius = 0.05;
  rod.axis = 2;
  rod.half_length = 0.2;
  rod.ppc = ppc;
  rod.angular_velocity = Eigen::Vector3d(0.0, 0.0, omega);
  cfg.shapes.push_back(rod);
  return cfg;
}

MomentumStudyResult momentum_study(const SceneConfig<3>& cfg, long steps, double v0, bool zero_net_momentum) {
  const auto t0 = std::chrono::steady_clock::now();
  Simulation<3> sim(cfg);
  MomentumStudyResult res;
  double mass = 0.0;
  for (const Particle<3>& p : sim.particles()) mass += p.mass;
  if (zero_net_momentum) {
    // jittered seeding moves the center of mass off the spin center
    const Vec<3> drift = particle_momentum<3>(sim.particles(), true) / mass;
    for (Particle<3>& p : sim.particles()) p.v -= drift;
  }
  res.linear_scale = mass * std::abs(v0);
  const Eigen::Vector3d L0 = particle_angular_momentum<3>(sim.particles(), cfg.grid, true);
  res.initial_Lz = L0.z();
  for (long s = 0; s < steps; ++s) {
    const StepStats st = sim.step(cfg.dt_step);
    res.max_linear = std::max(res.max_linear, st.momentum.norm());
    const Eigen::Vector3d& L = st.angular_momentum;
    if (!L.allFinite()) {
      res.max_Lz_drift = res.max_transverse = std::numeric_limits<double>::infinity();
    } else {
      if (L0.z() != 0.0) res.max_Lz_drift = std::max(res.max_Lz_drift, std::abs(L.z() - L0.z()) / std::abs(L0.z()));
      res.max_transverse = std::max(res.max_transverse, std::hypot(L.x(), L.y()));
    }
    res.stats.push_back(st);
  }
  res.steps = steps;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

#define MPMLITE_INSTANTIATE(D)                                                                                     \
  template ApicOracleState<D> apic_b2_p2g<D>(const std::vector<Particle<D>>&, const GridDesc<D>&);                 \
  template std::vector<ApicOracleParticle<D>> apic_b2_g2p<D>(const NodeVelocityFn<D>&,                             \
                                                             const std::vector<Particle<D>>&, const GridDesc<D>&); \
  template std::vector<ApicOracleParticle<D>> apic_b2_g2p<D>(const ApicOracleState<D>&,                            \
                                                             const std::vector<Particle<D>>&);                     \
  template VelocityField<D> trig_field<D>(double);                                                                 \
  template VelocityField<D> affine_field<D>(const Mat<D>&, const Vec<D>&);                                         \
  template TransferOrderResult transfer_order_study<D>(const VelocityField<D>&, const TransferOrderOptions&);

MPMLITE_INSTANTIATE(2)
MPMLITE_INSTANTIATE(3)

}  // namespace mpmlite
