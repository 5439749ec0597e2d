#include "scene_helpers.hpp"

#include "mpmlite/constitutive.hpp"
#include "mpmlite/integrator.hpp"
#include "mpmlite/transfer.hpp"
#include "mpmlite/validation.hpp"

#include <doctest.h>

using namespace mpmlite;
using namespace testutil;

namespace {

template <int dim>
GridState<dim> implicit_state(const std::vector<Particle<dim>>& ps, const std::vector<MaterialModel>& mats,
                              const GridDesc<dim>& grid) {
  GridState<dim> st(grid, LatticeStorage::Sparse);
  UnloadOptions opt;
  opt.mode = TransferMode::Implicit;
  opt.deterministic = true;
  unload<dim>(ps, mats, st, opt);
  mark_boundary_nodes<dim>(st, {}, DomainBoundary{}, 0.0);
  build_stretch_bases<dim>(st, mats);
  return st;
}

template <int dim>
NodeField<dim> perturbed(const NodeField<dim>& v, std::mt19937_64& rng, double scale) {
  NodeField<dim> out = v;
  for (auto& x : out) x += random_vec<dim>(rng, -scale, scale);
  return out;
}

template <int dim>
double field_norm(const NodeField<dim>& a) {
  double s = 0;
  for (const auto& x : a) s += x.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("slip and sticky projections") {
  GridDesc<3> grid = unit_grid<3>(1.0, 6);
  GridState<3> st(grid, LatticeStorage::Sparse);
  st.node_coord = {IVec<3>(2, 2, 2), IVec<3>(3, 2, 2)};
  st.node_constraint.assign(2, -1);
  add_node_constraint<3>(st, 0, BoundaryCondition::Slip, Vec<3>(0, 1, 0), Vec<3>::Zero());
  add_node_constraint<3>(st, 1, BoundaryCondition::Sticky, Vec<3>(0, 1, 0), Vec<3>::Zero());
  NodeField<3> v{Vec<3>(1, -2, 0), Vec<3>(0.3, -4, 1)};
  apply_boundary_conditions<3>(st, v);
  CHECK((v[0] - Vec<3>(1, 0, 0)).norm() == 0.0);
  CHECK(v[1].norm() == 0.0);

  SUBCASE("projection is idempotent") {
    add_node_constraint<3>(st, 0, BoundaryCondition::Slip, Vec<3>(1, 1, 0).normalized(), Vec<3>::Zero());
    std::mt19937_64 rng(41);
    for (int k = 0; k < 100; ++k) {
      NodeField<3> w{random_vec<3>(rng, -3, 3), random_vec<3>(rng, -3, 3)};
      apply_boundary_conditions<3>(st, w);
      NodeField<3> w2 = w;
      apply_boundary_conditions<3>(st, w2);
      CHECK((w2[0] - w[0]).norm() <= 1e-15);
      CHECK((w2[1] - w[1]).norm() == 0.0);
    }
  }
  SUBCASE("moving slip collider keeps its normal velocity") {
    GridState<3> s2(grid, LatticeStorage::Sparse);
    s2.node_coord = {IVec<3>(2, 2, 2)};
    s2.node_constraint.assign(1, -1);
    add_node_constraint<3>(s2, 0, BoundaryCondition::Slip, Vec<3>(0, 0, 1), Vec<3>(0.1, 0.2, 0.5));
    NodeField<3> w{Vec<3>(1, 1, -3)};
    apply_boundary_conditions<3>(s2, w);
    CHECK((w[0] - Vec<3>(1, 1, 0.5)).norm() <= 1e-15);
  }
}

TEST_CASE("sticky floor collider stops a falling node") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  const auto grid = unit_grid<2>(0.1, 10);
  Particle<2> p;
  p.mass = p.volume = 1.0;
  p.x = Vec<2>(0.52, 0.26);
  p.v = Vec<2>(0.0, -1.0);
  GridState<2> st(grid, LatticeStorage::Sparse);
  unload<2>({p}, mats, st, UnloadOptions{});
  Collider<2> floor;
  floor.point = Vec<2>(0, 0.25);
  floor.normal = Vec<2>(0, 1);
  floor.validate();
  mark_boundary_nodes<2>(st, {floor}, DomainBoundary{}, 0.0);
  explicit_step<2>(st, 1e-3, Vec<2>(0, -9.81));
  for (std::size_t n = 0; n < st.node_count(); ++n) {
    if (grid.node_position(st.node_coord[n]).y() <= 0.25)
      CHECK(st.node_v[n].norm() == 0.0);
    else
      CHECK(st.node_v[n].y() < -1.0);
  }
}

TEST_CASE("explicit forces on a single 2D cell") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  const auto grid = unit_grid<2>(1.0, 6);
  Particle<2> p;
  p.mass = p.volume = 1.0;
  p.x = grid.cell_center(IVec<2>(2, 2));
  GridState<2> st(grid, LatticeStorage::Sparse);
  unload<2>({p}, {Mat<2>::Identity()}, mats, st, UnloadOptions{});
  REQUIRE(st.cell_count() == 1);
  CHECK(st.slots[0].volume == 1.0);
  explicit_step<2>(st, 1e-3, Vec<2>::Zero());
  Vec<2> sum = Vec<2>::Zero();
  const Vec<2> xc = grid.cell_center(IVec<2>(2, 2));
  for (std::size_t n = 0; n < 4; ++n) {
    const Vec<2> xi = grid.node_position(st.node_coord[n]);
    CHECK((st.node_force[n] + (xi - xc)).norm() <= 1e-15);
    sum += st.node_force[n];
  }
  CHECK(sum.norm() <= 1e-15);
}

TEST_CASE("explicit step without stress is free fall") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  const auto grid = unit_grid<3>(0.05, 20);
  std::mt19937_64 rng(42);
  auto ps = random_particles<3>(rng, 300, 0.3, 0.7, mats, 0.0);
  GridState<3> st(grid, LatticeStorage::Sparse);
  unload<3>(ps, mats, st, UnloadOptions{});
  const NodeField<3> before = st.node_v;
  const Vec<3> g(0, 0, -9.81);
  explicit_step<3>(st, 2e-3, g);
  for (std::size_t n = 0; n < st.node_count(); ++n) CHECK((st.node_v[n] - before[n] - 2e-3 * g).norm() <= 1e-14);
}

TEST_CASE("explicit step conserves momentum without gravity or boundaries") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000),
                                        MaterialModel::split_neo_hookean(3e4, 0.4, 500, 3)};
  const auto grid = unit_grid<3>(0.05, 20);
  std::mt19937_64 rng(43);
  auto ps = random_particles<3>(rng, 600, 0.25, 0.75, mats, 0.2);
  GridState<3> st(grid, LatticeStorage::Sparse);
  UnloadOptions opt;
  opt.deterministic = true;
  unload<3>(ps, mats, st, opt);
  const Vec<3> p0 = node_momentum<3>(st);
  explicit_step<3>(st, 1e-4, Vec<3>::Zero());
  Vec<3> fsum = Vec<3>::Zero();
  double fnorm = 0;
  for (const auto& f : st.node_force) {
    fsum += f;
    fnorm = std::max(fnorm, f.norm());
  }
  CHECK(fsum.norm() <= 1e-12 * fnorm);
  CHECK((node_momentum<3>(st) - p0).norm() <= 1e-12 * p0.norm());
}

TEST_CASE("stretch bases reproduce cell stresses") {
  const auto grid = unit_grid<3>(0.05, 16);
  SUBCASE("rest state") {
    const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
    std::mt19937_64 rng(44);
    auto ps = random_particles<3>(rng, 200, 0.3, 0.5, mats, 0.0);
    const auto st = implicit_state<3>(ps, mats, grid);
    for (const auto& s : st.slots) CHECK((s.base - Mat<3>::Identity()).norm() <= 1e-15);
  }
  SUBCASE("uniform stretch") {
    const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
    std::mt19937_64 rng(45);
    auto ps = random_particles<3>(rng, 300, 0.3, 0.5, mats, 0.0);
    const Mat<3> F = Vec<3>(2, 1, 1).asDiagonal();
    for (auto& p : ps) p.F = F;
    const auto st = implicit_state<3>(ps, mats, grid);
    const Mat<3> tau = kirchhoff_stress<3>(mats[0], F);
    for (const auto& s : st.slots) {
      CHECK((kirchhoff_stress<3>(mats[0], s.base) - s.tau).norm() <= 1e-10 * tau.norm());
      CHECK((s.base - F).norm() <= 1e-10);
    }
  }
  SUBCASE("two materials in one cell reconstruct independently") {
    const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000),
                                          MaterialModel::split_neo_hookean(2e4, 0.2, 700, 3)};
    std::vector<Particle<3>> ps(2);
    ps[0].x = ps[1].x = grid.cell_center(IVec<3>(6, 6, 6));
    ps[1].material = 1;
    for (auto& p : ps) p.mass = p.volume = 1.0;
    ps[0].F = Vec<3>(1.2, 1.0, 0.9).asDiagonal();
    ps[1].F = Vec<3>(0.8, 1.1, 1.05).asDiagonal();
    const auto st = implicit_state<3>(ps, mats, grid);
    REQUIRE(st.slots.size() == 2);
    CHECK((st.slots[0].base - ps[0].F).norm() <= 1e-12);
    CHECK((st.slots[1].base - ps[1].F).norm() <= 1e-12);
  }
}

TEST_CASE("incremental potential definitions") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  const auto grid = unit_grid<2>(0.1, 10);
  std::mt19937_64 rng(46);
  auto ps = random_particles<2>(rng, 40, 0.35, 0.65, mats, 0.0);
  for (auto& p : ps) {
    p.v = Vec<2>(0.4, -0.3);
    p.G.setZero();
  }
  const auto st = implicit_state<2>(ps, mats, grid);
  const IncrementalPotential<2> pot(st, mats, 1e-3, Vec<2>::Zero());
  CHECK(pot.energy(st.node_v_old) == 0.0);
  NodeField<2> g;
  pot.gradient(st.node_v_old, g);
  CHECK(field_norm<2>(g) <= 1e-14);
  const NodeField<2> zero(st.node_count(), Vec<2>::Zero());
  double inertia = 0.0;
  for (std::size_t n = 0; n < st.node_count(); ++n) inertia += 0.5 * st.node_mass[n] * st.node_v_old[n].squaredNorm();
  CHECK(pot.energy(zero) == doctest::Approx(inertia).epsilon(1e-13));
}

TEST_CASE("incremental potential gradient and Hessian match finite differences") {
  const auto grid = unit_grid<3>(0.1, 8);
  const std::vector<std::vector<MaterialModel>> tables{{MaterialModel::stvk_hencky(1e4, 0.3, 1000)},
                                                      {MaterialModel::split_neo_hookean(1e4, 0.3, 1000, 3)},
                                                      {MaterialModel::water(1e4, 1000)}};
  std::mt19937_64 rng(47);
  for (const auto& mats : tables) {
    // roughly three cells
    auto ps = random_particles<3>(rng, 12, 0.36, 0.54, mats, 0.15);
    auto st = implicit_state<3>(ps, mats, grid);
    IncrementalPotential<3> pot(st, mats, 5e-3, Vec<3>(0, 0, -9.81));
    const NodeField<3> v = perturbed<3>(st.node_v_old, rng, 0.5);
    NodeField<3> g;
    pot.gradient(v, g);
    const NodeField<3> dir = perturbed<3>(NodeField<3>(v.size(), Vec<3>::Zero()), rng, 1.0);
    const double h = 1e-6;
    auto shifted = [&](double s) {
      NodeField<3> w = v;
      for (std::size_t n = 0; n < w.size(); ++n) w[n] += s * dir[n];
      return w;
    };
    const double fd = (pot.energy(shifted(h)) - pot.energy(shifted(-h))) / (2 * h);
    double an = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) an += g[n].dot(dir[n]);
    CHECK(std::abs(fd - an) <= 1e-5 * std::max(1e-12, std::abs(an)));

    pot.linearize(v, false);
    NodeField<3> Hd, gp, gm;
    pot.hessian_vector(dir, Hd);
    pot.gradient(shifted(h), gp);
    pot.gradient(shifted(-h), gm);
    NodeField<3> diff(v.size());
    for (std::size_t n = 0; n < v.size(); ++n) diff[n] = (gp[n] - gm[n]) / (2 * h) - Hd[n];
    CHECK(field_norm<3>(diff) <= 1e-4 * field_norm<3>(Hd));
  }
}

TEST_CASE("implicit step without stress or gravity keeps velocities") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  const auto grid = unit_grid<3>(0.05, 16);
  std::mt19937_64 rng(48);
  auto ps = random_particles<3>(rng, 200, 0.3, 0.5, mats, 0.0);
  for (auto& p : ps) p.G.setZero();
  auto st = implicit_state<3>(ps, mats, grid);
  const NodeField<3> v0 = st.node_v;
  SolverConfig cfg;
  // a zero-stress state only stays stress-free if the velocity gradient is zero
  for (std::size_t n = 0; n < st.node_count(); ++n) st.node_v[n] = st.node_v_old[n] = Vec<3>(0.2, -0.1, 0.3);
  const NewtonReport r = implicit_step<3>(st, mats, 1e-3, Vec<3>::Zero(), cfg, true);
  CHECK(r.newton_iters <= 1);
  CHECK(r.converged);
  for (const auto& v : st.node_v) CHECK((v - Vec<3>(0.2, -0.1, 0.3)).norm() <= 1e-14);
  (void)v0;
}

TEST_CASE("line search never increases the incremental potential") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(2e4, 0.3, 1000),
                                        MaterialModel::split_neo_hookean(1e4, 0.4, 800, 2)};
  const auto grid = unit_grid<2>(0.05, 16);
  std::mt19937_64 rng(49);
  SolverConfig cfg;
  cfg.newton_tol = 1e-9;
  for (int scene = 0; scene < 100; ++scene) {
    auto ps = random_particles<2>(rng, 30, 0.3, 0.5, mats, 0.3);
    auto st = implicit_state<2>(ps, mats, grid);
    const NewtonReport r = implicit_step<2>(st, mats, 1e-2, Vec<2>(0, -9.81), cfg, true);
    for (std::size_t k = 1; k < r.energies.size(); ++k)
      CHECK(r.energies[k] <= r.energies[k - 1] + 1e-12 * std::abs(r.energies[k - 1]));
  }
}

TEST_CASE("implicit and explicit steps agree to second order as dt shrinks") {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  const auto grid = unit_grid<3>(0.05, 14);
  std::mt19937_64 rng(50);
  auto ps = random_particles<3>(rng, 300, 0.3, 0.4, mats, 0.15);
  SolverConfig cfg;
  cfg.newton_tol = 1e-12;
  cfg.pcg_tol = 1e-12;
  cfg.pcg_max_iters = 5000;
  ConvergenceReport rep;
  for (double dt : {4e-4, 2e-4, 1e-4, 5e-5}) {
    auto si = implicit_state<3>(ps, mats, grid);
    implicit_step<3>(si, mats, dt, Vec<3>::Zero(), cfg, true);
    GridState<3> se(grid, LatticeStorage::Sparse);
    UnloadOptions opt;
    opt.deterministic = true;
    unload<3>(ps, mats, se, opt);
    explicit_step<3>(se, dt, Vec<3>::Zero());
    double gap = 0;
    for (std::size_t n = 0; n < se.node_count(); ++n) gap = std::max(gap, (se.node_v[n] - si.node_v[n]).norm());
    rep.h.push_back(dt);
    rep.error.push_back(gap);
  }
  finalize_report(rep);
  CHECK(rep.slope >= 1.8);
}

TEST_CASE("fixed-point plasticity") {
  const auto grid = unit_grid<3>(0.1, 8);
  SUBCASE("no yielding leaves the bases alone") {
    MaterialModel m = MaterialModel::stvk_hencky(1e4, 0.3, 1000);
    m.plasticity = PlasticityKind::VonMises;
    m.yield_stress = 1e9;
    const std::vector<MaterialModel> mats{m};
    std::mt19937_64 rng(51);
    auto ps = random_particles<3>(rng, 20, 0.35, 0.5, mats, 0.05);
    auto st = implicit_state<3>(ps, mats, grid);
    const auto before = st.slots;
    CHECK(fixed_point_plasticity_update<3>(st, mats, st.node_v_old, 1e-3) == 0.0);
    for (std::size_t s = 0; s < st.slots.size(); ++s) CHECK(st.slots[s].base == before[s].base);
  }
  SUBCASE("one cell sheared past yield lands on the yield surface") {
    MaterialModel m = MaterialModel::stvk_hencky(1e4, 0.3, 1000);
    m.plasticity = PlasticityKind::VonMises;
    m.yield_stress = 100.0;
    const std::vector<MaterialModel> mats{m};
    Particle<3> p;
    p.mass = 1.0;
    p.volume = 1e-3;
    p.x = grid.cell_center(IVec<3>(4, 4, 4));
    GridState<3> st = implicit_state<3>({p}, mats, grid);
    REQUIRE(st.cell_count() == 1);
    // shear the cell through its node velocities
    for (std::size_t n = 0; n < st.node_count(); ++n) {
      const Vec<3> x = grid.node_position(st.node_coord[n]) - p.x;
      st.node_v[n] = st.node_v_old[n] = Vec<3>(5.0 * x.y(), 0, 0);
    }
    SolverConfig cfg;
    cfg.newton_tol = 1e-12;
    cfg.newton_max_iters = 200;
    implicit_step<3>(st, mats, 0.1, Vec<3>::Zero(), cfg, true);
    const IncrementalPotential<3> pot(st, mats, 0.1, Vec<3>::Zero());
    const Mat<3> F = (Mat<3>::Identity() + 0.1 * pot.cell_gradient(st.node_v, 0)) * st.slots[0].base;
    const PolarSvd<3> svd = polar_svd<3>(F);
    const Vec<3> e = svd.sigma.array().log().matrix();
    CHECK(std::abs(von_mises_yield<3>(e, m.mu, m.yield_stress)) <= 1e-8 * m.yield_stress);
  }
}

TEST_CASE("CFL time step") {
  const std::vector<MaterialModel> mats{MaterialModel::water(4e4, 1000)};
  std::vector<Particle<2>> ps(1);
  ps[0].v = Vec<2>(3, 4);
  CHECK(cfl_time_step<2>(ps, mats, 0.1, 0.5) == doctest::Approx(0.5 * 0.1 / (std::sqrt(40.0) + 5.0)));
}
