#include "scene_helpers.hpp"

#include "mpmlite/validation.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace mpmlite;
using namespace testutil;

namespace {

template <int dim>
std::vector<Particle<dim>> oracle_particles(std::mt19937_64& rng, int n) {
  const std::vector<MaterialModel> mats{MaterialModel::stvk_hencky(1e4, 0.3, 1000)};
  return random_particles<dim>(rng, n, 0.3, 0.7, mats, 0.0);
}

template <int dim>
void check_affine_reproduction() {
  std::mt19937_64 rng(61);
  const auto grid = unit_grid<dim>(0.05, 20);
  auto ps = oracle_particles<dim>(rng, 300);
  const Mat<dim> A = random_mat<dim>(rng, 2.0);
  const Vec<dim> b = random_vec<dim>(rng, -1, 1);
  for (auto& p : ps) {
    p.v = A * p.x + b;
    p.G = A;
  }
  const auto st = apic_b2_p2g<dim>(ps, grid);
  for (std::size_t n = 0; n < st.node_coord.size(); ++n)
    CHECK((st.node_v[n] - (A * grid.node_position(st.node_coord[n]) + b)).norm() <= 1e-13);
  const auto back = apic_b2_g2p<dim>(st, ps);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    CHECK((back[p].v - ps[p].v).norm() <= 1e-13);
    CHECK((back[p].C - A).norm() <= 1e-11 * A.norm());
  }
}

template <int dim>
void check_oracle_momentum() {
  std::mt19937_64 rng(62);
  const auto grid = unit_grid<dim>(0.05, 20);
  const auto ps = oracle_particles<dim>(rng, 500);
  const auto st = apic_b2_p2g<dim>(ps, grid);
  Vec<dim> pp = Vec<dim>::Zero(), pn = Vec<dim>::Zero();
  for (const auto& p : ps) pp += p.mass * p.v;
  for (std::size_t n = 0; n < st.node_coord.size(); ++n) pn += st.node_mass[n] * st.node_v[n];
  CHECK((pn - pp).norm() <= 1e-13 * pp.norm());
}

template <int dim>
void check_oracle_g2p_fields() {
  std::mt19937_64 rng(63);
  const auto grid = unit_grid<dim>(0.05, 20);
  const auto ps = oracle_particles<dim>(rng, 200);
  const Vec<dim> c = random_vec<dim>(rng, -1, 1);
  const Mat<dim> A = random_mat<dim>(rng, 1.0);
  const auto constant = apic_b2_g2p<dim>([&](const IVec<dim>&) { return c; }, ps, grid);
  const auto linear =
      apic_b2_g2p<dim>([&](const IVec<dim>& i) -> Vec<dim> { return A * grid.node_position(i); }, ps, grid);
  const Mat<dim> D = 0.25 * grid.dx * grid.dx * Mat<dim>::Identity();
  for (std::size_t p = 0; p < ps.size(); ++p) {
    CHECK((constant[p].v - c).norm() <= 1e-14);
    CHECK(constant[p].C.norm() <= 1e-12);
    CHECK((linear[p].C - A).norm() <= 1e-12);
    CHECK((constant[p].D - D).norm() <= 1e-14 * D.norm());
  }
}

}  // namespace

TEST_CASE("B2 oracle reproduces affine fields") {
  check_affine_reproduction<2>();
  check_affine_reproduction<3>();
}

TEST_CASE("B2 oracle conserves momentum") {
  check_oracle_momentum<2>();
  check_oracle_momentum<3>();
}

TEST_CASE("B2 oracle gather of constant and linear fields") {
  check_oracle_g2p_fields<2>();
  check_oracle_g2p_fields<3>();
}

TEST_CASE("B2 oracle with one particle on a node") {
  const auto grid = unit_grid<3>(0.1, 8);
  Particle<3> p;
  p.mass = 1.0;
  p.x = grid.node_position(IVec<3>(4, 4, 4));
  p.v = Vec<3>(0.1, 0.2, 0.3);
  const auto st = apic_b2_p2g<3>({p}, grid);
  const int n = st.find(IVec<3>(4, 4, 4));
  REQUIRE(n >= 0);
  CHECK(st.node_v[static_cast<std::size_t>(n)] == p.v);
  CHECK(st.node_mass[static_cast<std::size_t>(n)] == doctest::Approx(0.75 * 0.75 * 0.75));
}

TEST_CASE("log-log slope fit") {
  const std::vector<double> h{0.1, 0.05, 0.025, 0.0125};
  std::vector<double> e;
  for (double x : h) e.push_back(3.0 * x * x);
  CHECK(fit_loglog_slope(h, e) == doctest::Approx(2.0).epsilon(1e-12));
  ConvergenceReport r;
  r.h = h;
  r.error = e;
  finalize_report(r);
  REQUIRE(r.pair_ratios.size() == 3);
  CHECK(r.pair_ratios[0] == doctest::Approx(4.0));
  CHECK(r.pair_slopes[2] == doctest::Approx(2.0));
  CHECK(r.all_positive());
  CHECK_FALSE(r.all_zero());
  r.error.assign(4, 0.0);
  finalize_report(r);
  CHECK(std::isnan(r.slope));
  CHECK(r.all_zero());

  const auto dir = std::filesystem::temp_directory_path() / "mpmlite_unit_table";
  std::filesystem::create_directories(dir);
  r.error = e;
  r.id = "demo";
  finalize_report(r);
  write_study_table(dir / "demo.csv", r);
  std::ifstream in(dir / "demo.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "dx,discrepancy,pair_slope,fitted_slope");
}

TEST_CASE("transfer-order study on an affine field stays at roundoff") {
  Mat<2> A;
  A << 0.3, -1.2, 0.7, 0.1;
  TransferOrderOptions opt;
  opt.levels = 3;
  const TransferOrderResult r = transfer_order_study<2>(affine_field<2>(A, Vec<2>(0.2, -0.4)), opt);
  for (double e : r.p2g_v.error) CHECK(e <= 1e-12);
  for (double e : r.g2p_v.error) CHECK(e <= 1e-12);
  for (double e : r.g2p_G.error) CHECK(e <= 1e-10);
  CHECK(r.weight_checks > 0);
  CHECK(r.weight_violations == 0);
}

TEST_CASE("two-hop transfers converge to the B2 oracle for velocities") {
  TransferOrderOptions opt;
  opt.levels = 4;
  const TransferOrderResult r = transfer_order_study<2>(trig_field<2>(2.0), opt);
  CHECK(r.p2g_v.slope >= 1.8);
  CHECK(r.p2g_v.slope <= 2.2);
  CHECK(r.g2p_v.slope >= 1.8);
  CHECK(r.g2p_v.slope <= 2.2);
  // the G2P gradient discrepancy is only first order: the B2 stencil has a
  // nonzero third central moment away from nodes
  CHECK(r.g2p_G.slope == doctest::Approx(1.0).epsilon(0.15));
  CHECK(r.weight_violations == 0);
}

TEST_CASE("rotation gap without prior rotation is exactly zero") {
  RotationGapOptions opt;
  opt.angle_deg = 0.0;
  opt.dts = {4e-3, 2e-3};
  opt.block_cells = 3;
  const RotationGapResult r = rotation_gap_study(opt);
  CHECK(r.converged);
  CHECK(r.keep.all_zero());
  CHECK(r.keep_right.all_zero());
}
