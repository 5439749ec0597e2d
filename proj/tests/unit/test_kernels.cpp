#include "helpers.hpp"

#include "mpmlite/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace mpmlite;
using testutil::random_vec;

namespace {

template <int dim>
GridDesc<dim> make_grid(double dx, int cells) {
  GridDesc<dim> g;
  g.dx = dx;
  g.dims = IVec<dim>::Constant(cells);
  return g;
}

// Multilinear hat of node xi evaluated at x.
template <int dim>
double trilinear_hat(const Vec<dim>& x, const Vec<dim>& xi, double dx) {
  double w = 1.0;
  for (int a = 0; a < dim; ++a) w *= std::max(0.0, 1.0 - std::abs(x[a] - xi[a]) / dx);
  return w;
}

template <int dim>
Vec<dim> fd_hat_gradient(const Vec<dim>& x, const Vec<dim>& xi, double dx) {
  const double h = 1e-6 * dx;
  Vec<dim> g;
  for (int a = 0; a < dim; ++a) {
    Vec<dim> e = Vec<dim>::Zero();
    e[a] = h;
    g[a] = (trilinear_hat<dim>(x + e, xi, dx) - trilinear_hat<dim>(x - e, xi, dx)) / (2 * h);
  }
  return g;
}

template <int dim>
void check_q1_moments(int samples) {
  const auto grid = make_grid<dim>(0.1, 8);
  std::mt19937_64 rng(11);
  for (int s = 0; s < samples; ++s) {
    const Vec<dim> x = random_vec<dim>(rng, 0.1, 0.7);
    double sum = 0.0;
    Vec<dim> first = Vec<dim>::Zero();
    for (const auto& e : q1_weights_particle_to_centers<dim>(x, grid)) {
      CHECK(e.weight >= 0.0);
      sum += e.weight;
      first += e.weight * grid.cell_center(e.index);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-13);
    CHECK((first - x).norm() <= 1e-13 * x.norm());
  }
}

template <int dim>
void check_b2_moments(int samples) {
  const auto grid = make_grid<dim>(0.1, 8);
  std::mt19937_64 rng(12);
  for (int s = 0; s < samples; ++s) {
    const Vec<dim> x = random_vec<dim>(rng, 0.15, 0.65);
    double sum = 0.0;
    Vec<dim> first = Vec<dim>::Zero();
    for (const auto& e : b2_weights_particle_to_nodes<dim>(x, grid)) {
      CHECK(e.weight >= 0.0);
      sum += e.weight;
      first += e.weight * (grid.node_position(e.index) - x);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-14);
    CHECK(first.norm() <= 1e-13 * grid.dx);
  }
}

// beta_ip <= 1.5^d sum_c w_cp w_ic for every node of the B2 stencil.
template <int dim>
std::size_t weight_bound_violations(int samples) {
  const auto grid = make_grid<dim>(1.0, 10);
  std::mt19937_64 rng(13);
  std::size_t bad = 0;
  const double wic = q1_weight_center_to_node(dim);
  for (int s = 0; s < samples; ++s) {
    const Vec<dim> x = random_vec<dim>(rng, 2.0, 8.0);
    std::map<std::int64_t, double> two_hop;
    for (const auto& c : q1_weights_particle_to_centers<dim>(x, grid))
      for (int bits = 0; bits < corner_count(dim); ++bits)
        two_hop[grid.node_linear(c.index + corner_offset<dim>(bits))] += c.weight * wic;
    for (const auto& e : b2_weights_particle_to_nodes<dim>(x, grid)) {
      const auto it = two_hop.find(grid.node_linear(e.index));
      const double bound = it == two_hop.end() ? 0.0 : it->second;
      if (e.weight > std::pow(1.5, dim) * bound * (1 + 1e-12) + 1e-15) ++bad;
    }
  }
  return bad;
}

}  // namespace

TEST_CASE("q1 particle-to-center weights") {
  const auto g3 = make_grid<3>(0.25, 8);
  SUBCASE("particle at a cell center owns all weight") {
    const IVec<3> c(3, 4, 2);
    for (const auto& e : q1_weights_particle_to_centers<3>(g3.cell_center(c), g3))
      CHECK(e.weight == ((e.index == c) ? 1.0 : 0.0));
  }
  SUBCASE("midway between two centers along x") {
    const Vec<3> x = 0.5 * (g3.cell_center(IVec<3>(3, 3, 3)) + g3.cell_center(IVec<3>(4, 3, 3)));
    for (const auto& e : q1_weights_particle_to_centers<3>(x, g3)) {
      if (e.index[1] == 3 && e.index[2] == 3)
        CHECK(e.weight == doctest::Approx(0.5));
      else
        CHECK(e.weight == doctest::Approx(0.0));
    }
  }
  SUBCASE("2D common corner of four centers") {
    const auto g2 = make_grid<2>(0.5, 6);
    const Vec<2> x = g2.node_position(IVec<2>(3, 2));
    int n = 0;
    for (const auto& e : q1_weights_particle_to_centers<2>(x, g2)) {
      // oracle: tensor product of two 1D tents, each 0.5
      const Vec<2> xc = g2.cell_center(e.index);
      const double w = trilinear_hat<2>(x, xc, g2.dx);
      CHECK(e.weight == doctest::Approx(w).epsilon(1e-15));
      CHECK(e.weight == doctest::Approx(0.25));
      ++n;
    }
    CHECK(n == 4);
  }
  SUBCASE("outside the interior throws") {
    CHECK_THROWS_AS(q1_weights_particle_to_centers<3>(Vec<3>(0.1, 1.0, 1.0), g3), OutOfDomainError);
    CHECK_THROWS_AS(q1_weights_particle_to_centers<3>(Vec<3>(1.0, 1.0, 1.9), g3), OutOfDomainError);
  }
}

TEST_CASE("q1 moments over random positions") {
  check_q1_moments<2>(10000);
  check_q1_moments<3>(10000);
}

TEST_CASE("q1 center-to-node weight") {
  CHECK(q1_weight_center_to_node(2) == 0.25);
  CHECK(q1_weight_center_to_node(3) == 0.125);
  CHECK(corner_count(3) * q1_weight_center_to_node(3) == 1.0);
  CHECK(corner_count(2) * q1_weight_center_to_node(2) == 1.0);
}

TEST_CASE("q1 center-to-node gradient") {
  SUBCASE("3D unit cell corner") {
    const auto g = make_grid<3>(1.0, 4);
    const Vec<3> xc = g.cell_center(IVec<3>(1, 1, 1));
    const Vec<3> xi = xc + Vec<3>::Constant(0.5);
    const Vec<3> grad = q1_grad_center_to_node<3>(xi, xc, g);
    const Vec<3> fd = fd_hat_gradient<3>(xc, xi, g.dx);
    CHECK((grad - Vec<3>::Constant(0.25)).norm() <= 1e-15);
    CHECK((grad - fd).norm() <= 1e-9);
  }
  SUBCASE("2D half-spacing corner") {
    const auto g = make_grid<2>(0.5, 4);
    const Vec<2> xc = g.cell_center(IVec<2>(1, 2));
    const Vec<2> xi = xc + Vec<2>(0.25, -0.25);
    const Vec<2> grad = q1_grad_center_to_node<2>(xi, xc, g);
    CHECK((grad - Vec<2>(1.0, -1.0)).norm() <= 1e-15);
    CHECK((grad - fd_hat_gradient<2>(xc, xi, g.dx)).norm() <= 1e-8);
  }
  SUBCASE("closed form matches finite differences for every corner") {
    const auto g = make_grid<3>(0.3, 4);
    const Vec<3> xc = g.cell_center(IVec<3>(2, 1, 1));
    Vec<3> sum = Vec<3>::Zero();
    Mat<3> outer = Mat<3>::Zero();
    for (int bits = 0; bits < 8; ++bits) {
      const Vec<3> r = (corner_offset<3>(bits).cast<double>() - Vec<3>::Constant(0.5)) * g.dx;
      const Vec<3> grad = q1_grad_center_to_node<3>(xc + r, xc, g);
      CHECK((grad - q1_grad_corner<3>(bits, g.dx)).norm() <= 1e-12 * grad.norm());
      CHECK((grad - fd_hat_gradient<3>(xc, xc + r, g.dx)).norm() <= 1e-6 * grad.norm());
      sum += grad;
      outer += r * grad.transpose();
    }
    CHECK(sum.norm() <= 1e-14);
    CHECK((outer - Mat<3>::Identity()).norm() <= 1e-14);
  }
  SUBCASE("node that is not a corner") {
    const auto g = make_grid<3>(1.0, 4);
    const Vec<3> xc = g.cell_center(IVec<3>(1, 1, 1));
    CHECK_THROWS_AS(q1_grad_center_to_node<3>(xc + Vec<3>(1.5, 0.5, 0.5), xc, g), ContractViolation);
  }
}

TEST_CASE("b2 weights") {
  SUBCASE("particle at a node") {
    const auto g = make_grid<2>(1.0, 6);
    const Vec<2> x = g.node_position(IVec<2>(3, 3));
    // quadratic B-spline N(u) = 3/4 - u^2 for |u| < 1/2, (3/2 - |u|)^2 / 2 for 1/2 <= |u| < 3/2
    auto N = [](double u) {
      u = std::abs(u);
      if (u < 0.5) return 0.75 - u * u;
      if (u < 1.5) return 0.5 * (1.5 - u) * (1.5 - u);
      return 0.0;
    };
    for (const auto& e : b2_weights_particle_to_nodes<2>(x, g)) {
      const Vec<2> d = g.node_position(e.index) - x;
      CHECK(e.weight == doctest::Approx(N(d[0]) * N(d[1])).epsilon(1e-15));
    }
    const auto w1 = b2_weights_1d(1.0);
    CHECK(w1[0] == 0.125);
    CHECK(w1[1] == 0.75);
    CHECK(w1[2] == 0.125);
  }
  SUBCASE("insufficient clearance throws") {
    const auto g = make_grid<3>(1.0, 6);
    CHECK_THROWS_AS(b2_weights_particle_to_nodes<3>(Vec<3>(1.4, 3, 3), g), OutOfDomainError);
  }
  SUBCASE("moments over random positions") {
    check_b2_moments<2>(10000);
    check_b2_moments<3>(10000);
  }
}

TEST_CASE("b2 weight is bounded by the two-hop weight") {
  CHECK(weight_bound_violations<2>(10000) == 0);
  CHECK(weight_bound_violations<3>(10000) == 0);
}

TEST_CASE("grid lattice addressing") {
  GridDesc<3> g;
  g.dx = 0.5;
  g.origin = Vec<3>(1, 2, 3);
  g.dims = IVec<3>(4, 5, 6);
  CHECK((g.cell_center(IVec<3>(0, 0, 0)) - Vec<3>(1.25, 2.25, 3.25)).norm() == 0.0);
  CHECK((g.node_position(IVec<3>(1, 2, 3)) - Vec<3>(1.5, 3.0, 4.5)).norm() == 0.0);
  CHECK(g.cell_linear(IVec<3>(1, 2, 3)) == (1 * 5 + 2) * 6 + 3);
  CHECK(GridDesc<3>::delinearize(g.cell_linear(IVec<3>(3, 4, 5)), g.dims) == IVec<3>(3, 4, 5));
  g.dims[1] = 2;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.dims[1] = 5;
  g.dx = 0.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}
