#pragma once

// Multilinear (Q1) and quadratic B-spline kernels on a uniform lattice.
//
// Nodes sit at origin + i*dx for i in [0, dims]; cell centers sit at
// origin + (c + 0.5)*dx for c in [0, dims). Both lattices are addressed
// row-major (last axis fastest).

#include "mpmlite/errors.hpp"
#include "mpmlite/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>

namespace mpmlite {

template <int dim>
struct GridDesc {
  static_assert(dim == 2 || dim == 3, "only 2D and 3D grids are supported");
  static constexpr int dimension = dim;

  Vec<dim> origin = Vec<dim>::Zero();
  double dx = 1.0;
  IVec<dim> dims = IVec<dim>::Constant(3);  // cells per axis

  void validate() const {
    if (!(dx > 0.0) || !std::isfinite(dx)) throw ConfigError("grid spacing dx must be > 0");
    for (int a = 0; a < dim; ++a)
      if (dims[a] < 3) throw ConfigError("grid needs at least 3 cells per axis");
  }

  IVec<dim> node_dims() const { return dims + IVec<dim>::Ones(); }

  Vec<dim> cell_center(const IVec<dim>& c) const {
    return origin + (c.template cast<double>() + Vec<dim>::Constant(0.5)) * dx;
  }
  Vec<dim> node_position(const IVec<dim>& i) const {
    return origin + i.template cast<double>() * dx;
  }

  std::int64_t cell_linear(const IVec<dim>& c) const { return linearize(c, dims); }
  std::int64_t node_linear(const IVec<dim>& i) const { return linearize(i, node_dims()); }

  std::int64_t cell_count() const { return volume(dims); }
  std::int64_t node_count() const { return volume(node_dims()); }

  /// Lattice-unit coordinate of x relative to the node lattice.
  Vec<dim> to_lattice(const Vec<dim>& x) const { return (x - origin) / dx; }

  static std::int64_t linearize(const IVec<dim>& c, const IVec<dim>& extent) {
    std::int64_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * extent[a] + c[a];
    return idx;
  }
  static IVec<dim> delinearize(std::int64_t idx, const IVec<dim>& extent) {
    IVec<dim> c;
    for (int a = dim - 1; a >= 0; --a) {
      c[a] = static_cast<int>(idx % extent[a]);
      idx /= extent[a];
    }
    return c;
  }
  static std::int64_t volume(const IVec<dim>& e) {
    std::int64_t v = 1;
    for (int a = 0; a < dim; ++a) v *= e[a];
    return v;
  }
};

template <int dim>
struct KernelEntry {
  IVec<dim> index;
  double weight;
};

/// Base center and fractional offset of a particle in the center lattice.
/// Corner `bits` of the stencil is center base + bits with weight
/// prod_a (bit_a ? frac_a : 1 - frac_a).
template <int dim>
struct Q1Coords {
  IVec<dim> base;
  Vec<dim> frac;

  double weight(int bits) const {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) w *= corner_bit(bits, a) ? frac[a] : 1.0 - frac[a];
    return w;
  }
};

namespace detail {
template <int dim>
[[noreturn]] void throw_out_of_domain(const Vec<dim>& x, const char* what) {
  std::ostringstream os;
  os << what << ": position (" << x.transpose() << ") outside kernel-admissible region";
  throw OutOfDomainError(os.str());
}
}  // namespace detail

/// Locate x in the center lattice. Requires x at least one cell from the
/// domain boundary.
template <int dim>
Q1Coords<dim> q1_locate(const Vec<dim>& x, const GridDesc<dim>& grid) {
  const Vec<dim> u = grid.to_lattice(x);
  Q1Coords<dim> q;
  for (int a = 0; a < dim; ++a) {
    if (!(u[a] >= 1.0 && u[a] <= grid.dims[a] - 1.0)) detail::throw_out_of_domain<dim>(x, "Q1 kernel");
    const double uc = u[a] - 0.5;
    const double b = std::floor(uc);
    q.base[a] = static_cast<int>(b);
    q.frac[a] = uc - b;
  }
  return q;
}

/// Multilinear weights w_cp = N_c(x_p) of the 2^d surrounding centers.
template <int dim>
std::array<KernelEntry<dim>, corner_count(dim)> q1_weights_particle_to_centers(const Vec<dim>& x,
                                                                              const GridDesc<dim>& grid) {
  const Q1Coords<dim> q = q1_locate(x, grid);
  std::array<KernelEntry<dim>, corner_count(dim)> out;
  for (int bits = 0; bits < corner_count(dim); ++bits)
    out[bits] = {q.base + corner_offset<dim>(bits), q.weight(bits)};
  return out;
}

/// Center-to-node weight; the cell center is equidistant from all corners.
constexpr double q1_weight_center_to_node(int d) {
  if (d != 2 && d != 3) return 0.0;
  return 1.0 / static_cast<double>(1 << d);
}

/// Gradient of the corner node's shape function at the cell center, in
/// closed form given the corner sign pattern.
template <int dim>
Vec<dim> q1_grad_corner(int bits, double dx) {
  const double scale = 1.0 / (static_cast<double>(1 << (dim - 1)) * dx);
  Vec<dim> g;
  for (int a = 0; a < dim; ++a) g[a] = corner_bit(bits, a) ? scale : -scale;
  return g;
}

/// grad w_ic = (x_i - x_c) / (2^(d-2) dx^2). x_i must be a corner of the
/// cell centered at x_c.
template <int dim>
Vec<dim> q1_grad_center_to_node(const Vec<dim>& x_i, const Vec<dim>& x_c, const GridDesc<dim>& grid) {
  const Vec<dim> r = x_i - x_c;
  const double h = 0.5 * grid.dx;
  for (int a = 0; a < dim; ++a)
    if (std::abs(std::abs(r[a]) - h) > 1e-9 * grid.dx)
      throw ContractViolation("q1_grad_center_to_node: node is not a corner of the cell");
  return r / (static_cast<double>(1 << (dim - 2)) * grid.dx * grid.dx);
}

/// 1D quadratic B-spline weights for the 3-node stencil starting at the
/// node below x - 0.5 (lattice units); `frac` is the offset from that node.
inline std::array<double, 3> b2_weights_1d(double frac) {
  const double a = 1.5 - frac;
  const double b = frac - 1.0;
  const double c = frac - 0.5;
  return {0.5 * a * a, 0.75 - b * b, 0.5 * c * c};
}

template <int dim>
struct B2Coords {
  IVec<dim> base;
  std::array<std::array<double, 3>, dim> w;

  double weight(const IVec<dim>& local) const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= w[a][local[a]];
    return v;
  }
};

template <int dim>
B2Coords<dim> b2_locate(const Vec<dim>& x, const GridDesc<dim>& grid) {
  const Vec<dim> u = grid.to_lattice(x);
  B2Coords<dim> q;
  for (int a = 0; a < dim; ++a) {
    if (!(u[a] >= 1.5 && u[a] <= grid.dims[a] - 1.5)) detail::throw_out_of_domain<dim>(x, "B2 kernel");
    const double b = std::floor(u[a] - 0.5);
    q.base[a] = static_cast<int>(b);
    q.w[a] = b2_weights_1d(u[a] - b);
  }
  return q;
}

template <int dim>
IVec<dim> b2_local_index(int k) {
  IVec<dim> l;
  for (int a = dim - 1; a >= 0; --a) {
    l[a] = k % 3;
    k /= 3;
  }
  return l;
}

/// Tensor-product quadratic B-spline weights over the 3^d node stencil.
template <int dim>
std::array<KernelEntry<dim>, b2_stencil_size(dim)> b2_weights_particle_to_nodes(const Vec<dim>& x,
                                                                                const GridDesc<dim>& grid) {
  const B2Coords<dim> q = b2_locate(x, grid);
  std::array<KernelEntry<dim>, b2_stencil_size(dim)> out;
  for (int k = 0; k < b2_stencil_size(dim); ++k) {
    const IVec<dim> l = b2_local_index<dim>(k);
    out[k] = {q.base + l, q.weight(l)};
  }
  return out;
}

}  // namespace mpmlite
