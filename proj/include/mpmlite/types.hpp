#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>

namespace mpmlite {

template <int dim>
using Vec = Eigen::Matrix<double, dim, 1>;
template <int dim>
using Mat = Eigen::Matrix<double, dim, dim>;
template <int dim>
using IVec = Eigen::Matrix<int, dim, 1>;

/// Number of corners of a d-cube (2^d).
constexpr int corner_count(int dim) { return 1 << dim; }

/// Number of nodes in a quadratic B-spline stencil (3^d).
constexpr int b2_stencil_size(int dim) { return dim == 2 ? 9 : 27; }

/// Offset of corner `bits` along `axis`, 0 or 1.
constexpr int corner_bit(int bits, int axis) { return (bits >> axis) & 1; }

template <int dim>
IVec<dim> corner_offset(int bits) {
  IVec<dim> o;
  for (int a = 0; a < dim; ++a) o[a] = corner_bit(bits, a);
  return o;
}

template <int dim>
using CornerArray = std::array<int, corner_count(dim)>;

}  // namespace mpmlite
