#pragma once

#include "mpmlite/types.hpp"

#include <Eigen/Geometry>

#include <random>

namespace testutil {

using mpmlite::Mat;
using mpmlite::Vec;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <int dim>
Vec<dim> random_vec(std::mt19937_64& rng, double lo, double hi) {
  Vec<dim> v;
  for (int a = 0; a < dim; ++a) v[a] = uniform(rng, lo, hi);
  return v;
}

template <int dim>
Mat<dim> random_mat(std::mt19937_64& rng, double scale) {
  Mat<dim> m;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = uniform(rng, -scale, scale);
  return m;
}

template <int dim>
Mat<dim> random_rotation(std::mt19937_64& rng) {
  if constexpr (dim == 2) {
    const double t = uniform(rng, -3.14159, 3.14159);
    Mat<2> R;
    R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return R;
  } else {
    Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    q.normalize();
    return q.toRotationMatrix();
  }
}

/// Random SPD stretch with principal values in [lo, hi].
template <int dim>
Mat<dim> random_stretch(std::mt19937_64& rng, double lo, double hi) {
  const Mat<dim> U = random_rotation<dim>(rng);
  return U * random_vec<dim>(rng, lo, hi).asDiagonal() * U.transpose();
}

template <int dim>
double max_abs(const Mat<dim>& m) {
  return m.cwiseAbs().maxCoeff();
}

}  // namespace testutil
