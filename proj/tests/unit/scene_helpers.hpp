#pragma once

#include "helpers.hpp"

#include "mpmlite/scene.hpp"

#include <vector>

namespace testutil {

using namespace mpmlite;

template <int dim>
GridDesc<dim> unit_grid(double dx, int cells) {
  GridDesc<dim> g;
  g.dx = dx;
  g.dims = IVec<dim>::Constant(cells);
  return g;
}

/// Random particles in [lo, hi]^d with random velocities, gradients and
/// mild deformations.
template <int dim>
std::vector<Particle<dim>> random_particles(std::mt19937_64& rng, int count, double lo, double hi,
                                            const std::vector<MaterialModel>& mats, double deform = 0.1) {
  std::vector<Particle<dim>> ps(static_cast<std::size_t>(count));
  for (Particle<dim>& p : ps) {
    p.material = static_cast<int>(rng() % mats.size());
    p.volume = uniform(rng, 0.5, 1.5) * 1e-3;
    p.mass = mats[static_cast<std::size_t>(p.material)].density * p.volume;
    p.x = random_vec<dim>(rng, lo, hi);
    p.v = random_vec<dim>(rng, -1.0, 1.0);
    p.G = random_mat<dim>(rng, 1.0);
    if (mats[static_cast<std::size_t>(p.material)].is_fluid())
      p.J = uniform(rng, 1.0 - deform, 1.0 + deform);
    else
      p.F = Mat<dim>::Identity() + random_mat<dim>(rng, deform);
  }
  return ps;
}

}  // namespace testutil
