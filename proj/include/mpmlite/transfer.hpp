#pragma once

// Particle -> center -> node (unload) and node -> center -> particle
// (load) passes.

#include "mpmlite/grid_state.hpp"
#include "mpmlite/material.hpp"
#include "mpmlite/scene.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace mpmlite {

enum class TransferMode { Explicit, Implicit };

struct UnloadOptions {
  TransferMode mode = TransferMode::Explicit;
  bool affine = true;  // false in FLIP/PIC mode: plain weighted averages
  bool deterministic = false;
};

struct UnloadReport {
  std::size_t candidate_cells = 0;
  std::size_t deactivated_cells = 0;
};

/// Kirchhoff stress per particle. Throws ConstitutiveError with the
/// particle index on inverted or non-finite states.
template <int dim>
std::vector<Mat<dim>> particle_stresses(const std::vector<Particle<dim>>& particles,
                                        const std::vector<MaterialModel>& materials);

/// Rebuilds `state` from the particles: cell mass, velocity, velocity
/// gradient and stress slots, then node mass and velocity.
template <int dim>
UnloadReport unload(const std::vector<Particle<dim>>& particles, const std::vector<MaterialModel>& materials,
                    GridState<dim>& state, const UnloadOptions& opt);

/// Same as above with precomputed particle stresses.
template <int dim>
UnloadReport unload(const std::vector<Particle<dim>>& particles, const std::vector<Mat<dim>>& stresses,
                    const std::vector<MaterialModel>& materials, GridState<dim>& state, const UnloadOptions& opt);

struct LoadReport {
  std::size_t inverted = 0;   // particles with det(I + dt G_p) <= 0
  std::size_t projected = 0;  // particles changed by a return map
};

/// Center velocities and gradients from the current node velocities.
template <int dim>
void nodes_to_centers(GridState<dim>& state);

/// APIC-style load: v_p, G_p interpolated from centers, then advection and
/// deformation update.
template <int dim>
LoadReport load(GridState<dim>& state, std::vector<Particle<dim>>& particles,
                const std::vector<MaterialModel>& materials, double dt);

/// FLIP/PIC blend. Uses node_v (new) and node_v_old (pre-integration).
template <int dim>
LoadReport load_flip_pic(GridState<dim>& state, std::vector<Particle<dim>>& particles,
                         const std::vector<MaterialModel>& materials, double dt, double alpha);

/// x cross v as a 3-vector (z only in 2D).
template <int dim>
Eigen::Vector3d cross3(const Vec<dim>& x, const Vec<dim>& v);

/// Angular momentum carried by an affine velocity field with second
/// moment D: the axial vector of the antisymmetric part of G D.
template <int dim>
Eigen::Vector3d affine_spin(const Mat<dim>& GD);

/// Second moment of a particle's two-hop kernel, sum_c w_cp (x_c - x_p)
/// (x_c - x_p)^T + dx^2/4 I.
template <int dim>
Mat<dim> two_hop_moment(const Vec<dim>& x, const GridDesc<dim>& grid);

template <int dim>
struct TransferStats {
  Vec<dim> momentum_particles = Vec<dim>::Zero();
  Vec<dim> momentum_cells = Vec<dim>::Zero();
  Vec<dim> momentum_nodes = Vec<dim>::Zero();
  Eigen::Vector3d angular_particles = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_cells = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_nodes = Eigen::Vector3d::Zero();
  std::vector<Mat<dim>> vtau_particles;  // per material
  std::vector<Mat<dim>> vtau_cells;      // per material; merged slots only enter the totals
  Mat<dim> vtau_particles_total = Mat<dim>::Zero();
  Mat<dim> vtau_cells_total = Mat<dim>::Zero();
};

template <int dim>
Vec<dim> particle_momentum(const std::vector<Particle<dim>>& particles, bool compensated = true);

/// Orbital plus affine-spin angular momentum about the origin.
template <int dim>
Eigen::Vector3d particle_angular_momentum(const std::vector<Particle<dim>>& particles, const GridDesc<dim>& grid,
                                          bool compensated = true);

template <int dim>
Vec<dim> node_momentum(const GridState<dim>& state, bool compensated = true);

template <int dim>
Eigen::Vector3d node_angular_momentum(const GridState<dim>& state, bool compensated = true);

/// Momenta of particles, centers and nodes plus stress content. Meaningful
/// right after unload.
template <int dim>
TransferStats<dim> momentum_report(const std::vector<Particle<dim>>& particles,
                                   const std::vector<Mat<dim>>& stresses, const GridState<dim>& state,
                                   std::size_t material_count);

}  // namespace mpmlite
