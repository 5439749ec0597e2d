#pragma once

#include "mpmlite/kernels.hpp"
#include "mpmlite/lattice_index.hpp"
#include "mpmlite/material.hpp"
#include "mpmlite/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace mpmlite {

template <int dim>
struct Particle {
  double mass = 0.0;
  double volume = 0.0;  // rest volume
  Vec<dim> x = Vec<dim>::Zero();
  Vec<dim> v = Vec<dim>::Zero();
  Mat<dim> F = Mat<dim>::Identity();  // solids; left at identity for fluids
  double J = 1.0;                     // fluids
  Mat<dim> G = Mat<dim>::Zero();
  int material = 0;
};

enum class ShapeKind { Box, Sphere, Cylinder };

template <int dim>
struct Shape {
  ShapeKind kind = ShapeKind::Box;
  Vec<dim> lo = Vec<dim>::Zero();  // box
  Vec<dim> hi = Vec<dim>::Ones();
  Vec<dim> center = Vec<dim>::Zero();  // sphere, cylinder; also the spin center
  double radius = 0.0;
  int axis = 0;  // cylinder axis
  double half_length = 0.0;

  int material = 0;
  int ppc = 8;
  std::optional<IVec<dim>> strata;  // sub-cell layout; product must equal ppc
  double jitter = 1.0;              // fraction of a sub-cell, in [0, 1]

  Vec<dim> velocity = Vec<dim>::Zero();
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // about `center`

  bool contains(const Vec<dim>& x) const;
  void bounds(Vec<dim>& lo_out, Vec<dim>& hi_out) const;
  Vec<dim> initial_velocity(const Vec<dim>& x) const;
  /// Seeded particles carry this affine gradient (the spin tensor).
  Mat<dim> initial_velocity_gradient() const;
  double analytic_volume() const;
};

/// Split ppc into per-axis sub-cell counts as evenly as possible.
template <int dim>
IVec<dim> balanced_strata(int ppc);

/// Stratified jittered fill of `shape`. Throws ConfigError if the shape
/// does not keep 2 cells of clearance from the domain boundary.
template <int dim>
std::vector<Particle<dim>> seed_particles(const Shape<dim>& shape, const MaterialModel& material,
                                          const GridDesc<dim>& grid, std::mt19937_64& rng);

enum class ColliderKind { HalfSpace, Sphere, Box };
enum class BoundaryCondition { Sticky, Slip };

/// Solid obstacle. Grid nodes with non-positive signed distance are
/// constrained.
template <int dim>
struct Collider {
  ColliderKind kind = ColliderKind::HalfSpace;
  BoundaryCondition condition = BoundaryCondition::Sticky;
  Vec<dim> point = Vec<dim>::Zero();  // half-space: point on plane
  Vec<dim> normal = Vec<dim>::UnitY();  // half-space: outward normal of the solid
  Vec<dim> center = Vec<dim>::Zero();   // sphere
  double radius = 0.0;
  Vec<dim> lo = Vec<dim>::Zero();  // box
  Vec<dim> hi = Vec<dim>::Zero();
  Vec<dim> velocity = Vec<dim>::Zero();

  /// Normalizes the half-space normal; throws ConfigError on bad geometry.
  void validate();
  /// Signed distance at time t; negative inside the solid.
  double phi(const Vec<dim>& x, double t) const;
  /// Outward unit normal of the solid surface nearest to x.
  Vec<dim> normal_at(const Vec<dim>& x, double t) const;
};

enum class IntegratorKind { Explicit, Implicit };

struct SolverConfig {
  int newton_max_iters = 50;
  double newton_tol = 1e-6;
  double newton_abs_tol = 1e-12;  // scaled by the momentum scale of the step
  int pcg_max_iters = 500;
  double pcg_tol = 1e-3;
  bool psd_projection = true;
  bool fixed_point_plasticity = true;
  bool line_search = true;
  double cfl = 0.5;

  void validate() const;
};

template <int dim>
struct SceneConfig {
  static constexpr int dimension() { return dim; }

  GridDesc<dim> grid;
  LatticeStorage storage = LatticeStorage::Sparse;
  double dt_step = 1e-3;
  double dt_frame = 1.0 / 24.0;
  int frames = 1;
  IntegratorKind integrator = IntegratorKind::Explicit;
  std::optional<double> flip_blend;  // FLIP/PIC mode when set
  Vec<dim> gravity = Vec<dim>::Zero();
  bool deterministic = false;
  std::uint64_t seed = 0;

  // Domain walls: nodes within `boundary_cells` of the grid edge.
  std::optional<BoundaryCondition> boundary;
  int boundary_cells = 2;

  std::vector<MaterialModel> materials;
  std::vector<Shape<dim>> shapes;
  std::vector<Collider<dim>> colliders;
  SolverConfig solver;

  void validate();
  int steps_per_frame() const;
};

}  // namespace mpmlite
