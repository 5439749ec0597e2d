#pragma once

#include "mpmlite/constitutive.hpp"
#include "mpmlite/grid_state.hpp"
#include "mpmlite/material.hpp"
#include "mpmlite/scene.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace mpmlite {

template <int dim>
using NodeField = std::vector<Vec<dim>>;

// --- boundary conditions ----------------------------------------------------

struct DomainBoundary {
  std::optional<BoundaryCondition> condition;
  int cells = 2;
};

/// Rebuild node constraints from colliders and domain walls at time t.
template <int dim>
void mark_boundary_nodes(GridState<dim>& state, const std::vector<Collider<dim>>& colliders,
                         const DomainBoundary& walls, double t);

/// Add one constraint at node n. Sticky replaces any earlier constraint;
/// slip normals accumulate.
template <int dim>
void add_node_constraint(GridState<dim>& state, std::size_t n, BoundaryCondition bc, const Vec<dim>& normal,
                         const Vec<dim>& velocity);

/// v <- P v + target on constrained nodes.
template <int dim>
void apply_boundary_conditions(const GridState<dim>& state, NodeField<dim>& v);

/// Direction projection: d <- P d on constrained nodes.
template <int dim>
void project_directions(const GridState<dim>& state, NodeField<dim>& d);

// --- explicit ---------------------------------------------------------------

/// Symplectic Euler: node forces from cell stresses, gravity, then
/// boundary conditions. Writes node_force and node_v.
template <int dim>
void explicit_step(GridState<dim>& state, double dt, const Vec<dim>& gravity);

/// Largest explicit step allowed by the CFL rule.
template <int dim>
double cfl_time_step(const std::vector<Particle<dim>>& particles, const std::vector<MaterialModel>& materials,
                     double dx, double cfl);

// --- implicit ---------------------------------------------------------------

struct BaseReport {
  std::size_t fallbacks = 0;
  std::size_t water_clamps = 0;
  std::size_t one_real = 0;
  std::size_t three_real = 0;
};

/// Per-slot stretch bases from the transferred stresses. Inadmissible
/// stresses fall back to the identity base and deactivate the slot.
template <int dim>
BaseReport build_stretch_bases(GridState<dim>& state, const std::vector<MaterialModel>& materials);

/// Backward-Euler objective over nodal velocities:
///   sum_i 1/2 m_i |v_i - v_i^n|^2 - dt sum_i m_i g.v_i
///   + sum_(c,k) V_ck psi_k((I + dt G_c(v)) S_ck)
template <int dim>
class IncrementalPotential {
 public:
  IncrementalPotential(const GridState<dim>& state, const std::vector<MaterialModel>& materials, double dt,
                       const Vec<dim>& gravity, bool deterministic = false);

  /// +infinity when some trial deformation has det <= 0.
  double energy(const NodeField<dim>& v) const;
  void gradient(const NodeField<dim>& v, NodeField<dim>& g) const;

  /// Cache the SVD and stretch-space Hessian blocks at v.
  void linearize(const NodeField<dim>& v, bool psd_projection);
  void hessian_vector(const NodeField<dim>& dv, NodeField<dim>& out) const;
  /// Diagonal of the linearized Hessian (elastic part clamped at 0).
  void diagonal(NodeField<dim>& out) const;

  /// G_c(v) for one cell.
  Mat<dim> cell_gradient(const NodeField<dim>& v, std::size_t c) const;

  double dt() const { return dt_; }
  std::size_t size() const { return state_.node_count(); }

 private:
  struct SlotLinearization {
    Mat<dim> U, V;
    Mat<dim> H;  // d2psi/dsigma2
    std::array<double, PrincipalResponse<dim>::kPairs> a{}, b{};
  };

  Mat<dim> slot_dP(const SlotLinearization& L, const Mat<dim>& dF) const;
  template <class CellMatrix>
  void gather_to_nodes(CellMatrix&& cell_matrix, NodeField<dim>& out) const;

  const GridState<dim>& state_;
  const std::vector<MaterialModel>& materials_;
  double dt_;
  Vec<dim> gravity_;
  bool deterministic_;
  std::vector<SlotLinearization> lin_;
};

template <int dim>
double dot(const NodeField<dim>& a, const NodeField<dim>& b, bool compensated = true);

struct NewtonReport {
  int newton_iters = 0;
  int pcg_iters = 0;
  double residual = 0.0;           // final projected gradient norm
  double initial_residual = 0.0;
  bool converged = false;
  int line_search_failures = 0;
  int pcg_restarts = 0;
  double fixed_point_residual = 0.0;  // last plasticity update
  std::vector<double> energies;       // objective after each accepted step
};

/// Fixed-point plasticity: project the trial stretch of every plastic slot
/// at the current velocities and store the base that reproduces it.
/// Returns max_slot ||S_new - S_old||_F.
template <int dim>
double fixed_point_plasticity_update(GridState<dim>& state, const std::vector<MaterialModel>& materials,
                                     const NodeField<dim>& v, double dt);

/// Newton on the incremental potential with PCG and backtracking. Writes
/// the result to state.node_v.
template <int dim>
NewtonReport implicit_step(GridState<dim>& state, const std::vector<MaterialModel>& materials, double dt,
                           const Vec<dim>& gravity, const SolverConfig& cfg, bool deterministic = false);

}  // namespace mpmlite
