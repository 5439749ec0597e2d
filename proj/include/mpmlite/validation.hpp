#pragma once

// Reference quadratic B-spline APIC transfers and the refinement studies
// that compare the two-hop Q1 transfers against them.

#include "mpmlite/grid_state.hpp"
#include "mpmlite/lattice_index.hpp"
#include "mpmlite/scene.hpp"
#include "mpmlite/simulation.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace mpmlite {

// --- B2 APIC oracle ---------------------------------------------------------

template <int dim>
struct ApicOracleParticle {
  Vec<dim> v = Vec<dim>::Zero();
  Mat<dim> C = Mat<dim>::Zero();  // M D^-1
  Mat<dim> D = Mat<dim>::Zero();  // sum_i beta (x_i - x_p)(x_i - x_p)^T
  Mat<dim> M = Mat<dim>::Zero();  // sum_i beta v_i (x_i - x_p)^T
};

template <int dim>
struct ApicOracleState {
  GridDesc<dim> grid;
  LatticeIndex<dim> index;  // node coordinate -> slot
  std::vector<IVec<dim>> node_coord;
  std::vector<double> node_mass;
  std::vector<Vec<dim>> node_v;
  std::vector<ApicOracleParticle<dim>> particles;

  int find(const IVec<dim>& i) const { return index.find(i); }
};

/// v_i = sum_p beta_ip m_p (v_p + G_p (x_i - x_p)) / sum_p beta_ip m_p.
/// Nodes with zero B2 mass are left out.
template <int dim>
ApicOracleState<dim> apic_b2_p2g(const std::vector<Particle<dim>>& particles, const GridDesc<dim>& grid);

template <int dim>
using NodeVelocityFn = std::function<Vec<dim>(const IVec<dim>&)>;

/// Per-particle oracle velocity and affine gradient from nodal velocities.
/// Throws ContractViolation if D_p is singular.
template <int dim>
std::vector<ApicOracleParticle<dim>> apic_b2_g2p(const NodeVelocityFn<dim>& node_v,
                                                 const std::vector<Particle<dim>>& particles,
                                                 const GridDesc<dim>& grid);

/// Same, reading node velocities from a p2g result. Missing nodes throw.
template <int dim>
std::vector<ApicOracleParticle<dim>> apic_b2_g2p(const ApicOracleState<dim>& nodes,
                                                 const std::vector<Particle<dim>>& particles);

// --- convergence reports ----------------------------------------------------

struct ConvergenceReport {
  std::string id;
  std::string variable = "dx";
  std::vector<double> h;
  std::vector<double> error;
  double slope = 0.0;
  std::vector<double> pair_slopes;  // log(e_k / e_k+1) / log(h_k / h_k+1)
  std::vector<double> pair_ratios;  // e_k / e_k+1

  bool all_zero() const;
  bool all_positive() const;
};

/// Least-squares slope of log(error) against log(h).
double fit_loglog_slope(const std::vector<double>& h, const std::vector<double>& error);

/// Fills slope, pair_slopes and pair_ratios from h and error. Zero errors
/// leave the slope at NaN.
void finalize_report(ConvergenceReport& r);

/// CSV with columns <variable>,discrepancy,pair_slope,fitted_slope.
void write_study_table(const std::filesystem::path& path, const ConvergenceReport& r);

// --- transfer order ---------------------------------------------------------

template <int dim>
struct VelocityField {
  std::function<Vec<dim>(const Vec<dim>&)> value;
  std::function<Mat<dim>(const Vec<dim>&)> gradient;
};

/// v_a = k^-1 sin(k x_a + phi_a) cos(k x_(a+1) + phi_(a+1)), indices cyclic.
template <int dim>
VelocityField<dim> trig_field(double k);

template <int dim>
VelocityField<dim> affine_field(const Mat<dim>& A, const Vec<dim>& b);

struct TransferOrderOptions {
  int levels = 4;
  int ppc = 8;
  double dx0 = 0.1;
  int patch_cells = 4;  // patch width in coarse cells
  int margin_cells = 3;
  std::uint64_t seed = 7;
};

struct TransferOrderResult {
  ConvergenceReport p2g_v;
  ConvergenceReport g2p_v;
  ConvergenceReport g2p_G;
  std::size_t weight_checks = 0;
  std::size_t weight_violations = 0;  // beta_ip > 1.5^d sum_c w_cp w_ic
  std::vector<std::size_t> particles_per_level;
};

template <int dim>
TransferOrderResult transfer_order_study(const VelocityField<dim>& field, const TransferOrderOptions& opt);

// --- rotation gap -----------------------------------------------------------

struct RotationGapOptions {
  std::vector<double> dts = {4e-3, 2e-3, 1e-3, 5e-4};
  double angle_deg = 30.0;
  Eigen::Vector3d axis = Eigen::Vector3d(1.0, 1.0, 1.0);
  Eigen::Vector3d stretch = Eigen::Vector3d(1.15, 0.92, 1.04);
  double youngs = 1e4;
  double poisson = 0.3;
  double density = 1e3;
  double dx = 0.05;
  int block_cells = 6;
  int ppc = 8;
  double spin = 2.0;   // rad/s about the block center
  double shear = 1.0;  // 1/s, v_x += shear * y
  std::uint64_t seed = 3;
};

struct RotationGapResult {
  ConvergenceReport keep;         // keep base = R S_ck
  ConvergenceReport keep_right;   // keep base = S_ck R, i.e. V R = F
  std::vector<int> newton_iters;  // drop solves
  bool converged = true;
};

/// ||v_keep - v_drop||_inf per dt for a uniformly pre-deformed StVK block
/// F = R S. The dropped base is S_ck reconstructed from the cell stress.
RotationGapResult rotation_gap_study(const RotationGapOptions& opt);

// --- momentum ---------------------------------------------------------------

/// Two cubes of side 0.1 m approaching along x with speeds +-v0.
SceneConfig<3> two_cube_scene(double dx, int ppc, double v0, double dt);
/// Rod of radius 0.05 m and length 0.4 m along z, spinning at omega about z.
SceneConfig<3> rotating_rod_scene(double dx, int ppc, double omega, double dt);

struct MomentumStudyResult {
  long steps = 0;
  double max_linear = 0.0;      // max_t |sum m v|
  double linear_scale = 0.0;    // m_total |v0|
  double initial_Lz = 0.0;
  double max_Lz_drift = 0.0;    // max_t |L_z - L_z0| / |L_z0|
  double max_transverse = 0.0;  // max_t sqrt(L_x^2 + L_y^2)
  double seconds = 0.0;
  std::vector<StepStats> stats;
};

/// Run `steps` steps of `cfg` at its dt_step and track momenta. With
/// `zero_net_momentum` the seeded velocities are shifted so that the total
/// linear momentum starts at zero.
MomentumStudyResult momentum_study(const SceneConfig<3>& cfg, long steps, double v0, bool zero_net_momentum = false);

}  // namespace mpmlite
