#pragma once

// One step = unload, integrate, load.

#include "mpmlite/grid_state.hpp"
#include "mpmlite/integrator.hpp"
#include "mpmlite/scene.hpp"
#include "mpmlite/transfer.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace mpmlite {

struct StepStats {
  long step = 0;
  double time = 0.0;
  double dt = 0.0;
  Eigen::Vector3d momentum = Eigen::Vector3d::Zero();  // particles, after the step
  Eigen::Vector3d angular_momentum = Eigen::Vector3d::Zero();
  double unload_ms = 0.0;
  double integrate_ms = 0.0;
  double load_ms = 0.0;
  int newton_iters = 0;
  int pcg_iters = 0;
  std::size_t fallback_count = 0;
  double newton_residual = 0.0;
  double fixed_point_residual = 0.0;
  std::size_t clamp_count = 0;
  std::size_t inverted_count = 0;
};

struct EnergyReport {
  double kinetic = 0.0;
  double elastic = 0.0;
  double gravity_potential = 0.0;  // -sum m g.x
};

template <int dim>
class Simulation {
 public:
  /// Validates the config and seeds every shape in order.
  explicit Simulation(SceneConfig<dim> cfg);
  Simulation(SceneConfig<dim> cfg, std::vector<Particle<dim>> particles);

  StepStats step(double dt);
  /// Steps covering one frame; explicit runs substep to satisfy CFL.
  std::vector<StepStats> advance_frame();

  double explicit_dt_limit() const;
  EnergyReport energies() const;

  const std::vector<Particle<dim>>& particles() const { return particles_; }
  std::vector<Particle<dim>>& particles() { return particles_; }
  const GridState<dim>& state() const { return state_; }
  GridState<dim>& state() { return state_; }
  const SceneConfig<dim>& config() const { return cfg_; }
  double time() const { return time_; }
  long step_index() const { return step_; }
  /// Stats of the last unload, when collected.
  const TransferStats<dim>& transfer_stats() const { return transfer_stats_; }
  void set_collect_transfer_stats(bool on) { collect_transfer_stats_ = on; }

 private:
  SceneConfig<dim> cfg_;
  std::vector<Particle<dim>> particles_;
  GridState<dim> state_;
  double time_ = 0.0;
  long step_ = 0;
  bool collect_transfer_stats_ = false;
  TransferStats<dim> transfer_stats_;
};

}  // namespace mpmlite
