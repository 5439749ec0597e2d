#include "mpmlite/simulation.hpp"

#include "mpmlite/constitutive.hpp"
#include "mpmlite/errors.hpp"
#include "mpmlite/parallel.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <random>

namespace mpmlite {

namespace {
using Clock = std::chrono::steady_clock;
double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <int dim>
Eigen::Vector3d lift(const Vec<dim>& v) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int a = 0; a < dim; ++a) out[a] = v[a];
  return out;
}
}  // namespace

template <int dim>
Simulation<dim>::Simulation(SceneConfig<dim> cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  for (const Shape<dim>& s : cfg_.shapes) {
    auto seeded = seed_particles<dim>(s, cfg_.materials[static_cast<std::size_t>(s.material)], cfg_.grid, rng);
    particles_.insert(particles_.end(), seeded.begin(), seeded.end());
  }
  state_.reset(cfg_.grid, cfg_.storage);
}

template <int dim>
Simulation<dim>::Simulation(SceneConfig<dim> cfg, std::vector<Particle<dim>> particles)
    : cfg_(std::move(cfg)), particles_(std::move(particles)) {
  cfg_.validate();
  state_.reset(cfg_.grid, cfg_.storage);
}

template <int dim>
StepStats Simulation<dim>::step(double dt) {
  StepStats st;
  st.dt = dt;
  const bool implicit = cfg_.integrator == IntegratorKind::Implicit;

  auto t0 = Clock::now();
  UnloadOptions opt;
  opt.mode = implicit ? TransferMode::Implicit : TransferMode::Explicit;
  opt.affine = !cfg_.flip_blend.has_value();
  opt.deterministic = cfg_.deterministic;
  const std::vector<Mat<dim>> stresses = particle_stresses<dim>(particles_, cfg_.materials);
  unload<dim>(particles_, stresses, cfg_.materials, state_, opt);
  mark_boundary_nodes<dim>(state_, cfg_.colliders, DomainBoundary{cfg_.boundary, cfg_.boundary_cells}, time_);
  st.unload_ms = ms_since(t0);
  if (collect_transfer_stats_)
    transfer_stats_ = momentum_report<dim>(particles_, stresses, state_, cfg_.materials.size());

  t0 = Clock::now();
  if (implicit) {
    const BaseReport br = build_stretch_bases<dim>(state_, cfg_.materials);
    st.fallback_count = br.fallbacks;
    st.clamp_count = br.water_clamps;
    const NewtonReport nr = implicit_step<dim>(state_, cfg_.materials, dt, cfg_.gravity, cfg_.solver, cfg_.deterministic);
    st.newton_iters = nr.newton_iters;
    st.pcg_iters = nr.pcg_iters;
    st.newton_residual = nr.residual;
    st.fixed_point_residual = nr.fixed_point_residual;
  } else {
    explicit_step<dim>(state_, dt, cfg_.gravity);
  }
  st.integrate_ms = ms_since(t0);

  t0 = Clock::now();
  const LoadReport lr = cfg_.flip_blend ? load_flip_pic<dim>(state_, particles_, cfg_.materials, dt, *cfg_.flip_blend)
                                        : load<dim>(state_, particles_, cfg_.materials, dt);
  st.load_ms = ms_since(t0);
  st.inverted_count = lr.inverted;
  if (lr.inverted > 0) spdlog::warn("step {}: {} particles with det(I + dt G) <= 0", step_, lr.inverted);

  for (std::size_t p = 0; p < particles_.size(); ++p) {
    const Particle<dim>& pt = particles_[p];
    if (!pt.x.allFinite() || !pt.v.allFinite() || !pt.F.allFinite() || !std::isfinite(pt.J))
      throw NumericalError("non-finite state at particle " + std::to_string(p) + " after step " +
                           std::to_string(step_));
  }

  time_ += dt;
  ++step_;
  st.step = step_;
  st.time = time_;
  st.momentum = lift<dim>(particle_momentum<dim>(particles_, cfg_.deterministic));
  try {
    st.angular_momentum = particle_angular_momentum<dim>(particles_, cfg_.grid, cfg_.deterministic);
  } catch (const OutOfDomainError&) {
    st.angular_momentum.setConstant(std::nan(""));
  }
  return st;
}

template <int dim>
double Simulation<dim>::explicit_dt_limit() const {
  return cfl_time_step<dim>(particles_, cfg_.materials, cfg_.grid.dx, cfg_.solver.cfl);
}

template <int dim>
std::vector<StepStats> Simulation<dim>::advance_frame() {
  std::vector<StepStats> out;
  const int n = cfg_.steps_per_frame();
  const double dt = cfg_.dt_frame / n;
  for (int k = 0; k < n; ++k) {
    int sub = 1;
    if (cfg_.integrator == IntegratorKind::Explicit) {
      const double limit = explicit_dt_limit();
      if (dt > limit) sub = static_cast<int>(std::ceil(dt / limit));
    }
    for (int s = 0; s < sub; ++s) out.push_back(step(dt / sub));
  }
  return out;
}

template <int dim>
EnergyReport Simulation<dim>::energies() const {
  EnergyReport e;
  const bool comp = true;
  e.kinetic = reduce_sum<double>(
      particles_.size(), 0.0, [&](std::size_t p) { return 0.5 * particles_[p].mass * particles_[p].v.squaredNorm(); },
      comp);
  e.elastic = reduce_sum<double>(
      particles_.size(), 0.0,
      [&](std::size_t p) {
        const Particle<dim>& pt = particles_[p];
        const MaterialModel& m = cfg_.materials[static_cast<std::size_t>(pt.material)];
        if (m.is_fluid()) return pt.volume * energy_water(pt.J, m.bulk);
        return pt.volume * energy_density<dim>(m, pt.F);
      },
      comp);
  e.gravity_potential = reduce_sum<double>(
      particles_.size(), 0.0, [&](std::size_t p) { return -particles_[p].mass * cfg_.gravity.dot(particles_[p].x); },
      comp);
  return e;
}

template class Simulation<2>;
template class Simulation<3>;

}  // namespace mpmlite
