#pragma once

#include <memory>
#include <span>
#include <string>

namespace mpmlite {

enum class EnergyKind { StvkHencky, SplitNeoHookean, WaterJ };
enum class PlasticityKind { None, VonMises, DruckerPrager, Extension };

/// Return mapping supplied from outside the engine (NACC, snow,
/// Herschel-Bulkley and similar models plug in here). Operates on principal
/// log-stretches; principal directions are left untouched.
class PlasticityExtension {
 public:
  virtual ~PlasticityExtension() = default;
  virtual std::string name() const = 0;
  /// Project `hencky` in place. Returns true when it changed.
  virtual bool project(std::span<double> hencky, double mu, double lambda) const = 0;
};

struct MaterialModel {
  EnergyKind kind = EnergyKind::StvkHencky;
  double mu = 0.0;      // shear modulus (Pa)
  double lambda = 0.0;  // Lame lambda (Pa), StVK-Hencky
  double bulk = 0.0;    // bulk modulus kappa (Pa), split Neo-Hookean and water
  double density = 1000.0;

  PlasticityKind plasticity = PlasticityKind::None;
  double yield_stress = 0.0;        // von Mises sigma_y (Pa)
  double friction_angle_deg = 0.0;  // Drucker-Prager phi_f
  std::shared_ptr<const PlasticityExtension> extension;

  static MaterialModel stvk_hencky(double youngs, double poisson, double density);
  static MaterialModel split_neo_hookean(double youngs, double poisson, double density, int dim);
  static MaterialModel water(double bulk, double density);

  bool is_fluid() const { return kind == EnergyKind::WaterJ; }
  bool has_plasticity() const { return plasticity != PlasticityKind::None; }

  /// Lame lambda in effect for return mappings (split Neo-Hookean derives it
  /// from the bulk modulus).
  double effective_lambda(int dim) const;

  /// Dilatational wave speed for CFL limits.
  double wave_speed(int dim) const;

  /// Throws ConfigError when parameters leave the admissible range.
  void validate(int dim) const;
};

}  // namespace mpmlite
