#include "mpmlite/material.hpp"

#include "mpmlite/errors.hpp"

#include <cmath>
#include <string>

namespace mpmlite {

namespace {
double shear_from(double youngs, double poisson) { return youngs / (2.0 * (1.0 + poisson)); }
double lambda_from(double youngs, double poisson) {
  return youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
}
}  // namespace

MaterialModel MaterialModel::stvk_hencky(double youngs, double poisson, double density) {
  MaterialModel m;
  m.kind = EnergyKind::StvkHencky;
  m.mu = shear_from(youngs, poisson);
  m.lambda = lambda_from(youngs, poisson);
  m.density = density;
  return m;
}

MaterialModel MaterialModel::split_neo_hookean(double youngs, double poisson, double density, int dim) {
  MaterialModel m;
  m.kind = EnergyKind::SplitNeoHookean;
  m.mu = shear_from(youngs, poisson);
  m.lambda = lambda_from(youngs, poisson);
  m.bulk = m.lambda + 2.0 * m.mu / dim;
  m.density = density;
  return m;
}

MaterialModel MaterialModel::water(double bulk, double density) {
  MaterialModel m;
  m.kind = EnergyKind::WaterJ;
  m.bulk = bulk;
  m.density = density;
  return m;
}

double MaterialModel::effective_lambda(int dim) const {
  switch (kind) {
    case EnergyKind::StvkHencky:
      return lambda;
    case EnergyKind::SplitNeoHookean:
      return bulk - 2.0 * mu / dim;
    case EnergyKind::WaterJ:
      return bulk;
  }
  return lambda;
}

double MaterialModel::wave_speed(int dim) const {
  if (kind == EnergyKind::WaterJ) return std::sqrt(bulk / density);
  return std::sqrt((effective_lambda(dim) + 2.0 * mu) / density);
}

void MaterialModel::validate(int dim) const {
  if (!(density > 0.0)) throw ConfigError("material density must be > 0");
  switch (kind) {
    case EnergyKind::StvkHencky:
      if (!(mu > 0.0)) throw ConfigError("StVK-Hencky requires mu > 0");
      if (!(lambda > -2.0 * mu / dim)) throw ConfigError("StVK-Hencky requires lambda > -2 mu / d");
      break;
    case EnergyKind::SplitNeoHookean:
      if (!(mu > 0.0)) throw ConfigError("split Neo-Hookean requires mu > 0");
      if (!(bulk > 0.0)) throw ConfigError("split Neo-Hookean requires bulk modulus > 0");
      break;
    case EnergyKind::WaterJ:
      if (!(bulk > 0.0)) throw ConfigError("water requires bulk modulus > 0");
      if (plasticity != PlasticityKind::None) throw ConfigError("water does not take a plasticity model");
      break;
  }
  switch (plasticity) {
    case PlasticityKind::None:
      break;
    case PlasticityKind::VonMises:
      if (!(yield_stress > 0.0)) throw ConfigError("von Mises requires yield_stress > 0");
      break;
    case PlasticityKind::DruckerPrager:
      if (!(friction_angle_deg > 0.0 && friction_angle_deg < 90.0))
        throw ConfigError("Drucker-Prager friction angle must lie in (0, 90) degrees");
      break;
    case PlasticityKind::Extension:
      if (!extension) throw ConfigError("plasticity extension selected but none registered");
      break;
  }
}

}  // namespace mpmlite
