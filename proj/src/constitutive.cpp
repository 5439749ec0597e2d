#include "mpmlite/constitutive.hpp"

#include "mpmlite/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mpmlite {

namespace {

template <int dim>
void require_symmetric(const Mat<dim>& tau, const char* who) {
  const double scale = 1.0 + tau.cwiseAbs().maxCoeff();
  if ((tau - tau.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ContractViolation(std::string(who) + ": stress is not symmetric");
  if (!tau.allFinite()) throw ContractViolation(std::string(who) + ": non-finite stress");
}

// log1p(x)/x without cancellation near 0.
double log1p_over(double x) {
  if (std::abs(x) < 1e-6) return 1.0 - x / 2.0 + x * x / 3.0;
  return std::log1p(x) / x;
}

template <int dim>
double product(const Vec<dim>& v) {
  double p = 1.0;
  for (int a = 0; a < dim; ++a) p *= v[a];
  return p;
}

}  // namespace

template <int dim>
SymmetricEigen<dim> symmetric_eigen(const Mat<dim>& A) {
  Eigen::SelfAdjointEigenSolver<Mat<dim>> es(0.5 * (A + A.transpose()));
  SymmetricEigen<dim> out;
  // Eigen returns ascending order.
  for (int a = 0; a < dim; ++a) {
    out.values[a] = es.eigenvalues()[dim - 1 - a];
    out.vectors.col(a) = es.eigenvectors().col(dim - 1 - a);
  }
  if (out.vectors.determinant() < 0.0) out.vectors.col(dim - 1) *= -1.0;
  return out;
}

template <int dim>
PolarSvd<dim> polar_svd(const Mat<dim>& F) {
  Eigen::JacobiSVD<Mat<dim>> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  PolarSvd<dim> out{svd.matrixU(), svd.matrixV(), svd.singularValues()};
  if (out.U.determinant() < 0.0) {
    out.U.col(dim - 1) *= -1.0;
    out.sigma[dim - 1] *= -1.0;
  }
  if (out.V.determinant() < 0.0) {
    out.V.col(dim - 1) *= -1.0;
    out.sigma[dim - 1] *= -1.0;
  }
  return out;
}

// --- forward stresses -------------------------------------------------------

template <int dim>
Mat<dim> stress_stvk_hencky(const Mat<dim>& F, double mu, double lambda) {
  if (!(F.determinant() > 0.0)) throw InvertedElementError("StVK-Hencky stress: det F <= 0");
  const PolarSvd<dim> svd = polar_svd<dim>(F);
  Vec<dim> e = svd.sigma.array().log().matrix();
  const double s = e.sum();
  Vec<dim> tau_i = 2.0 * mu * e + Vec<dim>::Constant(lambda * s);
  return svd.U * tau_i.asDiagonal() * svd.U.transpose();
}

template <int dim>
Mat<dim> stress_split_nh(const Mat<dim>& F, double mu, double bulk) {
  const double J = F.determinant();
  if (!(J > 0.0)) throw InvertedElementError("split Neo-Hookean stress: det F <= 0");
  const Mat<dim> b = F * F.transpose();
  const Mat<dim> dev_b = b - (b.trace() / dim) * Mat<dim>::Identity();
  return mu * std::pow(J, -2.0 / dim) * dev_b + 0.5 * bulk * (J * J - 1.0) * Mat<dim>::Identity();
}

double water_pressure(double J, double bulk) { return bulk * J * (J - 1.0); }

template <int dim>
Mat<dim> kirchhoff_stress(const MaterialModel& m, const Mat<dim>& F) {
  switch (m.kind) {
    case EnergyKind::StvkHencky:
      return stress_stvk_hencky<dim>(F, m.mu, m.lambda);
    case EnergyKind::SplitNeoHookean:
      return stress_split_nh<dim>(F, m.mu, m.bulk);
    case EnergyKind::WaterJ: {
      const double J = F.determinant();
      if (!(J > 0.0)) throw InvertedElementError("water stress: J <= 0");
      return water_pressure(J, m.bulk) * Mat<dim>::Identity();
    }
  }
  return Mat<dim>::Zero();
}

// --- energies ---------------------------------------------------------------

double energy_stvk_hencky(std::span<const double> sigma, double mu, double lambda) {
  double sum_sq = 0.0, s = 0.0;
  for (double sv : sigma) {
    const double e = std::log(sv);
    sum_sq += e * e;
    s += e;
  }
  return mu * sum_sq + 0.5 * lambda * s * s;
}

double energy_split_nh(std::span<const double> sigma, double mu, double bulk) {
  const double d = static_cast<double>(sigma.size());
  double J = 1.0, I = 0.0;
  for (double sv : sigma) {
    J *= sv;
    I += sv * sv;
  }
  return 0.5 * mu * (std::pow(J, -2.0 / d) * I - d) + 0.25 * bulk * (J * J - 1.0 - 2.0 * std::log(J));
}

double energy_water(double J, double bulk) { return 0.5 * bulk * (J - 1.0) * (J - 1.0); }

template <int dim>
double energy_density(const MaterialModel& m, const Mat<dim>& F) {
  const double J = F.determinant();
  if (!(J > 0.0)) return std::numeric_limits<double>::infinity();
  if (m.kind == EnergyKind::WaterJ) return energy_water(J, m.bulk);
  const PolarSvd<dim> svd = polar_svd<dim>(F);
  const std::span<const double> s(svd.sigma.data(), dim);
  if (m.kind == EnergyKind::StvkHencky) return energy_stvk_hencky(s, m.mu, m.lambda);
  return energy_split_nh(s, m.mu, m.bulk);
}

template <int dim>
PrincipalResponse<dim> principal_response(const MaterialModel& m, const Vec<dim>& sigma) {
  PrincipalResponse<dim> r;
  constexpr auto pairs = principal_pairs<dim>();
  const std::span<const double> s(sigma.data(), dim);
  switch (m.kind) {
    case EnergyKind::StvkHencky: {
      const double mu = m.mu, lambda = m.lambda;
      const Vec<dim> e = sigma.array().log().matrix();
      const double tr = e.sum();
      r.psi = energy_stvk_hencky(s, mu, lambda);
      for (int i = 0; i < dim; ++i) {
        r.dpsi[i] = (2.0 * mu * e[i] + lambda * tr) / sigma[i];
        for (int j = 0; j < dim; ++j) {
          r.d2psi(i, j) = ((i == j ? 2.0 * mu : 0.0) + lambda) / (sigma[i] * sigma[j]);
          if (i == j) r.d2psi(i, j) -= (2.0 * mu * e[i] + lambda * tr) / (sigma[i] * sigma[i]);
        }
      }
      for (int k = 0; k < PrincipalResponse<dim>::kPairs; ++k) {
        const int i = pairs[k][0], j = pairs[k][1];
        const double x = sigma[i] / sigma[j] - 1.0;
        r.pair_plus[k] = (2.0 * mu * (log1p_over(x) - e[j]) - lambda * tr) / (sigma[i] * sigma[j]);
      }
      break;
    }
    case EnergyKind::SplitNeoHookean: {
      const double mu = m.mu, kappa = m.bulk, d = dim;
      const double J = product<dim>(sigma);
      const double I = sigma.squaredNorm();
      const double c = std::pow(J, -2.0 / d);
      const double vol = 0.5 * kappa * (J * J - 1.0);
      r.psi = energy_split_nh(s, mu, kappa);
      for (int i = 0; i < dim; ++i) {
        const double dev_i = sigma[i] - I / (d * sigma[i]);
        r.dpsi[i] = mu * c * dev_i + vol / sigma[i];
        for (int j = 0; j < dim; ++j) {
          const double dij = i == j ? 1.0 : 0.0;
          r.d2psi(i, j) = -(2.0 / d) * mu * c / sigma[j] * dev_i +
                          mu * c * (dij - 2.0 * sigma[j] / (d * sigma[i]) + dij * I / (d * sigma[i] * sigma[i])) +
                          kappa * J * J / (sigma[i] * sigma[j]) - dij * vol / (sigma[i] * sigma[i]);
        }
      }
      for (int k = 0; k < PrincipalResponse<dim>::kPairs; ++k) {
        const int i = pairs[k][0], j = pairs[k][1];
        r.pair_plus[k] = mu * c * (1.0 + I / (d * sigma[i] * sigma[j])) - vol / (sigma[i] * sigma[j]);
      }
      break;
    }
    case EnergyKind::WaterJ: {
      // psi(sigma) = kappa/2 (prod sigma - 1)^2
      const double kappa = m.bulk;
      const double J = product<dim>(sigma);
      r.psi = energy_water(J, kappa);
      for (int i = 0; i < dim; ++i) {
        r.dpsi[i] = kappa * (J - 1.0) * J / sigma[i];
        for (int j = 0; j < dim; ++j) {
          r.d2psi(i, j) = kappa * (2.0 * J - 1.0) * J / (sigma[i] * sigma[j]);
          if (i == j) r.d2psi(i, j) -= kappa * (J - 1.0) * J / (sigma[i] * sigma[i]);
        }
      }
      for (int k = 0; k < PrincipalResponse<dim>::kPairs; ++k) {
        const int i = pairs[k][0], j = pairs[k][1];
        r.pair_plus[k] = -kappa * (J - 1.0) * J / (sigma[i] * sigma[j]);
      }
      break;
    }
  }
  return r;
}

// --- inversion --------------------------------------------------------------

template <int dim>
SpectralStretch<dim> invert_stvk_hencky(const Mat<dim>& tau, double mu, double lambda) {
  if (!(mu > 0.0) || !(lambda > -2.0 * mu / dim))
    throw ConfigError("StVK-Hencky inversion requires mu > 0 and lambda > -2 mu / d");
  require_symmetric<dim>(tau, "invert_stvk_hencky");
  const SymmetricEigen<dim> eig = symmetric_eigen<dim>(tau);
  const double s = eig.values.sum() / (2.0 * mu + dim * lambda);
  SpectralStretch<dim> out;
  out.U = eig.vectors;
  for (int a = 0; a < dim; ++a) out.sigma[a] = std::exp((eig.values[a] - lambda * s) / (2.0 * mu));
  return out;
}

namespace {
// J from the spherical part alpha = tr(tau)/d of the split Neo-Hookean stress.
double split_nh_volume(double alpha, double bulk) {
  const double J2 = 1.0 + 2.0 * alpha / bulk;
  if (!(J2 > 0.0)) throw InversionDomainError("split Neo-Hookean inversion: inadmissible stress trace");
  return std::sqrt(J2);
}
}  // namespace

SpectralStretch<2> invert_split_nh_2d(const Mat<2>& tau, double mu, double bulk) {
  if (!(mu > 0.0) || !(bulk > 0.0)) throw ConfigError("split Neo-Hookean inversion requires mu, kappa > 0");
  require_symmetric<2>(tau, "invert_split_nh_2d");
  const SymmetricEigen<2> eig = symmetric_eigen<2>(tau);
  const double alpha = 0.5 * eig.values.sum();
  const double J = split_nh_volume(alpha, bulk);
  // tau_1 >= tau_2, so delta >= 0 and beta_1 is the larger root
  const double delta = (eig.values[0] - alpha) * J / mu;
  const double m = std::sqrt(J * J + delta * delta);
  const double big = m + std::abs(delta);
  SpectralStretch<2> out;
  out.U = eig.vectors;
  out.sigma[0] = std::sqrt(big);
  out.sigma[1] = std::sqrt(J * J / big);
  if (delta < 0.0) std::swap(out.sigma[0], out.sigma[1]);
  return out;
}

CubicProblem CubicProblem::from_offsets(const std::array<double, 3>& offsets, double J) {
  CubicProblem pr;
  pr.offsets = offsets;
  const auto& d = offsets;
  pr.s2 = d[0] * d[1] + d[1] * d[2] + d[2] * d[0];
  pr.s3 = d[0] * d[1] * d[2];
  pr.target = J * J;
  pr.p = pr.s2;
  pr.q = pr.s3 - pr.target;
  pr.discriminant = 0.25 * pr.q * pr.q + (pr.p / 3.0) * (pr.p / 3.0) * (pr.p / 3.0);
  return pr;
}

CubicRoot solve_admissible_cubic(const CubicProblem& prob) {
  const double p = prob.p, q = prob.q;
  const auto& d = prob.offsets;
  const double dmin = std::min({d[0], d[1], d[2]});
  const double dmax = std::max({std::abs(d[0]), std::abs(d[1]), std::abs(d[2])});
  const auto f = [&](double m) { return (m * m + p) * m + q; };
  const auto polish = [&](double m) {
    const double fp = 3.0 * m * m + p;
    if (fp == 0.0) return m;
    const double mn = m - f(m) / fp;
    return std::abs(f(mn)) <= std::abs(f(m)) ? mn : m;
  };

  std::array<double, 3> roots{};
  int count = 0;
  CardanoBranch branch;
  if (prob.discriminant >= 0.0) {
    branch = CardanoBranch::OneReal;
    const double sd = std::sqrt(prob.discriminant);
    // std::cbrt keeps the sign of its argument.
    roots[count++] = std::cbrt(-0.5 * q + sd) + std::cbrt(-0.5 * q - sd);
  } else {
    branch = CardanoBranch::ThreeReal;
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp((3.0 * q / (2.0 * p)) * std::sqrt(-3.0 / p), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) roots[count++] = r * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0);
  }

  int found = 0;
  double best = 0.0;
  for (int k = 0; k < count; ++k) {
    const double m = polish(roots[k]);
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(m) + dmax);
    if (m + dmin > tol) {
      if (found > 0 && std::abs(m - best) > 1e-9 * (std::abs(m) + dmax))
        throw InversionDomainError("cubic inversion: admissible root is not unique");
      if (found == 0) best = m;
      ++found;
    }
  }
  if (found == 0) throw InversionDomainError("cubic inversion: no admissible root");
  return {best, branch};
}

SpectralStretch<3> invert_split_nh_3d(const Mat<3>& tau, double mu, double bulk, CardanoBranch* branch) {
  if (!(mu > 0.0) || !(bulk > 0.0)) throw ConfigError("split Neo-Hookean inversion requires mu, kappa > 0");
  require_symmetric<3>(tau, "invert_split_nh_3d");
  const SymmetricEigen<3> eig = symmetric_eigen<3>(tau);
  const double alpha = eig.values.sum() / 3.0;
  const double J = split_nh_volume(alpha, bulk);
  const double scale = std::pow(J, 2.0 / 3.0) / mu;
  std::array<double, 3> delta{};
  for (int a = 0; a < 3; ++a) delta[a] = (eig.values[a] - alpha) * scale;
  const double mean = (delta[0] + delta[1] + delta[2]) / 3.0;
  for (double& v : delta) v -= mean;

  const CubicRoot root = solve_admissible_cubic(CubicProblem::from_offsets(delta, J));
  if (branch) *branch = root.branch;
  std::array<double, 3> beta{};
  int smallest = 0;
  for (int a = 0; a < 3; ++a) {
    beta[a] = root.m + delta[a];
    if (beta[a] < beta[smallest]) smallest = a;
  }
  // the smallest beta loses digits to cancellation; recover it from prod beta = J^2
  const int o1 = (smallest + 1) % 3, o2 = (smallest + 2) % 3;
  beta[smallest] = J * J / (beta[o1] * beta[o2]);
  SpectralStretch<3> out;
  out.U = eig.vectors;
  for (int a = 0; a < 3; ++a) out.sigma[a] = std::sqrt(beta[a]);
  return out;
}

double invert_water(double pressure, double bulk, bool* clamped) {
  double disc = 1.0 + 4.0 * pressure / bulk;
  const bool clip = disc < 0.0;
  if (clip) disc = 0.0;
  if (clamped) *clamped = clip;
  return 0.5 * (1.0 + std::sqrt(disc));
}

template <int dim>
SpectralStretch<dim> invert_stress(const MaterialModel& m, const Mat<dim>& tau, CardanoBranch* branch,
                                   bool* clamped) {
  if (clamped) *clamped = false;
  switch (m.kind) {
    case EnergyKind::StvkHencky:
      return invert_stvk_hencky<dim>(tau, m.mu, m.lambda);
    case EnergyKind::SplitNeoHookean:
      if constexpr (dim == 2)
        return invert_split_nh_2d(tau, m.mu, m.bulk);
      else
        return invert_split_nh_3d(tau, m.mu, m.bulk, branch);
    case EnergyKind::WaterJ: {
      const double J = invert_water(tau.trace() / dim, m.bulk, clamped);
      SpectralStretch<dim> out;
      out.sigma.setConstant(std::pow(J, 1.0 / dim));
      return out;
    }
  }
  return {};
}

// --- plasticity -------------------------------------------------------------

template <int dim>
double von_mises_yield(const Vec<dim>& hencky, double mu, double yield_stress) {
  const Vec<dim> dev = hencky - Vec<dim>::Constant(hencky.sum() / dim);
  return 2.0 * mu * dev.norm() - std::sqrt(2.0 / 3.0) * yield_stress;
}

namespace {
double dp_alpha(double friction_angle_deg) {
  const double s = std::sin(friction_angle_deg * std::numbers::pi / 180.0);
  return std::sqrt(2.0 / 3.0) * 2.0 * s / (3.0 - s);
}

template <int dim>
bool von_mises_project(Vec<dim>& e, double mu, double yield_stress) {
  const double tr = e.sum();
  const Vec<dim> dev = e - Vec<dim>::Constant(tr / dim);
  const double norm = 2.0 * mu * dev.norm();
  const double bound = std::sqrt(2.0 / 3.0) * yield_stress;
  if (norm <= bound) return false;
  e = Vec<dim>::Constant(tr / dim) + dev * (bound / norm);
  return true;
}

template <int dim>
bool drucker_prager_project(Vec<dim>& e, double mu, double lambda, double phi) {
  const double tr = e.sum();
  if (tr > 0.0) {
    const bool changed = e.squaredNorm() > 0.0;
    e.setZero();
    return changed;
  }
  const Vec<dim> dev = e - Vec<dim>::Constant(tr / dim);
  const double dev_norm = dev.norm();
  const double dgamma = dev_norm + (dim * lambda + 2.0 * mu) / (2.0 * mu) * tr * dp_alpha(phi);
  if (dgamma <= 0.0) return false;
  e -= dgamma * dev / dev_norm;
  return true;
}
}  // namespace

template <int dim>
double drucker_prager_yield(const Vec<dim>& hencky, double mu, double lambda, double friction_angle_deg) {
  const double tr = hencky.sum();
  const Vec<dim> dev = hencky - Vec<dim>::Constant(tr / dim);
  return dev.norm() + (dim * lambda + 2.0 * mu) / (2.0 * mu) * tr * dp_alpha(friction_angle_deg);
}

template <int dim>
SpectralStretch<dim> return_map_von_mises(const SpectralStretch<dim>& trial, double mu, double yield_stress) {
  Vec<dim> e = trial.sigma.array().log().matrix();
  SpectralStretch<dim> out = trial;
  if (von_mises_project<dim>(e, mu, yield_stress)) out.sigma = e.array().exp().matrix();
  return out;
}

template <int dim>
SpectralStretch<dim> return_map_drucker_prager(const SpectralStretch<dim>& trial, double mu, double lambda,
                                               double friction_angle_deg) {
  Vec<dim> e = trial.sigma.array().log().matrix();
  SpectralStretch<dim> out = trial;
  if (drucker_prager_project<dim>(e, mu, lambda, friction_angle_deg)) out.sigma = e.array().exp().matrix();
  return out;
}

template <int dim>
bool project_plastic(const MaterialModel& m, Vec<dim>& sigma) {
  if (m.plasticity == PlasticityKind::None) return false;
  Vec<dim> e = sigma.array().log().matrix();
  bool changed = false;
  switch (m.plasticity) {
    case PlasticityKind::None:
      break;
    case PlasticityKind::VonMises:
      changed = von_mises_project<dim>(e, m.mu, m.yield_stress);
      break;
    case PlasticityKind::DruckerPrager:
      changed = drucker_prager_project<dim>(e, m.mu, m.effective_lambda(dim), m.friction_angle_deg);
      break;
    case PlasticityKind::Extension:
      changed = m.extension->project(std::span<double>(e.data(), dim), m.mu, m.effective_lambda(dim));
      break;
  }
  if (changed) sigma = e.array().exp().matrix();
  return changed;
}

#define MPMLITE_INSTANTIATE(D)                                                                                \
  template SymmetricEigen<D> symmetric_eigen<D>(const Mat<D>&);                                               \
  template PolarSvd<D> polar_svd<D>(const Mat<D>&);                                                           \
  template Mat<D> stress_stvk_hencky<D>(const Mat<D>&, double, double);                                       \
  template Mat<D> stress_split_nh<D>(const Mat<D>&, double, double);                                          \
  template Mat<D> kirchhoff_stress<D>(const MaterialModel&, const Mat<D>&);                                   \
  template double energy_density<D>(const MaterialModel&, const Mat<D>&);                                     \
  template PrincipalResponse<D> principal_response<D>(const MaterialModel&, const Vec<D>&);                   \
  template SpectralStretch<D> invert_stvk_hencky<D>(const Mat<D>&, double, double);                           \
  template SpectralStretch<D> invert_stress<D>(const MaterialModel&, const Mat<D>&, CardanoBranch*, bool*);   \
  template SpectralStretch<D> return_map_von_mises<D>(const SpectralStretch<D>&, double, double);             \
  template SpectralStretch<D> return_map_drucker_prager<D>(const SpectralStretch<D>&, double, double, double); \
  template double von_mises_yield<D>(const Vec<D>&, double, double);                                          \
  template double drucker_prager_yield<D>(const Vec<D>&, double, double, double);                             \
  template bool project_plastic<D>(const MaterialModel&, Vec<D>&);

MPMLITE_INSTANTIATE(2)
MPMLITE_INSTANTIATE(3)
#undef MPMLITE_INSTANTIATE

}  // namespace mpmlite
