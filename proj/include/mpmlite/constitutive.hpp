#pragma once

// Isotropic hyperelastic energies, Kirchhoff stresses, closed-form
// stress-to-stretch inversion and Hencky-space return mappings.

#include "mpmlite/material.hpp"
#include "mpmlite/types.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace mpmlite {

/// Principal directions and stretches of a symmetric positive-definite
/// stretch tensor S = U diag(sigma) U^T.
template <int dim>
struct SpectralStretch {
  Mat<dim> U = Mat<dim>::Identity();
  Vec<dim> sigma = Vec<dim>::Ones();

  Mat<dim> assemble() const { return U * sigma.asDiagonal() * U.transpose(); }
};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and a right-handed basis.
template <int dim>
struct SymmetricEigen {
  Mat<dim> vectors;
  Vec<dim> values;
};

template <int dim>
SymmetricEigen<dim> symmetric_eigen(const Mat<dim>& A);

/// F = U diag(sigma) V^T with U, V proper rotations. sigma[dim-1] carries
/// the sign of det F.
template <int dim>
struct PolarSvd {
  Mat<dim> U, V;
  Vec<dim> sigma;
};

template <int dim>
PolarSvd<dim> polar_svd(const Mat<dim>& F);

// --- forward stresses -------------------------------------------------------

template <int dim>
Mat<dim> stress_stvk_hencky(const Mat<dim>& F, double mu, double lambda);

template <int dim>
Mat<dim> stress_split_nh(const Mat<dim>& F, double mu, double bulk);

/// Kirchhoff pressure pi(J) = kappa J (J - 1).
double water_pressure(double J, double bulk);

/// Kirchhoff stress of a solid material at deformation F.
template <int dim>
Mat<dim> kirchhoff_stress(const MaterialModel& m, const Mat<dim>& F);

// --- energies ---------------------------------------------------------------

double energy_stvk_hencky(std::span<const double> sigma, double mu, double lambda);
double energy_split_nh(std::span<const double> sigma, double mu, double bulk);
double energy_water(double J, double bulk);

/// psi(F); +infinity when det F <= 0.
template <int dim>
double energy_density(const MaterialModel& m, const Mat<dim>& F);

/// Energy and principal-stretch derivatives needed for P and dP/dF.
/// pair_plus[k] holds (psi_i - psi_j)/(sigma_i - sigma_j) for pair k,
/// evaluated without cancellation when sigma_i ~ sigma_j.
template <int dim>
struct PrincipalResponse {
  static constexpr int kPairs = dim == 2 ? 1 : 3;
  double psi = 0.0;
  Vec<dim> dpsi = Vec<dim>::Zero();
  Mat<dim> d2psi = Mat<dim>::Zero();
  std::array<double, kPairs> pair_plus{};
};

template <int dim>
constexpr std::array<std::array<int, 2>, PrincipalResponse<dim>::kPairs> principal_pairs() {
  if constexpr (dim == 2)
    return {{{0, 1}}};
  else
    return {{{0, 1}, {0, 2}, {1, 2}}};
}

template <int dim>
PrincipalResponse<dim> principal_response(const MaterialModel& m, const Vec<dim>& sigma);

// --- inversion --------------------------------------------------------------

template <int dim>
SpectralStretch<dim> invert_stvk_hencky(const Mat<dim>& tau, double mu, double lambda);

SpectralStretch<2> invert_split_nh_2d(const Mat<2>& tau, double mu, double bulk);

enum class CardanoBranch { OneReal, ThreeReal };

/// Depressed cubic m^3 + p m + q = 0 built from deviatoric offsets.
struct CubicProblem {
  double p = 0.0;
  double q = 0.0;
  double discriminant = 0.0;
  std::array<double, 3> offsets{};
  double s2 = 0.0;
  double s3 = 0.0;
  double target = 1.0;  // J^2

  static CubicProblem from_offsets(const std::array<double, 3>& offsets, double J);
};

struct CubicRoot {
  double m;
  CardanoBranch branch;
};

/// Root of the cubic with m + offsets_i > 0 for all i.
CubicRoot solve_admissible_cubic(const CubicProblem& prob);

SpectralStretch<3> invert_split_nh_3d(const Mat<3>& tau, double mu, double bulk,
                                      CardanoBranch* branch = nullptr);

/// J on the positive branch of pi = kappa J (J - 1). The discriminant is
/// clamped at zero; `clamped` reports whether that happened.
double invert_water(double pressure, double bulk, bool* clamped = nullptr);

/// Dispatch on the material's energy. Water materials return sigma_i =
/// J_base^(1/d) with U = I.
template <int dim>
SpectralStretch<dim> invert_stress(const MaterialModel& m, const Mat<dim>& tau,
                                   CardanoBranch* branch = nullptr, bool* clamped = nullptr);

// --- plasticity -------------------------------------------------------------

template <int dim>
SpectralStretch<dim> return_map_von_mises(const SpectralStretch<dim>& trial, double mu, double yield_stress);

template <int dim>
SpectralStretch<dim> return_map_drucker_prager(const SpectralStretch<dim>& trial, double mu, double lambda,
                                               double friction_angle_deg);

/// von Mises yield function ||dev(2 mu e)|| - sqrt(2/3) sigma_y.
template <int dim>
double von_mises_yield(const Vec<dim>& hencky, double mu, double yield_stress);

/// Drucker-Prager yield function in Hencky-strain space.
template <int dim>
double drucker_prager_yield(const Vec<dim>& hencky, double mu, double lambda, double friction_angle_deg);

/// Apply the material's return mapping to principal stretches. Returns
/// true when the state was projected.
template <int dim>
bool project_plastic(const MaterialModel& m, Vec<dim>& sigma);

}  // namespace mpmlite
