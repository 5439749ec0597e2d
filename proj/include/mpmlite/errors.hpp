#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpmlite {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad scene, material, or solver parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A position fell outside the region where a kernel stencil fits.
class OutOfDomainError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// det F <= 0 where a constitutive evaluation needs a positive volume.
class InvertedElementError : public Error {
 public:
  using Error::Error;
};

/// Stress-to-stretch inversion has no admissible solution.
class InversionDomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite stress or state tied to a particle.
class ConstitutiveError : public Error {
 public:
  ConstitutiveError(std::size_t particle, const std::string& what)
      : Error("particle " + std::to_string(particle) + ": " + what), particle_(particle) {}
  std::size_t particle() const { return particle_; }

 private:
  std::size_t particle_;
};

/// NaN/Inf appeared in grid or particle state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mpmlite
