#pragma once

// Shared scalar/vector types, error taxonomy, and seeded random streams.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace opm {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kInfTau = std::numeric_limits<double>::infinity();

/// Inner product <u, v> = sum_k u_k conj(v_k); the second argument is conjugated.
inline Complex inner(const CVec& u, const CVec& v) { return v.dot(u); }
inline Complex inner(const Vec& u, const CVec& v) { return v.dot(u.cast<Complex>()); }

// ---------------------------------------------------------------------------
// Errors. Every failure mode carries a stable machine-readable code so runs
// can record it in summary.json.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define OPM_DEFINE_ERROR(Name, code_str)                       \
  class Name : public Error {                                  \
   public:                                                     \
    explicit Name(const std::string& what)                     \
        : Error(code_str, std::string(code_str) + ": " + what) {} \
  }

OPM_DEFINE_ERROR(NonDiagonalizableError, "non_diagonalizable");
OPM_DEFINE_ERROR(DimensionMismatchError, "dimension_mismatch");
OPM_DEFINE_ERROR(DivergentLimitError, "divergent_limit");
OPM_DEFINE_ERROR(RootNotFoundError, "root_not_found");
OPM_DEFINE_ERROR(InsufficientSamplesError, "insufficient_samples");
OPM_DEFINE_ERROR(ZeroVarianceError, "zero_variance");
OPM_DEFINE_ERROR(ZeroParameterizationError, "zero_parameterization");
OPM_DEFINE_ERROR(UninitializedMemoryError, "uninitialized_memory");
OPM_DEFINE_ERROR(HistoryTooShortError, "history_too_short");
OPM_DEFINE_ERROR(ResonanceViolationError, "resonance_violation");
OPM_DEFINE_ERROR(ZeroEigenvalueError, "zero_eigenvalue");
OPM_DEFINE_ERROR(NonRealOutputError, "non_real_output");
OPM_DEFINE_ERROR(TooShortError, "too_short");
OPM_DEFINE_ERROR(ConfigError, "config_error");

#undef OPM_DEFINE_ERROR

/// Integration blow-up; carries the time at which the guard tripped.
class DivergedError : public Error {
 public:
  DivergedError(double t, double norm)
      : Error("diverged", "diverged: state norm " + std::to_string(norm) +
                              " at t = " + std::to_string(t)),
        t_fail_(t) {}
  double t_fail() const noexcept { return t_fail_; }

 private:
  double t_fail_;
};

/// Validity breach of the original-coordinate reduced equation (negative
/// discriminant under the square root); carries the offending state.
class NegativeDiscriminantError : public Error {
 public:
  NegativeDiscriminantError(double t, double y, double disc)
      : Error("negative_discriminant",
              "negative_discriminant: " + std::to_string(disc) + " at t = " +
                  std::to_string(t) + ", y = " + std::to_string(y)) {}
};

// ---------------------------------------------------------------------------
// Random streams. All randomness flows from one base seed; named streams are
// derived with FNV-1a so that realization k of stream "name" is reproducible
// independently of execution order or thread count.
// ---------------------------------------------------------------------------

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(base);
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  mix(index);
  return h;
}

/// Standard-normal generator. Box-Muller over mt19937_64 uniforms, so output
/// does not depend on the standard library's normal_distribution internals.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double uniform01() {
    // 53-bit mantissa uniform in [0, 1).
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace opm
