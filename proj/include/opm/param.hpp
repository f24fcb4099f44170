#pragma once

// Closed-form manifold parameterizations of unresolved eigenmode amplitudes.
//
// For a quadratic system in eigen coordinates, the n-th unresolved amplitude
// is parameterized by
//   Phi_n(X) = K^n + sum_i L^n_i X_i + sum_{ij} Q^n_{ij} X_i X_j,
// whose coefficients come from integrating an auxiliary backward-forward
// system over a horizon tau_n (the per-mode free parameter):
//   Q^n_{ij} = D^n_{ij}(tau) B^n_{ij},
//   L^n_i    = sum_j V^n_{ij}(tau) F_j (B^n_{ij} + B^n_{ji}),
//   K^n      = sum_{ij} U^n_{ij}(tau) B^n_{ij} F_i F_j
//              - (1 - e^{tau lambda_n}) / lambda_n * F_n.
// tau = +inf reproduces the classical invariant-manifold coefficients when
// the non-resonance conditions hold; tau = 0 gives the zero (Galerkin) map.
//
// Under time-dependent forcing sigma_n f_n(t) of the unresolved modes, the
// map gains an exogenous memory term sigma_n I_n(t) with
//   dI/dt = kappa I + f_n(t) - e^{kappa tau} f_n(t - tau),  kappa = lambda_n,
// advanced here alongside the driving integrator from a replayable record of
// forcing increments.

#include "opm/core.hpp"
#include "opm/model.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace opm {

namespace detail {

// phi_k(z, tau) = int_0^tau s^k e^{-z s} ds for k = 0, 1, 2.
// tau = +inf requires Re z > 0. A short series covers |z tau| << 1, which
// keeps the coefficient formulas continuous across their branch boundaries.

inline Complex phi0(Complex z, double tau, const char* what) {
  if (std::isinf(tau)) {
    if (z.real() <= 0.0)
      throw DivergentLimitError(std::string(what) + ": tau = inf with Re <= 0");
    return 1.0 / z;
  }
  if (tau == 0.0) return {0.0, 0.0};
  const Complex zt = z * tau;
  if (std::abs(zt) < 1e-4)
    return tau * (1.0 - zt / 2.0 + zt * zt / 6.0 - zt * zt * zt / 24.0);
  return (1.0 - std::exp(-zt)) / z;
}

inline Complex phi1(Complex z, double tau, const char* what) {
  if (std::isinf(tau)) {
    if (z.real() <= 0.0)
      throw DivergentLimitError(std::string(what) + ": tau = inf with Re <= 0");
    return 1.0 / (z * z);
  }
  if (tau == 0.0) return {0.0, 0.0};
  const Complex zt = z * tau;
  if (std::abs(zt) < 1e-4)
    return tau * tau *
           (0.5 - zt / 3.0 + zt * zt / 8.0 - zt * zt * zt / 30.0);
  return (1.0 - std::exp(-zt) * (1.0 + zt)) / (z * z);
}

inline Complex phi2(Complex z, double tau, const char* what) {
  if (std::isinf(tau)) {
    if (z.real() <= 0.0)
      throw DivergentLimitError(std::string(what) + ": tau = inf with Re <= 0");
    return 2.0 / (z * z * z);
  }
  if (tau == 0.0) return {0.0, 0.0};
  const Complex zt = z * tau;
  if (std::abs(zt) < 1e-4)
    return tau * tau * tau *
           (1.0 / 3.0 - zt / 4.0 + zt * zt / 10.0 - zt * zt * zt / 36.0);
  return (2.0 - std::exp(-zt) * (2.0 + 2.0 * zt + zt * zt)) / (z * z * z);
}

inline constexpr double kZeroLambdaTol = 1e-8;

}  // namespace detail

/// D^n_{ij}(tau) = (1 - exp(-delta tau)) / delta with delta = l_i + l_j - l_n;
/// equals tau when delta = 0, and 1/delta at tau = +inf (Re delta > 0).
inline Complex coeff_D(double tau, Complex li, Complex lj, Complex ln) {
  if (tau < 0.0) throw ConfigError("coeff_D: tau must be nonnegative");
  return detail::phi0(li + lj - ln, tau, "coeff_D");
}

/// Coefficient of B^n_{ij} F_i F_j in the constant-forcing parameterization;
/// four branches depending on whether lambda_i / lambda_j vanish.
inline Complex coeff_U(double tau, Complex li, Complex lj, Complex ln) {
  if (tau < 0.0) throw ConfigError("coeff_U: tau must be nonnegative");
  using detail::phi0;
  using detail::phi1;
  using detail::phi2;
  const bool zi = std::abs(li) < detail::kZeroLambdaTol;
  const bool zj = std::abs(lj) < detail::kZeroLambdaTol;
  if (!zi && !zj)
    return (phi0(li + lj - ln, tau, "coeff_U") - phi0(li - ln, tau, "coeff_U") -
            phi0(lj - ln, tau, "coeff_U") + phi0(-ln, tau, "coeff_U")) /
           (li * lj);
  if (!zi && zj)
    return (phi1(-ln, tau, "coeff_U") - phi1(li - ln, tau, "coeff_U")) / li;
  if (zi && !zj)
    return (phi1(-ln, tau, "coeff_U") - phi1(lj - ln, tau, "coeff_U")) / lj;
  return phi2(-ln, tau, "coeff_U");
}

/// Coefficient of F_j (B^n_{ij} + B^n_{ji}) X_i; two branches in lambda_j.
inline Complex coeff_V(double tau, Complex li, Complex lj, Complex ln) {
  if (tau < 0.0) throw ConfigError("coeff_V: tau must be nonnegative");
  using detail::phi0;
  using detail::phi1;
  if (std::abs(lj) >= detail::kZeroLambdaTol)
    return (phi0(li + lj - ln, tau, "coeff_V") -
            phi0(li - ln, tau, "coeff_V")) /
           lj;
  return -phi1(li - ln, tau, "coeff_V");
}

// ---------------------------------------------------------------------------
// Parameterization
// ---------------------------------------------------------------------------

enum class ParamKind { OpmConst, OpmTimeDep, InvariantManifold, Fmt, Zero };

inline const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::OpmConst: return "opm-const";
    case ParamKind::OpmTimeDep: return "opm-timedep";
    case ParamKind::InvariantManifold: return "im";
    case ParamKind::Fmt: return "fmt";
    case ParamKind::Zero: return "zero";
  }
  return "?";
}

struct ModeParam {
  int mode = 0;  // global mode index (0-based)
  double tau = 0.0;
  Complex lambda{0.0, 0.0};
  Complex constant{0.0, 0.0};
  CVec linear;     // size m_c
  CMat quadratic;  // m_c x m_c, symmetric
  Complex zeta{0.0, 0.0};
  Complex noise_coeff{0.0, 0.0};  // sigma_n; multiplies the memory integral
};

class Parameterization {
 public:
  ParamKind kind = ParamKind::Zero;
  int m_c = 0;
  int n_total = 0;
  std::vector<ModeParam> modes;  // modes[i] parameterizes global index m_c + i

  int n_param() const { return static_cast<int>(modes.size()); }
  bool has_memory() const { return kind == ParamKind::OpmTimeDep; }

  // --- Memory state (OpmTimeDep only; single-threaded, replayable) ---------

  struct MemoryState {
    bool initialized = false;
    double t = 0.0;
    double dt = 0.0;
    std::vector<Complex> integral;   // I_n per parameterized mode
    std::vector<long> delay_steps;   // round(tau_n / dt); -1 for tau = inf
    std::vector<Complex> decay;      // e^{kappa_n tau_n} (0 for tau = inf)
    std::vector<double> ring;        // recent forcing increments
    long steps = 0;
    long capacity = 0;
  };
  MemoryState memory;

  /// Starts the memory recurrence at time t0 with I = 0 (start-of-record
  /// convention: the delayed term activates once the history covers tau_n,
  /// which reproduces the growing-window integral exactly).
  void memory_begin(double t0, double dt, long capacity_override = 0) {
    if (!has_memory())
      throw ConfigError("memory_begin: parameterization carries no memory");
    if (!(dt > 0.0)) throw ConfigError("memory_begin: dt must be positive");
    memory = MemoryState{};
    memory.dt = dt;
    memory.t = t0;
    memory.integral.assign(modes.size(), Complex(0.0, 0.0));
    long max_delay = 0;
    for (const auto& mp : modes) {
      if (std::isinf(mp.tau)) {
        memory.delay_steps.push_back(-1);
        memory.decay.push_back(Complex(0.0, 0.0));
      } else {
        const long m = std::lround(mp.tau / dt);
        memory.delay_steps.push_back(m);
        memory.decay.push_back(std::exp(mp.lambda * mp.tau));
        max_delay = std::max(max_delay, m);
      }
    }
    memory.capacity = capacity_override > 0 ? capacity_override : max_delay + 1;
    for (long m : memory.delay_steps)
      if (m >= memory.capacity)
        throw HistoryTooShortError("ring capacity " +
                                   std::to_string(memory.capacity) +
                                   " < delay " + std::to_string(m));
    memory.ring.assign(static_cast<size_t>(std::max<long>(memory.capacity, 1)),
                       0.0);
    memory.initialized = true;
  }

  /// Initializes I_n(t0) by direct quadrature of the defining integral for a
  /// deterministic forcing defined before t0; one quadrature per mode.
  template <class F>
  void memory_begin_quadrature(F&& f, double t0, double dt) {
    memory_begin(t0, dt);
    for (size_t i = 0; i < modes.size(); ++i) {
      const Complex kappa = modes[i].lambda;
      double lo = std::isinf(modes[i].tau)
                      ? t0 - 40.0 / std::max(1e-12, -kappa.real())
                      : t0 - modes[i].tau;
      // Composite Simpson; the integrand is smooth.
      const int steps = 20000;
      const double h = (t0 - lo) / steps;
      Complex acc(0.0, 0.0);
      for (int k = 0; k <= steps; ++k) {
        const double s = lo + k * h;
        const double w = (k == 0 || k == steps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        acc += w * std::exp(-kappa * (s - t0)) * f(s);
      }
      memory.integral[i] = acc * h / 3.0;
    }
  }

  /// One forcing increment (f dt, or a Wiener increment dW): Euler /
  /// Euler-Maruyama update of every mode integral, with the delayed
  /// increment replayed from the ring.
  void memory_step(double increment) {
    require_memory();
    const long k = memory.steps;
    for (size_t i = 0; i < modes.size(); ++i) {
      Complex delayed(0.0, 0.0);
      const long m = memory.delay_steps[i];
      if (m == 0) {
        delayed = memory.decay[i] * increment;
      } else if (m > 0 && k >= m) {
        delayed = memory.decay[i] *
                  memory.ring[static_cast<size_t>((k - m) % memory.capacity)];
      }
      memory.integral[i] += memory.dt * modes[i].lambda * memory.integral[i] +
                            increment - delayed;
    }
    if (memory.capacity > 0)
      memory.ring[static_cast<size_t>(k % memory.capacity)] = increment;
    ++memory.steps;
    memory.t += memory.dt;
  }

  /// Euler step for a deterministic forcing known as a function of time; the
  /// delayed term is evaluated directly.
  template <class F>
  void memory_step_deterministic(F&& f) {
    require_memory();
    const double t = memory.t;
    for (size_t i = 0; i < modes.size(); ++i) {
      Complex delayed(0.0, 0.0);
      if (!std::isinf(modes[i].tau))
        delayed = memory.decay[i] * f(t - modes[i].tau);
      memory.integral[i] += memory.dt * (modes[i].lambda * memory.integral[i] +
                                         f(t) - delayed);
    }
    ++memory.steps;
    memory.t += memory.dt;
  }

  // --- Evaluation -----------------------------------------------------------

  Complex evaluate_mode(int i, const CVec& X, double t = 0.0) const {
    const ModeParam& mp = modes[static_cast<size_t>(i)];
    Complex v = mp.constant;
    if (mp.linear.size()) v += (mp.linear.array() * X.array()).sum();
    if (mp.quadratic.size()) v += Complex(X.transpose() * mp.quadratic * X);
    if (kind == ParamKind::OpmTimeDep) {
      require_memory();
      if (std::abs(t - memory.t) > 1e-9 * std::max(1.0, std::abs(t)) + 1e-12)
        throw UninitializedMemoryError(
            "memory state is at t = " + std::to_string(memory.t) +
            ", requested t = " + std::to_string(t));
      if (!std::isinf(mp.tau))
        v += std::exp(mp.lambda * mp.tau) * mp.zeta;
      v += mp.noise_coeff * memory.integral[static_cast<size_t>(i)];
    }
    return v;
  }

  /// Values of all parameterized modes, ordered m_c..N-1.
  CVec evaluate(const CVec& X, double t = 0.0) const {
    if (X.size() != m_c) throw DimensionMismatchError("evaluate: X size");
    CVec out(n_param());
    for (int i = 0; i < n_param(); ++i) out[i] = evaluate_mode(i, X, t);
    return out;
  }

 private:
  void require_memory() const {
    if (!has_memory() || !memory.initialized)
      throw UninitializedMemoryError("memory state not initialized");
  }
};

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace detail {

inline void check_split(const EigenModel& em, int m_c) {
  // m_c = N is the degenerate no-truncation case (empty parameterization).
  if (m_c <= 0 || m_c > em.n())
    throw DimensionMismatchError("m_c must satisfy 0 < m_c <= N");
  for (int j = 0; j < em.n(); ++j) {
    const int p = em.basis.conjugate_pairing[j];
    if ((j < m_c) != (p < m_c))
      throw DimensionMismatchError(
          "resolved/unresolved split separates a conjugate pair at mode " +
          std::to_string(j));
  }
}

inline Complex sym_b(const CMat& b, int i, int j) {
  return 0.5 * (b(i, j) + b(j, i));
}

inline std::string triple(int i, int j, int n) {
  return "(i=" + std::to_string(i + 1) + ", j=" + std::to_string(j + 1) +
         ", n=" + std::to_string(n + 1) + ")";
}

}  // namespace detail

/// Constant-forcing parameterization with per-mode backward horizons.
/// Divergent tau = +inf limits are reported with the offending (i, j, n)
/// unless the multiplying model coefficient vanishes.
inline Parameterization build_opm_const(const EigenModel& em, int m_c,
                                        const std::vector<double>& taus) {
  detail::check_split(em, m_c);
  if (static_cast<int>(taus.size()) != em.n() - m_c)
    throw DimensionMismatchError("build_opm_const: one tau per unresolved mode");

  const double b_scale = [&] {
    double s = 0.0;
    for (const auto& b : em.interaction) s = std::max(s, b.cwiseAbs().maxCoeff());
    return std::max(s, 1e-300);
  }();
  const double f_scale = std::max(em.forcing.cwiseAbs().maxCoeff(), 1e-300);

  Parameterization p;
  p.kind = ParamKind::OpmConst;
  p.m_c = m_c;
  p.n_total = em.n();
  for (int g = m_c; g < em.n(); ++g) {
    const double tau = taus[static_cast<size_t>(g - m_c)];
    const Complex ln = em.basis.lambdas[g];
    const CMat& b = em.interaction[g];
    ModeParam mp;
    mp.mode = g;
    mp.tau = tau;
    mp.lambda = ln;
    mp.linear = CVec::Zero(m_c);
    mp.quadratic = CMat::Zero(m_c, m_c);

    auto guarded = [&](auto&& compute, double multiplier_mag,
                       int i, int j) -> Complex {
      try {
        return compute();
      } catch (const DivergentLimitError&) {
        if (multiplier_mag <= 1e-13 * b_scale * std::max(1.0, f_scale * f_scale))
          return Complex(0.0, 0.0);
        throw DivergentLimitError("mode coefficient at " +
                                  detail::triple(i, j, g));
      }
    };

    for (int i = 0; i < m_c; ++i) {
      const Complex li = em.basis.lambdas[i];
      for (int j = 0; j < m_c; ++j) {
        const Complex lj = em.basis.lambdas[j];
        const Complex bs = detail::sym_b(b, i, j);
        if (std::abs(bs) > 0.0)
          mp.quadratic(i, j) =
              guarded([&] { return coeff_D(tau, li, lj, ln) * bs; },
                      std::abs(bs), i, j) ;
        const Complex bfull = b(i, j);
        const Complex ff = em.forcing[i] * em.forcing[j];
        if (std::abs(bfull * ff) > 0.0)
          mp.constant +=
              guarded([&] { return coeff_U(tau, li, lj, ln) * bfull * ff; },
                      std::abs(bfull * ff), i, j);
        const Complex cross = em.forcing[j] * (b(i, j) + b(j, i));
        if (std::abs(cross) > 0.0)
          mp.linear[i] +=
              guarded([&] { return coeff_V(tau, li, lj, ln) * cross; },
                      std::abs(cross), i, j);
      }
    }
    if (std::abs(em.forcing[g]) > 0.0)
      mp.constant += guarded(
          [&] { return detail::phi0(-ln, tau, "forcing term") * em.forcing[g]; },
          std::abs(em.forcing[g]), g, g);
    p.modes.push_back(std::move(mp));
  }
  return p;
}

/// Time-dependent variant: the constant-forcing tables plus the exogenous
/// memory term sigma_n I_n(t) and the optional e^{lambda tau} zeta offset.
inline Parameterization build_opm_timedep(
    const EigenModel& em, int m_c, const std::vector<double>& taus,
    const std::vector<Complex>& zetas = {}) {
  Parameterization p = build_opm_const(em, m_c, taus);
  p.kind = ParamKind::OpmTimeDep;
  for (size_t i = 0; i < p.modes.size(); ++i) {
    if (em.has_noise()) p.modes[i].noise_coeff = em.noise_eigen[p.modes[i].mode];
    if (!zetas.empty()) p.modes[i].zeta = zetas[i];
  }
  return p;
}

/// Invariant-manifold closure: Q^n_{ij} = B^n_{ij} / (l_i + l_j - l_n).
/// Requires Re(l_i + l_j - l_n) > 0 for every in-range triple.
inline Parameterization build_im(const EigenModel& em, int m_c) {
  detail::check_split(em, m_c);
  Parameterization p;
  p.kind = ParamKind::InvariantManifold;
  p.m_c = m_c;
  p.n_total = em.n();
  for (int g = m_c; g < em.n(); ++g) {
    const Complex ln = em.basis.lambdas[g];
    ModeParam mp;
    mp.mode = g;
    mp.tau = kInfTau;
    mp.lambda = ln;
    mp.linear = CVec::Zero(m_c);
    mp.quadratic = CMat::Zero(m_c, m_c);
    for (int i = 0; i < m_c; ++i)
      for (int j = 0; j < m_c; ++j) {
        const Complex delta =
            em.basis.lambdas[i] + em.basis.lambdas[j] - ln;
        if (delta.real() <= 0.0)
          throw ResonanceViolationError("Re(delta) <= 0 at " +
                                        detail::triple(i, j, g));
        mp.quadratic(i, j) = detail::sym_b(em.interaction[g], i, j) / delta;
      }
    p.modes.push_back(std::move(mp));
  }
  return p;
}

/// Stationary balance closure: Q^n_{ij} = -B^n_{ij} / l_n, plus the constant
/// -F_n / l_n which accounts for the forcing when the reference state is not
/// steady.
inline Parameterization build_fmt(const EigenModel& em, int m_c) {
  detail::check_split(em, m_c);
  Parameterization p;
  p.kind = ParamKind::Fmt;
  p.m_c = m_c;
  p.n_total = em.n();
  for (int g = m_c; g < em.n(); ++g) {
    const Complex ln = em.basis.lambdas[g];
    if (std::abs(ln) < 1e-12)
      throw ZeroEigenvalueError("lambda_" + std::to_string(g + 1));
    ModeParam mp;
    mp.mode = g;
    mp.tau = kInfTau;
    mp.lambda = ln;
    mp.linear = CVec::Zero(m_c);
    mp.quadratic = CMat::Zero(m_c, m_c);
    for (int i = 0; i < m_c; ++i)
      for (int j = 0; j < m_c; ++j)
        mp.quadratic(i, j) = -detail::sym_b(em.interaction[g], i, j) / ln;
    mp.constant = -em.forcing[g] / ln;
    p.modes.push_back(std::move(mp));
  }
  return p;
}

/// Galerkin truncation: all tables zero. The taus are informational (used by
/// the homological diagnostic).
inline Parameterization build_zero(const EigenModel& em, int m_c,
                                   const std::vector<double>& taus = {}) {
  detail::check_split(em, m_c);
  Parameterization p;
  p.kind = ParamKind::Zero;
  p.m_c = m_c;
  p.n_total = em.n();
  for (int g = m_c; g < em.n(); ++g) {
    ModeParam mp;
    mp.mode = g;
    mp.tau = taus.empty() ? 0.0 : taus[static_cast<size_t>(g - m_c)];
    mp.lambda = em.basis.lambdas[g];
    mp.linear = CVec::Zero(m_c);
    mp.quadratic = CMat::Zero(m_c, m_c);
    p.modes.push_back(std::move(mp));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Homological-equation residual (diagnostic)
// ---------------------------------------------------------------------------

/// Residual of the first-order PDE satisfied by finite-tau parameterizations
/// (forcing confined to the unresolved modes). Evaluates, per mode n and
/// sample X,
///   D Phi_n(X) . (Lambda_c X) - lambda_n Phi_n(X)
///     - [ G_n(X) - e^{tau l_n} G_n(e^{-tau Lambda_c} X) ]
///     - [ F_n (1 - e^{tau l_n}) ]
/// with the Jacobian taken by central finite differences, and returns the
/// max norm over samples. With `infinite_limit_rhs` the bracketed terms are
/// replaced by their tau -> inf limit G_n(X) + F_n.
inline double homological_residual(const Parameterization& p,
                                   const EigenModel& em,
                                   const std::vector<CVec>& X_samples,
                                   double fd_step = 1e-5,
                                   bool infinite_limit_rhs = false) {
  const int m_c = p.m_c;
  double worst = 0.0;
  for (const CVec& X : X_samples) {
    CVec v(m_c);
    for (int i = 0; i < m_c; ++i) v[i] = em.basis.lambdas[i] * X[i];
    // Central differences along v; exact for quadratic maps.
    const CVec phi_p = p.evaluate(X + fd_step * v);
    const CVec phi_m = p.evaluate(X - fd_step * v);
    const CVec phi_0 = p.evaluate(X);
    for (int i = 0; i < p.n_param(); ++i) {
      const int g = p.modes[static_cast<size_t>(i)].mode;
      const double tau = p.modes[static_cast<size_t>(i)].tau;
      const Complex ln = em.basis.lambdas[g];
      if (!infinite_limit_rhs && std::isinf(tau))
        throw ConfigError("homological_residual: finite tau required");
      const Complex lhs =
          (phi_p[i] - phi_m[i]) / (2.0 * fd_step) - ln * phi_0[i];

      auto g_n = [&](const CVec& x) {
        Complex acc(0.0, 0.0);
        for (int a = 0; a < m_c; ++a)
          for (int b = 0; b < m_c; ++b)
            acc += em.interaction[g](a, b) * x[a] * x[b];
        return acc;
      };
      Complex rhs;
      if (infinite_limit_rhs) {
        rhs = g_n(X) + em.forcing[g];
      } else {
        CVec xs(m_c);
        for (int a = 0; a < m_c; ++a)
          xs[a] = std::exp(-tau * em.basis.lambdas[a]) * X[a];
        const Complex decay = std::exp(tau * ln);
        rhs = g_n(X) - decay * g_n(xs) + em.forcing[g] * (1.0 - decay);
      }
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

}  // namespace opm
