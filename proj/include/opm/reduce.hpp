#pragma once

// Integration of full and reduced systems, and full-state reconstruction.
//
// Complex-valued systems built from a real matrix's eigenbasis keep their
// state conjugate-symmetric: after each RK4 step the conjugate-pair
// projection of Appendix-style bookkeeping is applied so roundoff cannot
// leak imaginary parts into physical reconstructions. SDE paths use
// Euler-Maruyama with a recorded increment stream so the same noise can
// drive several models.

#include "opm/core.hpp"
#include "opm/model.hpp"
#include "opm/param.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace opm {

struct Trajectory {
  enum class Coords { Physical, Eigen };
  Coords coords = Coords::Physical;
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<CVec> states;               // sample k is at time t0 + k dt
  std::vector<double> noise_increments;   // size states.size() - 1 when kept

  size_t size() const { return states.size(); }
  double time(size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double t_end() const { return states.empty() ? t0 : time(states.size() - 1); }

  std::vector<double> component_real(int j) const {
    std::vector<double> out(states.size());
    for (size_t k = 0; k < states.size(); ++k) out[k] = states[k][j].real();
    return out;
  }

  double max_imag_residue() const {
    double m = 0.0;
    for (const auto& s : states)
      m = std::max(m, s.imag().cwiseAbs().maxCoeff());
    return m;
  }
};

/// Conjugate-pair projection: pair members are averaged into an exact
/// conjugate pair, real modes keep only their real part. Idempotent.
inline void enforce_conjugacy(CVec& x, const std::vector<int>& pairing) {
  for (int j = 0; j < x.size(); ++j) {
    const int p = pairing[static_cast<size_t>(j)];
    if (p == j) {
      x[j] = Complex(x[j].real(), 0.0);
    } else if (p == j + 1) {
      const double a = 0.5 * (x[j].real() + x[p].real());
      const double b = 0.5 * (x[j].imag() - x[p].imag());
      x[j] = Complex(a, b);
      x[p] = Complex(a, -b);
    }
  }
}

/// Classical RK4 with per-step conjugacy enforcement and a divergence guard.
template <class Rhs>
Trajectory integrate_rk4_conjugate(Rhs&& rhs, const std::vector<int>& pairing,
                                   const CVec& x0, double t0, double t1,
                                   double dt, double guard = 1e6) {
  if (!(dt > 0.0)) throw ConfigError("integrate_rk4_conjugate: dt > 0 required");
  const long n_steps = std::lround((t1 - t0) / dt);
  Trajectory out;
  out.coords = Trajectory::Coords::Eigen;
  out.t0 = t0;
  out.dt = dt;
  out.states.reserve(static_cast<size_t>(n_steps) + 1);
  CVec x = x0;
  enforce_conjugacy(x, pairing);
  out.states.push_back(x);
  for (long k = 0; k < n_steps; ++k) {
    const double t = t0 + k * dt;
    const CVec k1 = rhs(t, x);
    const CVec k2 = rhs(t + 0.5 * dt, CVec(x + 0.5 * dt * k1));
    const CVec k3 = rhs(t + 0.5 * dt, CVec(x + 0.5 * dt * k2));
    const CVec k4 = rhs(t + dt, CVec(x + dt * k3));
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    enforce_conjugacy(x, pairing);
    if (x.norm() > guard) throw DivergedError(t + dt, x.norm());
    out.states.push_back(x);
  }
  return out;
}

/// Euler-Maruyama with a scalar Wiener process. Increments are either
/// replayed from `increments` (exact replay) or drawn as sqrt(dt) * N(0,1)
/// from `rng`; the consumed record is stored on the trajectory either way.
/// `hook(k, dW)` runs after each state update (memory terms advance there).
template <class Drift, class Hook>
Trajectory integrate_em(Drift&& drift, const CVec& diffusion, const CVec& x0,
                        double t0, double t1, double dt,
                        const std::vector<double>* increments,
                        GaussianStream* rng, Hook&& hook, double guard = 1e6) {
  if (!(dt > 0.0)) throw ConfigError("integrate_em: dt > 0 required");
  const long n_steps = std::lround((t1 - t0) / dt);
  if (increments && static_cast<long>(increments->size()) < n_steps)
    throw HistoryTooShortError("increment record shorter than step count");
  const double sq = std::sqrt(dt);
  Trajectory out;
  out.coords = Trajectory::Coords::Eigen;
  out.t0 = t0;
  out.dt = dt;
  out.states.reserve(static_cast<size_t>(n_steps) + 1);
  out.noise_increments.reserve(static_cast<size_t>(n_steps));
  CVec x = x0;
  out.states.push_back(x);
  for (long k = 0; k < n_steps; ++k) {
    const double t = t0 + k * dt;
    const double dw = increments ? (*increments)[static_cast<size_t>(k)]
                                 : (rng ? sq * rng->next() : 0.0);
    x += dt * drift(t, x) + diffusion * dw;
    hook(k, dw);
    if (x.norm() > guard) throw DivergedError(t + dt, x.norm());
    out.states.push_back(x);
    out.noise_increments.push_back(dw);
  }
  return out;
}

template <class Drift>
Trajectory integrate_em(Drift&& drift, const CVec& diffusion, const CVec& x0,
                        double t0, double t1, double dt,
                        const std::vector<double>* increments,
                        GaussianStream* rng = nullptr, double guard = 1e6) {
  return integrate_em(std::forward<Drift>(drift), diffusion, x0, t0, t1, dt,
                      increments, rng, [](long, double) {}, guard);
}

// ---------------------------------------------------------------------------
// Reduced systems
// ---------------------------------------------------------------------------

/// Reduced dynamics of the resolved amplitudes X under a parameterization of
/// the rest:
///   dX_j/dt = lambda_j X_j + u^T M_j u [+ cubic(u)] + F_j,
///   u = (X, Phi(X, t)),
/// where M_j is the full interaction table of resolved mode j; its blocks
/// are the resolved-resolved, resolved-unresolved cross, and
/// unresolved-unresolved closure terms. One RHS costs O(m_c N^2).
struct ReducedSystem {
  const EigenModel* eigen = nullptr;
  int m_c = 0;
  Parameterization param;             // may carry memory state
  std::vector<CMat> closure;          // closure[j] = interaction table of mode j
  std::vector<int> resolved_pairing;  // conjugate pairing restricted to X

  CVec full_state(const CVec& X, double t) const {
    CVec u(eigen->n());
    u.head(m_c) = X;
    u.tail(eigen->n() - m_c) = param.evaluate(X, t);
    return u;
  }

  CVec rhs(double t, const CVec& X) const {
    const CVec u = full_state(X, t);
    CVec out(m_c);
    for (int j = 0; j < m_c; ++j) {
      Complex acc = eigen->basis.lambdas[j] * X[j] + eigen->forcing[j];
      acc += Complex(u.transpose() * closure[j] * u);
      if (eigen->has_cubic()) {
        for (int m = 0; m < eigen->n(); ++m)
          acc += u[m] * Complex(u.transpose() *
                                eigen->cubic_interaction[j][m] * u);
      }
      out[j] = acc;
    }
    return out;
  }
};

inline ReducedSystem assemble_reduced(const EigenModel& em, int m_c,
                                      Parameterization param) {
  if (param.m_c != m_c || param.n_total != em.n())
    throw DimensionMismatchError("assemble_reduced: parameterization shape");
  if (param.n_param() != em.n() - m_c)
    throw DimensionMismatchError("assemble_reduced: incomplete mode coverage");
  for (int i = 0; i < param.n_param(); ++i)
    if (param.modes[static_cast<size_t>(i)].mode != m_c + i)
      throw DimensionMismatchError("assemble_reduced: mode ordering");
  ReducedSystem sys;
  sys.eigen = &em;
  sys.m_c = m_c;
  sys.param = std::move(param);
  sys.closure.assign(em.interaction.begin(), em.interaction.begin() + m_c);
  sys.resolved_pairing.assign(em.basis.conjugate_pairing.begin(),
                              em.basis.conjugate_pairing.begin() + m_c);
  return sys;
}

/// Deterministic integration of a reduced system (memory-free kinds).
inline Trajectory integrate_reduced_rk4(const ReducedSystem& sys,
                                        const CVec& X0, double t0, double t1,
                                        double dt, double guard = 1e6) {
  if (sys.param.has_memory())
    throw ConfigError("integrate_reduced_rk4: memory terms need the SDE driver");
  return integrate_rk4_conjugate(
      [&](double t, const CVec& X) { return sys.rhs(t, X); },
      sys.resolved_pairing, X0, t0, t1, dt, guard);
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

/// Physical-space reconstruction ref + sum_j X_j e_j + sum_n Phi_n e_n of a
/// reduced trajectory. Memory-carrying parameterizations are replayed from
/// the trajectory's own increment record. Throws NonRealOutputError when the
/// imaginary residue exceeds `imag_tol`.
inline Trajectory reconstruct(const Trajectory& reduced, const EigenModel& em,
                              Parameterization param, double imag_tol = 1e-6) {
  const bool memory = param.has_memory();
  if (memory) {
    bool needs_noise = false;
    for (const auto& mp : param.modes)
      if (std::abs(mp.noise_coeff) > 0.0) needs_noise = true;
    if (needs_noise && reduced.noise_increments.size() + 1 < reduced.size())
      throw ConfigError("reconstruct: trajectory lacks the increment record");
    param.memory_begin(reduced.t0, reduced.dt);
  }
  Trajectory out;
  out.coords = Trajectory::Coords::Physical;
  out.t0 = reduced.t0;
  out.dt = reduced.dt;
  out.states.reserve(reduced.size());
  out.noise_increments = reduced.noise_increments;
  for (size_t k = 0; k < reduced.size(); ++k) {
    const double t = reduced.time(k);
    CVec u(em.n());
    u.head(param.m_c) = reduced.states[k];
    u.tail(em.n() - param.m_c) = param.evaluate(reduced.states[k], t);
    const CVec phys = em.reconstruct_state(u);
    const double residue = phys.imag().cwiseAbs().maxCoeff();
    if (residue > imag_tol)
      throw NonRealOutputError("imaginary residue " + std::to_string(residue) +
                               " at t = " + std::to_string(t));
    out.states.push_back(phys.real().cast<Complex>());
    if (memory && k + 1 < reduced.size())
      param.memory_step(reduced.noise_increments.empty()
                            ? 0.0
                            : reduced.noise_increments[k]);
  }
  return out;
}

}  // namespace opm
