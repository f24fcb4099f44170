#pragma once

// Parameterization-quality metrics and per-mode optimization of the backward
// horizon tau over a training trajectory:
//
//   Q_n(tau) = mean_t |y_n(t) - Phi_n(tau, y_c(t), t)|^2 / mean_t |y_n(t)|^2.
//
// Profiles are scanned on a log grid (plus tau = 0 and tau = +inf) and every
// grid-local minimum is refined by golden-section search; the profiles are
// non-convex in general, so a grid pass keeps all candidate minima visible.

#include "opm/core.hpp"
#include "opm/model.hpp"
#include "opm/param.hpp"
#include "opm/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace opm {

struct DefectResult {
  double raw = 0.0;
  double normalized = 0.0;
};

struct TauSearchConfig {
  double tau_min = 1e-3;
  double tau_max = 20.0;
  int grid_points = 200;  // log-spaced between tau_min and tau_max
  bool include_zero = true;
  bool include_inf = true;
  double window_start = -std::numeric_limits<double>::infinity();
  double window_end = std::numeric_limits<double>::infinity();
  double refine_tol = 1e-6;  // golden-section bracket width (<= 1e-3 required)
  ParamKind kind = ParamKind::OpmConst;
};

struct DefectProfile {
  int mode = 0;                                  // global mode index
  std::vector<double> tau_grid;                  // sorted; +inf last if present
  std::vector<double> values;                    // normalized defect
  std::vector<std::pair<double, double>> minima; // (tau*, Q*), global first
  double selected_tau = 0.0;
};

/// Defect of parameterized mode `global_mode` over the trajectory (eigen
/// coordinates). Memory-carrying parameterizations are replayed from the
/// trajectory's increment record starting at its first sample; only samples
/// inside [window_start, window_end] enter the means.
inline DefectResult defect(const Trajectory& traj, const EigenModel& em,
                           Parameterization param, int global_mode,
                           double window_start =
                               -std::numeric_limits<double>::infinity(),
                           double window_end =
                               std::numeric_limits<double>::infinity()) {
  int slot = -1;
  for (int i = 0; i < param.n_param(); ++i)
    if (param.modes[static_cast<size_t>(i)].mode == global_mode) slot = i;
  if (slot < 0)
    throw DimensionMismatchError("defect: mode not covered by parameterization");
  const bool memory = param.has_memory();
  if (memory) param.memory_begin(traj.t0, traj.dt);

  double err = 0.0, mag = 0.0;
  long count = 0;
  for (size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.time(k);
    if (t >= window_start && t <= window_end) {
      const CVec X = traj.states[k].head(param.m_c);
      const Complex phi = param.evaluate_mode(slot, X, t);
      const Complex y = traj.states[k][global_mode];
      err += std::norm(y - phi);
      mag += std::norm(y);
      ++count;
    }
    if (memory && k + 1 < traj.size())
      param.memory_step(traj.noise_increments.empty()
                            ? 0.0
                            : traj.noise_increments[k]);
  }
  if (count == 0) throw TooShortError("defect: empty training window");
  DefectResult r;
  r.raw = err / count;
  const double denom = mag / count;
  if (denom < 1e-30)
    throw ZeroVarianceError("mode " + std::to_string(global_mode + 1));
  r.normalized = r.raw / denom;
  return r;
}

namespace detail {

/// Single-mode parameterization of `global_mode` at horizon tau; cheaper than
/// building every unresolved mode during a tau scan.
inline Parameterization single_mode_param(const EigenModel& em, int m_c,
                                          int global_mode, double tau,
                                          ParamKind kind) {
  std::vector<double> taus(static_cast<size_t>(em.n() - m_c), tau);
  Parameterization full = kind == ParamKind::OpmTimeDep
                              ? build_opm_timedep(em, m_c, taus)
                              : build_opm_const(em, m_c, taus);
  Parameterization p;
  p.kind = full.kind;
  p.m_c = m_c;
  p.n_total = em.n();
  p.modes.push_back(full.modes[static_cast<size_t>(global_mode - m_c)]);
  return p;
}

}  // namespace detail

/// Scans the normalized defect of one mode over a tau grid and refines every
/// grid-local minimum. tau = +inf is evaluated through the limit
/// coefficients and silently dropped when those limits diverge. Ties within
/// roundoff prefer the larger tau (so saturated profiles select +inf).
inline DefectProfile optimize_tau(const Trajectory& traj, const EigenModel& em,
                                  int global_mode, int m_c,
                                  const TauSearchConfig& cfg = {}) {
  auto q_of_tau = [&](double tau) {
    return defect(traj, em,
                  detail::single_mode_param(em, m_c, global_mode, tau, cfg.kind),
                  global_mode, cfg.window_start, cfg.window_end)
        .normalized;
  };

  DefectProfile prof;
  prof.mode = global_mode;
  if (cfg.include_zero) prof.tau_grid.push_back(0.0);
  for (int i = 0; i < cfg.grid_points; ++i) {
    const double f = cfg.grid_points == 1
                         ? 0.0
                         : static_cast<double>(i) / (cfg.grid_points - 1);
    prof.tau_grid.push_back(cfg.tau_min *
                            std::pow(cfg.tau_max / cfg.tau_min, f));
  }
  bool has_inf = false;
  if (cfg.include_inf) {
    try {
      detail::single_mode_param(em, m_c, global_mode, kInfTau, cfg.kind);
      has_inf = true;
      prof.tau_grid.push_back(kInfTau);
    } catch (const DivergentLimitError&) {
      has_inf = false;  // excluded from the grid
    }
  }
  prof.values.reserve(prof.tau_grid.size());
  for (double tau : prof.tau_grid) prof.values.push_back(q_of_tau(tau));

  const size_t m = prof.tau_grid.size();
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  auto refine = [&](double a, double b, double seed_tau, double seed_val) {
    double best_tau = seed_tau, best_val = seed_val;
    double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
    double v1 = q_of_tau(x1), v2 = q_of_tau(x2);
    auto track = [&](double tau, double v) {
      if (v < best_val) {
        best_val = v;
        best_tau = tau;
      }
    };
    track(x1, v1);
    track(x2, v2);
    while (b - a > cfg.refine_tol * std::max(1.0, std::abs(b))) {
      if (v1 < v2) {
        b = x2;
        x2 = x1;
        v2 = v1;
        x1 = b - golden * (b - a);
        v1 = q_of_tau(x1);
        track(x1, v1);
      } else {
        a = x1;
        x1 = x2;
        v1 = v2;
        x2 = a + golden * (b - a);
        v2 = q_of_tau(x2);
        track(x2, v2);
      }
    }
    return std::make_pair(best_tau, best_val);
  };

  const size_t last_finite = has_inf ? m - 2 : m - 1;
  for (size_t i = 0; i <= last_finite; ++i) {
    const double v = prof.values[i];
    const bool left_ok = i == 0 ? true : prof.values[i - 1] > v;
    const bool right_ok = i == last_finite
                              ? (!has_inf || prof.values[m - 1] > v)
                              : prof.values[i + 1] >= v;
    if (!(left_ok && right_ok)) continue;
    // Prominence gate: plateau wiggles at roundoff scale are not minima.
    double prom = std::numeric_limits<double>::infinity();
    if (i > 0) prom = std::min(prom, prof.values[i - 1] - v);
    if (i < m - 1) prom = std::min(prom, prof.values[i + 1] - v);
    if (prom < std::max(1e-10, 1e-6 * std::abs(v))) continue;
    if (i == 0) {
      prof.minima.emplace_back(prof.tau_grid[0], v);
    } else {
      const double a = prof.tau_grid[i - 1];
      const double b =
          i == last_finite ? prof.tau_grid[i] : prof.tau_grid[i + 1];
      prof.minima.push_back(refine(a, b, prof.tau_grid[i], v));
    }
  }
  if (has_inf) {
    const double v_inf = prof.values[m - 1];
    if (prof.values[last_finite] >= v_inf - 1e-12)
      prof.minima.emplace_back(kInfTau, v_inf);
  }
  if (prof.minima.empty()) {
    // Monotone profile: keep the best grid endpoint.
    size_t best = 0;
    for (size_t i = 1; i < m; ++i)
      if (prof.values[i] < prof.values[best]) best = i;
    prof.minima.emplace_back(prof.tau_grid[best], prof.values[best]);
  }
  std::sort(prof.minima.begin(), prof.minima.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });

  // Global minimum, with ties at roundoff resolved toward larger tau.
  const double v_best = prof.minima.front().second;
  const double tie = std::max(1e-12, 1e-9 * std::abs(v_best));
  double sel = prof.minima.front().first;
  for (const auto& [tau, v] : prof.minima)
    if (v <= v_best + tie && (std::isinf(tau) || tau > sel) && !std::isinf(sel))
      sel = tau;
  prof.selected_tau = sel;
  return prof;
}

// ---------------------------------------------------------------------------
// Parameterization correlation
// ---------------------------------------------------------------------------

struct CorrelationResult {
  std::vector<double> t;
  std::vector<double> c;
  double mean = 0.0;
};

/// Pointwise cosine between the unresolved amplitudes (restricted to `modes`)
/// and their parameterization along the trajectory; samples where either
/// norm vanishes are skipped.
inline CorrelationResult correlation(const Trajectory& traj,
                                     const EigenModel& em,
                                     Parameterization param,
                                     const std::vector<int>& modes,
                                     double window_start =
                                         -std::numeric_limits<double>::infinity(),
                                     double window_end =
                                         std::numeric_limits<double>::infinity()) {
  std::vector<int> slots;
  for (int g : modes) {
    int slot = -1;
    for (int i = 0; i < param.n_param(); ++i)
      if (param.modes[static_cast<size_t>(i)].mode == g) slot = i;
    if (slot < 0)
      throw DimensionMismatchError("correlation: mode not parameterized");
    slots.push_back(slot);
  }
  const bool memory = param.has_memory();
  if (memory) param.memory_begin(traj.t0, traj.dt);

  CorrelationResult out;
  double acc = 0.0;
  long used = 0;
  bool any_nonzero = false;
  for (size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.time(k);
    if (t >= window_start && t <= window_end) {
      const CVec X = traj.states[k].head(param.m_c);
      double num = 0.0, np = 0.0, ny = 0.0;
      for (size_t s = 0; s < slots.size(); ++s) {
        const Complex phi = param.evaluate_mode(slots[s], X, t);
        const Complex y = traj.states[k][modes[s]];
        num += (phi * std::conj(y)).real();
        np += std::norm(phi);
        ny += std::norm(y);
      }
      if (np > 0.0) any_nonzero = true;
      double c = 0.0;
      if (np > 1e-60 && ny > 1e-60) {
        c = num / std::sqrt(np * ny);
        acc += c;
        ++used;
      }
      out.t.push_back(t);
      out.c.push_back(c);
    }
    if (memory && k + 1 < traj.size())
      param.memory_step(traj.noise_increments.empty()
                            ? 0.0
                            : traj.noise_increments[k]);
  }
  if (!any_nonzero)
    throw ZeroParameterizationError("correlation: parameterization vanishes");
  out.mean = used ? acc / used : 0.0;
  return out;
}

/// Arbitration between close defect minima: when the two best minima are
/// within `closeness` in relative defect value, the one with the higher mean
/// parameterization correlation wins; otherwise the global minimum stands.
inline double select_tau(
    const DefectProfile& profile,
    const std::vector<std::pair<double, double>>& tau_and_mean_corr,
    double closeness = 0.15) {
  if (profile.minima.empty())
    throw ConfigError("select_tau: profile has no minima");
  if (profile.minima.size() == 1) return profile.minima.front().first;
  const auto& [tau1, v1] = profile.minima[0];
  const auto& [tau2, v2] = profile.minima[1];
  if ((v2 - v1) / std::max(v1, 1e-300) >= closeness) return tau1;
  auto corr_of = [&](double tau) {
    double best = -2.0, dist = std::numeric_limits<double>::infinity();
    for (const auto& [t, c] : tau_and_mean_corr) {
      const double d = std::isinf(t) && std::isinf(tau) ? 0.0 : std::abs(t - tau);
      if (d < dist) {
        dist = d;
        best = c;
      }
    }
    return best;
  };
  return corr_of(tau2) > corr_of(tau1) ? tau2 : tau1;
}

}  // namespace opm
