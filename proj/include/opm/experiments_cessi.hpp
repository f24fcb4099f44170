#pragma once

// Stommel-Cessi pipelines: train the one-dimensional stochastic closure at a
// fixed freshwater flux, rewrite it in the original coordinates, and predict
// tipping under a slow parameter drift against the full model and the
// slow-manifold baseline.

#include "opm/core.hpp"
#include "opm/defect.hpp"
#include "opm/diagnostics.hpp"
#include "opm/model.hpp"
#include "opm/param.hpp"
#include "opm/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace opm {

struct CessiConfig {
  double mu = 6.2;
  double eps = 0.1;
  double sigma = std::sqrt(0.1);  // noise on the y-component
  double F_ref = 0.855;
  double F_lo = 0.80, F_hi = 0.95;  // branch sweep range
  double dt = 1e-3;
  double train_t0 = 20.0, train_t1 = 80.0;
  TauSearchConfig search;
  std::uint64_t seed = 1;
};

/// Trained closure: the fluctuation system about the lower-branch steady
/// state in eigen coordinates, the optimized backward horizon, and the
/// scalars of the original-coordinate rewrite.
struct CessiClosure {
  CessiConfig config;
  BranchTable branch;
  double F_c1 = 0.0, F_c2 = 0.0;
  double y_fold = 0.0;  // y-component of the fold state at F_c2
  Vec steady;           // (ybar, zbar)
  double y_mid = 0.0;   // unstable middle-branch y at F_ref
  EigenModel eigen;
  DefectProfile profile;
  double tau_star = 0.0;
  Parameterization param;  // OPM-timedep template (copied before each run)

  // Scalars of the original-coordinate reduced equation.
  double lambda1 = 0, lambda2 = 0;
  double e11 = 0, e12 = 0, e21 = 0, e22 = 0;
  double es1_y = 0, es1_z = 0;  // adjoint mode 1 components
  double sigma1 = 0, sigma2 = 0;
  double b112 = 0;   // quadratic interaction <B(e1,e1), e*_2>
  double d112 = 0;   // D^2_11 at tau*
  double gamma1 = 0; // e21 d112 b112
  double gamma2 = 0; // e22 d112 b112
  double exp_l2_tau = 0;  // e^{lambda2 tau*}; 0 at tau* = inf

  double ybar() const { return steady[0]; }
  double zbar() const { return steady[1]; }
};

/// Full-model noise-driven trajectory in eigen coordinates (fluctuations
/// about the trained steady state), with the increment record attached.
inline Trajectory cessi_training_trajectory(const CessiClosure& c, double t1,
                                            GaussianStream* rng,
                                            const std::vector<double>* incr =
                                                nullptr) {
  const auto& cfg = c.config;
  const auto model = cessi_model(cfg.mu, cfg.eps, cfg.F_ref, cfg.sigma);
  CVec diffusion = model.noise->cast<Complex>();
  const auto phys = integrate_em(
      [&](double, const CVec& x) -> CVec {
        return model.rhs(Vec(x.real())).cast<Complex>();
      },
      diffusion, c.steady.cast<Complex>(), 0.0, t1, cfg.dt, incr, rng);
  Trajectory out;
  out.coords = Trajectory::Coords::Eigen;
  out.t0 = phys.t0;
  out.dt = phys.dt;
  out.noise_increments = phys.noise_increments;
  out.states.reserve(phys.size());
  for (const auto& s : phys.states)
    out.states.push_back(c.eigen.project_state(Vec(s.real())));
  return out;
}

/// Trains the closure: branch + spectrum at F_ref, defect scan of the
/// unresolved mode over a noise-driven training path, horizon selection.
inline CessiClosure cessi_opm_pipeline(const CessiConfig& cfg) {
  CessiClosure c;
  c.config = cfg;
  c.branch = cessi_steady_branch(cfg.mu, cfg.eps, {cfg.F_lo, cfg.F_hi});
  if (c.branch.folds.size() != 2)
    throw ConfigError("cessi pipeline: no bistable window in the sweep range");
  c.F_c1 = c.branch.folds[0];
  c.F_c2 = c.branch.folds[1];
  c.y_fold = c.branch.fold_ys[1];
  if (!(cfg.F_ref > c.F_c1 && cfg.F_ref < c.F_c2))
    throw ConfigError("cessi pipeline: F_ref must lie between the folds");

  const auto eqs = c.branch.equilibria_at(cfg.F_ref);
  if (eqs.size() != 3)
    throw ConfigError("cessi pipeline: expected three equilibria at F_ref");
  c.steady = (Vec(2) << eqs[0].y, eqs[0].z).finished();
  c.y_mid = eqs[1].y;

  const auto model = cessi_model(cfg.mu, cfg.eps, cfg.F_ref, cfg.sigma);
  c.eigen = to_eigen_model(model, c.steady);
  if (!c.eigen.basis.is_real_mode(0) || !c.eigen.basis.is_real_mode(1))
    throw ConfigError("cessi pipeline: expected two distinct real eigenvalues");

  GaussianStream rng(derive_seed(cfg.seed, "cessi-train"));
  const auto traj = cessi_training_trajectory(c, cfg.train_t1, &rng);

  TauSearchConfig search = cfg.search;
  search.kind = ParamKind::OpmTimeDep;
  search.window_start = cfg.train_t0;
  search.window_end = cfg.train_t1;
  c.profile = optimize_tau(traj, c.eigen, 1, 1, search);
  c.tau_star = c.profile.selected_tau;
  c.param = build_opm_timedep(c.eigen, 1, {c.tau_star});

  c.lambda1 = c.eigen.basis.lambdas[0].real();
  c.lambda2 = c.eigen.basis.lambdas[1].real();
  c.e11 = c.eigen.basis.right_vectors(0, 0).real();
  c.e12 = c.eigen.basis.right_vectors(1, 0).real();
  c.e21 = c.eigen.basis.right_vectors(0, 1).real();
  c.e22 = c.eigen.basis.right_vectors(1, 1).real();
  c.es1_y = c.eigen.basis.adjoint_vectors(0, 0).real();
  c.es1_z = c.eigen.basis.adjoint_vectors(1, 0).real();
  c.sigma1 = c.eigen.noise_eigen[0].real();
  c.sigma2 = c.eigen.noise_eigen[1].real();
  c.b112 = c.eigen.interaction[1](0, 0).real();
  c.d112 = coeff_D(c.tau_star, c.eigen.basis.lambdas[0],
                   c.eigen.basis.lambdas[0], c.eigen.basis.lambdas[1])
               .real();
  c.gamma1 = c.e21 * c.d112 * c.b112;
  c.gamma2 = c.e22 * c.d112 * c.b112;
  c.exp_l2_tau =
      std::isinf(c.tau_star) ? 0.0 : std::exp(c.lambda2 * c.tau_star);
  return c;
}

/// Integrates the eigen-coordinate reduced SDE
///   dX = [lambda_1 X + <G(X e1 + Phi_2 e2), e*_1>] dt + sigma_1 dW
/// with the memory term advanced on the same increments.
inline Trajectory cessi_integrate_reduced_eigen(
    const CessiClosure& c, double X0, double t0, double t1,
    const std::vector<double>* increments, GaussianStream* rng) {
  ReducedSystem sys = assemble_reduced(c.eigen, 1, c.param);
  sys.param.memory_begin(t0, c.config.dt);
  CVec x0(1);
  x0 << Complex(X0, 0.0);
  CVec diffusion(1);
  diffusion << Complex(c.sigma1, 0.0);
  return integrate_em(
      [&sys](double t, const CVec& X) { return sys.rhs(t, X); }, diffusion,
      x0, t0, t1, c.config.dt, increments, rng,
      [&sys](long, double dw) { sys.param.memory_step(dw); });
}

/// Out-of-sample closure check: full model and reconstructed reduced model
/// on a fresh common noise path, compared through the occupancy of the
/// upper-equilibrium basin (threshold: the unstable middle-branch state).
struct CessiClosureEval {
  double t0 = 0.0, dt = 0.0;
  std::vector<double> y_full, y_app;
  double occupancy_full = 0.0, occupancy_reduced = 0.0;
};

inline CessiClosureEval cessi_out_of_sample(const CessiClosure& c, double T,
                                            std::uint64_t stream_index = 0) {
  GaussianStream rng(
      derive_seed(c.config.seed, "cessi-eval", stream_index));
  const auto full = cessi_training_trajectory(c, T, &rng);

  const auto reduced = cessi_integrate_reduced_eigen(
      c, 0.0, 0.0, T, &full.noise_increments, nullptr);
  const auto phys = reconstruct(reduced, c.eigen, c.param, 1e-6);

  CessiClosureEval out;
  out.t0 = 0.0;
  out.dt = c.config.dt;
  out.y_full.reserve(full.size());
  for (const auto& s : full.states) {
    const CVec ph = c.eigen.reconstruct_state(s);
    out.y_full.push_back(ph[0].real());
  }
  out.y_app = phys.component_real(0);
  out.occupancy_full = occupancy_above(out.y_full, c.y_mid);
  out.occupancy_reduced = occupancy_above(out.y_app, c.y_mid);
  return out;
}

// ---------------------------------------------------------------------------
// Original-coordinate reduced equation
// ---------------------------------------------------------------------------

/// Evaluators of the reduced dynamics rewritten for the physical y-variable:
/// X recovered from y by inverting the quadratic reconstruction, z slaved
/// through the same map, and the memory variable Z carried alongside.
struct CessiYEquation {
  const CessiClosure* c = nullptr;
  double root_sign = 1.0;  // sign of e11 selects the X-branch through 0

  explicit CessiYEquation(const CessiClosure& closure)
      : c(&closure), root_sign(closure.e11 >= 0.0 ? 1.0 : -1.0) {}

  double discriminant(double y, double Z) const {
    return c->e11 * c->e11 -
           4.0 * c->gamma1 * (c->e21 * Z + c->ybar() - y);
  }

  /// alpha = e11 + 2 gamma X, expressed through the discriminant.
  double alpha(double y, double Z, double t = 0.0) const {
    const double disc = discriminant(y, Z);
    if (disc < 0.0) throw NegativeDiscriminantError(t, y, disc);
    return root_sign * std::sqrt(disc);
  }

  /// X as a function of the reconstructed y (and the memory variable).
  double phi(double y, double Z, double t = 0.0) const {
    if (std::abs(c->gamma1) < 1e-14)
      return (y - c->ybar() - c->e21 * Z) / c->e11;
    return (-c->e11 + alpha(y, Z, t)) / (2.0 * c->gamma1);
  }

  /// Slaved z as a function of y: zbar + gamma2 X^2 + e12 X + e22 Z.
  double psi(double y, double Z, double t = 0.0) const {
    const double X = phi(y, Z, t);
    return c->zbar() + c->gamma2 * X * X + c->e12 * X + c->e22 * Z;
  }

  /// <F(y, z), e*_1> with the governing right-hand side at F = F_ref + dF.
  double projected_rhs(double y, double z, double dF) const {
    const double mu = c->config.mu, eps = c->config.eps;
    const double common = 1.0 + mu * (z - y) * (z - y);
    const double fy = (c->config.F_ref + dF) - y * common;
    const double fz = -(z - 1.0) / eps - z * common;
    return fy * c->es1_y + fz * c->es1_z;
  }

  /// Drift of the forced reduced equation: alpha <F(Y, Psi), e*_1>
  /// + e21 lambda2 Z + g(t), with g(t) = <(F(t) - F_ref, 0), e*_1>.
  double drift(double y, double Z, double t, double F_of_t) const {
    const double a = alpha(y, Z, t);
    const double g = (F_of_t - c->config.F_ref) * c->es1_y;
    return a * projected_rhs(y, psi(y, Z, t), 0.0) +
           c->e21 * c->lambda2 * Z + g;
  }
};

/// One Euler-Maruyama path of the original-coordinate reduced equation.
/// Returns the y series; Z is advanced on the same increments with the
/// delayed term replayed from a ring when tau* is finite.
inline std::vector<double> cessi_integrate_reduced_y(
    const CessiClosure& c, double y0, double t0, double t1, double sigma,
    const std::vector<double>& increments,
    const std::function<double(double)>& F_of_t) {
  const CessiYEquation eq(c);
  const double dt = c.config.dt;
  const long n = std::lround((t1 - t0) / dt);
  if (static_cast<long>(increments.size()) < n)
    throw HistoryTooShortError("cessi_integrate_reduced_y: increments");
  // Noise projections scale linearly with sigma relative to the training
  // amplitude.
  const double s1 = sigma * (c.sigma1 / c.config.sigma);
  const double s2 = sigma * (c.sigma2 / c.config.sigma);
  const long delay =
      std::isinf(c.tau_star) ? -1 : std::lround(c.tau_star / dt);
  std::vector<double> y(static_cast<size_t>(n) + 1);
  y[0] = y0;
  double Y = y0, Z = 0.0;
  for (long k = 0; k < n; ++k) {
    const double t = t0 + k * dt;
    const double dw = increments[static_cast<size_t>(k)];
    double dw_delayed = 0.0;
    if (delay == 0)
      dw_delayed = dw;
    else if (delay > 0 && k >= delay)
      dw_delayed = increments[static_cast<size_t>(k - delay)];
    const double a = eq.alpha(Y, Z, t);
    Y += dt * eq.drift(Y, Z, t, F_of_t(t)) + (a * s1 + c.e21 * s2) * dw -
         c.e21 * s2 * c.exp_l2_tau * dw_delayed;
    Z += dt * c.lambda2 * Z + s2 * dw - s2 * c.exp_l2_tau * dw_delayed;
    y[static_cast<size_t>(k) + 1] = Y;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Tipping ensemble
// ---------------------------------------------------------------------------

struct TippingConfig {
  double F0 = 0.85;
  double drift_rate = 2e-4;
  double sigma = std::sqrt(0.1) / 50.0;
  double dt = 1e-3;
  int n_realizations = 2000;
  double F_stop_margin = 0.05;  // run until F = F_c2 + margin
  int bins = 30;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct TippingRealization {
  bool full_found = false, reduced_found = false, slow_found = false;
  double F_full = 0.0, F_reduced = 0.0, F_slow = 0.0;
  std::uint64_t checksum_full = 0, checksum_reduced = 0, checksum_slow = 0;
};

struct TippingSummary {
  int n = 0;
  int full_found = 0, reduced_found = 0, slow_tipped = 0;
  std::vector<double> F_full, F_reduced, dF_abs;
  double median_abs_dF = 0.0;
  double overlap = 0.0;
  double slow_tip_fraction = 0.0;
  Histogram hist_full, hist_reduced;
  std::vector<TippingRealization> realizations;
};

namespace detail {

inline std::uint64_t fnv_hash(const double* data, size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (size_t i = 0; i < 8 * n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

}  // namespace detail

/// One realization: full model, reduced model, and slow baseline driven by
/// the identical increment record; transition detected by the last-crossing
/// rule at the fold-state threshold y_fold.
inline TippingRealization run_tipping_realization(const CessiClosure& c,
                                                  const TippingConfig& cfg,
                                                  std::uint64_t index) {
  const double mu = c.config.mu, eps = c.config.eps;
  const double T = (c.F_c2 + cfg.F_stop_margin - cfg.F0) / cfg.drift_rate;
  const double dt = cfg.dt;
  const long n = std::lround(T / dt);
  auto F_of_t = [&](double t) { return cfg.F0 + cfg.drift_rate * t; };

  GaussianStream rng(derive_seed(cfg.seed, "tipping", index));
  std::vector<double> incr(static_cast<size_t>(n));
  const double sq = std::sqrt(dt);
  for (auto& w : incr) w = sq * rng.next();

  // Initial state: the lower-branch equilibrium at F0.
  const auto eqs0 = c.branch.equilibria_at(cfg.F0);
  if (eqs0.empty()) throw ConfigError("tipping: no equilibrium at F0");
  const double y0 = eqs0.front().y, z0 = eqs0.front().z;

  TippingRealization out;
  const double thr = c.y_fold;

  {  // Full model.
    double y = y0, z = z0;
    long last_below = -1;
    for (long k = 0; k < n; ++k) {
      const double common = 1.0 + mu * (z - y) * (z - y);
      const double fy = F_of_t(k * dt) - y * common;
      const double fz = -(z - 1.0) / eps - z * common;
      y += dt * fy + cfg.sigma * incr[static_cast<size_t>(k)];
      z += dt * fz;
      if (y <= thr) last_below = k;
    }
    out.checksum_full = detail::fnv_hash(incr.data(), incr.size());
    if (y > thr) {
      out.full_found = true;
      out.F_full = F_of_t(std::max<long>(last_below + 1, 0) * dt);
    }
  }

  {  // OPM-reduced model in the original coordinates.
    const auto ys =
        cessi_integrate_reduced_y(c, y0, 0.0, T, cfg.sigma, incr, F_of_t);
    long last_below = -1;
    for (long k = 0; k < static_cast<long>(ys.size()); ++k)
      if (ys[static_cast<size_t>(k)] <= thr) last_below = k;
    out.checksum_reduced = detail::fnv_hash(incr.data(), incr.size());
    if (ys.back() > thr) {
      out.reduced_found = true;
      out.F_reduced = F_of_t(std::max<long>(last_below, 0) * dt);
    }
  }

  {  // Slow-manifold baseline: z = 1.
    double y = y0;
    long last_below = -1;
    for (long k = 0; k < n; ++k) {
      const double fy = F_of_t(k * dt) - y * (1.0 + mu * (1.0 - y) * (1.0 - y));
      y += dt * fy + cfg.sigma * incr[static_cast<size_t>(k)];
      if (y <= thr) last_below = k;
    }
    out.checksum_slow = detail::fnv_hash(incr.data(), incr.size());
    if (y > thr) {
      out.slow_found = true;
      out.F_slow = F_of_t(std::max<long>(last_below + 1, 0) * dt);
    }
  }
  return out;
}

inline TippingSummary run_tipping_ensemble(const CessiClosure& c,
                                           const TippingConfig& cfg) {
  TippingSummary s;
  s.n = cfg.n_realizations;
  s.realizations.resize(static_cast<size_t>(cfg.n_realizations));

  const int threads =
      std::max(1, std::min<int>(cfg.threads,
                                static_cast<int>(std::thread::hardware_concurrency())));
  auto worker = [&](int tid) {
    for (int i = tid; i < cfg.n_realizations; i += threads)
      s.realizations[static_cast<size_t>(i)] =
          run_tipping_realization(c, cfg, static_cast<std::uint64_t>(i));
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& t : pool) t.join();
  }

  for (const auto& r : s.realizations) {
    if (r.checksum_full != r.checksum_reduced ||
        r.checksum_full != r.checksum_slow)
      throw ConfigError("tipping: increment records diverged across models");
    if (r.full_found) {
      ++s.full_found;
      s.F_full.push_back(r.F_full);
    }
    if (r.reduced_found) {
      ++s.reduced_found;
      s.F_reduced.push_back(r.F_reduced);
    }
    if (r.slow_found) ++s.slow_tipped;
    if (r.full_found && r.reduced_found)
      s.dF_abs.push_back(std::abs(r.F_full - r.F_reduced));
  }
  s.median_abs_dF = detail::median_of(s.dF_abs);
  s.slow_tip_fraction =
      static_cast<double>(s.slow_tipped) / std::max(1, s.n);

  if (!s.F_full.empty() && !s.F_reduced.empty()) {
    double lo = 1e300, hi = -1e300;
    for (double f : s.F_full) {
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    for (double f : s.F_reduced) {
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    if (hi <= lo) hi = lo + 1e-6;
    s.hist_full = make_histogram(s.F_full, cfg.bins, lo, hi);
    s.hist_reduced = make_histogram(s.F_reduced, cfg.bins, lo, hi);
    s.overlap = histogram_overlap(s.hist_full, s.hist_reduced);
  }
  return s;
}

}  // namespace opm
