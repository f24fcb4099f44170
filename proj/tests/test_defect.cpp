#include "opm/defect.hpp"
#include "opm/oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace opm;
using Catch::Approx;

namespace {

/// Synthetic eigen-coordinate trajectory: smooth resolved amplitudes, the
/// unresolved mode slaved through the map at tau0, plus optional noise.
struct SlavedData {
  EigenModel em;
  Trajectory traj;
  double tau0 = 0.0;
};

SlavedData make_slaved(double tau0, double noise_amp, std::uint64_t seed,
                       double t_end = 40.0, double dt = 0.01) {
  SlavedData d;
  d.tau0 = tau0;
  d.em = oracles::synthetic_eigen_model(3, 2, seed, false, -0.3, 0.3, -2.0,
                                        -0.8);
  const auto p = build_opm_const(d.em, 2, {tau0});
  GaussianStream rng(derive_seed(seed, "slaved-noise"));
  d.traj.coords = Trajectory::Coords::Eigen;
  d.traj.t0 = 0.0;
  d.traj.dt = dt;
  const long n = std::lround(t_end / dt);
  for (long k = 0; k <= n; ++k) {
    const double t = k * dt;
    CVec y(3);
    y[0] = Complex(0.35 * std::cos(0.9 * t) + 0.1 * std::sin(2.3 * t),
                   0.1 * std::sin(0.4 * t));
    y[1] = Complex(0.25 * std::sin(1.7 * t), 0.15 * std::cos(0.6 * t + 1.0));
    y[2] = p.evaluate(CVec(y.head(2)))[0] +
           noise_amp * Complex(rng.next(), rng.next());
    d.traj.states.push_back(y);
  }
  return d;
}

}  // namespace

TEST_CASE("zero parameterization has unit normalized defect, exactly") {
  const auto d = make_slaved(1.2, 0.0, 31);
  const auto zero = build_zero(d.em, 2);
  const auto r = defect(d.traj, d.em, zero, 2);
  CHECK(r.normalized == 1.0);
  CHECK(r.raw > 0.0);
}

TEST_CASE("perfect slaving has zero defect at the generating tau") {
  const auto d = make_slaved(1.2, 0.0, 32);
  const auto p = build_opm_const(d.em, 2, {d.tau0});
  const auto r = defect(d.traj, d.em, p, 2);
  CHECK(r.normalized < 1e-25);
}

TEST_CASE("optimizer recovers the generating tau on slaved data") {
  const auto d = make_slaved(1.2, 0.0, 33);
  TauSearchConfig cfg;
  cfg.include_inf = true;
  const auto prof = optimize_tau(d.traj, d.em, 2, 2, cfg);
  REQUIRE(!prof.minima.empty());
  CHECK(prof.selected_tau == Approx(d.tau0).margin(2e-3));
  CHECK(prof.minima.front().second < 1e-10);
  // Q(0) = 1 exactly at the tau = 0 grid point.
  REQUIRE(prof.tau_grid.front() == 0.0);
  CHECK(prof.values.front() == 1.0);
  for (double v : prof.values) CHECK(v >= 0.0);
}

TEST_CASE("refined minima never exceed their bracketing grid values") {
  const auto d = make_slaved(0.8, 0.02, 34);
  const auto prof = optimize_tau(d.traj, d.em, 2, 2);
  for (const auto& [tau, value] : prof.minima) {
    if (std::isinf(tau)) continue;
    // Locate the bracketing finite grid points.
    double below = -1.0, above = -1.0;
    double v_below = 0.0, v_above = 0.0;
    for (size_t i = 0; i < prof.tau_grid.size(); ++i) {
      if (std::isinf(prof.tau_grid[i])) continue;
      if (prof.tau_grid[i] <= tau &&
          (below < 0.0 || prof.tau_grid[i] > below)) {
        below = prof.tau_grid[i];
        v_below = prof.values[i];
      }
      if (prof.tau_grid[i] >= tau && (above < 0.0 || prof.tau_grid[i] < above)) {
        above = prof.tau_grid[i];
        v_above = prof.values[i];
      }
    }
    CHECK(value <= v_below + 1e-12);
    CHECK(value <= v_above + 1e-12);
  }
}

TEST_CASE("defect is invariant under time translation for stationary data") {
  // Periodic resolved amplitudes and slaved unresolved mode with mild noise;
  // two windows of ten characteristic periods.
  const auto d = make_slaved(0.9, 0.01, 35, /*t_end=*/220.0);
  const auto p = build_opm_const(d.em, 2, {0.5});
  const double P = 2.0 * M_PI / 0.9;  // dominant period of the data
  const auto r1 = defect(d.traj, d.em, p, 2, 0.0, 10.0 * P);
  const auto r2 = defect(d.traj, d.em, p, 2, 13.7 * P, 23.7 * P);
  CHECK(r1.normalized == Approx(r2.normalized).epsilon(0.10));
}

TEST_CASE("zero-variance guard") {
  auto d = make_slaved(1.0, 0.0, 36);
  for (auto& s : d.traj.states) s[2] = Complex(0.0, 0.0);
  const auto zero = build_zero(d.em, 2);
  CHECK_THROWS_AS(defect(d.traj, d.em, zero, 2), ZeroVarianceError);
}

TEST_CASE("manifold distance is bounded by the summed defects") {
  // Noisy slaving: the trajectory hovers near the graph; the pointwise
  // distance to the graph (local minimization over X) can only fall below
  // the graph-point distance whose mean is the summed defect.
  const auto d = make_slaved(1.1, 0.05, 37);
  const auto p = build_opm_const(d.em, 2, {0.7});

  const auto r = defect(d.traj, d.em, p, 2);
  const double q_sum_raw = r.raw;

  double mean_dist2 = 0.0;
  long count = 0;
  for (size_t k = 0; k < d.traj.size(); k += 25) {
    const CVec& y = d.traj.states[k];
    CVec X = y.head(2);
    // Distance^2 to the graph {(X', Phi(X'))}; descend from X' = y_c.
    auto obj = [&](const CVec& Xp) {
      const Complex phi = p.evaluate(Xp)[0];
      return std::norm(Xp[0] - y[0]) + std::norm(Xp[1] - y[1]) +
             std::norm(phi - y[2]);
    };
    double best = obj(X);
    double step = 0.05;
    for (int it = 0; it < 60; ++it) {
      bool improved = false;
      for (int dim = 0; dim < 2; ++dim)
        for (const Complex dir :
             {Complex(step, 0.0), Complex(-step, 0.0), Complex(0.0, step),
              Complex(0.0, -step)}) {
          CVec Xt = X;
          Xt[dim] += dir;
          const double v = obj(Xt);
          if (v < best) {
            best = v;
            X = Xt;
            improved = true;
          }
        }
      if (!improved) step *= 0.5;
      if (step < 1e-6) break;
    }
    mean_dist2 += best;
    ++count;
  }
  mean_dist2 /= count;
  CHECK(mean_dist2 <= q_sum_raw * 1.0001);
  CHECK(mean_dist2 > 0.0);
}

TEST_CASE("correlation of exactly aligned and anti-aligned data") {
  auto d = make_slaved(1.0, 0.0, 38);
  const auto p = build_opm_const(d.em, 2, {d.tau0});
  const auto c_pos = correlation(d.traj, d.em, p, {2});
  CHECK(c_pos.mean == Approx(1.0).margin(1e-12));

  for (auto& s : d.traj.states) s[2] = -s[2];
  const auto c_neg = correlation(d.traj, d.em, p, {2});
  CHECK(c_neg.mean == Approx(-1.0).margin(1e-12));

  const auto zero = build_zero(d.em, 2);
  CHECK_THROWS_AS(correlation(d.traj, d.em, zero, {2}),
                  ZeroParameterizationError);
}

TEST_CASE("tau selection: threshold logic and correlation arbitration") {
  DefectProfile prof;
  prof.mode = 5;

  // Single minimum.
  prof.minima = {{0.65, 0.15}};
  CHECK(select_tau(prof, {}) == 0.65);

  // Far-apart minima: the global one wins regardless of correlation.
  prof.minima = {{0.65, 0.10}, {1.80, 0.50}};
  CHECK(select_tau(prof, {{0.65, 0.2}, {1.80, 0.9}}) == 0.65);

  // Close minima (12%): the better-correlated local minimizer wins.
  prof.minima = {{0.65, 0.1535}, {1.80, 0.1720}};
  CHECK(select_tau(prof, {{0.65, 0.55}, {1.80, 0.80}}) == 1.80);
  CHECK(select_tau(prof, {{0.65, 0.85}, {1.80, 0.80}}) == 0.65);
}
