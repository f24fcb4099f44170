#include "opm/diagnostics.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace opm;
using Catch::Approx;

namespace {

std::vector<double> sampled(double dt, double t_end,
                            const std::function<double(double)>& f) {
  const long n = std::lround(t_end / dt);
  std::vector<double> out(static_cast<size_t>(n));
  for (long k = 0; k < n; ++k) out[static_cast<size_t>(k)] = f(k * dt);
  return out;
}

}  // namespace

TEST_CASE("pure sinusoid gives a single peak at its frequency") {
  const double dt = 0.01, f0 = 2.0;
  const auto xs =
      sampled(dt, 200.0, [&](double t) { return std::sin(2 * M_PI * f0 * t); });
  const auto psd = welch_psd(xs, dt, 2048);
  size_t k_max = 1;
  for (size_t k = 1; k < psd.power.size(); ++k)
    if (psd.power[k] > psd.power[k_max]) k_max = k;
  const double df = psd.freq[1] - psd.freq[0];
  CHECK(std::abs(psd.freq[k_max] - f0) <= df + 1e-12);

  const auto sub = classify_subharmonic(psd);
  CHECK(!sub.subharmonic);
  const auto flat = classify_chaotic(psd);
  CHECK(!flat.chaotic);
  CHECK(flat.max_line_fraction > 0.9);
}

TEST_CASE("white noise is flat and classified chaotic") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> xs(1 << 17);
  for (auto& x : xs) x = g(rng);
  const auto psd = welch_psd(xs, 0.01, 1024);
  CHECK(psd.n_segments >= 64);

  // Band-averaged flatness within +-3 dB.
  const int bands = 8;
  std::vector<double> band(bands, 0.0);
  std::vector<int> cnt(bands, 0);
  for (size_t k = 1; k < psd.power.size(); ++k) {
    const int b = std::min<int>(bands - 1,
                                static_cast<int>(bands * (k - 1) /
                                                 (psd.power.size() - 1)));
    band[b] += psd.power[k];
    ++cnt[b];
  }
  double lo = 1e300, hi = -1e300;
  for (int b = 0; b < bands; ++b) {
    const double db = 10.0 * std::log10(band[b] / cnt[b]);
    lo = std::min(lo, db);
    hi = std::max(hi, db);
  }
  CHECK(hi - lo < 3.0);

  CHECK(classify_chaotic(psd).chaotic);
  CHECK(!classify_subharmonic(psd).subharmonic);
}

TEST_CASE("constructed period-two signal triggers the subharmonic classifier") {
  const double dt = 0.01, f0 = 2.0;
  const auto xs = sampled(dt, 400.0, [&](double t) {
    return std::sin(2 * M_PI * f0 * t) + 0.35 * std::sin(M_PI * f0 * t + 0.4);
  });
  const auto psd = welch_psd(xs, dt, 4096);
  const auto sub = classify_subharmonic(psd);
  CHECK(sub.subharmonic);
  CHECK(sub.f_main == Approx(f0).margin(0.05));
  CHECK(sub.f_sub == Approx(f0 / 2).margin(0.05));
  CHECK(!classify_chaotic(psd).chaotic);
}

TEST_CASE("psd length guard") {
  CHECK_THROWS_AS(welch_psd(std::vector<double>(100, 0.0), 0.01, 64),
                  TooShortError);
}

TEST_CASE("lag embedding") {
  std::vector<double> xs;
  for (int k = 0; k < 10; ++k) xs.push_back(k);
  const Mat e = lag_embed(xs, 2, 3);
  REQUIRE(e.rows() == 6);
  REQUIRE(e.cols() == 3);
  CHECK(e(0, 0) == 0.0);
  CHECK(e(0, 1) == 2.0);
  CHECK(e(0, 2) == 4.0);
  CHECK(e(5, 2) == 9.0);
  CHECK_THROWS_AS(lag_embed(xs, 5, 3), TooShortError);
}

TEST_CASE("energy fraction of a constructed trajectory") {
  Trajectory t;
  t.coords = Trajectory::Coords::Eigen;
  t.dt = 0.1;
  for (int k = 0; k < 1000; ++k) {
    CVec s(2);
    s[0] = Complex(3.0 * std::sin(0.37 * k), 0.0);
    s[1] = Complex(std::cos(0.91 * k), 0.0);
    t.states.push_back(s);
  }
  const double f0 = energy_fraction(t, 0);
  const double f1 = energy_fraction(t, 1);
  CHECK(f0 + f1 == Approx(1.0).margin(1e-12));
  CHECK(f0 == Approx(9.0 / 10.0).margin(0.02));
}

TEST_CASE("histogram overlap") {
  std::vector<double> a, b, c;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 5000; ++k) {
    const double x = g(rng);
    a.push_back(x);
    b.push_back(x);
    c.push_back(x + 50.0);
  }
  const auto ha = make_histogram(a, 30, -5, 55);
  const auto hb = make_histogram(b, 30, -5, 55);
  const auto hc = make_histogram(c, 30, -5, 55);
  CHECK(histogram_overlap(ha, hb) == Approx(1.0));
  CHECK(histogram_overlap(ha, hc) == Approx(0.0).margin(1e-12));
}

TEST_CASE("occupancy and basin transitions") {
  std::vector<double> ys;
  for (int k = 0; k < 100; ++k) ys.push_back(k < 40 ? 0.0 : 1.0);
  CHECK(occupancy_above(ys, 0.5) == Approx(0.6));
  const auto events = basin_transitions(ys, 0.0, 0.1, 0.2, 0.8);
  REQUIRE(events.size() == 1);
  CHECK(events[0] == Approx(4.0));
}

TEST_CASE("last-crossing detection and threshold monotonicity") {
  // Noisy ramp: higher thresholds can only delay the transition.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<double> ys;
  for (int k = 0; k < 2000; ++k) ys.push_back(k / 2000.0 + g(rng));
  double prev_t = -1.0;
  for (double thr : {0.2, 0.4, 0.6, 0.8}) {
    const auto lc = last_crossing(ys, 0.0, 0.01, thr);
    REQUIRE(lc.found);
    CHECK(lc.t_transition >= prev_t);
    prev_t = lc.t_transition;
  }
  // Never settling above: not found.
  const auto lc = last_crossing(ys, 0.0, 0.01, 2.0);
  CHECK(!lc.found);
}
