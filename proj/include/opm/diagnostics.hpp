#pragma once

// Trajectory diagnostics: Welch periodograms, spectral classifiers for
// period-doubling and chaos, delay embeddings, modal energy fractions,
// histograms, and threshold-crossing bookkeeping.

#include "opm/core.hpp"
#include "opm/reduce.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <vector>

namespace opm {

struct PsdResult {
  std::vector<double> freq;      // one-sided, up to Nyquist
  std::vector<double> power;     // density scale
  std::vector<double> power_db;  // 10 log10(power)
  int n_segments = 0;
};

/// Welch-averaged periodogram: Hann window, 50% overlap, per-segment mean
/// removal, one-sided density normalization. Requires at least eight
/// segments at the chosen segment length.
inline PsdResult welch_psd(const std::vector<double>& series, double dt,
                           int nperseg = 0) {
  const size_t n = series.size();
  if (nperseg <= 0) {
    // Largest power of two giving >= 8 half-overlapping segments.
    size_t seg = 1;
    while (seg * 2 * 9 <= n + seg) seg *= 2;  // (2m+1) halves cover m segs
    nperseg = static_cast<int>(std::max<size_t>(seg, 16));
  }
  const size_t seg = static_cast<size_t>(nperseg);
  const size_t hop = seg / 2;
  if (n < seg || hop == 0) throw TooShortError("welch_psd: series too short");
  const size_t n_segments = 1 + (n - seg) / hop;
  if (n_segments < 8)
    throw TooShortError("welch_psd: need >= 8 segments, have " +
                        std::to_string(n_segments));

  std::vector<double> window(seg);
  double wss = 0.0;
  for (size_t k = 0; k < seg; ++k) {
    window[k] = 0.5 * (1.0 - std::cos(2.0 * M_PI * k / (seg - 1)));
    wss += window[k] * window[k];
  }
  const double fs = 1.0 / dt;
  const double scale = 1.0 / (fs * wss);

  Eigen::FFT<double> fft;
  std::vector<double> buf(seg);
  std::vector<std::complex<double>> spec;
  const size_t n_bins = seg / 2 + 1;
  std::vector<double> acc(n_bins, 0.0);
  for (size_t s = 0; s < n_segments; ++s) {
    const double* src = series.data() + s * hop;
    double mean = 0.0;
    for (size_t k = 0; k < seg; ++k) mean += src[k];
    mean /= static_cast<double>(seg);
    for (size_t k = 0; k < seg; ++k) buf[k] = (src[k] - mean) * window[k];
    fft.fwd(spec, buf);
    for (size_t k = 0; k < n_bins; ++k) {
      double p = std::norm(spec[k]) * scale;
      if (k != 0 && k != n_bins - 1) p *= 2.0;  // one-sided
      acc[k] += p;
    }
  }
  PsdResult out;
  out.n_segments = static_cast<int>(n_segments);
  out.freq.resize(n_bins);
  out.power.resize(n_bins);
  out.power_db.resize(n_bins);
  for (size_t k = 0; k < n_bins; ++k) {
    out.freq[k] = static_cast<double>(k) * fs / static_cast<double>(seg);
    out.power[k] = acc[k] / static_cast<double>(n_segments);
    out.power_db[k] = 10.0 * std::log10(out.power[k] + 1e-300);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral classifiers
// ---------------------------------------------------------------------------

struct SubharmonicResult {
  bool subharmonic = false;
  double f_main = 0.0;
  double f_sub = 0.0;
  double prominence_db = 0.0;
};

/// Looks for a line near half of the dominant frequency. The band
/// [0.35, 0.65] x f_main must contain a local maximum standing at least
/// `min_prominence_db` above the band's lower quartile and within 60 dB of
/// the dominant line itself.
inline SubharmonicResult classify_subharmonic(const PsdResult& psd,
                                              double min_prominence_db = 15.0) {
  SubharmonicResult res;
  const size_t n = psd.freq.size();
  if (n < 8) throw TooShortError("classify_subharmonic: psd too short");
  size_t k_main = 2;
  for (size_t k = 2; k + 1 < n; ++k)
    if (psd.power[k] > psd.power[k_main]) k_main = k;
  res.f_main = psd.freq[k_main];

  const double f_lo = 0.35 * res.f_main, f_hi = 0.65 * res.f_main;
  std::vector<double> band_db;
  size_t k_peak = 0;
  double peak_db = -1e300;
  for (size_t k = 1; k + 1 < n; ++k) {
    if (psd.freq[k] < f_lo || psd.freq[k] > f_hi) continue;
    band_db.push_back(psd.power_db[k]);
    const bool local_max =
        psd.power_db[k] >= psd.power_db[k - 1] &&
        psd.power_db[k] >= psd.power_db[k + 1];
    if (local_max && psd.power_db[k] > peak_db) {
      peak_db = psd.power_db[k];
      k_peak = k;
    }
  }
  if (band_db.size() < 4 || k_peak == 0) return res;
  std::sort(band_db.begin(), band_db.end());
  const double background = band_db[band_db.size() / 4];
  res.f_sub = psd.freq[k_peak];
  res.prominence_db = peak_db - background;
  res.subharmonic = res.prominence_db >= min_prominence_db &&
                    peak_db >= psd.power_db[k_main] - 60.0;
  return res;
}

struct FlatnessResult {
  bool chaotic = false;
  double max_line_fraction = 0.0;
  double f_line = 0.0;
};

/// Spectral-flatness chaos test: chaotic when no single line (a local
/// maximum plus `halfwidth` bins on each side) carries more than `threshold`
/// of the spectral mass (DC excluded).
inline FlatnessResult classify_chaotic(const PsdResult& psd,
                                       int halfwidth = 3,
                                       double threshold = 0.5) {
  FlatnessResult res;
  const size_t n = psd.power.size();
  if (n < 8) throw TooShortError("classify_chaotic: psd too short");
  double total = 0.0;
  for (size_t k = 1; k < n; ++k) total += psd.power[k];
  if (total <= 0.0) return res;
  for (size_t k = 1; k + 1 < n; ++k) {
    if (!(psd.power[k] >= psd.power[k - 1] && psd.power[k] >= psd.power[k + 1]))
      continue;
    double mass = 0.0;
    const size_t lo = k > static_cast<size_t>(halfwidth) ? k - halfwidth : 1;
    const size_t hi = std::min(n - 1, k + static_cast<size_t>(halfwidth));
    for (size_t i = lo; i <= hi; ++i) mass += psd.power[i];
    const double frac = mass / total;
    if (frac > res.max_line_fraction) {
      res.max_line_fraction = frac;
      res.f_line = psd.freq[k];
    }
  }
  res.chaotic = res.max_line_fraction < threshold;
  return res;
}

// ---------------------------------------------------------------------------
// Embeddings, energy, histograms
// ---------------------------------------------------------------------------

/// Delay-coordinate embedding: row k = (x_k, x_{k+lag}, ..., x_{k+(dim-1) lag}).
inline Mat lag_embed(const std::vector<double>& series, int lag, int dim) {
  if (lag < 1 || dim < 1) throw ConfigError("lag_embed: lag, dim >= 1");
  const long span = static_cast<long>(lag) * (dim - 1);
  const long rows = static_cast<long>(series.size()) - span;
  if (rows <= 0) throw TooShortError("lag_embed: series too short");
  Mat out(rows, dim);
  for (long k = 0; k < rows; ++k)
    for (int d = 0; d < dim; ++d) out(k, d) = series[k + d * lag];
  return out;
}

/// Variance share of eigenmode `mode` in an eigen-coordinate trajectory.
inline double energy_fraction(const Trajectory& traj, int mode) {
  if (traj.states.empty()) throw TooShortError("energy_fraction: empty");
  const int n = static_cast<int>(traj.states[0].size());
  CVec mean = CVec::Zero(n);
  for (const auto& s : traj.states) mean += s;
  mean /= static_cast<double>(traj.size());
  Vec var = Vec::Zero(n);
  for (const auto& s : traj.states)
    var += (s - mean).cwiseAbs2();
  const double total = var.sum();
  if (total <= 0.0) throw ZeroVarianceError("energy_fraction: flat trajectory");
  return var[mode] / total;
}

struct Histogram {
  double lo = 0.0, hi = 1.0;
  std::vector<double> counts;
  long total = 0;
};

inline Histogram make_histogram(const std::vector<double>& xs, int bins,
                                double lo, double hi) {
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<size_t>(bins), 0.0);
  for (double x : xs) {
    if (!(x >= lo) || !(x <= hi)) continue;
    int b = static_cast<int>((x - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    h.counts[static_cast<size_t>(b)] += 1.0;
    ++h.total;
  }
  return h;
}

/// 1 - total-variation distance between two histograms on the same bins.
inline double histogram_overlap(const Histogram& a, const Histogram& b) {
  if (a.counts.size() != b.counts.size())
    throw DimensionMismatchError("histogram_overlap: bin counts differ");
  if (a.total == 0 || b.total == 0) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < a.counts.size(); ++i)
    s += std::min(a.counts[i] / a.total, b.counts[i] / b.total);
  return s;
}

/// Fraction of samples strictly above the threshold.
inline double occupancy_above(const std::vector<double>& ys, double threshold) {
  if (ys.empty()) throw TooShortError("occupancy_above: empty series");
  long c = 0;
  for (double y : ys)
    if (y > threshold) ++c;
  return static_cast<double>(c) / static_cast<double>(ys.size());
}

/// Basin-switch times with hysteresis: an event fires when the series, last
/// seen below `lo`, rises above `hi` (upcrossing) or vice versa.
inline std::vector<double> basin_transitions(const std::vector<double>& ys,
                                             double t0, double dt, double lo,
                                             double hi) {
  std::vector<double> events;
  int state = 0;  // -1 lower, +1 upper, 0 unknown
  for (size_t k = 0; k < ys.size(); ++k) {
    const double y = ys[k];
    if (y < lo) {
      if (state == 1) events.push_back(t0 + k * dt);
      state = -1;
    } else if (y > hi) {
      if (state == -1) events.push_back(t0 + k * dt);
      state = 1;
    }
  }
  return events;
}

/// Last time the series sits at or below the threshold, given that it ends
/// above it (the last-crossing transition rule). Returns false when the
/// series never settles above the threshold.
struct LastCrossing {
  bool found = false;
  double t_transition = 0.0;
};

inline LastCrossing last_crossing(const std::vector<double>& ys, double t0,
                                  double dt, double threshold) {
  LastCrossing out;
  if (ys.empty() || ys.back() <= threshold) return out;
  long last_below = -1;
  for (size_t k = 0; k < ys.size(); ++k)
    if (ys[k] <= threshold) last_below = static_cast<long>(k);
  out.found = true;
  out.t_transition = t0 + std::max<long>(last_below, 0) * dt;
  return out;
}

}  // namespace opm
