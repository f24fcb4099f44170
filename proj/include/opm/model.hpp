#pragma once

// Quadratic forced-dissipative models dy/dt = L y + B(y,y) [+ C(y,y,y)] + F,
// optionally driven by a scalar Wiener process through a diffusion vector.
// Built-ins: the Stommel-Cessi box model (cubic) and the 9-mode
// Rayleigh-Benard truncation (quadratic). Includes the fluctuation rewrite
// about a reference state in eigen coordinates, steady-branch continuation
// for the Cessi model, and mean-state estimation/extrapolation.

#include "opm/core.hpp"
#include "opm/spectral.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opm {

struct BilinearTerm {
  int j, k, l;  // contributes c * u_k * v_l to component j of B(u, v)
  double c;
};

struct CubicTerm {
  int j, k, l, m;  // contributes c * u_k * v_l * w_m to component j
  double c;
};

class QuadraticModel {
 public:
  int n = 0;
  Mat linear;
  std::vector<BilinearTerm> bilinear;
  std::vector<CubicTerm> cubic;  // empty for purely quadratic models
  Vec constant_forcing;
  std::optional<Vec> noise;  // diffusion vector, scalar Wiener process
  std::map<std::string, double> parameters;

  template <class V>
  V bilinear_apply(const V& u, const V& v) const {
    V out = V::Zero(n);
    for (const auto& t : bilinear) out[t.j] += t.c * u[t.k] * v[t.l];
    return out;
  }

  template <class V>
  V cubic_apply(const V& u, const V& v, const V& w) const {
    V out = V::Zero(n);
    for (const auto& t : cubic) out[t.j] += t.c * u[t.k] * v[t.l] * w[t.m];
    return out;
  }

  Vec rhs(const Vec& y) const {
    if (y.size() != n) throw DimensionMismatchError("rhs: state size");
    Vec out = linear * y + constant_forcing + bilinear_apply(y, y);
    if (!cubic.empty()) out += cubic_apply(y, y, y);
    return out;
  }
};

/// Jacobian of the model's right-hand side at `ref`:
/// L + B(ref, .) + B(., ref) plus the cubic derivative when present.
inline Mat linearize_at(const QuadraticModel& model, const Vec& ref) {
  if (ref.size() != model.n)
    throw DimensionMismatchError("linearize_at: reference size");
  Mat jac = model.linear;
  for (const auto& t : model.bilinear) {
    jac(t.j, t.k) += t.c * ref[t.l];
    jac(t.j, t.l) += t.c * ref[t.k];
  }
  for (const auto& t : model.cubic) {
    jac(t.j, t.k) += t.c * ref[t.l] * ref[t.m];
    jac(t.j, t.l) += t.c * ref[t.k] * ref[t.m];
    jac(t.j, t.m) += t.c * ref[t.k] * ref[t.l];
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

/// Stommel-Cessi box model in the dimensionless (y, z) variables:
///   dy/dt = F - y [1 + mu (z - y)^2]
///   dz/dt = -(z - 1)/eps - z [1 + mu (z - y)^2]
/// Noise (when sigma != 0) enters the first component only.
inline QuadraticModel cessi_model(double mu, double eps, double F,
                                  double sigma = 0.0) {
  QuadraticModel m;
  m.n = 2;
  m.linear = Mat::Zero(2, 2);
  m.linear(0, 0) = -1.0;
  m.linear(1, 1) = -(1.0 + 1.0 / eps);
  m.constant_forcing = Vec(2);
  m.constant_forcing << F, 1.0 / eps;
  // -mu y (z - y)^2 and -mu z (z - y)^2 expanded in monomials.
  m.cubic = {
      {0, 0, 1, 1, -mu}, {0, 0, 0, 1, 2.0 * mu}, {0, 0, 0, 0, -mu},
      {1, 1, 1, 1, -mu}, {1, 0, 1, 1, 2.0 * mu}, {1, 0, 0, 1, -mu},
  };
  if (sigma != 0.0) {
    Vec s(2);
    s << sigma, 0.0;
    m.noise = s;
  }
  m.parameters = {{"mu", mu}, {"eps", eps}, {"F", F}, {"sigma", sigma}};
  return m;
}

/// Nine-mode Rayleigh-Benard truncation (square cell, a = 1/2) with Prandtl
/// number sigma_p and reduced Rayleigh number r.
inline QuadraticModel rb9d_model(double r, double sigma_p = 0.5) {
  const double a2 = 0.25;  // a = 1/2
  const double b1 = 4.0 * (1.0 + a2) / (1.0 + 2.0 * a2);
  const double b2 = (1.0 + 2.0 * a2) / (2.0 * (1.0 + a2));
  const double b3 = 2.0 * (1.0 - a2) / (1.0 + a2);
  const double b4 = a2 / (1.0 + a2);
  const double b5 = 8.0 * a2 / (1.0 + 2.0 * a2);
  const double b6 = 4.0 / (1.0 + 2.0 * a2);

  QuadraticModel m;
  m.n = 9;
  m.linear = Mat::Zero(9, 9);
  m.linear(0, 0) = -sigma_p * b1;
  m.linear(0, 6) = -sigma_p * b2;
  m.linear(1, 1) = -sigma_p;
  m.linear(1, 8) = -sigma_p / 2.0;
  m.linear(2, 2) = -sigma_p * b1;
  m.linear(2, 7) = sigma_p * b2;
  m.linear(3, 3) = -sigma_p;
  m.linear(3, 8) = sigma_p / 2.0;
  m.linear(4, 4) = -sigma_p * b5;
  m.linear(5, 5) = -b6;
  m.linear(6, 0) = -r;
  m.linear(6, 6) = -b1;
  m.linear(7, 2) = r;
  m.linear(7, 7) = -b1;
  m.linear(8, 1) = -r;
  m.linear(8, 3) = r;
  m.linear(8, 8) = -1.0;

  m.bilinear = {
      {0, 1, 3, -1.0}, {0, 3, 3, b4},   {0, 2, 4, b3},
      {1, 0, 3, 1.0},  {1, 1, 4, -1.0}, {1, 3, 4, 1.0},
      {2, 1, 3, 1.0},  {2, 1, 1, -b4},  {2, 0, 4, -b3},
      {3, 1, 2, -1.0}, {3, 1, 4, -1.0}, {3, 3, 4, 1.0},
      {4, 1, 1, 0.5},  {4, 3, 3, -0.5},
      {5, 1, 8, 1.0},  {5, 3, 8, -1.0},
      {6, 4, 7, 2.0},  {6, 3, 8, -1.0},
      {7, 4, 6, -2.0}, {7, 1, 8, 1.0},
      {8, 1, 5, -2.0}, {8, 1, 7, -1.0}, {8, 3, 5, 2.0}, {8, 3, 6, 1.0},
  };
  m.constant_forcing = Vec::Zero(9);
  m.parameters = {{"r", r},  {"sigma_prandtl", sigma_p},
                  {"b1", b1}, {"b2", b2}, {"b3", b3},
                  {"b4", b4}, {"b5", b5}, {"b6", b6}};
  return m;
}

// ---------------------------------------------------------------------------
// Fluctuation rewrite in eigen coordinates
// ---------------------------------------------------------------------------

/// The fluctuation system about a reference state, expressed in the
/// eigenbasis of the linearization A:
///   dy_j/dt = lambda_j y_j + sum_{kl} B^j_{kl} y_k y_l [+ cubic] + F_j,
/// with B^j_{kl} = <B_eff(e_k, e_l), e*_j> and F_j = <rhs(ref), e*_j>.
struct EigenModel {
  SpectralBasis basis;
  std::vector<CMat> interaction;  // interaction[j](k, l) = B^j_{kl}
  // cubic_interaction[j][m](k, l) = <C(e_k, e_l, e_m), e*_j>; empty unless
  // the physical model carries a cubic term.
  std::vector<std::vector<CMat>> cubic_interaction;
  CVec forcing;
  Vec reference_state;
  CVec noise_eigen;  // sigma_j = <sigma, e*_j>; size 0 when noise-free

  int n() const { return basis.n; }
  bool has_noise() const { return noise_eigen.size() > 0; }
  bool has_cubic() const { return !cubic_interaction.empty(); }

  Complex quadratic_rhs_mode(int j, const CVec& y) const {
    Complex acc = y.transpose() * interaction[j] * y;
    if (has_cubic()) {
      for (int m = 0; m < n(); ++m)
        acc += y[m] * Complex(y.transpose() * cubic_interaction[j][m] * y);
    }
    return acc;
  }

  CVec rhs(const CVec& y) const {
    CVec out(n());
    for (int j = 0; j < n(); ++j)
      out[j] = basis.lambdas[j] * y[j] + quadratic_rhs_mode(j, y) + forcing[j];
    return out;
  }

  /// Eigen coordinates of a physical state (fluctuation taken about the
  /// reference state).
  CVec project_state(const Vec& physical) const {
    return basis.project(Vec(physical - reference_state));
  }

  /// Physical state from eigen coordinates; imaginary residue is the
  /// caller's concern.
  CVec reconstruct_state(const CVec& y) const {
    return basis.reconstruct(y) + reference_state.cast<Complex>();
  }
};

inline EigenModel to_eigen_model(const QuadraticModel& model, const Vec& ref,
                                 double diag_tol = 1e-6) {
  EigenModel em;
  em.basis = decompose(linearize_at(model, ref), diag_tol);
  em.reference_state = ref;
  const int n = model.n;

  // Quadratic-in-fluctuation part: B(u,v) plus the cubic terms with one slot
  // pinned to the reference state.
  auto b_eff = [&](const CVec& u, const CVec& v) {
    CVec out = model.bilinear_apply(u, v);
    if (!model.cubic.empty()) {
      const CVec r = ref.cast<Complex>();
      out += model.cubic_apply(u, v, r) + model.cubic_apply(u, r, v) +
             model.cubic_apply(r, u, v);
    }
    return out;
  };

  em.interaction.assign(n, CMat::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const CVec w = b_eff(CVec(em.basis.right_vectors.col(k)),
                           CVec(em.basis.right_vectors.col(l)));
      for (int j = 0; j < n; ++j)
        em.interaction[j](k, l) = inner(w, CVec(em.basis.adjoint_vectors.col(j)));
    }

  if (!model.cubic.empty()) {
    em.cubic_interaction.assign(n, std::vector<CMat>(n, CMat::Zero(n, n)));
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
          const CVec w = model.cubic_apply(
              CVec(em.basis.right_vectors.col(k)),
              CVec(em.basis.right_vectors.col(l)),
              CVec(em.basis.right_vectors.col(m)));
          for (int j = 0; j < n; ++j)
            em.cubic_interaction[j][m](k, l) =
                inner(w, CVec(em.basis.adjoint_vectors.col(j)));
        }
  }

  em.forcing = em.basis.project(model.rhs(ref));
  if (model.noise) em.noise_eigen = em.basis.project(*model.noise);
  return em;
}

// ---------------------------------------------------------------------------
// Cessi steady branch
// ---------------------------------------------------------------------------

struct BranchPoint {
  double F, y, z;
  bool stable;
};

struct BranchTable {
  double mu = 0.0, eps = 0.0;
  // Branch samples ordered by increasing y (the continuation parameter).
  std::vector<BranchPoint> points;
  // Saddle-node F-values, ascending: F_c1 (upper-branch turning point, the
  // local minimum of F(y)) then F_c2 (lower-branch turning point).
  std::vector<double> folds;
  // y-values at the folds, matching `folds` by index.
  std::vector<double> fold_ys;

  /// All coexisting equilibria at the given F, ascending in y; each root is
  /// polished by bisection inside its sweep bracket.
  std::vector<BranchPoint> equilibria_at(double F) const;
};

namespace detail {

/// Root z of the dz/dt = 0 relation for a given y, via Newton with a
/// bisection fallback on (0, 1]. Unique in the studied regimes.
inline double cessi_z_of_y(double mu, double eps, double y) {
  auto g = [&](double z) {
    return (z - 1.0) / eps + z * (1.0 + mu * (z - y) * (z - y));
  };
  auto dg = [&](double z) {
    return 1.0 / eps + 1.0 + mu * (z - y) * (z - y) +
           2.0 * mu * z * (z - y);
  };
  double z = 1.0 / (1.0 + eps);
  for (int it = 0; it < 100; ++it) {
    const double f = g(z);
    if (std::abs(f) < 1e-14) return z;
    const double d = dg(z);
    if (d == 0.0) break;
    const double step = f / d;
    z -= step;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z))) return z;
  }
  // Bisection fallback; g(0) < 0 and g grows cubically.
  double lo = 0.0, hi = 2.0;
  while (g(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  const double z_b = 0.5 * (lo + hi);
  if (std::abs(g(z_b)) > 1e-9)
    throw RootNotFoundError("cessi z-solve failed at y = " + std::to_string(y));
  return z_b;
}

inline bool cessi_stable(double mu, double eps, double F, double y, double z) {
  const Mat jac = linearize_at(cessi_model(mu, eps, F), (Vec(2) << y, z).finished());
  const double tr = jac.trace();
  const double det = jac.determinant();
  return det > 0.0 && tr < 0.0;
}

}  // namespace detail

inline std::vector<BranchPoint> BranchTable::equilibria_at(double F) const {
  auto F_of_y = [&](double y) {
    const double z = detail::cessi_z_of_y(mu, eps, y);
    return y * (1.0 + mu * (z - y) * (z - y));
  };
  std::vector<BranchPoint> out;
  for (size_t i = 0; i + 1 < points.size(); ++i) {
    double f0 = points[i].F - F;
    const double f1 = points[i + 1].F - F;
    if (!(f0 == 0.0 || f0 * f1 < 0.0)) continue;
    double lo = points[i].y, hi = points[i + 1].y;
    for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = F_of_y(mid) - F;
      if ((fm <= 0.0) == (f0 <= 0.0))
        lo = mid;
      else
        hi = mid;
    }
    BranchPoint p;
    p.y = 0.5 * (lo + hi);
    p.z = detail::cessi_z_of_y(mu, eps, p.y);
    p.F = F;
    p.stable = detail::cessi_stable(mu, eps, F, p.y, p.z);
    out.push_back(p);
  }
  if (!points.empty() && points.back().F == F) out.push_back(points.back());
  return out;
}

/// Sweeps the Cessi equilibrium branch parameterized by y: z from the
/// dz/dt = 0 relation, F from dy/dt = 0. Saddle-nodes are the interior
/// extrema of F(y), refined by golden-section search. Fold detection is
/// skipped for degenerate (single-point) F grids.
inline BranchTable cessi_steady_branch(double mu, double eps,
                                       const std::vector<double>& F_grid) {
  if (!(mu > 0.0) || !(eps > 0.0))
    throw ConfigError("cessi_steady_branch: mu and eps must be positive");
  if (F_grid.empty())
    throw ConfigError("cessi_steady_branch: empty F grid");

  const double F_max = *std::max_element(F_grid.begin(), F_grid.end());
  const double y_lo = 1e-4;
  const double y_hi = 1.05 * F_max + 0.1;
  const int n_sweep = 4000;

  BranchTable table;
  table.mu = mu;
  table.eps = eps;
  table.points.reserve(n_sweep + 1);
  auto F_of_y = [&](double y) {
    const double z = detail::cessi_z_of_y(mu, eps, y);
    return y * (1.0 + mu * (z - y) * (z - y));
  };
  for (int i = 0; i <= n_sweep; ++i) {
    const double y = y_lo + (y_hi - y_lo) * i / n_sweep;
    const double z = detail::cessi_z_of_y(mu, eps, y);
    const double F = y * (1.0 + mu * (z - y) * (z - y));
    table.points.push_back({F, y, z, detail::cessi_stable(mu, eps, F, y, z)});
  }

  if (F_grid.size() >= 2) {
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    for (size_t i = 1; i + 1 < table.points.size(); ++i) {
      const double fm = table.points[i - 1].F, f0 = table.points[i].F,
                   fp = table.points[i + 1].F;
      const bool is_max = f0 > fm && f0 >= fp;
      const bool is_min = f0 < fm && f0 <= fp;
      if (!is_max && !is_min) continue;
      double a = table.points[i - 1].y, b = table.points[i + 1].y;
      const double sign = is_max ? -1.0 : 1.0;
      double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
      double v1 = sign * F_of_y(x1), v2 = sign * F_of_y(x2);
      while (b - a > 1e-12) {
        if (v1 < v2) {
          b = x2;
          x2 = x1;
          v2 = v1;
          x1 = b - golden * (b - a);
          v1 = sign * F_of_y(x1);
        } else {
          a = x1;
          x1 = x2;
          v1 = v2;
          x2 = a + golden * (b - a);
          v2 = sign * F_of_y(x2);
        }
      }
      const double y_fold = 0.5 * (a + b);
      table.folds.push_back(F_of_y(y_fold));
      table.fold_ys.push_back(y_fold);
    }
    // Ascending in F: F_c1 (min) before F_c2 (max).
    std::vector<size_t> idx(table.folds.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return table.folds[a] < table.folds[b];
    });
    std::vector<double> fs, ys;
    for (size_t k : idx) {
      fs.push_back(table.folds[k]);
      ys.push_back(table.fold_ys[k]);
    }
    table.folds = fs;
    table.fold_ys = ys;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Mean states
// ---------------------------------------------------------------------------

/// Time average of the deterministic trajectory after discarding `transient`
/// time units; classical RK4 at step dt. Throws DivergedError past norm 1e6.
inline Vec estimate_mean_state(const QuadraticModel& model, double transient,
                               double window, double dt,
                               const Vec& x0 = Vec()) {
  Vec x = x0.size() ? x0 : Vec::Constant(model.n, 0.1);
  if (x.size() != model.n)
    throw DimensionMismatchError("estimate_mean_state: x0 size");
  auto f = [&](const Vec& y) { return model.rhs(y); };
  const long n_trans = std::lround(transient / dt);
  const long n_avg = std::lround(window / dt);
  Vec sum = Vec::Zero(model.n);
  for (long k = 0; k < n_trans + n_avg; ++k) {
    const Vec k1 = f(x);
    const Vec k2 = f(x + 0.5 * dt * k1);
    const Vec k3 = f(x + 0.5 * dt * k2);
    const Vec k4 = f(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (x.norm() > 1e6) throw DivergedError((k + 1) * dt, x.norm());
    if (k >= n_trans) sum += x;
  }
  return sum / static_cast<double>(n_avg);
}

/// Componentwise least-squares linear fit of mean states over the control
/// parameter, evaluated at r_target.
inline Vec extrapolate_mean_state(
    const std::vector<std::pair<double, Vec>>& samples, double r_target) {
  if (samples.size() < 2)
    throw InsufficientSamplesError("need at least two mean-state samples");
  const int n = static_cast<int>(samples.front().second.size());
  double sr = 0.0;
  for (const auto& [r, c] : samples) {
    if (c.size() != n) throw DimensionMismatchError("mean-state sample size");
    if (!(r < r_target))
      throw InsufficientSamplesError("samples must lie below the target r");
    sr += r;
  }
  const double r_mean = sr / samples.size();
  double sxx = 0.0;
  for (const auto& [r, c] : samples) sxx += (r - r_mean) * (r - r_mean);
  if (sxx <= 0.0)
    throw InsufficientSamplesError("samples must have distinct r values");
  Vec mean = Vec::Zero(n), slope = Vec::Zero(n);
  for (const auto& [r, c] : samples) mean += c;
  mean /= static_cast<double>(samples.size());
  for (const auto& [r, c] : samples) slope += (r - r_mean) * (c - mean);
  slope /= sxx;
  return mean + (r_target - r_mean) * slope;
}

/// Newton solve of rhs(x) = 0 from the given seed.
inline Vec steady_state(const QuadraticModel& model, const Vec& seed,
                        double tol = 1e-12, int max_iters = 100) {
  Vec x = seed;
  for (int it = 0; it < max_iters; ++it) {
    const Vec f = model.rhs(x);
    if (f.norm() < tol * std::max(1.0, x.norm())) return x;
    const Mat jac = linearize_at(model, x);
    const Vec step = jac.fullPivLu().solve(f);
    x -= step;
    if (!x.allFinite()) break;
  }
  if (model.rhs(x).norm() < 1e-8) return x;
  throw RootNotFoundError("steady-state Newton did not converge");
}

}  // namespace opm
