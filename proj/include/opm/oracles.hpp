#pragma once

// Independent numerical oracles used by the verification suites and tests.
// These deliberately avoid the closed-form coefficient formulas: the
// coefficient oracles do (nested) adaptive quadrature of the defining
// integrals, and the backward-forward oracle integrates the auxiliary
// two-stage system with RK4.

#include "opm/core.hpp"
#include "opm/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace opm::oracles {

// --- Adaptive Simpson over a real interval, complex integrand ---------------

namespace detail {

template <class F>
Complex simpson_rec(const F& f, double a, double b, Complex fa, Complex fm,
                    Complex fb, Complex whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const Complex flm = f(lm), frm = f(rm);
  const Complex left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Complex right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Complex delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class F>
Complex integrate(const F& f, double a, double b, double tol = 1e-13) {
  const Complex fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const Complex whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

// --- Coefficient oracles -----------------------------------------------------
// Defining integrals over the backward horizon [-tau, 0]:
//   D = int e^{-s ln} e^{s(li+lj)} ds
//   U = int e^{-s ln} w_i(s) w_j(s) ds
//   V = -int e^{s(li-ln)} w_j(s) ds
// where w_i(s) = int_s^0 e^{li (s-r)} dr is itself evaluated by quadrature.

inline Complex oracle_D(double tau, Complex li, Complex lj, Complex ln) {
  return integrate(
      [&](double s) { return std::exp(s * (li + lj - ln)); }, -tau, 0.0);
}

inline Complex oracle_w(double s, Complex lambda) {
  return integrate(
      [&](double r) { return std::exp(lambda * (s - r)); }, s, 0.0, 1e-14);
}

inline Complex oracle_U(double tau, Complex li, Complex lj, Complex ln) {
  return integrate(
      [&](double s) {
        return std::exp(-s * ln) * oracle_w(s, li) * oracle_w(s, lj);
      },
      -tau, 0.0, 1e-12);
}

inline Complex oracle_V(double tau, Complex li, Complex lj, Complex ln) {
  return -integrate(
      [&](double s) { return std::exp(s * (li - ln)) * oracle_w(s, lj); },
      -tau, 0.0, 1e-12);
}

// --- Backward-forward oracle --------------------------------------------------
// Numerically integrates, for one unresolved mode g,
//   dp_i/ds = l_i p_i + F_i             (backward, p(0) = X)
//   dq/ds   = l_g q + G_g(p(s)) + F_g   (forward, q(-tau) = 0)
// with RK4 at step dt, the forward pass reading p from a half-step grid.

inline Complex bf_integrate(const EigenModel& em, int m_c, int g, double tau,
                            const CVec& X, double dt = 1e-4) {
  const long m = std::lround(tau / dt);
  const double h = tau / std::max<long>(m, 1);
  const long fine = 2 * std::max<long>(m, 1);

  // Backward sweep on the half grid: store[i] = p(-i h / 2).
  std::vector<CVec> store(static_cast<size_t>(fine) + 1);
  CVec p = X;
  store[0] = p;
  auto prhs = [&](const CVec& v) {
    CVec out(m_c);
    for (int i = 0; i < m_c; ++i)
      out[i] = em.basis.lambdas[i] * v[i] + em.forcing[i];
    return out;
  };
  const double hb = -0.5 * h;
  for (long i = 0; i < fine; ++i) {
    const CVec k1 = prhs(p);
    const CVec k2 = prhs(p + 0.5 * hb * k1);
    const CVec k3 = prhs(p + 0.5 * hb * k2);
    const CVec k4 = prhs(p + hb * k3);
    p += (hb / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    store[static_cast<size_t>(i) + 1] = p;
  }

  auto g_of = [&](const CVec& v) {
    Complex acc(0.0, 0.0);
    for (int a = 0; a < m_c; ++a)
      for (int b = 0; b < m_c; ++b)
        acc += em.interaction[g](a, b) * v[a] * v[b];
    return acc + em.forcing[g];
  };
  const Complex lg = em.basis.lambdas[g];
  Complex q(0.0, 0.0);
  // Forward from s = -tau; stage nodes are half-grid entries.
  for (long k = m; k >= 1; --k) {
    const Complex f1 = lg * q + g_of(store[static_cast<size_t>(2 * k)]);
    const Complex q2 = q + 0.5 * h * f1;
    const Complex f2 = lg * q2 + g_of(store[static_cast<size_t>(2 * k - 1)]);
    const Complex q3 = q + 0.5 * h * f2;
    const Complex f3 = lg * q3 + g_of(store[static_cast<size_t>(2 * k - 1)]);
    const Complex q4 = q + h * f3;
    const Complex f4 = lg * q4 + g_of(store[static_cast<size_t>(2 * k - 2)]);
    q += (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
  }
  return q;
}

// --- Synthetic eigen models ---------------------------------------------------

/// Hand-filled eigen-coordinate system with prescribed spectrum, random
/// interaction coefficients, and optional constant forcing. Pairing is left
/// trivial; only builders that read lambdas/interaction/forcing use these.
inline EigenModel synthetic_eigen_model(int n, int m_c, std::uint64_t seed,
                                        bool with_forcing,
                                        double re_c_lo = -0.3,
                                        double re_c_hi = 0.3,
                                        double re_s_lo = -2.0,
                                        double re_s_hi = -0.5) {
  GaussianStream rng(seed);
  auto uni = [&](double lo, double hi) {
    return lo + (hi - lo) * rng.uniform01();
  };
  EigenModel em;
  em.basis.n = n;
  em.basis.lambdas.resize(n);
  for (int j = 0; j < n; ++j) {
    const bool resolved = j < m_c;
    em.basis.lambdas[j] =
        Complex(resolved ? uni(re_c_lo, re_c_hi) : uni(re_s_lo, re_s_hi),
                uni(-1.0, 1.0));
  }
  // Keep the descending-real-part ordering.
  std::sort(em.basis.lambdas.data(), em.basis.lambdas.data() + n,
            [](Complex a, Complex b) { return a.real() > b.real(); });
  em.basis.conjugate_pairing.resize(n);
  for (int j = 0; j < n; ++j) em.basis.conjugate_pairing[j] = j;
  em.basis.right_vectors = CMat::Identity(n, n);
  em.basis.adjoint_vectors = CMat::Identity(n, n);
  em.interaction.assign(n, CMat::Zero(n, n));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        em.interaction[j](k, l) = Complex(uni(-1, 1), uni(-1, 1));
  em.forcing = CVec::Zero(n);
  if (with_forcing)
    for (int j = 0; j < n; ++j)
      em.forcing[j] = Complex(uni(-0.5, 0.5), uni(-0.5, 0.5));
  em.reference_state = Vec::Zero(n);
  return em;
}

}  // namespace opm::oracles
