#pragma once

// Complex eigendecomposition of small dense real matrices with biorthogonally
// normalized right/adjoint eigenvector pairs.

#include "opm/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace opm {

/// Spectral elements of a real matrix A: eigenvalues ordered by descending
/// real part, right eigenvectors e_j, and adjoint eigenvectors e*_j (the
/// eigenvectors of the conjugate transpose) normalized so <e_j, e*_k> = d_jk.
struct SpectralBasis {
  int n = 0;
  CVec lambdas;
  CMat right_vectors;    // column j = e_j
  CMat adjoint_vectors;  // column j = e*_j
  // partner[j] == j for a real mode, otherwise the index of the conjugate.
  std::vector<int> conjugate_pairing;

  bool is_real_mode(int j) const { return conjugate_pairing[j] == j; }

  /// Coordinates y_j = <x, e*_j>.
  CVec project(const CVec& x) const { return adjoint_vectors.adjoint() * x; }
  CVec project(const Vec& x) const { return project(CVec(x.cast<Complex>())); }

  /// Linear combination sum_j y_j e_j.
  CVec reconstruct(const CVec& y) const { return right_vectors * y; }

  /// sum_j lambda_j e_j (e*_j)^H; equals the input matrix when diagonalizable.
  CMat reconstruct_matrix() const {
    return right_vectors * lambdas.asDiagonal() * adjoint_vectors.adjoint();
  }
};

namespace detail {

// Descending real part; ties: smaller |Im| first, then positive Im before
// negative so a conjugate pair sits adjacent with its +Im member leading.
inline bool spectral_order(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() > b.real();
  const double ia = std::abs(a.imag()), ib = std::abs(b.imag());
  if (ia != ib) return ia < ib;
  return a.imag() > b.imag();
}

// Rotate v so its largest-magnitude component is real and positive.
inline void fix_phase(Eigen::Ref<CVec> v) {
  int k = 0;
  double best = -1.0;
  for (int i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]);
    if (m > best + 1e-15) {
      best = m;
      k = i;
    }
  }
  if (best <= 0.0) return;
  v *= std::conj(v[k]) / best;
  v[k] = Complex(std::abs(v[k]), 0.0);
}

}  // namespace detail

/// Eigendecomposition of a real N x N matrix. Throws NonDiagonalizableError
/// when the spectral reconstruction misses the input by more than
/// `diag_tol` in relative Frobenius norm.
inline SpectralBasis decompose(const Mat& a, double diag_tol = 1e-6) {
  if (a.rows() != a.cols())
    throw DimensionMismatchError("decompose: matrix must be square");
  const int n = static_cast<int>(a.rows());

  Eigen::EigenSolver<Mat> solver(a, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw NonDiagonalizableError("eigensolver failed to converge");

  CVec lam = solver.eigenvalues();
  CMat vec = solver.eigenvectors();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return detail::spectral_order(lam[i], lam[j]);
  });

  SpectralBasis basis;
  basis.n = n;
  basis.lambdas.resize(n);
  basis.right_vectors.resize(n, n);
  basis.conjugate_pairing.assign(n, 0);

  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  const double imag_tol = 1e-12 * scale;

  for (int j = 0; j < n; ++j) {
    basis.lambdas[j] = lam[order[j]];
    basis.right_vectors.col(j) = vec.col(order[j]);
  }

  // Pairing, phase fixing, and exact conjugacy of pair members.
  for (int j = 0; j < n;) {
    if (std::abs(basis.lambdas[j].imag()) <= imag_tol) {
      basis.lambdas[j] = Complex(basis.lambdas[j].real(), 0.0);
      detail::fix_phase(basis.right_vectors.col(j));
      basis.right_vectors.col(j) = basis.right_vectors.col(j).real()
                                       .cast<Complex>();
      basis.conjugate_pairing[j] = j;
      ++j;
      continue;
    }
    if (j + 1 >= n ||
        std::abs(basis.lambdas[j + 1] - std::conj(basis.lambdas[j])) >
            1e-8 * scale)
      throw NonDiagonalizableError(
          "complex eigenvalue without a conjugate partner");
    detail::fix_phase(basis.right_vectors.col(j));
    basis.lambdas[j + 1] = std::conj(basis.lambdas[j]);
    basis.right_vectors.col(j + 1) = basis.right_vectors.col(j).conjugate();
    basis.conjugate_pairing[j] = j + 1;
    basis.conjugate_pairing[j + 1] = j;
    j += 2;
  }

  // Adjoint vectors: columns of (E^-1)^H are eigenvectors of A^H. Rescale so
  // <e_j, e*_j> = 1 holds to roundoff.
  Eigen::PartialPivLU<CMat> lu(basis.right_vectors.adjoint());
  basis.adjoint_vectors = lu.solve(CMat::Identity(n, n));
  for (int j = 0; j < n; ++j) {
    const Complex c = inner(CVec(basis.right_vectors.col(j)),
                            CVec(basis.adjoint_vectors.col(j)));
    if (std::abs(c) < 1e-14)
      throw NonDiagonalizableError("degenerate eigenvector pairing");
    basis.adjoint_vectors.col(j) /= std::conj(c);
  }
  for (int j = 0; j < n; ++j) {
    const int p = basis.conjugate_pairing[j];
    if (p == j)
      basis.adjoint_vectors.col(j) =
          basis.adjoint_vectors.col(j).real().cast<Complex>();
    else if (p == j + 1)
      basis.adjoint_vectors.col(p) = basis.adjoint_vectors.col(j).conjugate();
  }

  const double residual =
      (basis.reconstruct_matrix() - a.cast<Complex>()).norm();
  const double ref = std::max(a.norm(), 1e-300);
  if (residual / ref > diag_tol)
    throw NonDiagonalizableError("reconstruction residual " +
                                 std::to_string(residual / ref));
  return basis;
}

}  // namespace opm
