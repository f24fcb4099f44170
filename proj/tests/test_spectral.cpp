#include "opm/spectral.hpp"
#include "opm/model.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace opm;
using Catch::Approx;

namespace {

double biorthogonality_error(const SpectralBasis& b) {
  const CMat gram = b.adjoint_vectors.adjoint() * b.right_vectors;
  return (gram - CMat::Identity(b.n, b.n)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("diagonal matrix decomposes to unit axes") {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = -1.0;
  a(1, 1) = -2.0;
  const SpectralBasis b = decompose(a);
  CHECK(b.lambdas[0].real() == Approx(-1.0));
  CHECK(b.lambdas[1].real() == Approx(-2.0));
  CHECK(b.lambdas[0].imag() == 0.0);
  CHECK(std::abs(b.right_vectors(0, 0)) == Approx(1.0));
  CHECK(std::abs(b.right_vectors(1, 0)) == Approx(0.0).margin(1e-14));
  CHECK(std::abs(b.adjoint_vectors(1, 1)) == Approx(1.0));
  CHECK(biorthogonality_error(b) < 1e-12);
}

TEST_CASE("Cessi Jacobian spectrum at the lower-branch state") {
  // F = 0.855, mu = 6.2, eps = 0.1; reference state from the branch solve.
  const double mu = 6.2, eps = 0.1, F = 0.855;
  const auto branch = cessi_steady_branch(mu, eps, {0.84, 0.89});
  const auto eqs = branch.equilibria_at(F);
  REQUIRE(eqs.size() == 3);
  const auto& low = eqs.front();
  CHECK(low.y == Approx(0.4130).margin(1e-3));
  CHECK(low.z == Approx(0.8285).margin(1e-3));

  const Mat a = linearize_at(cessi_model(mu, eps, F),
                             (Vec(2) << low.y, low.z).finished());
  const SpectralBasis b = decompose(a);
  CHECK(b.lambdas[0].real() == Approx(-0.5168).margin(1e-3));
  CHECK(b.lambdas[1].real() == Approx(-15.7650).margin(1e-3));
  CHECK(b.is_real_mode(0));
  CHECK(b.is_real_mode(1));
}

TEST_CASE("rotation-like matrix: analytic conjugate pair") {
  Mat a(2, 2);
  a << 0.0, -1.0, 1.0, 0.0;
  const SpectralBasis b = decompose(a);
  // +i first by the ordering tie-break.
  CHECK(b.lambdas[0].imag() == Approx(1.0));
  CHECK(b.lambdas[1].imag() == Approx(-1.0));
  CHECK(b.conjugate_pairing[0] == 1);
  CHECK(b.conjugate_pairing[1] == 0);

  // Analytic eigenvectors of [[0,-1],[1,0]]: (1, -i)/sqrt(2) for +i.
  const CVec e0 = b.right_vectors.col(0);
  const Complex ratio = e0[1] / e0[0];
  CHECK(ratio.real() == Approx(0.0).margin(1e-12));
  CHECK(ratio.imag() == Approx(-1.0).margin(1e-12));

  // Direct inner products against the analytic adjoint basis.
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      const Complex ip = inner(CVec(b.right_vectors.col(j)),
                               CVec(b.adjoint_vectors.col(k)));
      CHECK(std::abs(ip - (j == k ? 1.0 : 0.0)) < 1e-12);
    }
}

TEST_CASE("random diagonalizable matrices: biorthogonality and reconstruction") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 25; ++rep) {
    Mat a(9, 9);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) a(i, j) = u(rng);
    SpectralBasis b;
    try {
      b = decompose(a);
    } catch (const NonDiagonalizableError&) {
      continue;  // a genuinely ill-conditioned draw
    }
    CHECK(biorthogonality_error(b) < 1e-10);
    const double rel =
        (b.reconstruct_matrix() - a.cast<Complex>()).norm() / a.norm();
    CHECK(rel < 1e-8);
    // Ordering and pairing invariants.
    for (int j = 0; j + 1 < 9; ++j)
      CHECK(b.lambdas[j].real() >= b.lambdas[j + 1].real() - 1e-12);
    for (int j = 0; j < 9; ++j) {
      const int p = b.conjugate_pairing[j];
      CHECK(b.conjugate_pairing[p] == j);
      if (p != j) {
        CHECK(std::abs(p - j) == 1);  // pairs adjacent
        CHECK(std::abs(b.lambdas[p] - std::conj(b.lambdas[j])) < 1e-12);
      }
    }
    // Projection/reconstruction round trip on a random real state.
    Vec x(9);
    for (int i = 0; i < 9; ++i) x[i] = u(rng);
    const CVec y = b.project(x);
    const CVec back = b.reconstruct(y);
    CHECK((back - x.cast<Complex>()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("defective-looking input raises NonDiagonalizable") {
  Mat a(2, 2);  // Jordan block
  a << 1.0, 1.0, 0.0, 1.0;
  CHECK_THROWS_AS(decompose(a), NonDiagonalizableError);
}

TEST_CASE("decomposition is deterministic") {
  Mat a(4, 4);
  a << 0, -2, 0.3, 0, 2, 0, 0, 0.1, 0, 0.2, -1, -3, 0.1, 0, 3, -1;
  const SpectralBasis b1 = decompose(a);
  const SpectralBasis b2 = decompose(a);
  CHECK((b1.right_vectors - b2.right_vectors).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b1.lambdas - b2.lambdas).cwiseAbs().maxCoeff() == 0.0);
}
