#include "opm/model.hpp"
#include "opm/reduce.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace opm;
using Catch::Approx;

namespace {

// Literal transcriptions of the governing equations, for tensor checks.

Vec cessi_rhs_hand(double mu, double eps, double F, const Vec& x) {
  const double y = x[0], z = x[1];
  Vec out(2);
  out[0] = F - y * (1.0 + mu * (z - y) * (z - y));
  out[1] = -(z - 1.0) / eps - z * (1.0 + mu * (z - y) * (z - y));
  return out;
}

Vec rb9d_rhs_hand(double r, double s, const Vec& c) {
  const double a2 = 0.25;
  const double b1 = 4.0 * (1.0 + a2) / (1.0 + 2.0 * a2);
  const double b2 = (1.0 + 2.0 * a2) / (2.0 * (1.0 + a2));
  const double b3 = 2.0 * (1.0 - a2) / (1.0 + a2);
  const double b4 = a2 / (1.0 + a2);
  const double b5 = 8.0 * a2 / (1.0 + 2.0 * a2);
  const double b6 = 4.0 / (1.0 + 2.0 * a2);
  const double C1 = c[0], C2 = c[1], C3 = c[2], C4 = c[3], C5 = c[4],
               C6 = c[5], C7 = c[6], C8 = c[7], C9 = c[8];
  Vec out(9);
  out[0] = -s * b1 * C1 - C2 * C4 + b4 * C4 * C4 + b3 * C3 * C5 - s * b2 * C7;
  out[1] = -s * C2 + C1 * C4 - C2 * C5 + C4 * C5 - 0.5 * s * C9;
  out[2] = -s * b1 * C3 + C2 * C4 - b4 * C2 * C2 - b3 * C1 * C5 + s * b2 * C8;
  out[3] = -s * C4 - C2 * C3 - C2 * C5 + C4 * C5 + 0.5 * s * C9;
  out[4] = -s * b5 * C5 + 0.5 * C2 * C2 - 0.5 * C4 * C4;
  out[5] = -b6 * C6 + C2 * C9 - C4 * C9;
  out[6] = -b1 * C7 - r * C1 + 2.0 * C5 * C8 - C4 * C9;
  out[7] = -b1 * C8 + r * C3 - 2.0 * C5 * C7 + C2 * C9;
  out[8] = -C9 - C2 * (r + 2.0 * C6 + C8) + C4 * (r + 2.0 * C6 + C7);
  return out;
}

Vec random_state(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = u(rng);
  return x;
}

}  // namespace

TEST_CASE("RB9D geometry constants") {
  const auto m = rb9d_model(14.0);
  CHECK(m.parameters.at("b1") == Approx(10.0 / 3.0).epsilon(1e-15));
  CHECK(m.parameters.at("b2") == Approx(3.0 / 5.0).epsilon(1e-15));
  CHECK(m.parameters.at("b3") == Approx(6.0 / 5.0).epsilon(1e-15));
  CHECK(m.parameters.at("b4") == Approx(1.0 / 5.0).epsilon(1e-15));
  CHECK(m.parameters.at("b5") == Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(m.parameters.at("b6") == Approx(8.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("tensor evaluation matches the hand-written right-hand sides") {
  std::mt19937_64 rng(7);
  const auto cessi = cessi_model(6.2, 0.1, 0.855);
  const auto rb = rb9d_model(14.22, 0.5);
  for (int rep = 0; rep < 100; ++rep) {
    const Vec xc = random_state(rng, 2, 2.0);
    const Vec diff_c = cessi.rhs(xc) - cessi_rhs_hand(6.2, 0.1, 0.855, xc);
    CHECK(diff_c.cwiseAbs().maxCoeff() < 1e-12);
    const Vec xr = random_state(rng, 9, 3.0);
    const Vec diff_r = rb.rhs(xr) - rb9d_rhs_hand(14.22, 0.5, xr);
    CHECK(diff_r.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("linearize_at: zero reference returns L") {
  const auto rb = rb9d_model(13.91);
  CHECK((linearize_at(rb, Vec::Zero(9)) - rb.linear).norm() == 0.0);
  const auto cessi = cessi_model(6.2, 0.1, 0.855);
  CHECK((linearize_at(cessi, Vec::Zero(2)) - cessi.linear).norm() == 0.0);
}

TEST_CASE("linearize_at matches a finite-difference Jacobian") {
  std::mt19937_64 rng(11);
  const double r = 14.0, s = 0.5;
  const auto rb = rb9d_model(r, s);
  const Vec ref = random_state(rng, 9, 1.5);
  const Mat jac = linearize_at(rb, ref);
  const double h = 1e-6;
  for (int j = 0; j < 9; ++j) {
    Vec e = Vec::Zero(9);
    e[j] = h;
    const Vec col = (rb9d_rhs_hand(r, s, ref + e) - rb9d_rhs_hand(r, s, ref - e)) /
                    (2.0 * h);
    CHECK((jac.col(j) - col).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("eigen model about a steady state has zero forcing") {
  const double mu = 6.2, eps = 0.1, F = 0.855;
  const auto branch = cessi_steady_branch(mu, eps, {0.84, 0.89});
  const auto low = branch.equilibria_at(F).front();
  const auto model = cessi_model(mu, eps, F);
  const Vec ref = (Vec(2) << low.y, low.z).finished();
  const auto em = to_eigen_model(model, ref);
  CHECK(em.forcing.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("eigen-coordinate RHS equals the projected physical RHS") {
  std::mt19937_64 rng(3);
  const auto rb = rb9d_model(14.22, 0.5);
  const Vec ref = random_state(rng, 9, 1.0);
  const auto em = to_eigen_model(rb, ref);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec delta = random_state(rng, 9, 0.5);
    const CVec y = em.basis.project(delta);
    const CVec lhs = em.rhs(y);
    const CVec rhs = em.basis.project(rb.rhs(Vec(ref + delta)));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
  }
  // Round trip physical -> eigen -> physical.
  const Vec delta = random_state(rng, 9, 0.7);
  const CVec back = em.reconstruct_state(em.project_state(Vec(ref + delta)));
  CHECK((back - (ref + delta).cast<Complex>()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("eigen model of the cubic Cessi system reproduces full trajectories") {
  const double mu = 6.2, eps = 0.1, F = 0.855;
  const auto branch = cessi_steady_branch(mu, eps, {0.84, 0.89});
  const auto low = branch.equilibria_at(F).front();
  const auto model = cessi_model(mu, eps, F);
  const Vec ref = (Vec(2) << low.y, low.z).finished();
  const auto em = to_eigen_model(model, ref);

  const Vec delta0 = (Vec(2) << 0.08, -0.05).finished();
  const double dt = 1e-3;

  // Physical integration.
  std::vector<int> phys_pairing = {0, 1};
  const auto full = integrate_rk4_conjugate(
      [&](double, const CVec& x) -> CVec {
        return model.rhs(Vec(x.real())).cast<Complex>();
      },
      phys_pairing, (ref + delta0).cast<Complex>(), 0.0, 10.0, dt);

  // Eigen-coordinate integration, mapped back.
  const auto eig = integrate_rk4_conjugate(
      [&](double, const CVec& y) { return em.rhs(y); },
      em.basis.conjugate_pairing, em.project_state(Vec(ref + delta0)), 0.0,
      10.0, dt);
  REQUIRE(full.size() == eig.size());
  double worst = 0.0;
  for (size_t k = 0; k < full.size(); ++k) {
    const CVec mapped = em.reconstruct_state(eig.states[k]);
    worst = std::max(worst,
                     (mapped - full.states[k]).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("Cessi branch: folds, lower-branch state, stability layout") {
  const double mu = 6.2, eps = 0.1;
  const auto branch = cessi_steady_branch(mu, eps, {0.80, 0.95});
  REQUIRE(branch.folds.size() == 2);
  CHECK(branch.folds[0] == Approx(0.8513).margin(1e-3));
  CHECK(branch.folds[1] == Approx(0.8821).margin(1e-3));

  const auto eqs = branch.equilibria_at(0.855);
  REQUIRE(eqs.size() == 3);
  CHECK(eqs[0].y == Approx(0.4130).margin(1e-3));
  CHECK(eqs[0].z == Approx(0.8285).margin(1e-3));

  // The governing equations vanish on the branch.
  const auto model_at = [&](double F) { return cessi_model(mu, eps, F); };
  for (size_t i = 0; i < branch.points.size(); i += 97) {
    const auto& p = branch.points[i];
    const Vec x = (Vec(2) << p.y, p.z).finished();
    CHECK(model_at(p.F).rhs(x).cwiseAbs().maxCoeff() < 1e-10);
  }

  // Exactly the middle branch is unstable strictly between the folds.
  for (double F : {0.855, 0.86, 0.87, 0.88}) {
    const auto e3 = branch.equilibria_at(F);
    REQUIRE(e3.size() == 3);
    CHECK(e3[0].stable);
    CHECK(!e3[1].stable);
    CHECK(e3[2].stable);
  }
  for (double F : {0.82, 0.91}) {
    const auto e1 = branch.equilibria_at(F);
    REQUIRE(e1.size() == 1);
    CHECK(e1[0].stable);
  }
}

TEST_CASE("branch continuation in the near-linear limit") {
  const auto branch = cessi_steady_branch(1e-8, 0.1, {0.5, 1.2});
  CHECK(branch.folds.empty());
  for (double F : {0.6, 0.9, 1.1})
    CHECK(branch.equilibria_at(F).size() == 1);
}

TEST_CASE("degenerate F grid: equilibria yes, folds no") {
  const auto branch = cessi_steady_branch(6.2, 0.1, {0.855});
  CHECK(branch.folds.empty());
  CHECK(branch.equilibria_at(0.855).size() == 3);
}

TEST_CASE("mean state of a fixed-point regime is the equilibrium") {
  const double mu = 6.2, eps = 0.1, F = 0.855;
  const auto branch = cessi_steady_branch(mu, eps, {0.84, 0.89});
  const auto low = branch.equilibria_at(F).front();
  const auto model = cessi_model(mu, eps, F);
  const Vec x0 = (Vec(2) << low.y + 0.05, low.z - 0.03).finished();
  const Vec mean = estimate_mean_state(model, 60.0, 20.0, 1e-3, x0);
  CHECK(mean[0] == Approx(low.y).margin(1e-6));
  CHECK(mean[1] == Approx(low.z).margin(1e-6));
}

TEST_CASE("mean-state estimation reports divergence") {
  // Flip the sign of the dissipative linear part to force blow-up.
  auto model = cessi_model(6.2, 0.1, 0.855);
  model.linear *= -40.0;
  CHECK_THROWS_AS(estimate_mean_state(model, 1.0, 1.0, 1e-2,
                                      (Vec(2) << 5.0, 5.0).finished()),
                  DivergedError);
}

TEST_CASE("mean-state extrapolation") {
  // Exactly linear data is recovered exactly.
  std::vector<std::pair<double, Vec>> samples;
  const Vec a = (Vec(3) << 1.0, -2.0, 0.5).finished();
  const Vec b = (Vec(3) << 0.2, 0.0, -1.0).finished();
  for (double r : {1.0, 1.1, 1.2, 1.3}) samples.push_back({r, a + r * b});
  const Vec ext = extrapolate_mean_state(samples, 2.0);
  CHECK((ext - (a + 2.0 * b)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(extrapolate_mean_state({samples[0]}, 2.0),
                  InsufficientSamplesError);
  CHECK_THROWS_AS(
      extrapolate_mean_state({{1.0, a}, {1.0, a}}, 2.0),
      InsufficientSamplesError);
  CHECK_THROWS_AS(
      extrapolate_mean_state({{1.0, a}, {2.5, a}}, 2.0),
      InsufficientSamplesError);
}

TEST_CASE("steady-state Newton") {
  const auto model = cessi_model(6.2, 0.1, 0.855);
  const Vec seed = (Vec(2) << 0.45, 0.8).finished();
  const Vec ss = steady_state(model, seed);
  CHECK(model.rhs(ss).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(ss[0] == Approx(0.4130).margin(2e-3));
}
