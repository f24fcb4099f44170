// Throwaway exploration driver (not part of the build once removed).
#include "opm/experiments_cessi.hpp"
#include "opm/experiments_rb.hpp"

#include <chrono>
#include <cstdio>

using namespace opm;

static double now_s() {
  using clk = std::chrono::steady_clock;
  static const auto start = clk::now();
  return std::chrono::duration<double>(clk::now() - start).count();
}

int main(int argc, char** argv) {
  const std::string what = argc > 1 ? argv[1] : "cessi";

  if (what == "cessi") {
    CessiConfig cfg;
    cfg.search.grid_points = 60;
    const auto c = cessi_opm_pipeline(cfg);
    std::printf("[%.1fs] folds: F_c1=%.6f F_c2=%.6f y_fold=%.6f\n", now_s(),
                c.F_c1, c.F_c2, c.y_fold);
    std::printf("steady: (%.6f, %.6f)  y_mid=%.6f\n", c.ybar(), c.zbar(),
                c.y_mid);
    std::printf("lambda: %.6f %.6f\n", c.lambda1, c.lambda2);
    std::printf("sigma1=%.6f sigma2=%.6f\n", c.sigma1, c.sigma2);
    std::printf("e = [%.4f %.4f; %.4f %.4f], es1=(%.4f, %.4f)\n", c.e11,
                c.e12, c.e21, c.e22, c.es1_y, c.es1_z);
    std::printf("B112=%.6f D112=%.6f gamma1=%.6f\n", c.b112, c.d112, c.gamma1);
    std::printf("tau* = %g, profile minima:\n", c.tau_star);
    for (auto& [t, v] : c.profile.minima) std::printf("  tau=%g Q=%.6g\n", t, v);
    const size_t m = c.profile.values.size();
    std::printf("profile: Q(0)=%.3g Q(tau_min)=%.3g Q(mid)=%.3g Q(max)=%.3g Q(inf)=%.3g\n",
                c.profile.values[0], c.profile.values[1],
                c.profile.values[m / 2], c.profile.values[m - 2],
                c.profile.values[m - 1]);
    bool mono = true;
    for (size_t i = 1; i + 1 < m; ++i)
      if (c.profile.values[i + 1] > c.profile.values[i] + 1e-10) mono = false;
    std::printf("monotone non-increasing: %d\n", mono);

    const auto eval = cessi_out_of_sample(c, 300.0, 1);
    std::printf("[%.1fs] occupancy full=%.4f reduced=%.4f\n", now_s(),
                eval.occupancy_full, eval.occupancy_reduced);
  } else if (what == "tip") {
    CessiConfig cfg;
    cfg.search.grid_points = 40;
    const auto c = cessi_opm_pipeline(cfg);
    TippingConfig tc;
    tc.n_realizations = argc > 2 ? std::atoi(argv[2]) : 50;
    const auto s = run_tipping_ensemble(c, tc);
    std::printf("[%.1fs] n=%d full_found=%d reduced_found=%d slow=%d\n",
                now_s(), s.n, s.full_found, s.reduced_found, s.slow_tipped);
    std::printf("median|dF|=%.5f overlap=%.3f slow_frac=%.3f\n",
                s.median_abs_dF, s.overlap, s.slow_tip_fraction);
    double mf = 0, mr = 0;
    for (double f : s.F_full) mf += f;
    for (double f : s.F_reduced) mr += f;
    std::printf("mean F_full=%.5f mean F_red=%.5f (F_c2=%.5f)\n",
                mf / std::max<size_t>(1, s.F_full.size()),
                mr / std::max<size_t>(1, s.F_reduced.size()), c.F_c2);
  } else if (what == "rbmean") {
    RbNumerics num;
    for (double r : {13.89, 13.895, 13.90, 13.905, 13.91, 14.0, 14.08, 14.09,
                     14.10, 14.22}) {
      const auto m = estimate_mean_state(rb9d_model(r, num.sigma_p),
                                         num.mean_transient, num.mean_window,
                                         num.dt, num.x0);
      std::printf("[%.1fs] r=%.3f |C|=%.6f C=(%.4f %.4f %.4f %.4f %.4f %.4f %.4f %.4f %.4f)\n",
                  now_s(), r, m.norm(), m[0], m[1], m[2], m[3], m[4], m[5],
                  m[6], m[7], m[8]);
    }
  } else if (what == "rbext") {
    RbNumerics num;
    for (auto [rD, rP] : {std::pair{13.91, 14.0}, std::pair{14.10, 14.22}}) {
      std::vector<std::pair<double, Vec>> samples;
      for (int i = 0; i < 5; ++i) {
        const double r = rD - 0.02 * (1.0 - i / 4.0);
        samples.emplace_back(
            r, estimate_mean_state(rb9d_model(r, num.sigma_p),
                                   num.mean_transient, num.mean_window,
                                   num.dt, num.x0));
      }
      const Vec ext = extrapolate_mean_state(samples, rP);
      const Vec truth = estimate_mean_state(rb9d_model(rP, num.sigma_p),
                                            num.mean_transient,
                                            num.mean_window, num.dt, num.x0);
      std::printf("[%.1fs] rD=%.2f rP=%.2f rel_err=%.5f%%\n", now_s(), rD, rP,
                  100.0 * (ext - truth).norm() / truth.norm());
      const auto em = to_eigen_model(rb9d_model(rP, num.sigma_p), ext);
      for (int j = 0; j < 9; ++j)
        std::printf("  lambda_%d = %.4f %+.4fi  pair=%d\n", j + 1,
                    em.basis.lambdas[j].real(), em.basis.lambdas[j].imag(),
                    em.basis.conjugate_pairing[j]);
    }
  } else if (what == "rbtrain") {
    RbExperimentConfig cfg;
    cfg.m_c = argc > 2 ? std::atoi(argv[2]) : 5;
    cfg.r_D = cfg.m_c == 5 ? 14.10 : 13.91;
    cfg.r_P = cfg.m_c == 5 ? 14.22 : 14.0;
    cfg.search.grid_points = argc > 3 ? std::atoi(argv[3]) : 120;
    const auto res = rb_predict_transition(cfg);
    std::printf("[%.1fs] mean_rel_err=%.5f%%\n", now_s(),
                100.0 * res.mean_rel_err);
    for (const auto& mt : res.training) {
      std::printf("mode %d (partner %d): tau*=%.4g%s minima:", mt.mode + 1,
                  mt.partner + 1, mt.selected_tau,
                  mt.arbitrated ? " [arbitrated]" : "");
      for (auto& [t, v] : mt.profile.minima)
        std::printf(" (tau=%.4g, J=%.5g)", t, v);
      if (mt.arbitrated)
        std::printf(" corr: %.4f vs %.4f", mt.mean_corr_best,
                    mt.mean_corr_second);
      std::printf("\n");
    }
    std::printf("full rD: sub=%d (f_main=%.4f prom=%.1f dB)\n",
                res.sub_full_rD.subharmonic, res.sub_full_rD.f_main,
                res.sub_full_rD.prominence_db);
    std::printf("full rP: sub=%d (prom=%.1f dB) chaotic=%d (line_frac=%.3f)\n",
                res.sub_full_rP.subharmonic, res.sub_full_rP.prominence_db,
                res.flat_full_rP.chaotic, res.flat_full_rP.max_line_fraction);
    std::printf("reduced: sub=%d (prom=%.1f dB) chaotic=%d (line_frac=%.3f)\n",
                res.sub_reduced.subharmonic, res.sub_reduced.prominence_db,
                res.flat_reduced.chaotic, res.flat_reduced.max_line_fraction);
    std::printf("[%.1fs] done\n", now_s());
  } else if (what == "rbbase") {
    const auto runs = rb_baselines(14.22, 5);
    for (const auto& r : runs) {
      std::printf("[%.1fs] %s %s: built=%d err=%s chaotic=%d line_frac=%.3f  energies:",
                  now_s(), r.reference.c_str(), to_string(r.kind), r.built,
                  r.error.c_str(), r.flatness.chaotic,
                  r.flatness.max_line_fraction);
      for (double e : r.energy_fractions) std::printf(" %.4f%%", 100.0 * e);
      std::printf("\n");
    }
  }
  return 0;
}
