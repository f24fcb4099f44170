#pragma once

// Rayleigh-Benard transition-prediction pipeline:
//   Step 1  extrapolate the mean state to the prediction parameter r_P
//   Step 2  surrogate spectrum from the linearization about that state
//   Step 3  per-mode horizon training on full-model data at r_D < r_P
//   Step 4  run the reduced system at r_P and classify the dynamics
// plus the invariant-manifold / stationary-balance baselines. The training
// phase sees full-model data only through a guard that refuses any r above
// r_D.

#include "opm/core.hpp"
#include "opm/defect.hpp"
#include "opm/diagnostics.hpp"
#include "opm/model.hpp"
#include "opm/param.hpp"
#include "opm/reduce.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opm {

struct RbNumerics {
  double dt = 5e-3;
  double mean_transient = 500.0, mean_window = 2000.0;
  double train_transient = 500.0, train_window = 500.0;
  double eval_transient = 500.0, eval_window = 1000.0;
  int nperseg = 16384;
  double sigma_p = 0.5;
  Vec x0 = Vec::Constant(9, 0.1);
};

/// Full-model data source for the training phase. Any request above the
/// ceiling r_max throws: the prediction pipeline must never look ahead.
class RbTrainingData {
 public:
  RbTrainingData(double r_max, RbNumerics num) : r_max_(r_max), num_(num) {}

  Vec mean_state(double r) const {
    guard(r);
    return estimate_mean_state(rb9d_model(r, num_.sigma_p),
                               num_.mean_transient, num_.mean_window, num_.dt,
                               num_.x0);
  }

  Trajectory trajectory(double r, double transient, double window) const {
    guard(r);
    return rb_run(rb9d_model(r, num_.sigma_p), transient, window, num_.dt,
                  num_.x0);
  }

  /// Full physical run (transient discarded); shared with the evaluation
  /// phase, which constructs it without the guard.
  static Trajectory rb_run(const QuadraticModel& model, double transient,
                           double window, double dt, const Vec& x0) {
    const std::vector<int> pairing(model.n, 0);
    std::vector<int> self(model.n);
    for (int i = 0; i < model.n; ++i) self[i] = i;
    auto full = integrate_rk4_conjugate(
        [&](double, const CVec& x) -> CVec {
          return model.rhs(Vec(x.real())).cast<Complex>();
        },
        self, x0.cast<Complex>(), 0.0, transient + window, dt);
    Trajectory out;
    out.coords = Trajectory::Coords::Physical;
    out.dt = dt;
    out.t0 = 0.0;
    const size_t skip = static_cast<size_t>(std::lround(transient / dt));
    out.states.assign(full.states.begin() + skip, full.states.end());
    return out;
  }

  double r_max() const { return r_max_; }

 private:
  void guard(double r) const {
    if (r > r_max_ + 1e-12)
      throw ConfigError("training data guard: requested r = " +
                        std::to_string(r) + " above r_D = " +
                        std::to_string(r_max_));
  }
  double r_max_;
  RbNumerics num_;
};

/// Physical trajectory projected onto an eigenbasis as fluctuations about
/// the given reference state.
inline Trajectory project_about(const Trajectory& phys,
                                const SpectralBasis& basis, const Vec& ref) {
  Trajectory out;
  out.coords = Trajectory::Coords::Eigen;
  out.t0 = phys.t0;
  out.dt = phys.dt;
  out.states.reserve(phys.size());
  for (const auto& s : phys.states)
    out.states.push_back(basis.project(CVec(s - ref.cast<Complex>())));
  return out;
}

struct RbModeTraining {
  int mode = 0;       // lead member of the pair (or a real mode)
  int partner = 0;    // == mode for real modes
  DefectProfile profile;
  double mean_corr_best = 0.0, mean_corr_second = 0.0;
  bool arbitrated = false;
  double selected_tau = 0.0;
};

struct RbExperimentConfig {
  int m_c = 3;
  double r_D = 13.91, r_P = 14.0;
  double delta_r = 0.02;    // I_r = [r_D - delta_r, r_D]
  int n_mean_samples = 5;
  RbNumerics num;
  TauSearchConfig search;
  double closeness = 0.15;  // correlation-arbitration threshold
  enum class TrainingReference { RdMean, Extrapolated };
  TrainingReference training_reference = TrainingReference::RdMean;
};

struct RbPredictResult {
  RbExperimentConfig config;
  std::vector<std::pair<double, Vec>> mean_samples;
  Vec mean_ext;      // Step 1 output
  Vec mean_true;     // direct estimate at r_P (diagnostic only)
  double mean_rel_err = 0.0;
  EigenModel surrogate;  // Step 2 output
  std::vector<RbModeTraining> training;  // Step 3 output
  std::vector<double> taus;              // per unresolved mode, all slots
  Parameterization param;
  Trajectory reduced_phys;  // Step 4 reconstruction at r_P
  Trajectory full_rP;       // reference full run at r_P (evaluation only)
  Trajectory full_rD;       // training-window full run
  PsdResult psd_reduced, psd_full_rP, psd_full_rD;
  SubharmonicResult sub_reduced, sub_full_rP, sub_full_rD;
  FlatnessResult flat_reduced, flat_full_rP;
};

/// Steps 1-4. Training reads full-model data only through the r_D-capped
/// guard; the true r_P run enters only the final comparison diagnostics.
inline RbPredictResult rb_predict_transition(const RbExperimentConfig& cfg) {
  RbPredictResult res;
  res.config = cfg;
  const RbTrainingData data(cfg.r_D, cfg.num);

  // Step 1: mean-state samples on I_r and linear extrapolation.
  for (int i = 0; i < cfg.n_mean_samples; ++i) {
    const double f = cfg.n_mean_samples == 1
                         ? 1.0
                         : static_cast<double>(i) / (cfg.n_mean_samples - 1);
    const double r = cfg.r_D - cfg.delta_r * (1.0 - f);
    res.mean_samples.emplace_back(r, data.mean_state(r));
  }
  const bool degenerate = cfg.r_P <= cfg.r_D + 1e-12;
  res.mean_ext = degenerate
                     ? res.mean_samples.back().second
                     : extrapolate_mean_state(res.mean_samples, cfg.r_P);

  // Step 2: surrogate spectrum at r_P about the extrapolated mean state.
  const auto model_rP = rb9d_model(cfg.r_P, cfg.num.sigma_p);
  res.surrogate = to_eigen_model(model_rP, res.mean_ext);

  // Step 3: horizon training on r_D data projected in the surrogate basis.
  res.full_rD = data.trajectory(cfg.r_D, cfg.num.train_transient,
                                cfg.num.train_window);
  const Vec train_ref =
      cfg.training_reference == RbExperimentConfig::TrainingReference::RdMean
          ? res.mean_samples.back().second
          : res.mean_ext;
  const Trajectory train_eigen =
      project_about(res.full_rD, res.surrogate.basis, train_ref);

  TauSearchConfig search = cfg.search;
  search.kind = ParamKind::OpmConst;
  res.taus.assign(static_cast<size_t>(9 - cfg.m_c), 0.0);
  for (int g = cfg.m_c; g < 9; ++g) {
    const int partner = res.surrogate.basis.conjugate_pairing[g];
    if (partner < g) {  // trailing pair member: share the lead's horizon
      res.taus[static_cast<size_t>(g - cfg.m_c)] =
          res.taus[static_cast<size_t>(partner - cfg.m_c)];
      continue;
    }
    RbModeTraining mt;
    mt.mode = g;
    mt.partner = partner;
    mt.profile = optimize_tau(train_eigen, res.surrogate, g, cfg.m_c, search);
    mt.selected_tau = mt.profile.selected_tau;

    // Correlation arbitration between close minima.
    if (mt.profile.minima.size() >= 2) {
      const double v1 = mt.profile.minima[0].second;
      const double v2 = mt.profile.minima[1].second;
      if ((v2 - v1) / std::max(v1, 1e-300) < cfg.closeness) {
        std::vector<int> corr_modes = {g};
        if (partner != g) corr_modes.push_back(partner);
        std::vector<std::pair<double, double>> cand;
        for (int m = 0; m < 2; ++m) {
          const double tau = mt.profile.minima[static_cast<size_t>(m)].first;
          const auto single =
              detail::single_mode_param(res.surrogate, cfg.m_c, g, tau,
                                        ParamKind::OpmConst);
          Parameterization pair_param = single;
          if (partner != g) {
            pair_param.modes.push_back(detail::single_mode_param(
                                           res.surrogate, cfg.m_c, partner,
                                           tau, ParamKind::OpmConst)
                                           .modes[0]);
          }
          const auto corr = correlation(train_eigen, res.surrogate, pair_param,
                                        corr_modes);
          cand.emplace_back(tau, corr.mean);
        }
        mt.mean_corr_best = cand[0].second;
        mt.mean_corr_second = cand[1].second;
        mt.arbitrated = true;
        mt.selected_tau = select_tau(mt.profile, cand, cfg.closeness);
      }
    }
    res.taus[static_cast<size_t>(g - cfg.m_c)] = mt.selected_tau;
    res.training.push_back(std::move(mt));
  }

  // Step 4: assemble, run at r_P, reconstruct, classify.
  res.param = build_opm_const(res.surrogate, cfg.m_c, res.taus);
  const auto sys = assemble_reduced(res.surrogate, cfg.m_c, res.param);
  const CVec x0_red =
      res.surrogate.basis.project(CVec((train_ref - res.mean_ext)
                                           .cast<Complex>()))
          .head(cfg.m_c);
  auto reduced = integrate_reduced_rk4(
      sys, x0_red, 0.0, cfg.num.eval_transient + cfg.num.eval_window,
      cfg.num.dt);
  const size_t skip =
      static_cast<size_t>(std::lround(cfg.num.eval_transient / cfg.num.dt));
  reduced.states.erase(reduced.states.begin(),
                       reduced.states.begin() + skip);
  res.reduced_phys = reconstruct(reduced, res.surrogate, res.param, 1e-6);

  // Evaluation-side references (not part of training).
  res.full_rP = RbTrainingData::rb_run(model_rP, cfg.num.eval_transient,
                                       cfg.num.eval_window, cfg.num.dt,
                                       cfg.num.x0);
  res.psd_reduced =
      welch_psd(res.reduced_phys.component_real(0), cfg.num.dt, cfg.num.nperseg);
  res.psd_full_rP =
      welch_psd(res.full_rP.component_real(0), cfg.num.dt, cfg.num.nperseg);
  res.psd_full_rD =
      welch_psd(res.full_rD.component_real(0), cfg.num.dt,
                std::min(cfg.num.nperseg, 8192));
  res.sub_reduced = classify_subharmonic(res.psd_reduced);
  res.sub_full_rP = classify_subharmonic(res.psd_full_rP);
  res.sub_full_rD = classify_subharmonic(res.psd_full_rD);
  res.flat_reduced = classify_chaotic(res.psd_reduced);
  res.flat_full_rP = classify_chaotic(res.psd_full_rP);

  // Diagnostic: extrapolation error against the directly estimated truth.
  res.mean_true = estimate_mean_state(model_rP, cfg.num.mean_transient,
                                      cfg.num.mean_window, cfg.num.dt,
                                      cfg.num.x0);
  res.mean_rel_err =
      (res.mean_ext - res.mean_true).norm() / res.mean_true.norm();
  return res;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct RbBaselineRun {
  std::string reference;  // "steady-state" or "mean-state"
  ParamKind kind = ParamKind::InvariantManifold;
  bool built = false;
  std::string error;
  FlatnessResult flatness;
  PsdResult psd;
  Trajectory phys;
  std::vector<double> energy_fractions;  // parameterized modes, full-model data
};

/// IM and FMT reduced systems about the steady state closest to the mean
/// state and about the mean state itself, integrated at r and classified.
inline std::vector<RbBaselineRun> rb_baselines(double r, int m_c,
                                               const RbNumerics& num = {}) {
  const auto model = rb9d_model(r, num.sigma_p);
  const Vec mean = estimate_mean_state(model, num.mean_transient,
                                       num.mean_window, num.dt, num.x0);
  const Vec steady = steady_state(model, mean);
  const auto full = RbTrainingData::rb_run(model, num.eval_transient,
                                           num.eval_window, num.dt, num.x0);

  std::vector<RbBaselineRun> runs;
  for (const auto& [name, ref] :
       std::vector<std::pair<std::string, Vec>>{{"steady-state", steady},
                                                {"mean-state", mean}}) {
    const auto em = to_eigen_model(model, ref);
    const auto fluct = project_about(full, em.basis, ref);
    for (ParamKind kind :
         {ParamKind::InvariantManifold, ParamKind::Fmt}) {
      RbBaselineRun run;
      run.reference = name;
      run.kind = kind;
      for (int g = m_c; g < 9; ++g)
        run.energy_fractions.push_back(energy_fraction(fluct, g));
      try {
        const auto p = kind == ParamKind::InvariantManifold
                           ? build_im(em, m_c)
                           : build_fmt(em, m_c);
        const auto sys = assemble_reduced(em, m_c, p);
        const CVec x0 = fluct.states.front().head(m_c);
        auto reduced = integrate_reduced_rk4(
            sys, x0, 0.0, num.eval_transient + num.eval_window, num.dt);
        const size_t skip =
            static_cast<size_t>(std::lround(num.eval_transient / num.dt));
        reduced.states.erase(reduced.states.begin(),
                             reduced.states.begin() + skip);
        run.phys = reconstruct(reduced, em, p, 1e-6);
        run.psd = welch_psd(run.phys.component_real(0), num.dt, num.nperseg);
        run.flatness = classify_chaotic(run.psd);
        run.built = true;
      } catch (const Error& e) {
        run.error = e.code();
      }
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

}  // namespace opm
