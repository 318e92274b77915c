#pragma once

#include <optional>
#include <vector>

#include "subgroup/learners.hpp"
#include "subgroup/math.hpp"
#include "subgroup/model.hpp"
#include "subgroup/onestep.hpp"
#include "subgroup/rng.hpp"

namespace subgroup {

struct FluctuationFit {
  double epsilon = 0.0;
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;  // |pooled score| at the returned epsilon
};

struct CvTmleReport : EstimateReport {
  FluctuationFit fluctuation;
  std::vector<std::size_t> fold_subgroup_sizes;
};

/// max(delta, empirical sd of pooled cross-validated EIF values).
inline double cross_validated_eif_variance(std::span<const double> eif_values,
                                           double delta) {
  RunningMoments m;
  for (double v : eif_values) m.add(v);
  return std::max(delta, m.sd());
}

namespace detail {

/// Root of the monotone-decreasing pooled score sum_i h_i (y_i -
/// expit(l_i + eps h_i)) by bisection on |eps| <= 10.
inline FluctuationFit solve_fluctuation(const std::vector<double>& h,
                                        const std::vector<double>& logit_q,
                                        const std::vector<double>& y) {
  FluctuationFit fit;
  const auto score = [&](double eps) {
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (h[i] == 0.0) continue;
      s += h[i] * (y[i] - expit(logit_q[i] + eps * h[i]));
    }
    return s;
  };
  const double n = static_cast<double>(y.size());
  double lo = -10.0, hi = 10.0;
  double s_lo = score(lo), s_hi = score(hi);
  if (s_lo == 0.0 && s_hi == 0.0) {
    fit.epsilon = 0.0;  // H identically zero
    return fit;
  }
  if (s_lo < 0.0 || s_hi > 0.0) {
    // Root outside the bracket; keep the better endpoint.
    fit.epsilon = std::abs(s_lo) < std::abs(s_hi) ? lo : hi;
    fit.residual = std::abs(score(fit.epsilon));
    fit.converged = fit.residual <= 1e-8 * n;
    return fit;
  }
  while (hi - lo > 1e-10) {
    ++fit.iterations;
    const double mid = 0.5 * (lo + hi);
    if (score(mid) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (fit.iterations > 200) break;
  }
  fit.epsilon = 0.5 * (lo + hi);
  fit.residual = std::abs(score(fit.epsilon));
  fit.converged = fit.residual <= 1e-8 * n;
  return fit;
}

}  // namespace detail

/// delta-independent part of a CV-TMLE run; reports for several
/// truncation levels re-use one core.
struct CvTmleCore {
  double psi = 0.0;
  double sigma_raw = 0.0;  // untruncated pooled EIF sd
  std::size_t n = 0;
  FluctuationFit fluctuation;
  std::vector<std::size_t> fold_subgroup_sizes;
  std::vector<SubgroupRule> fold_rules;
  bool oracle_mode = false;
};

inline CvTmleCore cv_tmle_core(const Dataset& data, const FoldAssignment& folds,
                               const PropensityFn& g, const LearnerConfig& cfg,
                               RngSeed seed,
                               const std::optional<SubgroupRule>& oracle_rule = {},
                               bool per_fold_fluctuation = false) {
  const std::size_t n = data.size();
  if (folds.fold_of.size() != n) {
    throw std::invalid_argument("cv_tmle: fold assignment size mismatch");
  }
  const std::size_t v_folds = folds.num_folds;

  CvTmleCore core;
  core.n = n;
  core.oracle_mode = oracle_rule.has_value();
  core.fold_subgroup_sizes.assign(v_folds, 0);

  // Per validation observation: clever covariate at the observed arm,
  // logits of the fold-specific outcome regression at a = observed/1/0,
  // and the fold's subgroup membership.
  std::vector<double> h_obs(n), lq_obs(n), lq1(n), lq0(n), y(n);
  std::vector<char> in_sg(n, 0);
  std::vector<std::size_t> fold_of_obs = folds.fold_of;

  for (std::size_t v = 0; v < v_folds; ++v) {
    Dataset train;
    std::vector<std::size_t> val;
    for (std::size_t i = 0; i < n; ++i) {
      if (folds.fold_of[i] == v) {
        val.push_back(i);
      } else {
        train.observations.push_back(data[i]);
      }
    }
    if (train.empty() || val.empty()) continue;
    const auto inner =
        FoldAssignment::make(train.size(), cfg.folds, seed.derive(2000 + v));
    const auto q = fit_outcome_regression(train, inner, cfg);
    SubgroupRule rule = SubgroupRule::no_one();
    if (oracle_rule) {
      rule = *oracle_rule;
    } else {
      rule = SubgroupRule::from_blip(fit_blip(train, q, g, inner, cfg));
    }
    for (std::size_t i : val) {
      const auto& o = data[i];
      const bool member = rule(o.w);
      in_sg[i] = member ? 1 : 0;
      if (member) ++core.fold_subgroup_sizes[v];
      h_obs[i] = member ? (2.0 * o.a - 1.0) / g(o.a, o.w) : 0.0;
      lq_obs[i] = logit(q(o.a, o.w));
      lq1[i] = logit(q(1, o.w));
      lq0[i] = logit(q(0, o.w));
      y[i] = o.y;
    }
    core.fold_rules.push_back(std::move(rule));
  }

  // Logistic fluctuation Q* = expit(logit(Q) + eps*H), pooled over the
  // validation sets (or per fold when requested).
  std::vector<double> eps_of_fold(v_folds, 0.0);
  if (per_fold_fluctuation) {
    bool all_converged = true;
    for (std::size_t v = 0; v < v_folds; ++v) {
      std::vector<double> hv, lv, yv;
      for (std::size_t i = 0; i < n; ++i) {
        if (fold_of_obs[i] != v) continue;
        hv.push_back(h_obs[i]);
        lv.push_back(lq_obs[i]);
        yv.push_back(y[i]);
      }
      const auto fit = detail::solve_fluctuation(hv, lv, yv);
      eps_of_fold[v] = fit.epsilon;
      all_converged = all_converged && fit.converged;
      core.fluctuation.iterations += fit.iterations;
    }
    core.fluctuation.converged = all_converged;
  } else {
    core.fluctuation = detail::solve_fluctuation(h_obs, lq_obs, y);
    eps_of_fold.assign(v_folds, core.fluctuation.epsilon);
  }

  // Substitution estimate and pooled cross-validated EIF variance.
  double psi_acc = 0.0;
  std::vector<double> fluct_blip(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_sg[i]) continue;
    const auto& o = data[i];
    const double eps = eps_of_fold[fold_of_obs[i]];
    const double h1 = 1.0 / g(1, o.w);
    const double h0 = -1.0 / g(0, o.w);
    const double q1 = expit(lq1[i] + eps * h1);
    const double q0 = expit(lq0[i] + eps * h0);
    fluct_blip[i] = q1 - q0;
    psi_acc += fluct_blip[i];
  }
  core.psi = psi_acc / static_cast<double>(n);

  RunningMoments eif;
  for (std::size_t i = 0; i < n; ++i) {
    double term = 0.0;
    if (in_sg[i]) {
      const auto& o = data[i];
      const double eps = eps_of_fold[fold_of_obs[i]];
      const double q_star = expit(lq_obs[i] + eps * h_obs[i]);
      term = h_obs[i] * (o.y - q_star) + fluct_blip[i];
    }
    eif.add(term - core.psi);
  }
  core.sigma_raw = eif.sd();
  return core;
}

inline CvTmleReport make_cv_tmle_report(const CvTmleCore& core, double delta,
                                        double level = 0.95) {
  CvTmleReport rep;
  rep.psi = core.psi;
  rep.sigma_bar = std::max(delta, core.sigma_raw);
  rep.terms = core.n;
  rep.delta = delta;
  rep.estimator_id =
      core.oracle_mode ? EstimatorId::kCvTmleOracle : EstimatorId::kCvTmle;
  rep.fluctuation = core.fluctuation;
  rep.fold_subgroup_sizes = core.fold_subgroup_sizes;
  std::tie(rep.ci_lower, rep.ci_upper) =
      confidence_interval(rep.psi, rep.sigma_bar, rep.terms, level);
  return rep;
}

/// Ten-fold CV-TMLE (oracle variant when oracle_rule is supplied):
/// fold-specific nuisances and subgroup, pooled logistic fluctuation,
/// substitution estimate, delta-truncated cross-validated EIF variance.
inline CvTmleReport cv_tmle(const Dataset& data, const FoldAssignment& folds,
                            double delta, const LearnerConfig& cfg, RngSeed seed,
                            const std::optional<SubgroupRule>& oracle_rule = {},
                            const PropensityFn& g = PropensityFn::known(0.5),
                            double level = 0.95, bool per_fold_fluctuation = false) {
  const auto core =
      cv_tmle_core(data, folds, g, cfg, seed, oracle_rule, per_fold_fluctuation);
  return make_cv_tmle_report(core, delta, level);
}

}  // namespace subgroup
