#pragma once

#include <vector>

#include "subgroup/learners.hpp"
#include "subgroup/math.hpp"
#include "subgroup/model.hpp"
#include "subgroup/rng.hpp"

namespace subgroup {

/// Refit schedule for the online pass: nuisances are re-estimated on
/// growing prefixes at the listed refit points and reused in between.
struct ChunkSchedule {
  std::size_t n = 0;
  std::size_t ell_n = 0;
  std::vector<std::size_t> refit_points;

  static constexpr std::size_t kMinFitSize = 20;

  static ChunkSchedule standard(std::size_t n, double ell_frac = 0.1,
                                std::size_t min_fit = kMinFitSize) {
    ChunkSchedule s;
    s.n = n;
    s.ell_n = static_cast<std::size_t>(static_cast<double>(n) * ell_frac);
    if (s.ell_n < min_fit) {
      throw std::invalid_argument(
          "ChunkSchedule: initial fit size below minimum; increase n or ell_frac");
    }
    if (n <= s.ell_n) {
      throw std::invalid_argument("ChunkSchedule: n - ell_n must be >= 1");
    }
    for (std::size_t k = 1; k * s.ell_n <= n - 1; ++k) {
      s.refit_points.push_back(k * s.ell_n);
    }
    return s;
  }

  void validate_against(std::size_t data_size) const {
    if (n != data_size) {
      throw std::invalid_argument("ChunkSchedule: inconsistent with dataset size");
    }
    if (ell_n == 0 || n <= ell_n || refit_points.empty() ||
        refit_points.front() != ell_n) {
      throw std::invalid_argument("ChunkSchedule: malformed schedule");
    }
  }

  /// Largest refit point <= i: the nuisance fit at step i uses exactly
  /// the first fit_size_at(i) observations (never O_{i+1}).
  std::size_t fit_size_at(std::size_t i) const {
    std::size_t best = 0;
    for (std::size_t r : refit_points) {
      if (r <= i) best = r;
    }
    if (best == 0) throw std::out_of_range("ChunkSchedule: step before ell_n");
    return best;
  }
};

/// Chunk index k for step i with the default ell = n/10 schedule:
/// largest k with k*(n/10) <= i, so the step-i fit uses O_1..O_{k n/10}.
inline std::size_t chunk_index(std::size_t i, std::size_t n) {
  const std::size_t ell = n / 10;
  if (ell == 0 || i < ell || i >= n) {
    throw std::out_of_range("chunk_index: i must lie in [n/10, n-1]");
  }
  return i / ell;
}

/// sqrt of the empirical (1/i-normalized) variance of the influence
/// function over a prefix.
inline double sigma_hat(const Dataset& data_prefix, const OutcomeRegressionFn& q,
                        const PropensityFn& g, const BlipFn& blip, double psi_hat) {
  if (data_prefix.size() < 2) {
    throw std::invalid_argument("sigma_hat: prefix length must be >= 2");
  }
  RunningMoments moments;
  for (const auto& o : data_prefix.observations) {
    moments.add(eif_value(o, q, g, blip, psi_hat));
  }
  return moments.sd();
}

/// Two-sided interval psi +/- z_{(1+level)/2} * sigma_bar / sqrt(terms).
inline std::pair<double, double> confidence_interval(double psi, double sigma_bar,
                                                     std::size_t terms,
                                                     double level) {
  if (terms < 1) throw std::invalid_argument("confidence_interval: terms >= 1");
  if (!(sigma_bar > 0.0)) {
    throw std::invalid_argument("confidence_interval: sigma_bar must be > 0");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence_interval: level must lie in (0,1)");
  }
  const double half = normal_quantile(0.5 * (1.0 + level)) * sigma_bar /
                      std::sqrt(static_cast<double>(terms));
  return {psi - half, psi + half};
}

/// One-sided lower bound at z_level.
inline double lower_confidence_bound(double psi, double sigma_bar, std::size_t terms,
                                     double level) {
  if (terms < 1) throw std::invalid_argument("lower_confidence_bound: terms >= 1");
  if (!(sigma_bar > 0.0)) {
    throw std::invalid_argument("lower_confidence_bound: sigma_bar must be > 0");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("lower_confidence_bound: level must lie in (0,1)");
  }
  return psi - normal_quantile(level) * sigma_bar /
                   std::sqrt(static_cast<double>(terms));
}

/// One full online pass: per-step numerators Psi(P-hat^i) + IF(O_{i+1})
/// and the untruncated sigma-hat path. Truncation and the noised
/// variant are cheap post-processing, so several deltas can share one
/// pass.
struct OnlinePass {
  std::size_t n = 0;
  std::size_t ell_n = 0;
  std::vector<double> numerators;  // indexed i - ell_n, i = ell_n..n-1
  std::vector<double> sigma_path;  // untruncated sigma_hat_i
  BlipFn final_blip = BlipFn::constant(0.0);

  std::size_t terms() const { return n - ell_n; }
  double min_sigma() const {
    double m = std::numeric_limits<double>::infinity();
    for (double s : sigma_path) m = std::min(m, s);
    return m;
  }
};

inline OnlinePass run_online_pass(const Dataset& data, const ChunkSchedule& schedule,
                                  const PropensityFn& g, const LearnerConfig& cfg,
                                  RngSeed seed) {
  schedule.validate_against(data.size());
  const std::size_t n = schedule.n;
  const std::size_t ell = schedule.ell_n;
  OnlinePass pass;
  pass.n = n;
  pass.ell_n = ell;
  pass.numerators.reserve(n - ell);
  pass.sigma_path.reserve(n - ell);

  std::size_t current_fit = 0;
  OutcomeRegressionFn q([](int, const CovariateVector&) { return 0.5; });
  BlipFn blip = BlipFn::constant(0.0);
  double psi_chunk = 0.0;
  RunningMoments eif_moments;

  for (std::size_t i = ell; i < n; ++i) {
    const std::size_t fit_size = schedule.fit_size_at(i);
    if (fit_size != current_fit) {
      current_fit = fit_size;
      Dataset prefix;
      prefix.observations.assign(data.observations.begin(),
                                 data.observations.begin() +
                                     static_cast<std::ptrdiff_t>(fit_size));
      const auto folds =
          FoldAssignment::make(fit_size, cfg.folds, seed.derive(1000 + fit_size));
      try {
        q = fit_outcome_regression(prefix, folds, cfg);
        blip = fit_blip(prefix, q, g, folds, cfg);
      } catch (const std::exception& e) {
        throw std::runtime_error("online pass: nuisance refit failed at step " +
                                 std::to_string(i) + ": " + e.what());
      }
      // Value of the fitted rule under the coherent fit: the rule comes
      // from the blip learner, the blip of P-hat from Q.
      psi_chunk = psi_for_subgroup(BlipFn::from_outcome(q),
                                   SubgroupRule::from_blip(blip),
                                   covariates_of(prefix));
      // sigma_hat_i is based on O_1..O_i with the current EIF function.
      eif_moments = RunningMoments();
      for (std::size_t j = 0; j < i; ++j) {
        eif_moments.add(eif_value(data[j], q, g, blip, psi_chunk));
      }
    } else {
      eif_moments.add(eif_value(data[i - 1], q, g, blip, psi_chunk));
    }
    pass.sigma_path.push_back(eif_moments.sd());
    pass.numerators.push_back(psi_chunk +
                              eif_value(data[i], q, g, blip, psi_chunk));
  }
  pass.final_blip = blip;
  return pass;
}

/// Mean of (delta^2 - sigma_i^2)+ / sigma_i(delta)^2: the per-term
/// variance of the injected noise in the noised estimator.
inline double noise_variance_scale(const OnlinePass& pass, double delta) {
  double acc = 0.0;
  for (double s : pass.sigma_path) {
    const double st = std::max(s, delta);
    acc += positive_part(delta * delta - s * s) / (st * st);
  }
  return acc / static_cast<double>(pass.sigma_path.size());
}

inline EstimateReport evaluate_stabilized(const OnlinePass& pass, double delta,
                                          double level = 0.95,
                                          EstimatorId id = EstimatorId::kOneStep) {
  const std::size_t m = pass.terms();
  std::vector<double> trunc(pass.sigma_path.size());
  for (std::size_t t = 0; t < trunc.size(); ++t) {
    trunc[t] = std::max(pass.sigma_path[t], delta);
  }
  const double sigma_bar = harmonic_mean(trunc);
  double acc = 0.0;
  for (std::size_t t = 0; t < m; ++t) acc += pass.numerators[t] / trunc[t];
  EstimateReport rep;
  rep.psi = sigma_bar / static_cast<double>(m) * acc;
  rep.sigma_bar = sigma_bar;
  rep.terms = m;
  rep.delta = delta;
  rep.estimator_id = id;
  std::tie(rep.ci_lower, rep.ci_upper) =
      confidence_interval(rep.psi, sigma_bar, m, level);
  return rep;
}

inline EstimateReport evaluate_noised(const OnlinePass& pass, double delta,
                                      const NoiseStream& noise,
                                      double level = 0.95) {
  const std::size_t m = pass.terms();
  if (noise.size() < m) {
    throw std::invalid_argument("evaluate_noised: noise stream too short");
  }
  std::vector<double> trunc(pass.sigma_path.size());
  for (std::size_t t = 0; t < trunc.size(); ++t) {
    trunc[t] = std::max(pass.sigma_path[t], delta);
  }
  const double sigma_bar = harmonic_mean(trunc);
  double acc = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    const double s = pass.sigma_path[t];
    const double pad = std::sqrt(positive_part(delta * delta - s * s));
    acc += (pass.numerators[t] + pad * noise[t]) / trunc[t];
  }
  EstimateReport rep;
  rep.psi = sigma_bar / static_cast<double>(m) * acc;
  rep.sigma_bar = sigma_bar;
  rep.terms = m;
  rep.delta = delta;
  rep.estimator_id = EstimatorId::kOneStepNoised;
  std::tie(rep.ci_lower, rep.ci_upper) =
      confidence_interval(rep.psi, sigma_bar, m, level);
  return rep;
}

/// Stabilized online one-step estimate with delta-truncated weights.
inline EstimateReport stabilized_estimate(const Dataset& data,
                                          const ChunkSchedule& schedule, double delta,
                                          const LearnerConfig& cfg, RngSeed seed,
                                          const PropensityFn& g = PropensityFn::known(0.5),
                                          double level = 0.95) {
  const auto pass = run_online_pass(data, schedule, g, cfg, seed);
  return evaluate_stabilized(pass, delta, level);
}

/// Appendix variant: adds sqrt((delta^2 - sigma_i^2)+) Z_i to each
/// numerator. Identical to the unnoised estimate when truncation is
/// inactive.
inline EstimateReport noised_estimate(const Dataset& data,
                                      const ChunkSchedule& schedule, double delta,
                                      const NoiseStream& noise,
                                      const LearnerConfig& cfg, RngSeed seed,
                                      const PropensityFn& g = PropensityFn::known(0.5),
                                      double level = 0.95) {
  const auto pass = run_online_pass(data, schedule, g, cfg, seed);
  return evaluate_noised(pass, delta, noise, level);
}

}  // namespace subgroup
