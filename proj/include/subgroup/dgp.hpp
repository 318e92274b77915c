#pragma once

#include <array>
#include <string>

#include "subgroup/math.hpp"
#include "subgroup/model.hpp"
#include "subgroup/rng.hpp"

namespace subgroup {

enum class ScenarioId { kN1, kN2, kN3, kA1, kA2, kA3 };

inline constexpr std::array<ScenarioId, 6> kAllScenarios = {
    ScenarioId::kN1, ScenarioId::kN2, ScenarioId::kN3,
    ScenarioId::kA1, ScenarioId::kA2, ScenarioId::kA3};

inline std::string to_string(ScenarioId s) {
  switch (s) {
    case ScenarioId::kN1: return "N1";
    case ScenarioId::kN2: return "N2";
    case ScenarioId::kN3: return "N3";
    case ScenarioId::kA1: return "A1";
    case ScenarioId::kA2: return "A2";
    case ScenarioId::kA3: return "A3";
  }
  return "?";
}

inline ScenarioId scenario_from_string(const std::string& s) {
  if (s == "N1") return ScenarioId::kN1;
  if (s == "N2") return ScenarioId::kN2;
  if (s == "N3") return ScenarioId::kN3;
  if (s == "A1") return ScenarioId::kA1;
  if (s == "A2") return ScenarioId::kA2;
  if (s == "A3") return ScenarioId::kA3;
  throw std::invalid_argument("unknown scenario: " + s);
}

inline constexpr std::size_t kCovariateDim = 4;
inline constexpr double kKnownPropensity = 0.5;

/// 80th percentile of the standard normal, full double precision.
inline const double kZ080 = normal_quantile(0.8);

/// Outcome logit f(a, w) for each scenario.
inline double scenario_logit(ScenarioId s, int a, const CovariateVector& w) {
  if (w.size() != kCovariateDim) {
    throw std::invalid_argument("scenario_logit: covariate dimension must be 4");
  }
  const double ad = static_cast<double>(a);
  switch (s) {
    case ScenarioId::kN1: return w[0] + w[1];
    case ScenarioId::kN2: {
      const double t = positive_part(w[0] - kZ080);
      return -0.2 * ad * t * t;
    }
    case ScenarioId::kN3: return -0.25 * ad;
    case ScenarioId::kA1: return 0.8 * ad;
    case ScenarioId::kA2: return ad * positive_part(w[0]) - ad * positive_part(w[1]);
    case ScenarioId::kA3: return ad * w[0];
  }
  throw std::logic_error("scenario_logit: unreachable");
}

/// Closed-form blip expit(f(1,w)) - expit(f(0,w)).
inline double true_blip(ScenarioId s, const CovariateVector& w) {
  return expit(scenario_logit(s, 1, w)) - expit(scenario_logit(s, 0, w));
}

inline OutcomeRegressionFn true_outcome_regression(ScenarioId s) {
  return OutcomeRegressionFn([s](int a, const CovariateVector& w) {
    return expit(scenario_logit(s, a, w));
  });
}

inline BlipFn true_blip_fn(ScenarioId s) {
  return BlipFn([s](const CovariateVector& w) { return true_blip(s, w); });
}

/// Analytic optimal subgroup {w : true_blip(s, w) > 0}.
inline SubgroupRule oracle_subgroup(ScenarioId s) {
  switch (s) {
    case ScenarioId::kN1:
    case ScenarioId::kN2:
    case ScenarioId::kN3:
      return SubgroupRule::no_one();
    case ScenarioId::kA1:
      return SubgroupRule::everyone();
    case ScenarioId::kA2:
      return SubgroupRule([](const CovariateVector& w) {
        return positive_part(w[0]) > positive_part(w[1]);
      });
    case ScenarioId::kA3:
      return SubgroupRule([](const CovariateVector& w) { return w[0] > 0.0; });
  }
  throw std::logic_error("oracle_subgroup: unreachable");
}

/// W ~ N4(0, I), A ~ Bern(1/2) independent of W, Y ~ Bern(expit(f(A, W))).
inline Dataset sample(ScenarioId scenario, std::size_t n, RngSeed seed) {
  if (n == 0) {
    throw std::invalid_argument("sample: n must be >= 1");
  }
  CounterRng rng(seed);
  Dataset data;
  data.observations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.w.resize(kCovariateDim);
    for (auto& wj : o.w) wj = rng.normal();
    o.a = rng.bernoulli(0.5) ? 1 : 0;
    o.y = rng.bernoulli(expit(scenario_logit(scenario, o.a, o.w))) ? 1.0 : 0.0;
    data.observations.push_back(std::move(o));
  }
  return data;
}

/// Analytic ground truth for one scenario.
struct ScenarioTruth {
  double psi0 = 0.0;
  double p_blip_zero = 0.0;
  double p_blip_negative = 0.0;
  SubgroupRule oracle_rule = SubgroupRule::no_one();
  BlipFn true_blip = BlipFn::constant(0.0);
};

namespace detail {

/// E[h(Z)] for Z ~ N(0,1) by composite Simpson over [-8, 8].
template <typename H>
double gauss_expect_1d(H&& h, std::size_t panels) {
  const double lo = -8.0, hi = 8.0;
  const std::size_t m = panels % 2 == 0 ? panels : panels + 1;
  const double step = (hi - lo) / static_cast<double>(m);
  double acc = 0.0;
  for (std::size_t k = 0; k <= m; ++k) {
    const double x = lo + step * static_cast<double>(k);
    const double wgt = (k == 0 || k == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    acc += wgt * h(x) * normal_pdf(x);
  }
  return acc * step / 3.0;
}

template <typename H>
double gauss_expect_2d(H&& h, std::size_t panels) {
  return gauss_expect_1d(
      [&](double x) {
        return gauss_expect_1d([&](double y) { return h(x, y); }, panels);
      },
      panels);
}

}  // namespace detail

/// Truth per data-generating process. Psi0 is analytic where closed-form
/// and certified by deterministic quadrature over the normal covariate
/// law otherwise; the blip-sign masses are fully analytic.
inline ScenarioTruth scenario_truth(ScenarioId s, std::size_t mc_precision = 1000000) {
  if ((s == ScenarioId::kA2 || s == ScenarioId::kA3) && mc_precision < 100000) {
    throw std::invalid_argument("scenario_truth: mc_precision must be >= 1e5 for A2/A3");
  }
  ScenarioTruth t;
  t.oracle_rule = oracle_subgroup(s);
  t.true_blip = true_blip_fn(s);
  switch (s) {
    case ScenarioId::kN1:
      t.psi0 = 0.0;
      t.p_blip_zero = 1.0;
      t.p_blip_negative = 0.0;
      break;
    case ScenarioId::kN2:
      t.psi0 = 0.0;
      t.p_blip_zero = 0.8;  // blip is 0 exactly when W1 <= z_{0.8}
      t.p_blip_negative = 0.2;
      break;
    case ScenarioId::kN3:
      t.psi0 = 0.0;
      t.p_blip_zero = 0.0;
      t.p_blip_negative = 1.0;
      break;
    case ScenarioId::kA1:
      t.psi0 = expit(0.8) - 0.5;
      t.p_blip_zero = 0.0;
      t.p_blip_negative = 0.0;
      break;
    case ScenarioId::kA2: {
      // blip = expit(w1+ - w2+) - 0.5; zero iff both w1,w2 <= 0.
      const std::size_t panels = std::max<std::size_t>(
          400, static_cast<std::size_t>(std::sqrt(static_cast<double>(mc_precision))));
      t.psi0 = detail::gauss_expect_2d(
          [](double w1, double w2) {
            return positive_part(expit(positive_part(w1) - positive_part(w2)) - 0.5);
          },
          panels);
      t.p_blip_zero = 0.25;
      t.p_blip_negative = 0.375;  // P(w2+ > w1+) = (1 - 1/4) / 2
      break;
    }
    case ScenarioId::kA3: {
      const std::size_t panels =
          std::max<std::size_t>(2000, mc_precision / 100);
      t.psi0 = detail::gauss_expect_1d(
          [](double w1) { return positive_part(expit(w1) - 0.5); }, panels);
      t.p_blip_zero = 0.0;
      t.p_blip_negative = 0.5;
      break;
    }
  }
  return t;
}

}  // namespace subgroup
