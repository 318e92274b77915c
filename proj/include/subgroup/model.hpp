#pragma once

#include <cstddef>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "subgroup/math.hpp"

namespace subgroup {

using CovariateVector = std::vector<double>;

/// One unit (W, A, Y): covariates, binary treatment, outcome in [0,1].
struct Observation {
  CovariateVector w;
  int a = 0;
  double y = 0.0;
};

/// Ordered sample. Order is semantically meaningful for the online
/// estimator, so nothing here reorders observations.
struct Dataset {
  std::vector<Observation> observations;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }
  std::size_t dim() const {
    return observations.empty() ? 0 : observations.front().w.size();
  }
  const Observation& operator[](std::size_t i) const { return observations[i]; }

  void validate() const {
    const std::size_t d = dim();
    for (const auto& o : observations) {
      if (o.w.size() != d) {
        throw std::invalid_argument("Dataset: inconsistent covariate dimension");
      }
      if (o.a != 0 && o.a != 1) {
        throw std::invalid_argument("Dataset: treatment must be 0 or 1");
      }
      if (!(o.y >= 0.0 && o.y <= 1.0)) {
        throw std::invalid_argument("Dataset: outcome must lie in [0,1]");
      }
    }
  }
};

/// Treatment mechanism g(a|w), bounded away from 0 and 1 by `floor`.
class PropensityFn {
 public:
  using Eval = std::function<double(int a, const CovariateVector& w)>;

  PropensityFn(Eval eval, double floor = 0.01)
      : eval_(std::move(eval)), floor_(floor) {}

  /// The known randomized-trial mechanism g(1|w) = p.
  static PropensityFn known(double p, double floor = 0.01) {
    return PropensityFn(
        [p](int a, const CovariateVector&) { return a == 1 ? p : 1.0 - p; },
        floor);
  }

  double operator()(int a, const CovariateVector& w) const {
    const double g = eval_(a, w);
    if (g < floor_) {
      throw std::domain_error("PropensityFn: probability below positivity floor");
    }
    return g;
  }

  double floor() const { return floor_; }

 private:
  Eval eval_;
  double floor_;
};

/// Fitted outcome regression (a, w) -> value strictly inside (0,1).
class OutcomeRegressionFn {
 public:
  using Eval = std::function<double(int a, const CovariateVector& w)>;

  static constexpr double kLowerClamp = 1e-6;
  static constexpr double kUpperClamp = 1.0 - 1e-6;

  explicit OutcomeRegressionFn(Eval eval) : eval_(std::move(eval)) {}

  double operator()(int a, const CovariateVector& w) const {
    return clamp(eval_(a, w), kLowerClamp, kUpperClamp);
  }

 private:
  Eval eval_;
};

/// Fitted blip w -> [-1, 1].
class BlipFn {
 public:
  using Eval = std::function<double(const CovariateVector& w)>;

  explicit BlipFn(Eval eval) : eval_(std::move(eval)) {}

  static BlipFn constant(double c) {
    return BlipFn([c](const CovariateVector&) { return c; });
  }

  /// Blip implied by an outcome regression: Q(1,w) - Q(0,w).
  static BlipFn from_outcome(OutcomeRegressionFn q) {
    return BlipFn([q = std::move(q)](const CovariateVector& w) {
      return q(1, w) - q(0, w);
    });
  }

  double operator()(const CovariateVector& w) const {
    return clamp(eval_(w), -1.0, 1.0);
  }

 private:
  Eval eval_;
};

/// Deterministic membership predicate over covariate space.
class SubgroupRule {
 public:
  using Eval = std::function<bool(const CovariateVector& w)>;

  explicit SubgroupRule(Eval eval) : eval_(std::move(eval)) {}

  /// Strict positivity of the blip; ties at zero are excluded.
  static SubgroupRule from_blip(BlipFn blip) {
    return SubgroupRule(
        [blip = std::move(blip)](const CovariateVector& w) { return blip(w) > 0.0; });
  }

  static SubgroupRule everyone() {
    return SubgroupRule([](const CovariateVector&) { return true; });
  }

  static SubgroupRule no_one() {
    return SubgroupRule([](const CovariateVector&) { return false; });
  }

  bool operator()(const CovariateVector& w) const { return eval_(w); }

 private:
  Eval eval_;
};

enum class EstimatorId {
  kOneStep,
  kOneStepNoised,
  kCvTmle,
  kCvTmleOracle,
};

inline std::string to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::kOneStep: return "onestep";
    case EstimatorId::kOneStepNoised: return "onestep-noised";
    case EstimatorId::kCvTmle: return "cvtmle";
    case EstimatorId::kCvTmleOracle: return "cvtmle-oracle";
  }
  return "unknown";
}

inline EstimatorId estimator_from_string(const std::string& s) {
  if (s == "onestep") return EstimatorId::kOneStep;
  if (s == "onestep-noised") return EstimatorId::kOneStepNoised;
  if (s == "cvtmle") return EstimatorId::kCvTmle;
  if (s == "cvtmle-oracle") return EstimatorId::kCvTmleOracle;
  throw std::invalid_argument("unknown estimator: " + s);
}

/// Point estimate plus the interval machinery that produced it.
struct EstimateReport {
  double psi = 0.0;
  double sigma_bar = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t terms = 0;
  EstimatorId estimator_id = EstimatorId::kOneStep;
  double delta = 0.0;
};

/// Empirical Psi(P-hat): mean of I[b(w) > 0] * b(w) over the covariates.
inline double plug_in_psi(const BlipFn& blip,
                          const std::vector<CovariateVector>& covariates) {
  if (covariates.empty()) {
    throw std::invalid_argument("plug_in_psi: empty covariate list");
  }
  double acc = 0.0;
  for (const auto& w : covariates) {
    const double b = blip(w);
    if (b > 0.0) acc += b;
  }
  return acc / static_cast<double>(covariates.size());
}

/// Empirical Psi_sg(P-hat) for an arbitrary rule.
inline double psi_for_subgroup(const BlipFn& blip, const SubgroupRule& rule,
                               const std::vector<CovariateVector>& covariates) {
  if (covariates.empty()) {
    throw std::invalid_argument("psi_for_subgroup: empty covariate list");
  }
  double acc = 0.0;
  for (const auto& w : covariates) {
    if (rule(w)) acc += blip(w);
  }
  return acc / static_cast<double>(covariates.size());
}

/// Influence-function value for a fixed subgroup rule:
///   I[w in sg] * [ (2a-1)/g(a|w) * (y - Q(a,w)) + Q(1,w) - Q(0,w) ] - psi_hat.
/// The augmentation uses Q's implied blip so that, with g known, the
/// uncentered term is exactly unbiased for the value of the rule.
inline double eif_value_for_rule(const Observation& obs, const SubgroupRule& rule,
                                 const OutcomeRegressionFn& q, const PropensityFn& g,
                                 double psi_hat) {
  double term = 0.0;
  if (rule(obs.w)) {
    const double ga = g(obs.a, obs.w);
    term = (2.0 * obs.a - 1.0) / ga * (obs.y - q(obs.a, obs.w)) + q(1, obs.w) -
           q(0, obs.w);
  }
  return term - psi_hat;
}

/// EIF with the subgroup {b > 0}; the rule may come from a separately
/// fitted blip while the correction stays coherent with Q.
inline double eif_value(const Observation& obs, const OutcomeRegressionFn& q,
                        const PropensityFn& g, const BlipFn& blip, double psi_hat) {
  double term = 0.0;
  if (blip(obs.w) > 0.0) {
    const double ga = g(obs.a, obs.w);
    term = (2.0 * obs.a - 1.0) / ga * (obs.y - q(obs.a, obs.w)) + q(1, obs.w) -
           q(0, obs.w);
  }
  return term - psi_hat;
}

inline std::vector<CovariateVector> covariates_of(const Dataset& data,
                                                  std::size_t prefix = 0) {
  const std::size_t m = prefix == 0 ? data.size() : prefix;
  std::vector<CovariateVector> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(data[i].w);
  return out;
}

// --- CSV dataset format: header "w1,...,wd,a,y" ---

inline void write_csv(const Dataset& data, std::ostream& os) {
  const std::size_t d = data.dim();
  for (std::size_t j = 1; j <= d; ++j) os << 'w' << j << ',';
  os << "a,y\n";
  char buf[32];
  for (const auto& o : data.observations) {
    for (double v : o.w) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", o.y);
    os << o.a << ',' << buf << '\n';
  }
}

inline void write_csv_file(const Dataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_csv(data, os);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_number(const std::string& s, std::size_t line_no,
                           const std::string& what) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what +
                             " value '" + s + "'");
  }
  if (pos != s.size() || !std::isfinite(v)) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what +
                             " value '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// Reads the dataset CSV, rejecting malformed or out-of-range rows with
/// line-numbered errors.
inline Dataset read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error("line 1: missing header");
  }
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[header.size() - 2] != "a" ||
      header.back() != "y") {
    throw std::runtime_error("line 1: expected header w1,...,wd,a,y");
  }
  const std::size_t d = header.size() - 2;
  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != d + 2) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(d + 2) + " fields, got " +
                               std::to_string(fields.size()));
    }
    Observation o;
    o.w.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      o.w.push_back(detail::parse_number(fields[j], line_no, "covariate"));
    }
    const double a = detail::parse_number(fields[d], line_no, "treatment");
    if (a != 0.0 && a != 1.0) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": treatment must be 0 or 1");
    }
    o.a = static_cast<int>(a);
    o.y = detail::parse_number(fields[d + 1], line_no, "outcome");
    if (!(o.y >= 0.0 && o.y <= 1.0)) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": outcome must lie in [0,1]");
    }
    data.observations.push_back(std::move(o));
  }
  return data;
}

inline Dataset read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_csv(is);
}

}  // namespace subgroup
