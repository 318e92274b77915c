#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <thread>
#include <vector>

#include "subgroup/cvtmle.hpp"
#include "subgroup/dgp.hpp"
#include "subgroup/onestep.hpp"

namespace subgroup {

struct ExperimentConfig {
  std::vector<ScenarioId> scenarios{kAllScenarios.begin(), kAllScenarios.end()};
  std::vector<std::size_t> sample_sizes = {250, 500, 1000, 2000, 4000};
  std::vector<EstimatorId> estimators = {EstimatorId::kOneStep, EstimatorId::kCvTmle};
  std::vector<double> deltas = {0.1, 0.001, 1e-20};
  std::size_t replicates = 500;
  RngSeed base_seed{20260826, 0};
  double level = 0.95;
  std::size_t regret_draws = 100000;
  LearnerConfig learners;

  void validate() const {
    if (replicates < 1) throw std::invalid_argument("config: replicates >= 1");
    if (scenarios.empty() || sample_sizes.empty() || estimators.empty() ||
        deltas.empty()) {
      throw std::invalid_argument("config: empty grid component");
    }
    for (auto n : sample_sizes) {
      if (n < 250) throw std::invalid_argument("config: sample sizes must be >= 250");
    }
    for (auto d : deltas) {
      if (!(d > 0.0)) throw std::invalid_argument("config: deltas must be positive");
    }
  }
};

/// Value lost by treating the estimated subgroup instead of the optimal
/// one, evaluated under the true blip: Psi_sg0(P0) - Psi_sgn(P0).
struct DiagnosticRegret {
  double value = 0.0;
};

/// Per-replicate result: one report per configured delta (shared data
/// and shared nuisance pass across deltas), plus diagnostics.
struct ReplicateOutcome {
  bool failed = false;
  std::string error;
  std::vector<EstimateReport> reports;  // parallel to config.deltas
  double regret = 0.0;
  double min_sigma = std::numeric_limits<double>::infinity();
};

struct MetricsRow {
  ScenarioId scenario = ScenarioId::kN1;
  std::size_t n = 0;
  EstimatorId estimator = EstimatorId::kOneStep;
  double delta = 0.0;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  double lower_coverage_975 = 0.0;
  double twosided_coverage_95 = 0.0;
  double corrected_twosided_coverage = 0.0;
  double power_at_025 = 0.0;
  double se_lower = 0.0;
  double se_twosided = 0.0;
  double se_corrected = 0.0;
  double se_power = 0.0;
  double mean_ci_width = 0.0;
  double mean_psi = 0.0;
  double regret_mean = 0.0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Monte Carlo regret of a fitted rule on fresh covariate draws shared
/// with the oracle evaluation, so the result is nonnegative pointwise.
template <typename Member>
double regret_by_mc(ScenarioId scenario, Member&& fitted_member, std::size_t draws,
                    RngSeed seed) {
  CounterRng rng(seed);
  double acc = 0.0;
  CovariateVector w(kCovariateDim);
  for (std::size_t t = 0; t < draws; ++t) {
    for (auto& wj : w) wj = rng.normal();
    const double b = true_blip(scenario, w);
    const double oracle_part = b > 0.0 ? b : 0.0;
    acc += oracle_part - (fitted_member(w, t) ? b : 0.0);
  }
  return acc / static_cast<double>(draws);
}

}  // namespace detail

/// Replicate seed: every (scenario, n, estimator, replicate) cell gets
/// its own stream derived from the base seed, so cells are individually
/// reproducible. Deltas share the replicate's data and nuisance pass.
inline RngSeed replicate_seed(const ExperimentConfig& cfg, ScenarioId scenario,
                              std::size_t n, EstimatorId estimator,
                              std::size_t replicate) {
  const std::string key = to_string(scenario) + "/" + std::to_string(n) + "/" +
                          to_string(estimator) + "/" + std::to_string(replicate);
  return cfg.base_seed.derive(detail::fnv1a(key));
}

/// Runs one replicate: simulate, estimate at every delta, evaluate the
/// regret of the final fitted subgroup on fresh draws.
inline ReplicateOutcome run_replicate_cell(const ExperimentConfig& cfg,
                                           ScenarioId scenario, std::size_t n,
                                           EstimatorId estimator, RngSeed seed) {
  ReplicateOutcome out;
  try {
    const Dataset data = sample(scenario, n, seed.derive(1));
    const auto g = PropensityFn::known(kKnownPropensity);
    switch (estimator) {
      case EstimatorId::kOneStep:
      case EstimatorId::kOneStepNoised: {
        const auto schedule = ChunkSchedule::standard(n);
        const auto pass =
            run_online_pass(data, schedule, g, cfg.learners, seed.derive(2));
        out.min_sigma = pass.min_sigma();
        if (estimator == EstimatorId::kOneStep) {
          for (double d : cfg.deltas) {
            out.reports.push_back(evaluate_stabilized(pass, d, cfg.level));
          }
        } else {
          const NoiseStream noise(seed.derive(3), pass.terms());
          for (double d : cfg.deltas) {
            out.reports.push_back(evaluate_noised(pass, d, noise, cfg.level));
          }
        }
        const auto rule = SubgroupRule::from_blip(pass.final_blip);
        out.regret = detail::regret_by_mc(
            scenario, [&](const CovariateVector& w, std::size_t) { return rule(w); },
            cfg.regret_draws, seed.derive(4));
        break;
      }
      case EstimatorId::kCvTmle:
      case EstimatorId::kCvTmleOracle: {
        const auto folds = FoldAssignment::make(n, 10, seed.derive(5));
        std::optional<SubgroupRule> oracle;
        if (estimator == EstimatorId::kCvTmleOracle) {
          oracle = oracle_subgroup(scenario);
        }
        const auto core =
            cv_tmle_core(data, folds, g, cfg.learners, seed.derive(6), oracle);
        out.min_sigma = core.sigma_raw;
        for (double d : cfg.deltas) {
          out.reports.push_back(make_cv_tmle_report(core, d, cfg.level));
        }
        // Fold rules are evaluated on disjoint slices of the shared draw
        // stream, averaging the per-fold subgroup quality.
        const auto& rules = core.fold_rules;
        out.regret = detail::regret_by_mc(
            scenario,
            [&](const CovariateVector& w, std::size_t t) {
              return rules[t % rules.size()](w);
            },
            cfg.regret_draws, seed.derive(4));
        break;
      }
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
    out.reports.clear();
  }
  return out;
}

/// Single-replicate entry point.
inline std::pair<EstimateReport, DiagnosticRegret> run_replicate(
    ScenarioId scenario, std::size_t n, EstimatorId estimator, double delta,
    RngSeed seed, const ExperimentConfig& cfg = {}) {
  ExperimentConfig one = cfg;
  one.deltas = {delta};
  const auto out = run_replicate_cell(one, scenario, n, estimator, seed);
  if (out.failed) {
    throw std::runtime_error("run_replicate failed: " + out.error);
  }
  return {out.reports.front(), DiagnosticRegret{out.regret}};
}

using ReplicateRunner = std::function<ReplicateOutcome(
    ScenarioId, std::size_t, EstimatorId, RngSeed)>;

struct ExperimentResult {
  MetricsTable table;
  // outcomes[cell][replicate], cells in (scenario, n, estimator) grid order.
  std::vector<std::vector<ReplicateOutcome>> outcomes;
  bool all_completed = true;
};

/// Runs the full grid with a caller-supplied replicate runner (test
/// stubs inject degenerate estimators here). Aggregation order is fixed
/// by grid position, so output is byte-stable for any worker count.
inline ExperimentResult run_experiment_with(const ExperimentConfig& cfg,
                                            const ReplicateRunner& runner,
                                            std::size_t workers = 1) {
  cfg.validate();
  struct Task {
    ScenarioId scenario;
    std::size_t n;
    EstimatorId estimator;
    std::size_t cell;
    std::size_t replicate;
  };
  std::vector<Task> tasks;
  std::size_t cells = 0;
  for (auto s : cfg.scenarios) {
    for (auto n : cfg.sample_sizes) {
      for (auto est : cfg.estimators) {
        for (std::size_t r = 0; r < cfg.replicates; ++r) {
          tasks.push_back({s, n, est, cells, r});
        }
        ++cells;
      }
    }
  }
  ExperimentResult result;
  result.outcomes.assign(cells, std::vector<ReplicateOutcome>(cfg.replicates));

  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const auto& task = tasks[t];
      result.outcomes[task.cell][task.replicate] = runner(
          task.scenario, task.n, task.estimator,
          replicate_seed(cfg, task.scenario, task.n, task.estimator, task.replicate));
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Aggregate: one metrics row per (cell, delta).
  std::size_t cell = 0;
  for (auto s : cfg.scenarios) {
    const double psi0 = scenario_truth(s).psi0;
    for (auto n : cfg.sample_sizes) {
      for (auto est : cfg.estimators) {
        const auto& reps = result.outcomes[cell];
        for (std::size_t di = 0; di < cfg.deltas.size(); ++di) {
          MetricsRow row;
          row.scenario = s;
          row.n = n;
          row.estimator = est;
          row.delta = cfg.deltas[di];
          row.replicates = cfg.replicates;
          std::size_t ok = 0;
          double cover_lo = 0, cover_two = 0, cover_corr = 0, power = 0;
          double width = 0, psi_sum = 0, regret_sum = 0;
          for (const auto& rep : reps) {
            if (rep.failed) {
              ++row.failures;
              result.all_completed = false;
              continue;
            }
            const auto& r = rep.reports[di];
            ++ok;
            cover_lo += r.ci_lower <= psi0 ? 1.0 : 0.0;
            cover_two += (psi0 >= r.ci_lower && psi0 <= r.ci_upper) ? 1.0 : 0.0;
            const double hi_corr = std::max(r.ci_upper, 0.0);
            cover_corr += (psi0 >= r.ci_lower && psi0 <= hi_corr) ? 1.0 : 0.0;
            power += r.ci_lower > 0.0 ? 1.0 : 0.0;
            width += r.ci_upper - r.ci_lower;
            psi_sum += r.psi;
            regret_sum += rep.regret;
          }
          if (ok > 0) {
            const double m = static_cast<double>(ok);
            row.lower_coverage_975 = cover_lo / m;
            row.twosided_coverage_95 = cover_two / m;
            row.corrected_twosided_coverage = cover_corr / m;
            row.power_at_025 = power / m;
            row.mean_ci_width = width / m;
            row.mean_psi = psi_sum / m;
            row.regret_mean = regret_sum / m;
            const auto se = [m](double p) { return std::sqrt(p * (1.0 - p) / m); };
            row.se_lower = se(row.lower_coverage_975);
            row.se_twosided = se(row.twosided_coverage_95);
            row.se_corrected = se(row.corrected_twosided_coverage);
            row.se_power = se(row.power_at_025);
          }
          result.table.rows.push_back(row);
        }
        ++cell;
      }
    }
  }
  return result;
}

inline ExperimentResult run_experiment_detailed(const ExperimentConfig& cfg,
                                                std::size_t workers = 1) {
  return run_experiment_with(
      cfg,
      [&cfg](ScenarioId s, std::size_t n, EstimatorId est, RngSeed seed) {
        return run_replicate_cell(cfg, s, n, est, seed);
      },
      workers);
}

inline MetricsTable run_experiment(const ExperimentConfig& cfg,
                                   std::size_t workers = 1) {
  return run_experiment_detailed(cfg, workers).table;
}

// --- Output: metrics.csv and SVG figure analogues ---

inline const char* kMetricsHeader =
    "scenario,n,estimator,delta,replicates,failures,lower_coverage_975,se_lower,"
    "twosided_coverage_95,se_twosided,corrected_twosided_coverage,se_corrected,"
    "power_at_025,se_power,mean_ci_width,mean_psi,regret_mean";

inline void write_metrics_csv(const MetricsTable& table, std::ostream& os) {
  os << kMetricsHeader << '\n';
  char buf[512];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%zu,%s,%.10g,%zu,%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
                  "%.10g,%.10g,%.10g,%.10g,%.10g",
                  to_string(r.scenario).c_str(), r.n, to_string(r.estimator).c_str(),
                  r.delta, r.replicates, r.failures, r.lower_coverage_975,
                  r.se_lower, r.twosided_coverage_95, r.se_twosided,
                  r.corrected_twosided_coverage, r.se_corrected, r.power_at_025,
                  r.se_power, r.mean_ci_width, r.mean_psi, r.regret_mean);
    os << buf << '\n';
  }
}

inline MetricsTable read_metrics_csv(std::istream& is) {
  MetricsTable table;
  std::string line;
  if (!std::getline(is, line) ||
      line.find("scenario,n,estimator") == std::string::npos) {
    throw std::runtime_error("metrics csv: missing header");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 17) {
      throw std::runtime_error("metrics csv line " + std::to_string(line_no) +
                               ": expected 17 fields");
    }
    MetricsRow r;
    r.scenario = scenario_from_string(f[0]);
    r.n = static_cast<std::size_t>(std::stoull(f[1]));
    r.estimator = estimator_from_string(f[2]);
    r.delta = std::stod(f[3]);
    r.replicates = static_cast<std::size_t>(std::stoull(f[4]));
    r.failures = static_cast<std::size_t>(std::stoull(f[5]));
    r.lower_coverage_975 = std::stod(f[6]);
    r.se_lower = std::stod(f[7]);
    r.twosided_coverage_95 = std::stod(f[8]);
    r.se_twosided = std::stod(f[9]);
    r.corrected_twosided_coverage = std::stod(f[10]);
    r.se_corrected = std::stod(f[11]);
    r.power_at_025 = std::stod(f[12]);
    r.se_power = std::stod(f[13]);
    r.mean_ci_width = std::stod(f[14]);
    r.mean_psi = std::stod(f[15]);
    r.regret_mean = std::stod(f[16]);
    table.rows.push_back(r);
  }
  return table;
}

namespace detail {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // already in data space
};

inline const char* series_color(std::size_t i) {
  static const char* palette[] = {"#1b6ca8", "#c0392b", "#27ae60", "#8e44ad",
                                  "#d35400", "#16a085", "#2c3e50", "#7f8c8d",
                                  "#a04000", "#1f618d", "#7d6608", "#4a235a"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

/// Minimal self-contained SVG line/scatter chart.
inline void write_svg_chart(std::ostream& os, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            std::vector<SvgSeries> series, bool log_x,
                            bool lines = true) {
  const double width = 860, height = 560;
  const double ml = 70, mr = 230, mt = 50, mb = 60;
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (auto& s : series) {
    std::sort(s.points.begin(), s.points.end());
    for (auto& [x, y] : s.points) {
      const double xv = log_x ? std::log10(x) : x;
      x_min = std::min(x_min, xv);
      x_max = std::max(x_max, xv);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_min > x_max) {
    x_min = 0;
    x_max = 1;
  }
  if (y_min > y_max) {
    y_min = 0;
    y_max = 1;
  }
  if (x_max - x_min < 1e-12) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  const double y_pad = std::max(1e-12, 0.05 * (y_max - y_min));
  y_min -= y_pad;
  y_max += y_pad;
  const auto px = [&](double x) {
    const double xv = log_x ? std::log10(x) : x;
    return ml + (xv - x_min) / (x_max - x_min) * (width - ml - mr);
  };
  const auto py = [&](double y) {
    return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
  };
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
     << height << "' viewBox='0 0 " << width << ' ' << height << "'>\n"
     << "<rect width='100%' height='100%' fill='white'/>\n"
     << "<text x='" << (ml + (width - ml - mr) / 2) << "' y='28' font-size='17' "
     << "text-anchor='middle' font-family='sans-serif'>" << title << "</text>\n";
  // Axes.
  os << "<line x1='" << ml << "' y1='" << (height - mb) << "' x2='" << (width - mr)
     << "' y2='" << (height - mb) << "' stroke='black'/>\n"
     << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
     << (height - mb) << "' stroke='black'/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double fy = y_min + (y_max - y_min) * t / 5.0;
    char lab[32];
    std::snprintf(lab, sizeof(lab), "%.3g", fy);
    os << "<line x1='" << (ml - 4) << "' y1='" << py(fy) << "' x2='" << ml
       << "' y2='" << py(fy) << "' stroke='black'/>\n"
       << "<text x='" << (ml - 8) << "' y='" << (py(fy) + 4)
       << "' font-size='12' text-anchor='end' font-family='sans-serif'>" << lab
       << "</text>\n";
    const double fx_v = x_min + (x_max - x_min) * t / 5.0;
    const double fx = log_x ? std::pow(10.0, fx_v) : fx_v;
    std::snprintf(lab, sizeof(lab), "%.4g", fx);
    os << "<line x1='" << px(fx) << "' y1='" << (height - mb) << "' x2='" << px(fx)
       << "' y2='" << (height - mb + 4) << "' stroke='black'/>\n"
       << "<text x='" << px(fx) << "' y='" << (height - mb + 18)
       << "' font-size='12' text-anchor='middle' font-family='sans-serif'>" << lab
       << "</text>\n";
  }
  os << "<text x='" << (ml + (width - ml - mr) / 2) << "' y='" << (height - 16)
     << "' font-size='13' text-anchor='middle' font-family='sans-serif'>" << x_label
     << (log_x ? " (log scale)" : "") << "</text>\n"
     << "<text x='20' y='" << (mt + (height - mt - mb) / 2)
     << "' font-size='13' text-anchor='middle' font-family='sans-serif' "
     << "transform='rotate(-90 20 " << (mt + (height - mt - mb) / 2) << ")'>"
     << y_label << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = series_color(si);
    if (lines && series[si].points.size() > 1) {
      os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
      for (const auto& [x, y] : series[si].points) {
        os << px(x) << ',' << py(y) << ' ';
      }
      os << "'/>\n";
    }
    for (const auto& [x, y] : series[si].points) {
      os << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='3' fill='" << color
         << "'/>\n";
    }
    const double ly = mt + 16.0 * static_cast<double>(si);
    os << "<rect x='" << (width - mr + 12) << "' y='" << (ly - 8)
       << "' width='10' height='10' fill='" << color << "'/>\n"
       << "<text x='" << (width - mr + 28) << "' y='" << (ly + 1)
       << "' font-size='11' font-family='sans-serif'>" << series[si].label
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace detail

/// metrics.csv plus one SVG per figure analogue: lower-bound coverage
/// vs n, power vs n (both log-x), two-sided coverage vs mean width.
inline void emit_report(const MetricsTable& table, const std::string& out_dir) {
  if (table.rows.empty()) {
    throw std::invalid_argument("emit_report: empty metrics table");
  }
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream os(out_dir + "/metrics.csv", std::ios::binary);
    if (!os) throw std::runtime_error("emit_report: cannot write to " + out_dir);
    write_metrics_csv(table, os);
  }

  using Key = std::tuple<std::string, std::string, double>;
  std::map<Key, std::vector<const MetricsRow*>> by_series;
  for (const auto& r : table.rows) {
    by_series[{to_string(r.scenario), to_string(r.estimator), r.delta}].push_back(&r);
  }
  const auto build = [&](auto&& fx, auto&& fy) {
    std::vector<detail::SvgSeries> out;
    for (const auto& [key, rows] : by_series) {
      detail::SvgSeries s;
      char lab[128];
      std::snprintf(lab, sizeof(lab), "%s %s d=%.4g", std::get<0>(key).c_str(),
                    std::get<1>(key).c_str(), std::get<2>(key));
      s.label = lab;
      for (const auto* r : rows) s.points.emplace_back(fx(*r), fy(*r));
      out.push_back(std::move(s));
    }
    return out;
  };
  {
    std::ofstream os(out_dir + "/fig_lower_coverage.svg", std::ios::binary);
    detail::write_svg_chart(
        os, "Coverage of 97.5% lower confidence bounds", "n", "lower-bound coverage",
        build([](const MetricsRow& r) { return static_cast<double>(r.n); },
              [](const MetricsRow& r) { return r.lower_coverage_975; }),
        /*log_x=*/true);
  }
  {
    std::ofstream os(out_dir + "/fig_power.svg", std::ios::binary);
    detail::write_svg_chart(
        os, "Power of the 0.025-level test of Psi = 0", "n", "power",
        build([](const MetricsRow& r) { return static_cast<double>(r.n); },
              [](const MetricsRow& r) { return r.power_at_025; }),
        /*log_x=*/true);
  }
  {
    std::ofstream os(out_dir + "/fig_twosided_coverage.svg", std::ios::binary);
    detail::write_svg_chart(
        os, "Two-sided 95% coverage vs mean CI width", "mean CI width",
        "two-sided coverage",
        build([](const MetricsRow& r) { return r.mean_ci_width; },
              [](const MetricsRow& r) { return r.twosided_coverage_95; }),
        /*log_x=*/false, /*lines=*/false);
  }
}

// --- plain-text key=value config files ---

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line) blank = blank && std::isspace(static_cast<unsigned char>(c));
      if (blank) continue;
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key=value");
    }
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.pop_back();
    };
    trim(key);
    trim(value);
    if (key == "scenarios") {
      cfg.scenarios.clear();
      for (const auto& t : detail::split_list(value))
        cfg.scenarios.push_back(scenario_from_string(t));
    } else if (key == "sample_sizes") {
      cfg.sample_sizes.clear();
      for (const auto& t : detail::split_list(value))
        cfg.sample_sizes.push_back(std::stoull(t));
    } else if (key == "estimators") {
      cfg.estimators.clear();
      for (const auto& t : detail::split_list(value))
        cfg.estimators.push_back(estimator_from_string(t));
    } else if (key == "deltas") {
      cfg.deltas.clear();
      for (const auto& t : detail::split_list(value)) cfg.deltas.push_back(std::stod(t));
    } else if (key == "replicates") {
      cfg.replicates = std::stoull(value);
    } else if (key == "seed") {
      cfg.base_seed.seed = std::stoull(value);
    } else if (key == "stream") {
      cfg.base_seed.stream_id = std::stoull(value);
    } else if (key == "level") {
      cfg.level = std::stod(value);
    } else if (key == "regret_draws") {
      cfg.regret_draws = std::stoull(value);
    } else if (key == "learners.folds") {
      cfg.learners.folds = std::stoull(value);
    } else if (key == "learners.tree_depth") {
      cfg.learners.tree_depth = std::stoull(value);
    } else if (key == "learners.min_leaf") {
      cfg.learners.min_leaf = std::stoull(value);
    } else if (key == "learners.library") {
      cfg.learners.library.clear();
      for (const auto& t : detail::split_list(value)) {
        if (t == "constant-mean")
          cfg.learners.library.push_back(LearnerKind::kConstantMean);
        else if (t == "linear-main-effects")
          cfg.learners.library.push_back(LearnerKind::kLinearMain);
        else if (t == "linear-with-interactions")
          cfg.learners.library.push_back(LearnerKind::kLinearInteraction);
        else if (t == "regression-tree")
          cfg.learners.library.push_back(LearnerKind::kRegressionTree);
        else if (t == "additive-spline-surrogate")
          cfg.learners.library.push_back(LearnerKind::kSplineAdditive);
        else
          throw std::runtime_error("config: unknown learner '" + t + "'");
      }
    } else {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_experiment_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  return parse_experiment_config(is);
}

}  // namespace subgroup
