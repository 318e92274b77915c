#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "subgroup/harness.hpp"

using namespace subgroup;

TEST_CASE("config files parse every key", "[harness]") {
  std::stringstream ss(
      "# comment line\n"
      "scenarios = A1, N2\n"
      "sample_sizes = 250, 500\n"
      "estimators = onestep, cvtmle-oracle\n"
      "deltas = 0.001, 1e-20\n"
      "replicates = 7\n"
      "seed = 99\n"
      "stream = 3\n"
      "level = 0.9\n"
      "regret_draws = 1234\n"
      "learners.folds = 5\n"
      "learners.tree_depth = 2\n"
      "learners.min_leaf = 15\n"
      "learners.library = constant-mean, regression-tree\n");
  const auto cfg = parse_experiment_config(ss);
  REQUIRE(cfg.scenarios.size() == 2);
  CHECK(cfg.scenarios[0] == ScenarioId::kA1);
  CHECK(cfg.scenarios[1] == ScenarioId::kN2);
  CHECK(cfg.sample_sizes == std::vector<std::size_t>{250, 500});
  REQUIRE(cfg.estimators.size() == 2);
  CHECK(cfg.estimators[1] == EstimatorId::kCvTmleOracle);
  CHECK(cfg.deltas == std::vector<double>{0.001, 1e-20});
  CHECK(cfg.replicates == 7);
  CHECK(cfg.base_seed.seed == 99);
  CHECK(cfg.base_seed.stream_id == 3);
  CHECK(cfg.level == 0.9);
  CHECK(cfg.regret_draws == 1234);
  CHECK(cfg.learners.folds == 5);
  CHECK(cfg.learners.tree_depth == 2);
  CHECK(cfg.learners.min_leaf == 15);
  CHECK(cfg.learners.library ==
        std::vector<LearnerKind>{LearnerKind::kConstantMean,
                                 LearnerKind::kRegressionTree});
}

TEST_CASE("config parser rejects malformed input", "[harness]") {
  std::stringstream unknown("bogus = 1\n");
  CHECK_THROWS(parse_experiment_config(unknown));
  std::stringstream noeq("scenarios A1\n");
  CHECK_THROWS(parse_experiment_config(noeq));
  std::stringstream badn("sample_sizes = 50\n");  // below the n >= 250 floor
  CHECK_THROWS(parse_experiment_config(badn));
  std::stringstream baddelta("deltas = -0.1\n");
  CHECK_THROWS(parse_experiment_config(baddelta));
}

TEST_CASE("replicate seeds separate grid cells", "[harness]") {
  const ExperimentConfig cfg;
  const auto s1 = replicate_seed(cfg, ScenarioId::kA1, 250, EstimatorId::kOneStep, 0);
  const auto s2 = replicate_seed(cfg, ScenarioId::kA1, 250, EstimatorId::kOneStep, 1);
  const auto s3 = replicate_seed(cfg, ScenarioId::kA1, 500, EstimatorId::kOneStep, 0);
  const auto s4 = replicate_seed(cfg, ScenarioId::kA2, 250, EstimatorId::kOneStep, 0);
  const auto s5 = replicate_seed(cfg, ScenarioId::kA1, 250, EstimatorId::kCvTmle, 0);
  CHECK(s1.seed != s2.seed);
  CHECK(s1.seed != s3.seed);
  CHECK(s1.seed != s4.seed);
  CHECK(s1.seed != s5.seed);
  const auto again =
      replicate_seed(cfg, ScenarioId::kA1, 250, EstimatorId::kOneStep, 0);
  CHECK(s1.seed == again.seed);
  CHECK(s1.stream_id == again.stream_id);
}

namespace {

ExperimentConfig stub_config() {
  ExperimentConfig cfg;
  cfg.scenarios = {ScenarioId::kN1, ScenarioId::kA1};
  cfg.sample_sizes = {250, 500};
  cfg.estimators = {EstimatorId::kOneStep};
  cfg.deltas = {0.001, 1e-20};
  cfg.replicates = 8;
  return cfg;
}

// Degenerate runner: psi = 0.1, zero-width interval, fixed regret.
ReplicateOutcome stub_outcome(const ExperimentConfig& cfg) {
  ReplicateOutcome out;
  for (double d : cfg.deltas) {
    EstimateReport r;
    r.psi = 0.1;
    r.sigma_bar = d;
    r.ci_lower = 0.1;
    r.ci_upper = 0.1;
    r.delta = d;
    r.terms = 100;
    out.reports.push_back(r);
  }
  out.regret = 0.25;
  return out;
}

}  // namespace

TEST_CASE("aggregation of a degenerate stub runner", "[harness]") {
  const auto cfg = stub_config();
  const auto res = run_experiment_with(
      cfg,
      [&cfg](ScenarioId, std::size_t, EstimatorId, RngSeed) {
        return stub_outcome(cfg);
      },
      1);
  // Cells: 2 scenarios x 2 sizes x 1 estimator, each with 2 deltas.
  REQUIRE(res.table.rows.size() == 8);
  CHECK(res.all_completed);
  for (const auto& row : res.table.rows) {
    CHECK(row.replicates == 8);
    CHECK(row.failures == 0);
    CHECK(row.mean_psi == Catch::Approx(0.1).epsilon(1e-12));
    CHECK(row.mean_ci_width == 0.0);
    CHECK(row.regret_mean == Catch::Approx(0.25).epsilon(1e-12));
    // The degenerate interval [0.1, 0.1] covers psi0 only when psi0 = 0.1,
    // which no scenario satisfies, and its lower bound always exceeds 0.
    CHECK(row.twosided_coverage_95 == 0.0);
    CHECK(row.power_at_025 == 1.0);
    if (row.scenario == ScenarioId::kN1) {
      CHECK(row.lower_coverage_975 == 0.0);  // ci_lower = 0.1 > psi0 = 0
    } else {
      CHECK(row.lower_coverage_975 == 1.0);  // psi0(A1) = 0.19 > 0.1
    }
    CHECK(row.se_twosided == 0.0);
    CHECK(row.se_power == 0.0);
  }
}

TEST_CASE("failed replicates are counted, not aggregated", "[harness]") {
  auto cfg = stub_config();
  cfg.scenarios = {ScenarioId::kN1};
  cfg.sample_sizes = {250};
  std::size_t calls = 0;
  const auto res = run_experiment_with(
      cfg,
      [&](ScenarioId, std::size_t, EstimatorId, RngSeed) {
        ReplicateOutcome out;
        if (calls++ % 2 == 0) {
          out = stub_outcome(cfg);
        } else {
          out.failed = true;
          out.error = "synthetic failure";
        }
        return out;
      },
      1);
  CHECK_FALSE(res.all_completed);
  for (const auto& row : res.table.rows) {
    CHECK(row.failures == 4);
    CHECK(row.mean_psi == Catch::Approx(0.1).epsilon(1e-12));
  }
}

TEST_CASE("metrics csv round trips byte for byte", "[harness]") {
  const auto cfg = stub_config();
  const auto table = run_experiment_with(
                         cfg,
                         [&cfg](ScenarioId, std::size_t, EstimatorId, RngSeed) {
                           return stub_outcome(cfg);
                         },
                         1)
                         .table;
  std::stringstream first;
  write_metrics_csv(table, first);
  std::stringstream parsed(first.str());
  const auto back = read_metrics_csv(parsed);
  std::stringstream second;
  write_metrics_csv(back, second);
  CHECK(first.str() == second.str());
  REQUIRE(back.rows.size() == table.rows.size());
  // Parsing recovers the printed precision, not the exact double.
  CHECK(back.rows[0].mean_psi == Catch::Approx(table.rows[0].mean_psi).margin(1e-9));
}

TEST_CASE("worker count does not change the aggregate", "[harness]") {
  const auto cfg = stub_config();
  const auto runner = [&cfg](ScenarioId s, std::size_t n, EstimatorId,
                             RngSeed seed) {
    auto out = stub_outcome(cfg);
    // Make the outcome depend on the cell so ordering bugs would show.
    out.regret = static_cast<double>(seed.seed % 97) + static_cast<double>(n) +
                 static_cast<double>(s);
    return out;
  };
  const auto one = run_experiment_with(cfg, runner, 1);
  const auto four = run_experiment_with(cfg, runner, 4);
  std::stringstream a, b;
  write_metrics_csv(one.table, a);
  write_metrics_csv(four.table, b);
  CHECK(a.str() == b.str());
}

TEST_CASE("emit_report writes the csv and three figures", "[harness]") {
  const auto cfg = stub_config();
  const auto table = run_experiment_with(
                         cfg,
                         [&cfg](ScenarioId, std::size_t, EstimatorId, RngSeed) {
                           return stub_outcome(cfg);
                         },
                         1)
                         .table;
  const std::string dir = "harness_test_report";
  emit_report(table, dir);
  CHECK(std::filesystem::exists(dir + "/metrics.csv"));
  for (const char* fig : {"fig_lower_coverage.svg", "fig_power.svg",
                          "fig_twosided_coverage.svg"}) {
    REQUIRE(std::filesystem::exists(dir + "/" + fig));
    std::ifstream is(dir + "/" + fig);
    std::stringstream buf;
    buf << is.rdbuf();
    CHECK(buf.str().find("<svg") != std::string::npos);
    CHECK(buf.str().find("</svg>") != std::string::npos);
  }
  std::filesystem::remove_all(dir);

  MetricsTable empty;
  CHECK_THROWS_AS(emit_report(empty, dir), std::invalid_argument);
}

TEST_CASE("end-to-end replicate smoke test", "[harness][slow]") {
  // One real replicate per estimator on the strong-effect scenario.
  const ExperimentConfig cfg;
  for (auto est : {EstimatorId::kOneStep, EstimatorId::kCvTmle}) {
    const auto seed = replicate_seed(cfg, ScenarioId::kA1, 250, est, 0);
    const auto [report, regret] =
        run_replicate(ScenarioId::kA1, 250, est, 1e-3, seed, cfg);
    CHECK(std::isfinite(report.psi));
    CHECK(report.ci_lower < report.ci_upper);
    CHECK(report.psi == Catch::Approx(expit(0.8) - 0.5).margin(0.15));
    CHECK(regret.value >= 0.0);
  }
}
