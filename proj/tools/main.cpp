// Command-line front end: simulate scenario data, run a single
// estimate, drive the Monte Carlo experiment grid, or re-render figures
// from an existing metrics table.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "subgroup/harness.hpp"

namespace {

int run_simulate(const std::string& scenario, std::size_t n, std::uint64_t seed,
                 std::uint64_t stream, const std::string& out) {
  const auto data =
      subgroup::sample(subgroup::scenario_from_string(scenario), n,
                       subgroup::RngSeed{seed, stream});
  if (out == "-") {
    subgroup::write_csv(data, std::cout);
  } else {
    subgroup::write_csv_file(data, out);
  }
  return 0;
}

int run_estimate(const std::string& input, const std::string& estimator,
                 double delta, double ell_frac, std::uint64_t seed, double level,
                 const std::string& scenario) {
  using namespace subgroup;
  const Dataset data = read_csv_file(input);
  data.validate();
  const auto id = estimator_from_string(estimator);
  const auto g = PropensityFn::known(kKnownPropensity);
  const RngSeed rng{seed, 0};
  const LearnerConfig cfg;
  EstimateReport rep;
  switch (id) {
    case EstimatorId::kOneStep:
      rep = stabilized_estimate(data, ChunkSchedule::standard(data.size(), ell_frac),
                                delta, cfg, rng, g, level);
      break;
    case EstimatorId::kOneStepNoised: {
      const auto schedule = ChunkSchedule::standard(data.size(), ell_frac);
      const NoiseStream noise(rng.derive(3), data.size() - schedule.ell_n);
      rep = noised_estimate(data, schedule, delta, noise, cfg, rng, g, level);
      break;
    }
    case EstimatorId::kCvTmle:
    case EstimatorId::kCvTmleOracle: {
      std::optional<SubgroupRule> oracle;
      if (id == EstimatorId::kCvTmleOracle) {
        if (scenario.empty()) {
          std::cerr << "estimate: --estimator cvtmle-oracle requires --scenario\n";
          return 2;
        }
        oracle = oracle_subgroup(scenario_from_string(scenario));
      }
      const auto folds = FoldAssignment::make(data.size(), 10, rng.derive(5));
      rep = cv_tmle(data, folds, delta, cfg, rng.derive(6), oracle, g, level);
      break;
    }
  }
  std::printf("%s,%.10g,%.10g,%.10g,%.10g,%.10g,%zu\n", to_string(id).c_str(),
              rep.delta, rep.psi, rep.sigma_bar, rep.ci_lower, rep.ci_upper,
              rep.terms);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimates the population impact of treating the optimal subgroup"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Generate scenario data as CSV");
  std::string scenario = "A1", out = "-";
  std::size_t n = 1000;
  std::uint64_t seed = 1, stream = 0;
  sim->add_option("--scenario", scenario, "Scenario id (N1,N2,N3,A1,A2,A3)")
      ->required();
  sim->add_option("--n", n, "Sample size")->required();
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--stream", stream, "RNG stream id");
  sim->add_option("--out", out, "Output CSV path ('-' for stdout)");

  auto* est = app.add_subcommand("estimate", "Run one estimator on a dataset CSV");
  std::string input, estimator = "onestep", est_scenario;
  double delta = 0.001, ell_frac = 0.1, level = 0.95;
  std::uint64_t est_seed = 1;
  est->add_option("--input", input, "Dataset CSV path")->required();
  est->add_option("--estimator", estimator,
                  "onestep | onestep-noised | cvtmle | cvtmle-oracle");
  est->add_option("--delta", delta, "Variance truncation level");
  est->add_option("--ell-frac", ell_frac, "Online burn-in fraction (default 0.1)");
  est->add_option("--seed", est_seed, "Seed for folds/noise");
  est->add_option("--level", level, "Two-sided confidence level");
  est->add_option("--scenario", est_scenario, "Scenario id (oracle mode only)");

  auto* exp = app.add_subcommand("experiment", "Run the Monte Carlo grid");
  std::string config_path, out_dir = "experiment-out";
  std::size_t workers = 1;
  exp->add_option("--config", config_path, "key=value experiment config file")
      ->required();
  exp->add_option("--out-dir", out_dir, "Output directory");
  exp->add_option("--workers", workers, "Worker thread count");

  auto* rep = app.add_subcommand("report", "Re-render SVGs from a metrics.csv");
  std::string metrics_path, rep_out_dir = "experiment-out";
  rep->add_option("--metrics", metrics_path, "Existing metrics.csv")->required();
  rep->add_option("--out-dir", rep_out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(scenario, n, seed, stream, out);
    if (est->parsed()) {
      return run_estimate(input, estimator, delta, ell_frac, est_seed, level,
                          est_scenario);
    }
    if (exp->parsed()) {
      const auto cfg = subgroup::parse_experiment_config_file(config_path);
      const auto result = subgroup::run_experiment_detailed(cfg, workers);
      subgroup::emit_report(result.table, out_dir);
      if (!result.all_completed) {
        std::cerr << "experiment: some replicates failed; see failures column\n";
        return 1;
      }
      return 0;
    }
    if (rep->parsed()) {
      std::ifstream is(metrics_path);
      if (!is) throw std::runtime_error("cannot open: " + metrics_path);
      subgroup::emit_report(subgroup::read_metrics_csv(is), rep_out_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
