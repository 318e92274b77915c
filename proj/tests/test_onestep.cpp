#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "subgroup/dgp.hpp"
#include "subgroup/onestep.hpp"

using namespace subgroup;

TEST_CASE("chunk index follows k(i) = floor(i / (n/10))", "[onestep]") {
  CHECK(chunk_index(250, 1000) == 2);
  CHECK(chunk_index(100, 1000) == 1);
  CHECK(chunk_index(999, 1000) == 9);
  CHECK(chunk_index(199, 1000) == 1);
  CHECK(chunk_index(200, 1000) == 2);
  CHECK_THROWS_AS(chunk_index(99, 1000), std::out_of_range);
  CHECK_THROWS_AS(chunk_index(1000, 1000), std::out_of_range);
}

TEST_CASE("standard schedule refits every n/10 observations", "[onestep]") {
  const auto s = ChunkSchedule::standard(1000);
  CHECK(s.ell_n == 100);
  REQUIRE(s.refit_points.size() == 9);
  CHECK(s.refit_points.front() == 100);
  CHECK(s.refit_points.back() == 900);
  CHECK(s.fit_size_at(100) == 100);
  CHECK(s.fit_size_at(199) == 100);
  CHECK(s.fit_size_at(350) == 300);
  CHECK(s.fit_size_at(999) == 900);
  CHECK_THROWS_AS(s.fit_size_at(50), std::out_of_range);
  // The fit at step i never uses observation i+1.
  for (std::size_t i = s.ell_n; i < s.n; ++i) CHECK(s.fit_size_at(i) <= i);

  CHECK_THROWS_AS(ChunkSchedule::standard(100), std::invalid_argument);  // ell < 20
  CHECK_NOTHROW(ChunkSchedule::standard(200));
}

TEST_CASE("sigma_hat equals the empirical sd of the influence function",
          "[onestep]") {
  const auto g = PropensityFn::known(0.5);
  const OutcomeRegressionFn q([](int a, const CovariateVector&) {
    return a == 1 ? 0.7 : 0.4;
  });
  const BlipFn blip = BlipFn::constant(0.3);
  Dataset d;
  d.observations = {{{0.0}, 1, 1.0}, {{0.0}, 0, 0.0}, {{0.0}, 1, 0.0}};
  const double psi = 0.3;
  RunningMoments m;
  for (const auto& o : d.observations) m.add(eif_value(o, q, g, blip, psi));
  CHECK(sigma_hat(d, q, g, blip, psi) == Catch::Approx(m.sd()).epsilon(1e-14));

  Dataset one;
  one.observations = {{{0.0}, 1, 1.0}};
  CHECK_THROWS_AS(sigma_hat(one, q, g, blip, psi), std::invalid_argument);
}

TEST_CASE("confidence interval arithmetic", "[onestep]") {
  const auto [lo, hi] = confidence_interval(0.2, 1.0, 400, 0.95);
  CHECK(lo == Catch::Approx(0.2 - 1.959963984540054 / 20.0).epsilon(1e-9));
  CHECK(hi == Catch::Approx(0.2 + 1.959963984540054 / 20.0).epsilon(1e-9));
  CHECK(lower_confidence_bound(0.2, 1.0, 400, 0.975) ==
        Catch::Approx(lo).epsilon(1e-12));
  CHECK_THROWS_AS(confidence_interval(0.0, 0.0, 10, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 0, 0.95), std::invalid_argument);
}

namespace {

// Direct re-implementation of the stabilized estimator from a pass:
//   psi = sigma_bar(delta)/(n - ell) * sum_i numerator_i / sigma_i(delta)
// with sigma_bar(delta) the harmonic mean of the truncated sds.
double stabilized_by_hand(const OnlinePass& pass, double delta) {
  double inv_sum = 0.0, acc = 0.0;
  for (std::size_t t = 0; t < pass.terms(); ++t) {
    const double st = std::max(pass.sigma_path[t], delta);
    inv_sum += 1.0 / st;
    acc += pass.numerators[t] / st;
  }
  const double sigma_bar = static_cast<double>(pass.terms()) / inv_sum;
  return sigma_bar / static_cast<double>(pass.terms()) * acc;
}

}  // namespace

TEST_CASE("evaluate_stabilized matches a direct transcription", "[onestep]") {
  const Dataset data = sample(ScenarioId::kA1, 400, RngSeed{41, 0});
  const auto pass = run_online_pass(data, ChunkSchedule::standard(400),
                                    PropensityFn::known(0.5), {}, RngSeed{41, 1});
  REQUIRE(pass.terms() == 360);
  REQUIRE(pass.numerators.size() == 360);
  REQUIRE(pass.sigma_path.size() == 360);
  for (double delta : {1e-20, 1e-3, 0.1, 1.0}) {
    const auto rep = evaluate_stabilized(pass, delta);
    CHECK(rep.psi == Catch::Approx(stabilized_by_hand(pass, delta)).margin(1e-12));
    CHECK(rep.terms == 360);
    CHECK(rep.delta == delta);
    // sigma_bar(delta) is at least delta and at least the untruncated
    // harmonic mean.
    CHECK(rep.sigma_bar >= delta);
    const auto [lo, hi] = confidence_interval(rep.psi, rep.sigma_bar, 360, 0.95);
    CHECK(rep.ci_lower == Catch::Approx(lo).margin(1e-14));
    CHECK(rep.ci_upper == Catch::Approx(hi).margin(1e-14));
  }
}

TEST_CASE("online pass is deterministic in the seed", "[onestep]") {
  const Dataset data = sample(ScenarioId::kA2, 300, RngSeed{42, 0});
  const auto schedule = ChunkSchedule::standard(300);
  const auto g = PropensityFn::known(0.5);
  const auto p1 = run_online_pass(data, schedule, g, {}, RngSeed{42, 1});
  const auto p2 = run_online_pass(data, schedule, g, {}, RngSeed{42, 1});
  CHECK(p1.numerators == p2.numerators);
  CHECK(p1.sigma_path == p2.sigma_path);
}

TEST_CASE("truncation level only matters when it binds", "[onestep]") {
  const Dataset data = sample(ScenarioId::kA1, 400, RngSeed{43, 0});
  const auto pass = run_online_pass(data, ChunkSchedule::standard(400),
                                    PropensityFn::known(0.5), {}, RngSeed{43, 1});
  REQUIRE(pass.min_sigma() > 1e-3);  // A1 keeps everyone in the subgroup
  const auto a = evaluate_stabilized(pass, 1e-3);
  const auto b = evaluate_stabilized(pass, 1e-20);
  CHECK(a.psi == b.psi);
  CHECK(a.sigma_bar == b.sigma_bar);
  CHECK(a.ci_lower == b.ci_lower);
  CHECK(a.ci_upper == b.ci_upper);
}

TEST_CASE("interval width is nondecreasing in delta", "[onestep]") {
  const Dataset data = sample(ScenarioId::kN2, 400, RngSeed{44, 0});
  const auto pass = run_online_pass(data, ChunkSchedule::standard(400),
                                    PropensityFn::known(0.5), {}, RngSeed{44, 1});
  double prev = 0.0;
  for (double delta : {1e-20, 1e-3, 0.1, 0.5, 1.0}) {
    const auto rep = evaluate_stabilized(pass, delta);
    const double width = rep.ci_upper - rep.ci_lower;
    CHECK(width >= prev - 1e-14);
    prev = width;
  }
}

TEST_CASE("noised estimator reduces to the plain one when inactive",
          "[onestep]") {
  const Dataset data = sample(ScenarioId::kA1, 400, RngSeed{45, 0});
  const auto pass = run_online_pass(data, ChunkSchedule::standard(400),
                                    PropensityFn::known(0.5), {}, RngSeed{45, 1});
  const NoiseStream noise(RngSeed{45, 2}, pass.terms());
  const double delta = 1e-3;
  REQUIRE(pass.min_sigma() > delta);
  const auto plain = evaluate_stabilized(pass, delta);
  const auto noised = evaluate_noised(pass, delta, noise);
  CHECK(noised.psi == plain.psi);
  CHECK(noised.sigma_bar == plain.sigma_bar);
  CHECK(noised.ci_lower == plain.ci_lower);
  CHECK(noised.ci_upper == plain.ci_upper);
  CHECK(noise_variance_scale(pass, delta) == 0.0);
}

TEST_CASE("noised estimator has the advertised conditional variance",
          "[onestep][slow]") {
  // Conditional on the pass, psi-noised minus psi-stabilized is Gaussian
  // with variance sigma_bar(delta)^2 * sigma_tilde^2(delta) / (n - ell).
  const Dataset data = sample(ScenarioId::kN3, 250, RngSeed{46, 0});
  const auto pass = run_online_pass(data, ChunkSchedule::standard(250),
                                    PropensityFn::known(0.5), {}, RngSeed{46, 1});
  const double delta = 1.0;  // forces truncation everywhere
  const auto plain = evaluate_stabilized(pass, delta);
  const double target = plain.sigma_bar * plain.sigma_bar *
                        noise_variance_scale(pass, delta) /
                        static_cast<double>(pass.terms());
  REQUIRE(target > 0.0);
  RunningMoments m;
  for (int r = 0; r < 4000; ++r) {
    const NoiseStream noise(RngSeed{46, 10 + static_cast<std::uint64_t>(r)},
                            pass.terms());
    m.add(evaluate_noised(pass, delta, noise).psi - plain.psi);
  }
  CHECK(m.mean() == Catch::Approx(0.0).margin(4.0 * std::sqrt(target / 4000.0)));
  CHECK(m.variance() == Catch::Approx(target).epsilon(0.10));
}

TEST_CASE("a single evaluation term is handled", "[onestep]") {
  ChunkSchedule s;
  s.n = 41;
  s.ell_n = 40;
  s.refit_points = {40};
  const Dataset data = sample(ScenarioId::kA1, 41, RngSeed{47, 0});
  const auto pass =
      run_online_pass(data, s, PropensityFn::known(0.5), {}, RngSeed{47, 1});
  CHECK(pass.terms() == 1);
  const auto rep = evaluate_stabilized(pass, 1e-3);
  CHECK(std::isfinite(rep.psi));
  CHECK(rep.ci_upper > rep.ci_lower);
}

TEST_CASE("wrapper estimates agree with pass plus evaluate", "[onestep]") {
  const Dataset data = sample(ScenarioId::kA2, 300, RngSeed{48, 0});
  const auto schedule = ChunkSchedule::standard(300);
  const auto g = PropensityFn::known(0.5);
  const auto pass = run_online_pass(data, schedule, g, {}, RngSeed{48, 1});
  const auto direct = evaluate_stabilized(pass, 1e-3);
  const auto wrapped = stabilized_estimate(data, schedule, 1e-3, {}, RngSeed{48, 1}, g);
  CHECK(wrapped.psi == direct.psi);
  CHECK(wrapped.ci_lower == direct.ci_lower);
  CHECK(wrapped.ci_upper == direct.ci_upper);
}
