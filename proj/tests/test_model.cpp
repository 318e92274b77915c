#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <vector>

#include "subgroup/model.hpp"
#include "subgroup/rng.hpp"

using namespace subgroup;

namespace {

Dataset tiny_dataset() {
  Dataset d;
  d.observations = {
      {{0.5, -1.0}, 1, 1.0},
      {{-0.25, 2.0}, 0, 0.0},
      {{1.5, 0.0}, 1, 0.0},
  };
  return d;
}

}  // namespace

TEST_CASE("plug-in psi averages positive blips only", "[model]") {
  const std::vector<double> blips{-0.1, 0.3, 0.0, 0.5};
  std::vector<CovariateVector> ws;
  for (double b : blips) ws.push_back({b});
  const BlipFn blip([](const CovariateVector& w) { return w[0]; });
  CHECK(plug_in_psi(blip, ws) == Catch::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(plug_in_psi(blip, {}), std::invalid_argument);
}

TEST_CASE("plug-in subgroup maximizes over all subsets", "[model]") {
  // Psi(P-hat) = max over the 2^m candidate subsets of the empirical
  // subgroup mean, checked by brute force on small supports.
  CounterRng rng(RngSeed{11, 0});
  const BlipFn blip([](const CovariateVector& w) { return w[0]; });
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 3 + static_cast<std::size_t>(rng.next_u64() % 8);
    std::vector<CovariateVector> ws;
    for (std::size_t i = 0; i < m; ++i) ws.push_back({2.0 * rng.uniform() - 1.0});
    double best = -1e300;
    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (mask & (std::size_t{1} << i)) acc += blip(ws[i]);
      }
      best = std::max(best, acc / static_cast<double>(m));
    }
    CHECK(plug_in_psi(blip, ws) == Catch::Approx(best).margin(1e-12));
  }
}

TEST_CASE("psi_for_subgroup agrees with plug-in at the blip rule", "[model]") {
  CounterRng rng(RngSeed{12, 0});
  const BlipFn blip([](const CovariateVector& w) { return w[0] - 0.3; });
  std::vector<CovariateVector> ws;
  for (int i = 0; i < 40; ++i) ws.push_back({2.0 * rng.uniform() - 1.0});
  const auto rule = SubgroupRule::from_blip(blip);
  CHECK(psi_for_subgroup(blip, rule, ws) ==
        Catch::Approx(plug_in_psi(blip, ws)).margin(1e-14));
  CHECK(psi_for_subgroup(blip, SubgroupRule::no_one(), ws) == 0.0);
}

TEST_CASE("eif value matches hand-computed examples", "[model]") {
  const auto g = PropensityFn::known(0.5);
  const CovariateVector w{0.0};

  SECTION("treated observation inside the subgroup") {
    const OutcomeRegressionFn q([](int a, const CovariateVector&) {
      return a == 1 ? 0.6 : 0.3;
    });
    const BlipFn blip = BlipFn::constant(0.3);
    const Observation o{w, 1, 1.0};
    // (2*1-1)/0.5 * (1 - 0.6) + (0.6 - 0.3) - 0.2 = 0.8 + 0.3 - 0.2
    CHECK(eif_value(o, q, g, blip, 0.2) == Catch::Approx(0.9).epsilon(1e-14));
  }
  SECTION("control observation inside the subgroup") {
    const OutcomeRegressionFn q([](int a, const CovariateVector&) {
      return a == 1 ? 0.7 : 0.4;
    });
    const BlipFn blip = BlipFn::constant(0.3);
    const Observation o{w, 0, 0.0};
    // (-1)/0.5 * (0 - 0.4) + (0.7 - 0.4) - 0 = 0.8 + 0.3
    CHECK(eif_value(o, q, g, blip, 0.0) == Catch::Approx(1.1).epsilon(1e-14));
  }
  SECTION("observation outside the subgroup contributes -psi") {
    const OutcomeRegressionFn q([](int a, const CovariateVector&) {
      return a == 1 ? 0.7 : 0.4;
    });
    const BlipFn blip = BlipFn::constant(-0.2);
    const Observation o{w, 1, 1.0};
    CHECK(eif_value(o, q, g, blip, 0.1) == Catch::Approx(-0.1).epsilon(1e-14));
  }
  SECTION("the correction uses Q's implied blip, not the rule's") {
    // The separately fitted blip only decides membership.
    const OutcomeRegressionFn q([](int a, const CovariateVector&) {
      return a == 1 ? 0.55 : 0.50;
    });
    const BlipFn blip = BlipFn::constant(0.4);
    const Observation o{w, 1, 1.0};
    // 2 * (1 - 0.55) + 0.05 - 0 = 0.95
    CHECK(eif_value(o, q, g, blip, 0.0) == Catch::Approx(0.95).epsilon(1e-14));
  }
}

TEST_CASE("eif with explicit rule matches blip-rule version", "[model]") {
  const auto g = PropensityFn::known(0.5);
  const OutcomeRegressionFn q(
      [](int a, const CovariateVector& w) { return expit(0.3 * a + w[0]); });
  const BlipFn blip([](const CovariateVector& w) { return 0.4 * w[0]; });
  const auto rule = SubgroupRule::from_blip(blip);
  CounterRng rng(RngSeed{13, 0});
  for (int i = 0; i < 50; ++i) {
    const Observation o{{2.0 * rng.uniform() - 1.0},
                        rng.bernoulli(0.5) ? 1 : 0,
                        rng.bernoulli(0.5) ? 1.0 : 0.0};
    CHECK(eif_value(o, q, g, blip, 0.05) ==
          eif_value_for_rule(o, rule, q, g, 0.05));
  }
}

TEST_CASE("function wrappers clamp their outputs", "[model]") {
  const OutcomeRegressionFn q([](int a, const CovariateVector&) {
    return a == 1 ? 1.7 : -0.4;
  });
  CHECK(q(1, {0.0}) == OutcomeRegressionFn::kUpperClamp);
  CHECK(q(0, {0.0}) == OutcomeRegressionFn::kLowerClamp);

  const BlipFn blip([](const CovariateVector& w) { return 3.0 * w[0]; });
  CHECK(blip({5.0}) == 1.0);
  CHECK(blip({-5.0}) == -1.0);

  const auto g = PropensityFn::known(0.001);
  CHECK_THROWS(g(1, {0.0}));  // below the positivity floor
  const auto fair = PropensityFn::known(0.5);
  CHECK(fair(1, {0.0}) == 0.5);
  CHECK(fair(0, {0.0}) == 0.5);
}

TEST_CASE("dataset validation rejects malformed records", "[model]") {
  Dataset d = tiny_dataset();
  CHECK_NOTHROW(d.validate());
  CHECK(d.dim() == 2);

  Dataset bad_a = tiny_dataset();
  bad_a.observations[1].a = 2;
  CHECK_THROWS_AS(bad_a.validate(), std::invalid_argument);

  Dataset bad_y = tiny_dataset();
  bad_y.observations[0].y = 1.5;
  CHECK_THROWS_AS(bad_y.validate(), std::invalid_argument);

  Dataset bad_w = tiny_dataset();
  bad_w.observations[2].w.push_back(0.0);
  CHECK_THROWS_AS(bad_w.validate(), std::invalid_argument);
}

TEST_CASE("csv round trip preserves values exactly", "[model]") {
  const Dataset d = tiny_dataset();
  std::stringstream ss;
  write_csv(d, ss);
  const Dataset back = read_csv(ss);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back[i].a == d[i].a);
    CHECK(back[i].y == d[i].y);
    REQUIRE(back[i].w == d[i].w);
  }
}

TEST_CASE("csv reader reports the offending line", "[model]") {
  SECTION("wrong field count") {
    std::stringstream ss("w1,w2,a,y\n0.1,0.2,1,0\n0.1,1,0\n");
    try {
      read_csv(ss);
      FAIL("expected a parse error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }
  SECTION("non-numeric field") {
    std::stringstream ss("w1,a,y\nabc,1,0\n");
    CHECK_THROWS(read_csv(ss));
  }
  SECTION("empty input") {
    std::stringstream ss("");
    CHECK_THROWS(read_csv(ss));
  }
}

TEST_CASE("estimator names round trip", "[model]") {
  for (auto id : {EstimatorId::kOneStep, EstimatorId::kOneStepNoised,
                  EstimatorId::kCvTmle, EstimatorId::kCvTmleOracle}) {
    CHECK(estimator_from_string(to_string(id)) == id);
  }
  CHECK_THROWS(estimator_from_string("nonsense"));
}
