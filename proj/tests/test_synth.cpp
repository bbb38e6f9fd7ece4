#include "nntuck/synth.hpp"

#include "nntuck/analysis.hpp"
#include "nntuck/estimate.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

using namespace nntuck;

TEST_CASE("sampling a zero-core model gives the zero tensor") {
  NNTuckModel m = oracle::random_model(4, 3, 2, 2, 1);
  for (double& v : m.core.values()) v = 0.0;
  const Tensor3 a = sample(m, 7);
  for (double v : a.values()) CHECK(v == 0.0);
}

TEST_CASE("sampling is deterministic in the seed and integer-valued") {
  const NNTuckModel m = oracle::random_model(4, 3, 2, 2, 2);
  const Tensor3 a = sample(m, 11);
  const Tensor3 b = sample(m, 11);
  const Tensor3 c = sample(m, 12);
  CHECK(a == b);
  CHECK(a.values() != c.values());
  for (double v : a.values()) CHECK(v == std::floor(v));
}

TEST_CASE("sampler moments: mean and variance track the rate") {
  for (double rate : {0.3, 1.3, 4.0}) {
    NNTuckModel m;
    m.u = Eigen::MatrixXd::Ones(2, 1);
    m.v = Eigen::MatrixXd::Ones(2, 1);
    m.y = Eigen::MatrixXd::Ones(1, 1);
    m.core = Tensor3(1, 1, 1);
    m.core(0, 0, 0) = rate;

    const int draws = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < draws; ++s) {
      const Tensor3 a = sample(m, static_cast<std::uint64_t>(s));
      const double v = a(0, 1, 0);
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    const double se_mean = std::sqrt(rate / draws);
    CHECK(std::abs(mean - rate) <= 3.0 * se_mean);
    // Poisson variance equals the mean; its sampling SE is roughly
    // sqrt((2*rate^2 + rate) / draws)
    const double se_var = std::sqrt((2.0 * rate * rate + rate) / draws);
    CHECK(std::abs(var - rate) <= 3.0 * se_var);
  }
}

TEST_CASE("binarize maps positives to one and is idempotent") {
  const Tensor3 a(1, 1, 3, {0.0, 1.0, 3.0});
  const Tensor3 b = binarize(a);
  CHECK(b.values() == std::vector<double>{0.0, 1.0, 1.0});
  CHECK(binarize(b) == b);
}

TEST_CASE("consensus commutes with binarize on count tensors") {
  const Tensor3 counts = oracle::random_counts(5, 5, 5, 21, 0.8);
  CHECK(consensus(binarize(counts)) == consensus(counts));
}

TEST_CASE("planted scenarios validate their fields") {
  PlantedScenario sc = PlantedScenario::balanced(
      6, 6, ModelSpec{Regime::dependent, 2, 2, false}, 1.0, 2.0, 1.0, 1);
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);  // within < between
  sc.between_rate = 0.5;
  CHECK_NOTHROW(sc.validate());
  sc.node_blocks[0] = 9;
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("planted factors satisfy the spec constraints") {
  for (ModelSpec spec : {ModelSpec{Regime::dependent, 3, 2, false},
                         ModelSpec{Regime::independent, 2, 0, false},
                         ModelSpec{Regime::redundant, 2, 0, false},
                         ModelSpec{Regime::sca, 3, 3, false}}) {
    const PlantedScenario sc =
        PlantedScenario::balanced(9, 9, spec, 2.0, 0.5, 2.0, 33);
    CHECK(validate(sc.build_model(), spec).empty());
  }
}

TEST_CASE("separated planted blocks are recovered by the fit") {
  const int n = 30, k = 3;
  const PlantedScenario sc = PlantedScenario::balanced(
      n, n, ModelSpec{Regime::dependent, k, k, false}, 4.0, 0.2, 1.0, 99);
  const Tensor3 a = sc.sample_tensor();
  FitConfig cfg;
  cfg.spec = {Regime::dependent, k, k, false};
  cfg.restarts = 5;
  cfg.max_iters = 300;
  cfg.seed = 7;
  const FitResult res = fit(a, Mask3::ones(n, n, n), cfg);
  CHECK(oracle::permuted_accuracy(res.model.u, sc.node_blocks) >= 0.9);
}

TEST_CASE("scenario json round-trips and fills balanced defaults") {
  const PlantedScenario sc = PlantedScenario::balanced(
      8, 8, ModelSpec{Regime::dependent, 2, 2, false}, 2.5, 0.5, 10.0, 77);
  const PlantedScenario back = scenario_from_json(scenario_to_json(sc));
  CHECK(back.node_blocks == sc.node_blocks);
  CHECK(back.layer_groups == sc.layer_groups);
  CHECK(back.within_rate == sc.within_rate);
  CHECK(back.degree_spread == sc.degree_spread);

  nlohmann::json minimal = {{"n", 6},
                            {"l", 6},
                            {"spec", {{"regime", "dependent"}, {"k", 2}, {"c", 2}}},
                            {"within_rate", 2.0},
                            {"between_rate", 0.5}};
  const PlantedScenario filled = scenario_from_json(minimal);
  CHECK(filled.node_blocks.size() == 6);
  CHECK(filled.layer_groups.size() == 6);
}
