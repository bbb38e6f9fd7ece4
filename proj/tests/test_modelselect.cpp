#include "nntuck/modelselect.hpp"

#include "nntuck/synth.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace nntuck;

namespace {

FitConfig cv_config(int restarts = 3, int max_iters = 150) {
  FitConfig cfg;
  cfg.restarts = restarts;
  cfg.max_iters = max_iters;
  cfg.rel_tol = 1e-6;
  return cfg;
}

}  // namespace

TEST_CASE("fold masks are tubular, cover every off-diagonal tube, and skip self-ties") {
  for (bool iid : {false, true}) {
    const FoldPlan plan = make_folds(7, 5, 3, 42, iid);
    REQUIRE(plan.masks.size() == 3);
    std::vector<int> seen(49, 0);
    for (int f = 0; f < plan.b; ++f) {
      const Mask3& m = plan.masks[static_cast<std::size_t>(f)];
      CHECK(m.is_tubular());
      for (int i = 0; i < 7; ++i)
        for (int k = 0; k < 5; ++k) CHECK(m(i, i, k) == 0);
    }
    for (int j = 0; j < 7; ++j)
      for (int i = 0; i < 7; ++i) {
        const int fold = plan.tube_fold[static_cast<std::size_t>(i + 7 * j)];
        if (i == j) {
          CHECK(fold == -1);
          continue;
        }
        REQUIRE(fold >= 0);
        REQUIRE(fold < 3);
        // held out of its own fold's train mask, observed in every other
        for (int f = 0; f < 3; ++f)
          CHECK(plan.masks[static_cast<std::size_t>(f)](i, j, 0) == (f == fold ? 0 : 1));
        ++seen[static_cast<std::size_t>(i + 7 * j)];
      }
    for (int j = 0; j < 7; ++j)
      for (int i = 0; i < 7; ++i)
        if (i != j) CHECK(seen[static_cast<std::size_t>(i + 7 * j)] == 1);
  }
}

TEST_CASE("balanced folds are even; iid folds fluctuate binomially") {
  const int n = 12, b = 4;
  const long tubes = n * n - n;  // 132
  const FoldPlan balanced = make_folds(n, 3, b, 7, false);
  for (int f = 0; f < b; ++f) {
    long count = 0;
    for (int v : balanced.tube_fold) count += v == f;
    CHECK(count == tubes / b);
  }
  const double expected = static_cast<double>(tubes) / b;
  const double slack = 4.0 * std::sqrt(expected * (1.0 - 1.0 / b));
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const FoldPlan iid = make_folds(n, 3, b, seed, true);
    for (int f = 0; f < b; ++f) {
      long count = 0;
      for (int v : iid.tube_fold) count += v == f;
      CHECK(std::abs(static_cast<double>(count) - expected) <= slack);
    }
  }
}

TEST_CASE("fold plans are reproducible and validate their arguments") {
  const FoldPlan p1 = make_folds(6, 4, 3, 99);
  const FoldPlan p2 = make_folds(6, 4, 3, 99);
  CHECK(p1.tube_fold == p2.tube_fold);
  CHECK_THROWS_AS(make_folds(6, 4, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_folds(2, 4, 3, 0), std::invalid_argument);  // b > 2 tubes
  CHECK_THROWS_AS(make_folds(1, 4, 2, 0), std::invalid_argument);
}

TEST_CASE("auc pins the enumerated examples") {
  CHECK(*auc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}) == 1.0);
  CHECK(*auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK(*auc(std::vector<double>{0.8, 0.9, 0.2, 0.4}, std::vector<int>{1, 0, 0, 1}) == 0.5);
  CHECK(!auc(std::vector<double>{0.8, 0.9}, std::vector<int>{1, 1}).has_value());
  CHECK(!auc(std::vector<double>{0.8, 0.9}, std::vector<int>{0, 0}).has_value());
}

TEST_CASE("auc equals the brute-force pair count exactly") {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    rng::Stream s = rng::stream(seed);
    const int n = 200;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      // coarse grid forces plenty of ties
      scores[static_cast<std::size_t>(i)] =
          std::floor(s.next_unit() * 8.0) / 8.0;
      labels[static_cast<std::size_t>(i)] = s.next_unit() < 0.4 ? 1 : 0;
    }
    const auto fast = auc(scores, labels);
    REQUIRE(fast.has_value());
    CHECK(*fast == oracle::auc(scores, labels));
  }
}

TEST_CASE("cv on a separated planted model: truth scores high, rank-1 scores lower") {
  const int n = 12;
  PlantedScenario sc = PlantedScenario::balanced(
      n, n, ModelSpec{Regime::dependent, 2, 2, false}, 3.0, 0.0, 1.0, 1234);
  // noiseless rates as data: positives are exactly the within-pattern cells
  const Tensor3 a = reconstruct(sc.build_model());
  const FoldPlan plan = make_folds(n, n, 3, 5);

  FitConfig cfg = cv_config();
  cfg.seed = 9;
  const CvResult truth = cv_score(a, ModelSpec{Regime::dependent, 2, 2, false}, plan, cfg);
  CHECK(truth.mean_auc >= 0.95);
  CHECK(truth.folds.size() == 3);

  const CvResult rank1 = cv_score(a, ModelSpec{Regime::dependent, 1, 1, false}, plan, cfg);
  CHECK(rank1.mean_auc < truth.mean_auc);
}

TEST_CASE("cv on edge-randomized data sits near chance") {
  const int n = 12;
  rng::Stream s = rng::stream(777);
  Tensor3 a(n, n, n);
  for (double& v : a.values()) v = s.next_unit() < 0.3 ? 1.0 : 0.0;
  const FoldPlan plan = make_folds(n, n, 3, 6);
  FitConfig cfg = cv_config();
  cfg.seed = 10;
  const CvResult res = cv_score(a, ModelSpec{Regime::dependent, 2, 2, false}, plan, cfg);
  CHECK(res.mean_auc == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(res.mean_auc - 0.5) <= 0.05);
}

TEST_CASE("cv under the redundant regime is invariant to layer relabeling") {
  const int n = 10, l = 6;
  const Tensor3 a = PlantedScenario::balanced(
                        n, l, ModelSpec{Regime::dependent, 2, 2, false}, 2.0, 0.4,
                        1.0, 4321)
                        .sample_tensor();
  Tensor3 reversed(n, n, l);
  for (int k = 0; k < l; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) reversed(i, j, k) = a(i, j, l - 1 - k);

  const FoldPlan plan = make_folds(n, l, 3, 11);
  FitConfig cfg = cv_config();
  cfg.seed = 12;
  const CvResult r1 = cv_score(a, ModelSpec{Regime::redundant, 2, 0, false}, plan, cfg);
  const CvResult r2 =
      cv_score(reversed, ModelSpec{Regime::redundant, 2, 0, false}, plan, cfg);
  CHECK(r1.mean_auc == doctest::Approx(r2.mean_auc).epsilon(1e-6));
}

TEST_CASE("folds whose held-out cells are single-class are dropped") {
  // every off-diagonal cell positive: labels are all 1, AUC undefined on
  // every fold, so scoring must fail rather than fake a number
  const int n = 6, l = 4;
  Tensor3 a(n, n, l);
  for (int k = 0; k < l; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (i != j) a(i, j, k) = 1.0;
  const FoldPlan plan = make_folds(n, l, 2, 8);
  FitConfig cfg = cv_config(1, 40);
  CHECK_THROWS_AS(cv_score(a, ModelSpec{Regime::redundant, 1, 0, false}, plan, cfg),
                  EstimationError);
}

TEST_CASE("single-cell sweep chooses that cell; grid order is deterministic") {
  const int n = 10;
  const Tensor3 a = PlantedScenario::balanced(
                        n, n, ModelSpec{Regime::dependent, 2, 2, false}, 2.5, 0.3,
                        1.0, 555)
                        .sample_tensor();
  const FoldPlan plan = make_folds(n, n, 2, 3);
  FitConfig cfg = cv_config(2, 120);
  cfg.seed = 20;

  const SweepResult single = sweep(a, {Regime::dependent}, {2}, {2}, plan, cfg);
  CHECK(single.grid.size() == 1);
  CHECK(single.chosen == 0);

  const SweepResult grid =
      sweep(a, {Regime::redundant, Regime::dependent}, {1, 2}, {1, 2}, plan, cfg);
  REQUIRE(grid.grid.size() == 6);  // redundant: K=1,2; dependent: (K,C) in {1,2}^2
  CHECK(grid.grid[0].regime == Regime::redundant);
  CHECK(grid.grid[0].k == 1);
  CHECK(grid.grid[2].regime == Regime::dependent);
  CHECK(grid.grid[2].k == 1);
  CHECK(grid.grid[2].c == 1);
  CHECK(grid.grid[5].k == 2);
  CHECK(grid.grid[5].c == 2);
  CHECK(grid.chosen >= 0);

  const std::string csv = sweep_to_csv(grid);
  CHECK(csv.find("regime,k,c,mean_test_auc,std_test_auc,mean_train_loglik,"
                 "param_count,dropped_folds,chosen") == 0);
}
