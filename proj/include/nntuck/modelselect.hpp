#pragma once

// Rank selection by held-out link prediction: tubular b-fold masks, the AUC
// rank statistic, per-spec cross-validation, and the (regime, K, C) sweep.

#include "nntuck/estimate.hpp"
#include "nntuck/model.hpp"
#include "nntuck/tensor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nntuck {

/// b tubular train masks over an N x N x L tensor. Every off-diagonal dyad
/// tube (i, j, .) belongs to exactly one test fold; self-tie tubes are
/// excluded from both train and test.
struct FoldPlan {
  int num_nodes = 0;
  int num_layers = 0;
  int b = 0;
  std::uint64_t seed = 0;
  /// Fold assignment per dyad, indexed i + N*j; -1 on the diagonal.
  std::vector<int> tube_fold;
  /// masks[f] is the training mask of fold f (1 = train).
  std::vector<Mask3> masks;
};

/// Balanced partition of the off-diagonal tubes into b folds (default), or
/// independent uniform assignment when `iid` is set, which mirrors holding
/// each tube out with probability 1/b.
FoldPlan make_folds(int num_nodes, int num_layers, int b, std::uint64_t seed,
                    bool iid = false);

/// Area under the ROC curve as the pair-count rank statistic:
/// (concordant + 0.5 * tied) / (positives * negatives). Undefined (nullopt)
/// when a single class is present.
std::optional<double> auc(std::span<const double> scores,
                          std::span<const int> labels);

struct FoldDetail {
  int fold = 0;
  std::optional<double> auc;
  double train_loglik = 0.0;
};

struct CvResult {
  double mean_auc = 0.0;
  /// Sample standard deviation across defined folds (0 when fewer than two).
  double std_auc = 0.0;
  double mean_train_loglik = 0.0;
  std::vector<FoldDetail> folds;
  int dropped_folds = 0;
};

/// Fits `spec` on each fold's training mask (restarts per cfg, fold f seeded
/// with derive(cfg.seed, f)), scores the held-out cells by reconstructed
/// rate against labels a > 0, and averages the defined fold AUCs.
CvResult cv_score(const Tensor3& a, const ModelSpec& spec, const FoldPlan& plan,
                  const FitConfig& cfg);

struct SweepCell {
  Regime regime = Regime::dependent;
  int k = 0;
  int c = 0;
  double mean_auc = 0.0;
  double std_auc = 0.0;
  double mean_train_loglik = 0.0;
  long params = 0;
  int dropped_folds = 0;
};

struct SweepResult {
  /// Grid in deterministic (regime, K, C) order; invalid combinations are
  /// omitted.
  std::vector<SweepCell> grid;
  int chosen = -1;
  /// Parsimony note: cells within one standard deviation of the best mean
  /// AUC with fewer parameters.
  std::string note;
};

/// Sweeps the spec grid over a shared fold plan. Under independent,
/// redundant and SCA regimes C is forced, so those contribute one cell per
/// K; dependent contributes one cell per (K, C) with C < L. The chosen cell
/// maximizes mean AUC (ties broken by grid order).
SweepResult sweep(const Tensor3& a, const std::vector<Regime>& regimes,
                  const std::vector<int>& k_range, const std::vector<int>& c_range,
                  const FoldPlan& plan, const FitConfig& cfg);

nlohmann::json sweep_to_json(const SweepResult& s);
std::string sweep_to_csv(const SweepResult& s);

}  // namespace nntuck
