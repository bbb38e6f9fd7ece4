#pragma once

// Maximum-likelihood estimation by multiplicative updates: the masked
// KL-minimizing update rules for all standard regimes, the social-cognitive
// agreement variants (which lose the monotonicity guarantee and therefore
// track the best iterate seen), and the multi-restart driver.

#include "nntuck/model.hpp"
#include "nntuck/tensor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace nntuck {

/// Estimation failed for data reasons (e.g. nothing observed, every restart
/// failed).
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A non-finite value appeared in the factors mid-iteration.
struct NumericalError : std::runtime_error {
  NumericalError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration(iteration) {}
  int iteration;
};

/// Update schedule for the constrained U = Y fits. `averaged_factors`
/// updates U and Y separately and then sets both to their average;
/// `naive` copies one onto the other after each of their updates;
/// `averaged_updates` applies the mean of the two multiplicative ratios.
enum class ScaStrategy { averaged_factors, naive, averaged_updates };

std::string_view sca_strategy_name(ScaStrategy s);
ScaStrategy sca_strategy_from_name(std::string_view name);

struct FitConfig {
  ModelSpec spec;
  double rel_tol = 1e-6;
  int max_iters = 2000;
  /// 0 picks the regime default: 20 restarts, 50 for SCA.
  int restarts = 0;
  std::uint64_t seed = 0;
  ScaStrategy sca_strategy = ScaStrategy::averaged_factors;
  /// Elementwise initialization is uniform on (0, init_scale]. 0 selects a
  /// scale that matches the initial reconstruction's mean to the observed
  /// data mean, which keeps early divergences finite and comparable across
  /// restarts.
  double init_scale = 0.0;
  /// Self-ties (i == j) carry no survey signal; when the tensor is square
  /// along its first two modes they are excluded from the likelihood unless
  /// this is cleared.
  bool exclude_diagonal = true;
  /// Optional explicit starting point (used by fixed-point tests and warm
  /// starts); regime constraints are re-applied to it before iterating.
  std::optional<NNTuckModel> init;

  int effective_restarts() const {
    return restarts > 0 ? restarts : (spec.regime == Regime::sca ? 50 : 20);
  }

  void validate() const;
};

struct FitResult {
  NNTuckModel model;
  /// kl_trace[0] is the divergence at initialization, then one value per
  /// iteration.
  std::vector<double> kl_trace;
  double final_kl = 0.0;
  /// Masked Poisson log-likelihood of the returned model.
  double final_loglik = 0.0;
  int iterations = 0;
  std::uint64_t seed_used = 0;
  /// True when no per-iteration KL increase exceeded 1e-9.
  bool monotone = true;
  double init_scale_used = 0.0;
  /// SCA only: the factor averaging zeroed out an entire latent column at
  /// some iterate (the denominators are floored, so iteration continued).
  bool averaging_zeroed_column = false;
  /// Populated by fit(): the derived seed of every restart.
  std::vector<std::uint64_t> restart_seeds;
};

nlohmann::json fit_config_to_json(const FitConfig& cfg);

/// One multiplicative-updates run from a seeded (or explicit) initialization.
/// KL is non-increasing across iterations for the standard regimes; the run
/// stops when the relative KL change drops below rel_tol or at max_iters.
/// SCA specs are delegated to fit_sca_once.
FitResult fit_once(const Tensor3& a, const Mask3& mask, const FitConfig& cfg,
                   std::uint64_t seed);

/// One constrained U = Y run. Non-monotone in general; the result is the
/// iterate with the smallest divergence seen along the trajectory, so
/// final_kl is a lower bound on every kl_trace entry.
FitResult fit_sca_once(const Tensor3& a, const Mask3& mask, const FitConfig& cfg,
                       std::uint64_t seed);

/// Best of cfg.effective_restarts() runs by masked training log-likelihood,
/// ties broken by lowest restart index. Restart r uses the derived seed
/// rng::derive(cfg.seed, r). Restarts run in parallel (worker count from
/// NNTUCK_WORKERS, default hardware concurrency); the selection is a
/// deterministic reduction, so results do not depend on scheduling.
FitResult fit(const Tensor3& a, const Mask3& mask, const FitConfig& cfg);

/// The seeded initialization fit_once derives, with regime constraints
/// applied; exposed so tests can pin down iteration-zero behavior.
NNTuckModel initial_model(const Tensor3& a, const Mask3& mask, const FitConfig& cfg,
                          std::uint64_t seed, double* scale_used = nullptr);

/// Worker count for parallel sections: NNTUCK_WORKERS when set, else the
/// hardware concurrency.
int worker_count();

/// Runs fn(0..n-1) on the worker pool; exceptions are rethrown for the
/// lowest failing index after all tasks finish.
void parallel_for_index(int n, const std::function<void(int)>& fn);

}  // namespace nntuck
