#pragma once

// Seeded sampling from the generative model, plus planted block scenarios
// for calibration and recovery testing.

#include "nntuck/model.hpp"
#include "nntuck/tensor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <vector>

namespace nntuck {

/// Entry (i, j, l) ~ Poisson(reconstruct(m)(i, j, l)), independently, each
/// from its own counter-based sub-stream keyed by (seed, i, j, l); see
/// rng.hpp for the exact generator.
Tensor3 sample(const NNTuckModel& m, std::uint64_t seed);

/// 1 where the entry is positive, else 0.
Tensor3 binarize(const Tensor3& a);

/// Hard-membership planted model. Node i belongs to social block
/// node_blocks[i]; layer l draws its perceptions from the affinity slice of
/// cognitive group layer_groups[l]. Slice c puts within_rate on the block
/// pairs with (k_col - k_row) mod K == c mod K and between_rate elsewhere
/// (symmetrized under the symmetric flag), so distinct groups perceive
/// genuinely different structure. degree_spread > 1 scales each node's
/// memberships by a factor drawn log-uniformly from [1/spread, spread],
/// giving the rate heterogeneity degree-corrected models expect.
struct PlantedScenario {
  int num_nodes = 0;
  int num_layers = 0;
  ModelSpec spec;
  std::vector<int> node_blocks;   // size N, values in [0, K)
  std::vector<int> layer_groups;  // size L, values in [0, C); derived for
                                  // independent / redundant / SCA regimes
  double within_rate = 1.0;
  double between_rate = 0.0;
  double degree_spread = 1.0;
  std::uint64_t seed = 0;

  /// Balanced round-robin assignment of blocks and groups.
  static PlantedScenario balanced(int num_nodes, int num_layers, ModelSpec spec,
                                  double within_rate, double between_rate,
                                  double degree_spread, std::uint64_t seed);

  void validate() const;

  /// The planted factors as a model satisfying the spec constraints.
  NNTuckModel build_model() const;

  /// Poisson draw from the planted model under this scenario's seed.
  Tensor3 sample_tensor() const;
};

nlohmann::json scenario_to_json(const PlantedScenario& s);
PlantedScenario scenario_from_json(const nlohmann::json& j);

}  // namespace nntuck
