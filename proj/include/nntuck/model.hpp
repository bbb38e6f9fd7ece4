#pragma once

// Model containers for the nonnegative Tucker decomposition of a multilayer
// network, the four constraint regimes, reconstruction, and parameter
// accounting used by the likelihood-ratio tests.

#include "nntuck/tensor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nntuck {

enum class Regime { independent, dependent, redundant, sca };

std::string_view regime_name(Regime r);
Regime regime_from_name(std::string_view name);

/// Constraint regime plus latent dimensions. The layer rank C is free only
/// under the dependent regime; the others force it (independent: C = L,
/// redundant: C = 1, social-cognitive agreement: C = K).
struct ModelSpec {
  Regime regime = Regime::dependent;
  int k = 1;
  int c = 1;
  bool symmetric = false;

  /// Effective layer rank for a network with `num_layers` layers.
  int resolved_c(int num_layers) const;

  /// Throws std::invalid_argument when the spec cannot apply to an
  /// (num_nodes, num_layers) network.
  void validate(int num_nodes, int num_layers) const;
};

/// Factor matrices and core of a fitted decomposition.
///   u: N x K outgoing memberships, v: N x K incoming memberships,
///   y: L x C layer memberships, core: K x K x C affinity slices.
/// Memberships are stored unnormalized; row-normalization is a display
/// concern handled by the analysis tools.
struct NNTuckModel {
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  Eigen::MatrixXd y;
  Tensor3 core;

  int num_nodes() const { return static_cast<int>(u.rows()); }
  int num_layers() const { return static_cast<int>(y.rows()); }
  int k() const { return static_cast<int>(u.cols()); }
  int c() const { return static_cast<int>(y.cols()); }

  bool operator==(const NNTuckModel& other) const;
};

/// Expected-rate tensor core x1 u x2 v x3 y, of dims (N, N, L).
Tensor3 reconstruct(const NNTuckModel& m);

/// Free-parameter count of a regime. Fixed layer factors (identity under
/// independent, ones under redundant) contribute nothing; the symmetric flag
/// ties u to v and makes the core slices symmetric.
long param_count(const ModelSpec& spec, int num_nodes, int num_layers);

/// Every regime constraint the model violates, as human-readable strings;
/// empty means the model conforms.
std::vector<std::string> validate(const NNTuckModel& m, const ModelSpec& spec);

/// JSON document with dims, row-major factor matrices, core values, spec,
/// seed and final KL. Round-trips bit-exactly.
nlohmann::json model_to_json(const NNTuckModel& m, const ModelSpec& spec,
                             std::uint64_t seed, double final_kl);

struct ModelDocument {
  NNTuckModel model;
  ModelSpec spec;
  std::uint64_t seed = 0;
  double final_kl = 0.0;
};

ModelDocument model_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

}  // namespace nntuck
