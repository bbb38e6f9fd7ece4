#pragma once

// Interpretive transformations of a fitted decomposition: rewriting the
// layer factor in the basis of chosen reference layers, classical
// single-layer summaries (consensus and locally aggregated structures), and
// display normalization of memberships.

#include "nntuck/model.hpp"
#include "nntuck/tensor.hpp"

#include <vector>

namespace nntuck {

/// The layer factor and core rewritten so that C chosen layers become the
/// coordinate axes: y_star = y * b^-1, core_star = core x3 b. Rows of
/// y_star at the basis layers are canonical unit vectors, every other row
/// expresses that layer's schema relative to the chosen ones, and the
/// reconstruction is unchanged. y_star entries may be negative; this is a
/// reparameterization for reading, not a model, so they are reported as-is.
struct RelativeSpace {
  std::vector<int> basis_layers;
  Eigen::MatrixXd b;       // C x C, the selected rows of y
  Eigen::MatrixXd y_star;  // L x C
  Tensor3 core_star;       // K x K x C
  bool has_negative = false;
};

/// Picks C rows of y whose submatrix has (locally) maximal volume: greedy
/// pivoted selection followed by single-swap refinement, so no swap of one
/// selected row for an unselected one increases |det|. Throws when y is
/// numerically rank-deficient, naming the basis position that could not be
/// filled.
std::vector<int> select_basis_layers(const Eigen::MatrixXd& y);

RelativeSpace to_relative(const NNTuckModel& m, const std::vector<int>& basis);

/// Consensus structure: edge (i, j) present when at least half of the
/// layers perceive it (inclusive at exactly 50%). Entries are read as
/// perceived when > 0, so binary and count tensors behave alike.
Eigen::MatrixXi consensus(const Tensor3& a);

/// Locally aggregated structure: edge (i, j) present when perceiver i's own
/// layer reports it. Requires L = N.
Eigen::MatrixXi locally_aggregated(const Tensor3& a);

struct ProportionalMembership {
  Eigen::MatrixXd rows;        // nonzero rows scaled to sum to one
  std::vector<int> zero_rows;  // rows left untouched because they sum to zero
};

ProportionalMembership proportional_membership(const Eigen::MatrixXd& m);

}  // namespace nntuck
