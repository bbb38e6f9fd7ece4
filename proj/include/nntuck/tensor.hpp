#pragma once

// Dense 3-mode tensors and the small multilinear kernel the rest of the
// library is built on: unfoldings, mode-n products, and masked divergences.
//
// Unfolding convention (Kolda & Bader): the mode-n unfolding places mode-n
// fibers as columns, with the earlier non-unfolded modes varying fastest.
// Storage is a flat buffer with linear index i + n1*(j + n2*k), i.e. the
// first mode varies fastest, so the mode-1 unfolding is a plain reshape.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace nntuck {

/// Floor applied to model rates inside logarithms and to multiplicative
/// update denominators. Keeps the objective finite when an iterate
/// momentarily zeroes a rate.
inline constexpr double kRateFloor = 1e-10;

class Tensor3 {
 public:
  Tensor3() = default;

  /// Zero-filled tensor of the given dims.
  Tensor3(int n1, int n2, int n3);

  /// Takes ownership of `values` (layout: index i + n1*(j + n2*k)).
  /// Throws std::invalid_argument on size mismatch or negative entries.
  Tensor3(int n1, int n2, int n3, std::vector<double> values);

  static Tensor3 constant(int n1, int n2, int n3, double value);

  /// Wraps a buffer without the nonnegativity check; for internal results
  /// of multilinear algebra whose sign is governed by the operands.
  static Tensor3 from_buffer(int n1, int n2, int n3,
                             std::vector<double> values);

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int n3() const { return n3_; }
  std::array<int, 3> dims() const { return {n1_, n2_, n3_}; }
  long size() const { return static_cast<long>(values_.size()); }

  long index(int i, int j, int k) const {
    return i + static_cast<long>(n1_) * (j + static_cast<long>(n2_) * k);
  }
  double operator()(int i, int j, int k) const { return values_[index(i, j, k)]; }
  double& operator()(int i, int j, int k) { return values_[index(i, j, k)]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double sum() const;
  double max_abs() const;
  bool all_finite() const;
  bool all_nonnegative() const;

  bool operator==(const Tensor3& other) const = default;

 private:
  int n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<double> values_;
};

/// Binary observation mask over a tensor of the same dims; 1 = observed.
class Mask3 {
 public:
  Mask3() = default;
  Mask3(int n1, int n2, int n3, std::uint8_t fill = 0);

  static Mask3 ones(int n1, int n2, int n3);

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int n3() const { return n3_; }
  std::array<int, 3> dims() const { return {n1_, n2_, n3_}; }

  long index(int i, int j, int k) const {
    return i + static_cast<long>(n1_) * (j + static_cast<long>(n2_) * k);
  }
  std::uint8_t operator()(int i, int j, int k) const { return bits_[index(i, j, k)]; }
  std::uint8_t& operator()(int i, int j, int k) { return bits_[index(i, j, k)]; }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  long observed_count() const;

  /// True when a tube (i, j, .) is either fully observed or fully held out.
  bool is_tubular() const;

  /// Copy with all (i, i, .) entries cleared; requires n1 == n2.
  Mask3 without_diagonal() const;

  /// Entrywise AND.
  Mask3 intersect(const Mask3& other) const;

  /// The mask as a 0/1 double tensor, for use in multilinear products.
  Tensor3 as_tensor() const;

  bool operator==(const Mask3& other) const = default;

 private:
  int n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Mode-n unfolding; mode is 1-based. Mode-1 gives n1 x (n2*n3), mode-2
/// n2 x (n1*n3), mode-3 n3 x (n1*n2).
Eigen::MatrixXd unfold(const Tensor3& t, int mode);

/// Inverse of unfold for the stated dims.
Tensor3 fold(const Eigen::MatrixXd& m, int mode, const std::array<int, 3>& dims);

/// Mode-n product: fold(m * unfold(t, mode), mode). The column count of m
/// must equal the tensor's extent along `mode`.
Tensor3 mode_product(const Tensor3& t, const Eigen::MatrixXd& m, int mode);

/// Generalized Kullback-Leibler divergence over observed entries:
///   sum_observed a*log(a/ahat) - a + ahat,  with 0*log(0) = 0
/// and ahat clamped to kRateFloor inside the log.
double kl_div(const Tensor3& a, const Tensor3& ahat, const Mask3& mask);

/// Poisson log-likelihood over observed entries:
///   sum_observed a*log(ahat) - ahat - lgamma(a + 1)
/// with the same rate clamping inside the log as kl_div, so that
/// poisson_loglik = -kl_div + (a term that does not depend on ahat).
double poisson_loglik(const Tensor3& a, const Tensor3& ahat, const Mask3& mask);

}  // namespace nntuck
