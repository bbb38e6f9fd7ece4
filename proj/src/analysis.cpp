#include "nntuck/analysis.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace nntuck {

namespace {

constexpr double kRankTol = 1e-8;

double abs_det(const Eigen::MatrixXd& m) {
  return std::abs(m.fullPivLu().determinant());
}

Eigen::MatrixXd rows_at(const Eigen::MatrixXd& y, const std::vector<int>& idx) {
  Eigen::MatrixXd b(idx.size(), y.cols());
  for (std::size_t t = 0; t < idx.size(); ++t) b.row(static_cast<long>(t)) = y.row(idx[t]);
  return b;
}

}  // namespace

std::vector<int> select_basis_layers(const Eigen::MatrixXd& y) {
  const int l = static_cast<int>(y.rows());
  const int c = static_cast<int>(y.cols());
  if (c < 1 || l < c)
    throw std::invalid_argument("select_basis_layers: need at least C rows");

  // Greedy pivoting: repeatedly take the row with the largest component
  // orthogonal to the span of the rows picked so far.
  std::vector<int> picked;
  std::vector<bool> used(static_cast<std::size_t>(l), false);
  Eigen::MatrixXd residual = y;
  for (int step = 0; step < c; ++step) {
    int arg = -1;
    double best_norm = 0.0;
    for (int r = 0; r < l; ++r) {
      if (used[static_cast<std::size_t>(r)]) continue;
      const double n = residual.row(r).norm();
      if (n > best_norm) {
        best_norm = n;
        arg = r;
      }
    }
    if (arg < 0 || best_norm <= kRankTol)
      throw std::invalid_argument(
          "select_basis_layers: Y is numerically rank-deficient; no layer "
          "supplies an independent direction for basis position " +
          std::to_string(step + 1) + " of " + std::to_string(c));
    picked.push_back(arg);
    used[static_cast<std::size_t>(arg)] = true;
    const Eigen::RowVectorXd q = residual.row(arg) / best_norm;
    residual -= (residual * q.transpose()) * q;
  }

  // Single-swap refinement toward a locally volume-maximal selection.
  double best_det = abs_det(rows_at(y, picked));
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t slot = 0; slot < picked.size() && !improved; ++slot) {
      for (int r = 0; r < l; ++r) {
        if (used[static_cast<std::size_t>(r)]) continue;
        std::vector<int> candidate = picked;
        candidate[slot] = r;
        const double det = abs_det(rows_at(y, candidate));
        if (det > best_det * (1.0 + 1e-12)) {
          used[static_cast<std::size_t>(picked[slot])] = false;
          used[static_cast<std::size_t>(r)] = true;
          picked = candidate;
          best_det = det;
          improved = true;
          break;
        }
      }
    }
  }

  const Eigen::MatrixXd b = rows_at(y, picked);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
  const auto& sv = svd.singularValues();
  for (int d = 0; d < sv.size(); ++d)
    if (sv(d) <= kRankTol)
      throw std::invalid_argument(
          "select_basis_layers: best selection is singular in dimension " +
          std::to_string(d + 1) + " (smallest singular value below tolerance)");
  return picked;
}

RelativeSpace to_relative(const NNTuckModel& m, const std::vector<int>& basis) {
  const int c = m.c();
  if (static_cast<int>(basis.size()) != c)
    throw std::invalid_argument("to_relative: basis must list exactly C layers");
  for (int idx : basis)
    if (idx < 0 || idx >= m.num_layers())
      throw std::invalid_argument("to_relative: basis layer index out of range");

  RelativeSpace out;
  out.basis_layers = basis;
  out.b = rows_at(m.y, basis);

  // y_star solves y_star * b = y, i.e. b^T y_star^T = y^T.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(out.b.transpose());
  if (!lu.isInvertible())
    throw std::invalid_argument("to_relative: basis rows form a singular matrix");
  out.y_star = lu.solve(m.y.transpose()).transpose();
  out.core_star = mode_product(m.core, out.b, 3);
  out.has_negative = (out.y_star.array() < 0.0).any();
  return out;
}

Eigen::MatrixXi consensus(const Tensor3& a) {
  const int n1 = a.n1(), n2 = a.n2(), l = a.n3();
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(n1, n2);
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      int perceived = 0;
      for (int k = 0; k < l; ++k) perceived += a(i, j, k) > 0.0;
      out(i, j) = 2 * perceived >= l ? 1 : 0;
    }
  return out;
}

Eigen::MatrixXi locally_aggregated(const Tensor3& a) {
  if (a.n3() != a.n1() || a.n1() != a.n2())
    throw std::invalid_argument("locally_aggregated: requires an N x N x N tensor");
  const int n = a.n1();
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = a(i, j, i) > 0.0 ? 1 : 0;
  return out;
}

ProportionalMembership proportional_membership(const Eigen::MatrixXd& m) {
  if ((m.array() < 0.0).any())
    throw std::invalid_argument("proportional_membership: entries must be nonnegative");
  ProportionalMembership out;
  out.rows = m;
  for (int i = 0; i < m.rows(); ++i) {
    const double s = m.row(i).sum();
    if (s > 0.0)
      out.rows.row(i) /= s;
    else
      out.zero_rows.push_back(i);
  }
  return out;
}

}  // namespace nntuck
