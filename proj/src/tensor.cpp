#include "nntuck/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nntuck {

namespace {

void check_positive_dims(int n1, int n2, int n3) {
  if (n1 <= 0 || n2 <= 0 || n3 <= 0)
    throw std::invalid_argument("tensor dims must be positive, got (" +
                                std::to_string(n1) + ", " + std::to_string(n2) +
                                ", " + std::to_string(n3) + ")");
}

void check_same_dims(const std::array<int, 3>& a, const std::array<int, 3>& b,
                     const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": dims mismatch");
}

}  // namespace

Tensor3::Tensor3(int n1, int n2, int n3) : n1_(n1), n2_(n2), n3_(n3) {
  check_positive_dims(n1, n2, n3);
  values_.assign(static_cast<std::size_t>(n1) * n2 * n3, 0.0);
}

Tensor3::Tensor3(int n1, int n2, int n3, std::vector<double> values)
    : n1_(n1), n2_(n2), n3_(n3), values_(std::move(values)) {
  check_positive_dims(n1, n2, n3);
  if (values_.size() != static_cast<std::size_t>(n1) * n2 * n3)
    throw std::invalid_argument("tensor value count does not match dims");
  for (double v : values_)
    if (!(v >= 0.0))
      throw std::invalid_argument("tensor entries must be nonnegative");
}

Tensor3 Tensor3::constant(int n1, int n2, int n3, double value) {
  Tensor3 t(n1, n2, n3);
  t.values_.assign(t.values_.size(), value);
  return t;
}

Tensor3 Tensor3::from_buffer(int n1, int n2, int n3, std::vector<double> values) {
  check_positive_dims(n1, n2, n3);
  Tensor3 t;
  t.n1_ = n1;
  t.n2_ = n2;
  t.n3_ = n3;
  if (values.size() != static_cast<std::size_t>(n1) * n2 * n3)
    throw std::invalid_argument("tensor value count does not match dims");
  t.values_ = std::move(values);
  return t;
}

double Tensor3::sum() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor3::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor3::all_nonnegative() const {
  for (double v : values_)
    if (v < 0.0) return false;
  return true;
}

Mask3::Mask3(int n1, int n2, int n3, std::uint8_t fill)
    : n1_(n1), n2_(n2), n3_(n3) {
  check_positive_dims(n1, n2, n3);
  bits_.assign(static_cast<std::size_t>(n1) * n2 * n3, fill);
}

Mask3 Mask3::ones(int n1, int n2, int n3) { return Mask3(n1, n2, n3, 1); }

long Mask3::observed_count() const {
  long c = 0;
  for (std::uint8_t b : bits_) c += b != 0;
  return c;
}

bool Mask3::is_tubular() const {
  for (int j = 0; j < n2_; ++j)
    for (int i = 0; i < n1_; ++i) {
      const std::uint8_t first = (*this)(i, j, 0);
      for (int k = 1; k < n3_; ++k)
        if ((*this)(i, j, k) != first) return false;
    }
  return true;
}

Mask3 Mask3::without_diagonal() const {
  if (n1_ != n2_)
    throw std::invalid_argument("diagonal mask requires n1 == n2");
  Mask3 out = *this;
  for (int k = 0; k < n3_; ++k)
    for (int i = 0; i < n1_; ++i) out(i, i, k) = 0;
  return out;
}

Mask3 Mask3::intersect(const Mask3& other) const {
  check_same_dims(dims(), other.dims(), "mask intersect");
  Mask3 out = *this;
  for (std::size_t idx = 0; idx < bits_.size(); ++idx)
    out.bits_[idx] = bits_[idx] && other.bits_[idx];
  return out;
}

Tensor3 Mask3::as_tensor() const {
  std::vector<double> vals(bits_.size());
  for (std::size_t idx = 0; idx < bits_.size(); ++idx)
    vals[idx] = bits_[idx] ? 1.0 : 0.0;
  return Tensor3::from_buffer(n1_, n2_, n3_, std::move(vals));
}

Eigen::MatrixXd unfold(const Tensor3& t, int mode) {
  const int n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  switch (mode) {
    case 1:
      // Contiguous: column (j + n2*k) is the fiber t(., j, k).
      return Eigen::Map<const Eigen::MatrixXd>(t.values().data(), n1,
                                               static_cast<long>(n2) * n3);
    case 2: {
      Eigen::MatrixXd out(n2, static_cast<long>(n1) * n3);
      for (int k = 0; k < n3; ++k) {
        Eigen::Map<const Eigen::MatrixXd> slice(
            t.values().data() + static_cast<long>(k) * n1 * n2, n1, n2);
        out.middleCols(static_cast<long>(k) * n1, n1) = slice.transpose();
      }
      return out;
    }
    case 3:
      return Eigen::Map<const Eigen::MatrixXd>(t.values().data(),
                                               static_cast<long>(n1) * n2, n3)
          .transpose();
    default:
      throw std::invalid_argument("unfold: mode must be 1, 2 or 3");
  }
}

Tensor3 fold(const Eigen::MatrixXd& m, int mode, const std::array<int, 3>& dims) {
  const int n1 = dims[0], n2 = dims[1], n3 = dims[2];
  check_positive_dims(n1, n2, n3);
  const long expected_rows = dims[static_cast<std::size_t>(mode - 1)];
  const long expected_cols =
      static_cast<long>(n1) * n2 * n3 / std::max<long>(expected_rows, 1);
  if (mode < 1 || mode > 3)
    throw std::invalid_argument("fold: mode must be 1, 2 or 3");
  if (m.rows() != expected_rows || m.cols() != expected_cols)
    throw std::invalid_argument("fold: matrix shape does not match dims");

  std::vector<double> vals(static_cast<std::size_t>(n1) * n2 * n3);
  switch (mode) {
    case 1:
      Eigen::Map<Eigen::MatrixXd>(vals.data(), n1, static_cast<long>(n2) * n3) = m;
      break;
    case 2:
      for (int k = 0; k < n3; ++k) {
        Eigen::Map<Eigen::MatrixXd> slice(vals.data() + static_cast<long>(k) * n1 * n2,
                                          n1, n2);
        slice = m.middleCols(static_cast<long>(k) * n1, n1).transpose();
      }
      break;
    case 3:
      Eigen::Map<Eigen::MatrixXd>(vals.data(), static_cast<long>(n1) * n2, n3) =
          m.transpose();
      break;
  }
  return Tensor3::from_buffer(n1, n2, n3, std::move(vals));
}

Tensor3 mode_product(const Tensor3& t, const Eigen::MatrixXd& m, int mode) {
  if (mode < 1 || mode > 3)
    throw std::invalid_argument("mode_product: mode must be 1, 2 or 3");
  if (m.cols() != t.dims()[static_cast<std::size_t>(mode - 1)])
    throw std::invalid_argument(
        "mode_product: matrix columns must match tensor extent along the mode");
  std::array<int, 3> out_dims = t.dims();
  out_dims[static_cast<std::size_t>(mode - 1)] = static_cast<int>(m.rows());
  return fold(m * unfold(t, mode), mode, out_dims);
}

double kl_div(const Tensor3& a, const Tensor3& ahat, const Mask3& mask) {
  check_same_dims(a.dims(), ahat.dims(), "kl_div");
  check_same_dims(a.dims(), mask.dims(), "kl_div");
  const auto& av = a.values();
  const auto& hv = ahat.values();
  const auto& mb = mask.bits();
  double total = 0.0;
  for (std::size_t idx = 0; idx < av.size(); ++idx) {
    if (!mb[idx]) continue;
    const double x = av[idx];
    const double r = hv[idx];
    if (x > 0.0)
      total += x * (std::log(x) - std::log(std::max(r, kRateFloor))) - x + r;
    else
      total += r;
  }
  return total;
}

double poisson_loglik(const Tensor3& a, const Tensor3& ahat, const Mask3& mask) {
  check_same_dims(a.dims(), ahat.dims(), "poisson_loglik");
  check_same_dims(a.dims(), mask.dims(), "poisson_loglik");
  const auto& av = a.values();
  const auto& hv = ahat.values();
  const auto& mb = mask.bits();
  double total = 0.0;
  for (std::size_t idx = 0; idx < av.size(); ++idx) {
    if (!mb[idx]) continue;
    const double x = av[idx];
    const double r = hv[idx];
    double term = -r - std::lgamma(x + 1.0);
    if (x > 0.0) term += x * std::log(std::max(r, kRateFloor));
    total += term;
  }
  return total;
}

}  // namespace nntuck
