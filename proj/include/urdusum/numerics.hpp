#pragma once

// Dense float64 kernel: a row-major Matrix, the handful of BLAS-2 style
// loops the LSTM needs, softmax / cross-entropy, and a central-difference
// gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "urdusum/error.hpp"
#include "urdusum/rng.hpp"

namespace urdusum {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeMismatch("ragged rows in Matrix::from_rows");
      std::copy(row.begin(), row.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
      ++i;
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix column(std::span<const double> values) {
    Matrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool same_shape(const Matrix& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Gradient of a loss with respect to one parameter tensor (same shape).
using Gradient = Matrix;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ") * (" +
                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

// y += W x
inline void gemv_acc(const Matrix& w, std::span<const double> x, std::span<double> y) {
  if (w.cols() != x.size() || w.rows() != y.size()) throw ShapeMismatch("gemv: shape mismatch");
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto wr = w.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < wr.size(); ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// y += W^T x
inline void gemv_t_acc(const Matrix& w, std::span<const double> x, std::span<double> y) {
  if (w.rows() != x.size() || w.cols() != y.size()) throw ShapeMismatch("gemv_t: shape mismatch");
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const auto wr = w.row(r);
    for (std::size_t c = 0; c < wr.size(); ++c) y[c] += wr[c] * xr;
  }
}

// G += a b^T
inline void outer_acc(Matrix& g, std::span<const double> a, std::span<const double> b) {
  if (g.rows() != a.size() || g.cols() != b.size()) throw ShapeMismatch("outer: shape mismatch");
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    auto gr = g.row(r);
    for (std::size_t c = 0; c < b.size(); ++c) gr[c] += ar * b[c];
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// y += alpha x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

enum class Activation { sigmoid, tanh };

inline Matrix elementwise(Activation f, const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = f == Activation::sigmoid ? sigmoid(v) : std::tanh(v);
  return out;
}

/// Max-subtracted softmax.
inline Vector softmax(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("softmax of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += (out[i] = std::exp(v[i] - mx));
  for (double& x : out) x /= sum;
  return out;
}

inline Vector log_softmax(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("log_softmax of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  const double log_z = mx + std::log(sum);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - log_z;
  return out;
}

/// Keeps the log finite when a probability underflows to zero.
inline constexpr double kLogEpsilon = 1e-12;

inline double cross_entropy(std::span<const double> probs, std::size_t target) {
  if (target >= probs.size())
    throw IndexOutOfRange("cross_entropy target " + std::to_string(target) + " outside " + std::to_string(probs.size()));
  return -std::log(probs[target] + kLogEpsilon);
}

// ---------------------------------------------------------------------------
// Gradient checking

using LossFn = std::function<double(std::span<const Matrix>)>;

struct GradCheckOptions {
  /// Scalars checked per tensor; 0 checks every scalar. When sampling, at
  /// least 200 scalars are checked (or all, if the tensor is smaller).
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 0;
  double denominator_floor = 1e-8;
};

/// Central-difference check of `analytic` against `loss`; returns the max
/// relative error |a - n| / max(|a|, |n|, floor) over the checked scalars.
inline double grad_check(const LossFn& loss, std::vector<Matrix> params, std::span<const Gradient> analytic, double h,
                         GradCheckOptions opts = {}) {
  if (!(h > 0.0)) throw InvalidArgument("grad_check step must be positive");
  if (params.size() != analytic.size()) throw ShapeMismatch("grad_check: parameter / gradient count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t)
    if (!params[t].same_shape(analytic[t])) throw ShapeMismatch("grad_check: gradient shape differs from parameter");

  Rng rng(opts.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::size_t n = params[t].size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.max_per_tensor != 0) {
      const std::size_t k = std::max<std::size_t>(opts.max_per_tensor, 200);
      if (k < n) {
        rng.shuffle(std::span<std::size_t>(idx));
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
      }
    }
    for (std::size_t i : idx) {
      double& theta = params[t].values()[i];
      const double saved = theta;
      theta = saved + h;
      const double up = loss(params);
      theta = saved - h;
      const double down = loss(params);
      theta = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw NonFiniteLoss();
      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic[t].values()[i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), opts.denominator_floor});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace urdusum
