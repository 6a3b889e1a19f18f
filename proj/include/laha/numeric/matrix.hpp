// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "laha/error.hpp"

namespace laha {

// Per-row validity flags for masked softmax; nonzero = valid.
using Mask = std::vector<std::uint8_t>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " does not match " + shape_string(rows_, cols_));
    }
  }
  // Row-wise literal: Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix column(std::span<const double> v) {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  }
  static Matrix row(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row_span(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row_span(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(*this, o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  bool operator==(const Matrix& o) const = default;

  std::string shape() const { return shape_string(rows_, cols_); }

  static std::string shape_string(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
  }

  static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
      throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Plain (non-differentiable) kernels. The tape ops in tape.hpp build on these.

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + a.shape() + " by " + b.shape());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row_span(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      auto br = b.row_span(p);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aip * br[j];
    }
  }
  return out;
}

// a^T * b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: cannot multiply transpose of " + a.shape() + " by " + b.shape());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    auto ar = a.row_span(p);
    auto br = b.row_span(p);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double v = ar[i];
      if (v == 0.0) continue;
      auto o = out.row_span(i);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += v * br[j];
    }
  }
  return out;
}

// a * b^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: cannot multiply " + a.shape() + " by transpose of " + b.shape());
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row_span(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row_span(j);
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += ar[p] * br[p];
      out(i, j) = s;
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

enum class Activation { kTanh, kSigmoid, kRelu };

inline double sigmoid(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double activate(double x, Activation kind) {
  switch (kind) {
    case Activation::kTanh: return std::tanh(x);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

// Derivative expressed through the activation's output y (and input x for relu).
inline double activation_derivative(double x, double y, Activation kind) {
  switch (kind) {
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kSigmoid: return y * (1.0 - y);
    case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

inline Matrix activate(const Matrix& m, Activation kind) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = activate(m[i], kind);
  return out;
}

/// Column-wise softmax over rows, optionally restricted to valid rows.
///
/// Masked rows are exactly zero. Each column is shifted by its max over
/// valid rows before exponentiation.
inline Matrix softmax_columns(const Matrix& m, const Mask* mask = nullptr) {
  if (m.empty()) throw DegenerateInputError("softmax_columns: empty matrix");
  if (mask && mask->size() != m.rows()) {
    throw DimensionError("softmax_columns: mask length " + std::to_string(mask->size()) +
                         " does not match " + m.shape());
  }
  auto valid = [&](std::size_t i) { return !mask || (*mask)[i] != 0; };
  std::size_t n_valid = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) n_valid += valid(i) ? 1 : 0;
  if (n_valid == 0) throw DegenerateInputError("softmax_columns: every row is masked");

  Matrix out(m.rows(), m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < m.rows(); ++i)
      if (valid(i)) mx = std::max(mx, m(i, j));
    double total = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (!valid(i)) continue;
      out(i, j) = std::exp(m(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) /= total;
  }
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  Matrix::require_same_shape(a, b, "max_abs_diff");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace laha
