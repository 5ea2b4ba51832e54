#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchlra/random.hpp"

namespace sketchlra {

/// Counts scalar multiply-adds performed by a kernel. Passed explicitly so
/// kernels stay pure; a null pointer disables counting.
struct OpCounter {
  std::uint64_t multiply_adds = 0;
};

inline void count_madds(OpCounter* counter, std::uint64_t n) {
  if (counter != nullptr) counter->multiply_adds += n;
}

/// Row-major dense real matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw std::invalid_argument("DenseMatrix: value count does not match shape");
    }
  }
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw std::invalid_argument("DenseMatrix: ragged initializer");
      values_.insert(values_.end(), r.begin(), r.end());
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d, std::size_t rows, std::size_t cols) {
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < std::min({d.size(), rows, cols}); ++i) m(i, i) = d[i];
    return m;
  }

  static DenseMatrix gaussian(std::size_t rows, std::size_t cols, RandomStream& stream) {
    DenseMatrix m(rows, cols);
    for (double& v : m.values_) v = stream.normal();
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    }
    return t;
  }

  /// Columns [first, first + count).
  DenseMatrix leading_columns(std::size_t count, std::size_t first = 0) const {
    if (first + count > cols_) throw std::invalid_argument("leading_columns: out of range");
    DenseMatrix out(rows_, count);
    for (std::size_t i = 0; i < rows_; ++i) {
      std::copy_n(values_.data() + i * cols_ + first, count, out.values_.data() + i * count);
    }
    return out;
  }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  DenseMatrix& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

  friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
  friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
  friend DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  void check_same_shape(const DenseMatrix& o) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) {
      throw std::invalid_argument("DenseMatrix: shape mismatch " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_) + " vs " + std::to_string(o.rows_) +
                                  "x" + std::to_string(o.cols_));
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline void require_inner_dims(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw std::invalid_argument(std::string(op) + ": inner dimensions disagree (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

/// a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  require_inner_dims(a.cols(), b.rows(), "matmul");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double s = a(i, l);
      if (s == 0.0) continue;
      auto src = b.row(l);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * src[j];
    }
  }
  count_madds(counter, static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
  return out;
}

/// a^T * b
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  require_inner_dims(a.rows(), b.rows(), "matmul_tn");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t l = 0; l < a.rows(); ++l) {
    auto arow = a.row(l);
    auto brow = b.row(l);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double s = arow[i];
      if (s == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * brow[j];
    }
  }
  count_madds(counter, static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
  return out;
}

/// a * b^T
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  require_inner_dims(a.cols(), b.cols(), "matmul_nt");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t l = 0; l < arow.size(); ++l) s += arow[l] * brow[l];
      out(i, j) = s;
    }
  }
  count_madds(counter, static_cast<std::uint64_t>(a.rows()) * a.cols() * b.rows());
  return out;
}

inline double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

inline double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

/// max |Q^T Q - I|; how far Q is from having orthonormal columns.
inline double orthonormality_defect(const DenseMatrix& q) {
  DenseMatrix g = matmul_tn(q, q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return max_abs(g);
}

}  // namespace sketchlra
