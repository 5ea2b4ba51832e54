#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchlra/dense_matrix.hpp"
#include "sketchlra/errors.hpp"

namespace sketchlra {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;

  bool operator==(const Triplet&) const = default;
};

/// Compressed sparse row matrix. Indices are sorted within each row, there are
/// no duplicate coordinates and no explicitly stored zeros.
class SparseMatrix {
 public:
  SparseMatrix() : row_ptr_(1, 0) {}
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Builds from unordered triplets. Zero values are dropped; out-of-range
  /// indices, duplicates and non-finite values are rejected.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
      if (t.row >= rows || t.col >= cols) {
        throw std::invalid_argument("SparseMatrix: entry (" + std::to_string(t.row) + ", " +
                                    std::to_string(t.col) + ") outside " + std::to_string(rows) +
                                    "x" + std::to_string(cols));
      }
      if (!std::isfinite(t.value)) throw invalid_input_error("SparseMatrix: non-finite entry");
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t i = 1; i < triplets.size(); ++i) {
      if (triplets[i].row == triplets[i - 1].row && triplets[i].col == triplets[i - 1].col) {
        throw std::invalid_argument("SparseMatrix: duplicate entry (" + std::to_string(triplets[i].row) +
                                    ", " + std::to_string(triplets[i].col) + ")");
      }
    }
    SparseMatrix m(rows, cols);
    m.col_idx_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    for (const auto& t : triplets) {
      if (t.value == 0.0) continue;
      m.row_ptr_[t.row + 1]++;
      m.col_idx_.push_back(t.col);
      m.values_.push_back(t.value);
    }
    for (std::size_t i = 0; i < rows; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    return m;
  }

  static SparseMatrix from_dense(const DenseMatrix& d) {
    SparseMatrix m(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) {
        if (d(i, j) != 0.0) {
          m.col_idx_.push_back(j);
          m.values_.push_back(d(i, j));
        }
      }
      m.row_ptr_[i + 1] = m.col_idx_.size();
    }
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    SparseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      m.col_idx_.push_back(i);
      m.values_.push_back(1.0);
      m.row_ptr_[i + 1] = i + 1;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  std::size_t row_nnz(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) out.push_back({i, col_idx_[p], values_[p]});
    }
    return out;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) d(i, col_idx_[p]) = values_[p];
    }
    return d;
  }

  SparseMatrix transposed() const {
    SparseMatrix t(cols_, rows_);
    for (std::size_t c : col_idx_) t.row_ptr_[c + 1]++;
    for (std::size_t j = 0; j < cols_; ++j) t.row_ptr_[j + 1] += t.row_ptr_[j];
    t.col_idx_.resize(nnz());
    t.values_.resize(nnz());
    std::vector<std::size_t> next(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const std::size_t dst = next[col_idx_[p]]++;
        t.col_idx_[dst] = i;
        t.values_[dst] = values_[p];
      }
    }
    return t;
  }

  /// Rows `indices[i]` scaled by `scale[i]`, stacked in the given order.
  SparseMatrix select_rows(std::span<const std::size_t> indices, std::span<const double> scale,
                           OpCounter* counter = nullptr) const {
    SparseMatrix out(indices.size(), cols_);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const std::size_t i = indices[r];
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        out.col_idx_.push_back(col_idx_[p]);
        out.values_.push_back(values_[p] * scale[r]);
      }
      out.row_ptr_[r + 1] = out.col_idx_.size();
      count_madds(counter, row_nnz(i));
    }
    return out;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  /// Order-sensitive 64-bit fingerprint of shape and contents.
  std::uint64_t fingerprint() const {
    std::uint64_t h = mix64(rows_) ^ mix64(cols_ + 0x51ed27ULL);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        std::uint64_t bits = 0;
        static_assert(sizeof(bits) == sizeof(double));
        std::memcpy(&bits, &values_[p], sizeof(bits));
        h = mix64(h ^ mix64(i * 0x9e3779b97f4a7c15ULL + col_idx_[p]) ^ bits);
      }
    }
    return h;
  }

  bool operator==(const SparseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// A * B. Performs exactly nnz(A) * cols(B) multiply-adds.
inline DenseMatrix multiply(const SparseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  require_inner_dims(a.cols(), b.rows(), "multiply(sparse, dense)");
  DenseMatrix out(a.rows(), b.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
      auto src = b.row(ci[p]);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v[p] * src[j];
    }
  }
  count_madds(counter, static_cast<std::uint64_t>(a.nnz()) * b.cols());
  return out;
}

/// A^T * B. Performs exactly nnz(A) * cols(B) multiply-adds.
inline DenseMatrix multiply_transposed(const SparseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  require_inner_dims(a.rows(), b.rows(), "multiply_transposed(sparse, dense)");
  DenseMatrix out(a.cols(), b.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = b.row(i);
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
      auto dst = out.row(ci[p]);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v[p] * src[j];
    }
  }
  count_madds(counter, static_cast<std::uint64_t>(a.nnz()) * b.cols());
  return out;
}

/// B * A. Performs exactly rows(B) * nnz(A) multiply-adds.
inline DenseMatrix multiply_left(const DenseMatrix& b, const SparseMatrix& a, OpCounter* counter = nullptr) {
  require_inner_dims(b.cols(), a.rows(), "multiply_left(dense, sparse)");
  DenseMatrix out(b.rows(), a.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t r = 0; r < b.rows(); ++r) {
    auto dst = out.row(r);
    auto brow = b.row(r);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double s = brow[i];
      for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) dst[ci[p]] += s * v[p];
    }
  }
  count_madds(counter, static_cast<std::uint64_t>(b.rows()) * a.nnz());
  return out;
}

}  // namespace sketchlra
