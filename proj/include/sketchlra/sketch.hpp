#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sketchlra/dense_matrix.hpp"
#include "sketchlra/random.hpp"
#include "sketchlra/sparse_matrix.hpp"
#include "sketchlra/svd.hpp"

namespace sketchlra {

/// Sparse sign-and-bucket embedding. As an input_dim x sketch_dim matrix it has
/// exactly one nonzero per row: entry (i, bucket[i]) = sign[i].
struct CountSketchOperator {
  std::size_t input_dim = 0;
  std::size_t sketch_dim = 0;
  std::vector<std::uint32_t> bucket;
  std::vector<std::int8_t> sign;
  std::uint64_t seed = 0;

  static CountSketchOperator from_seed(std::size_t input_dim, std::size_t sketch_dim, std::uint64_t seed) {
    if (sketch_dim < 1) throw std::invalid_argument("CountSketch: sketch_dim must be >= 1");
    if (sketch_dim > UINT32_MAX) throw std::invalid_argument("CountSketch: sketch_dim too large");
    CountSketchOperator op;
    op.input_dim = input_dim;
    op.sketch_dim = sketch_dim;
    op.seed = seed;
    op.bucket.resize(input_dim);
    op.sign.resize(input_dim);
    RandomStream rs(seed);
    for (std::size_t i = 0; i < input_dim; ++i) {
      op.bucket[i] = static_cast<std::uint32_t>(rs.uniform_index(sketch_dim));
      op.sign[i] = static_cast<std::int8_t>(rs.sign());
    }
    return op;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(input_dim, sketch_dim);
    for (std::size_t i = 0; i < input_dim; ++i) d(i, bucket[i]) = sign[i];
    return d;
  }
};

inline CountSketchOperator build_countsketch(std::size_t input_dim, std::size_t sketch_dim, RandomStream& stream) {
  return CountSketchOperator::from_seed(input_dim, sketch_dim, stream.next_u64());
}

/// A * R. Exactly nnz(A) multiply-adds.
inline DenseMatrix apply_countsketch_right(const SparseMatrix& a, const CountSketchOperator& r,
                                           OpCounter* counter = nullptr) {
  require_inner_dims(a.cols(), r.input_dim, "apply_countsketch_right");
  DenseMatrix out(a.rows(), r.sketch_dim);
  const auto ptr = a.row_ptr();
  const auto col = a.col_idx();
  const auto val = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) out(i, r.bucket[col[p]]) += r.sign[col[p]] * val[p];
  }
  count_madds(counter, a.nnz());
  return out;
}

/// R^T * A, the left application. Exactly nnz(A) multiply-adds.
inline DenseMatrix apply_countsketch_left(const CountSketchOperator& r, const SparseMatrix& a,
                                          OpCounter* counter = nullptr) {
  require_inner_dims(r.input_dim, a.rows(), "apply_countsketch_left");
  DenseMatrix out(r.sketch_dim, a.cols());
  const auto ptr = a.row_ptr();
  const auto col = a.col_idx();
  const auto val = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const std::size_t b = r.bucket[i];
    const double s = r.sign[i];
    for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) out(b, col[p]) += s * val[p];
  }
  count_madds(counter, a.nnz());
  return out;
}

inline DenseMatrix apply_countsketch_right(const DenseMatrix& a, const CountSketchOperator& r,
                                           OpCounter* counter = nullptr) {
  require_inner_dims(a.cols(), r.input_dim, "apply_countsketch_right");
  DenseMatrix out(a.rows(), r.sketch_dim);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, r.bucket[j]) += r.sign[j] * a(i, j);
  }
  count_madds(counter, a.rows() * a.cols());
  return out;
}

inline DenseMatrix apply_countsketch_left(const CountSketchOperator& r, const DenseMatrix& a,
                                          OpCounter* counter = nullptr) {
  require_inner_dims(r.input_dim, a.rows(), "apply_countsketch_left");
  DenseMatrix out(r.sketch_dim, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(r.bucket[i], j) += r.sign[i] * a(i, j);
  }
  count_madds(counter, a.rows() * a.cols());
  return out;
}

/// Rescaled samples without replacement: source index indices[i] enters with weight weights[i].
struct SamplingSketch {
  std::size_t source_dim = 0;
  std::vector<std::size_t> indices;
  std::vector<double> weights;
  std::vector<double> probabilities;  // per source index, sums to 1
  std::uint64_t seed = 0;
  bool clipped = false;
  bool degenerate = false;

  std::size_t sample_count() const { return indices.size(); }
};

namespace detail {

// Inclusion probabilities pi_i = min(1, c p_i) with sum(pi) = t.
inline std::vector<double> capped_inclusion(const std::vector<double>& p, std::size_t t) {
  std::vector<double> pi(p.size(), 0.0);
  std::vector<bool> capped(p.size(), false);
  for (;;) {
    double free_mass = 0.0;
    std::size_t n_capped = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (capped[i]) ++n_capped;
      else free_mass += p[i];
    }
    const double budget = static_cast<double>(t) - static_cast<double>(n_capped);
    bool changed = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (capped[i]) {
        pi[i] = 1.0;
        continue;
      }
      pi[i] = free_mass > 0.0 ? budget * p[i] / free_mass : 0.0;
      if (pi[i] >= 1.0) {
        capped[i] = true;
        changed = true;
      }
    }
    if (!changed) return pi;
  }
}

}  // namespace detail

/// Column sampler for (1-eps) AA^T - eta ||A-A_k||_F^2 I <= CC^T <= (1+eps) AA^T + eta ||A-A_k||_F^2 I.
/// Probabilities follow ridge leverage scores with ridge ||A-A_k||_F^2 / k; the
/// draw is systematic sampling over the capped inclusion probabilities.
inline SamplingSketch build_column_sampler(const SparseMatrix& a, std::size_t k, double eps, double eta,
                                           RandomStream& stream, double c_s = 8.0) {
  if (k < 1) throw std::invalid_argument("build_column_sampler: k must be >= 1");
  if (!(eta > 0.0) || !(eps >= eta)) throw std::invalid_argument("build_column_sampler: need eps >= eta > 0");
  if (!(c_s > 0.0)) throw std::invalid_argument("build_column_sampler: c_s must be > 0");
  const std::size_t n = a.cols();
  if (n == 0) throw std::invalid_argument("build_column_sampler: matrix has no columns");

  SamplingSketch s;
  s.source_dim = n;
  s.seed = stream.next_u64();

  const double big_k = static_cast<double>(k) + eps / eta;
  const double t_real = std::ceil(c_s * big_k * (1.0 + std::log(big_k)) / (eps * eps));
  std::size_t t = t_real >= static_cast<double>(n) ? n : static_cast<std::size_t>(t_real);
  s.clipped = t_real > static_cast<double>(n);

  std::vector<double> tau(n, 0.0);
  if (a.nnz() > 0) {
    const SvdResult f = svd(a.to_dense());
    const std::size_t kk = std::min(k, f.sigma.size());
    double tail = 0.0;
    for (std::size_t j = kk; j < f.sigma.size(); ++j) tail += f.sigma[j] * f.sigma[j];
    const double lambda = tail / static_cast<double>(k);
    const double cut = rank_tol * f.sigma[0];
    for (std::size_t j = 0; j < f.sigma.size(); ++j) {
      const double s2 = f.sigma[j] * f.sigma[j];
      if (f.sigma[j] <= cut) continue;
      const double w = s2 / (s2 + lambda);
      for (std::size_t i = 0; i < n; ++i) tau[i] += w * f.v(i, j) * f.v(i, j);
    }
  }
  double total = std::accumulate(tau.begin(), tau.end(), 0.0);
  if (!(total > 0.0)) {
    s.degenerate = true;
    std::fill(tau.begin(), tau.end(), 1.0);
    total = static_cast<double>(n);
  }
  s.probabilities.resize(n);
  std::size_t support = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s.probabilities[i] = tau[i] / total;
    if (s.probabilities[i] > 0.0) ++support;
  }
  if (t > support) {
    t = support;
    s.clipped = true;
  }

  const std::vector<double> pi = detail::capped_inclusion(s.probabilities, t);
  RandomStream draw(s.seed);
  const double u = draw.uniform01();
  double cum = 0.0;
  double next = u;
  for (std::size_t i = 0; i < n && s.indices.size() < t; ++i) {
    cum += pi[i];
    // Capped entries are always in; the tolerance absorbs rounding in their cumulative sum.
    if (pi[i] > 0.0 && (pi[i] >= 1.0 || cum >= next - 1e-12)) {
      s.indices.push_back(i);
      s.weights.push_back(1.0 / std::sqrt(pi[i]));
      next += 1.0;
    }
  }
  return s;
}

/// A * S: the sampled, rescaled columns of A as a dense m x t matrix.
inline DenseMatrix apply_column_sampler(const SparseMatrix& a, const SamplingSketch& s) {
  require_inner_dims(a.cols(), s.source_dim, "apply_column_sampler");
  const SparseMatrix at = a.transposed().select_rows(s.indices, s.weights);
  return at.to_dense().transposed();
}

/// S * A: the sampled, rescaled rows of A. Counts nnz of the selected rows.
inline SparseMatrix apply_row_sampler(const SamplingSketch& s, const SparseMatrix& a, OpCounter* counter = nullptr) {
  require_inner_dims(s.source_dim, a.rows(), "apply_row_sampler");
  return a.select_rows(s.indices, s.weights, counter);
}

struct IdentitySketch {
  std::size_t dim = 0;
};

using SketchOperator = std::variant<IdentitySketch, CountSketchOperator>;

inline std::size_t sketch_width(const SketchOperator& op) {
  if (const auto* c = std::get_if<CountSketchOperator>(&op)) return c->sketch_dim;
  return std::get<IdentitySketch>(op).dim;
}

inline std::uint64_t sketch_seed(const SketchOperator& op) {
  if (const auto* c = std::get_if<CountSketchOperator>(&op)) return c->seed;
  return 0;
}

inline DenseMatrix apply_right(const DenseMatrix& a, const SketchOperator& op, OpCounter* counter = nullptr) {
  if (const auto* c = std::get_if<CountSketchOperator>(&op)) return apply_countsketch_right(a, *c, counter);
  require_inner_dims(a.cols(), std::get<IdentitySketch>(op).dim, "apply_right");
  return a;
}

inline DenseMatrix apply_right(const SparseMatrix& a, const SketchOperator& op, OpCounter* counter = nullptr) {
  if (const auto* c = std::get_if<CountSketchOperator>(&op)) return apply_countsketch_right(a, *c, counter);
  require_inner_dims(a.cols(), std::get<IdentitySketch>(op).dim, "apply_right");
  return a.to_dense();
}

enum class Mode { exact_paper, simplified_experiment };

inline std::string to_string(Mode m) { return m == Mode::exact_paper ? "exact_paper" : "simplified_experiment"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "exact_paper") return Mode::exact_paper;
  if (s == "simplified_experiment" || s == "simplified") return Mode::simplified_experiment;
  throw std::invalid_argument("unknown mode '" + s + "' (expected exact_paper or simplified_experiment)");
}

/// Constants hidden behind O(.) in the sketch sizes.
struct SketchConstants {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double c_s = 8.0;
  double c_t = 4.0;
  double c_r = 4.0;
};

struct SketchPlan {
  double eta1 = 0.0;
  double eta2 = 0.0;
  std::size_t r_kyfan = 0;
  std::size_t s_rows = 0;
  std::size_t t_cols = 0;
  std::size_t r_embed = 0;
  Mode mode = Mode::exact_paper;
  bool identity_t = false;
  bool identity_r = false;
};

inline std::size_t ceil_count(double v) { return static_cast<std::size_t>(std::ceil(v)); }

/// Width of T for an s-row input.
inline std::size_t embedding_width(std::size_t s, double eps, double c_t) {
  const double sd = static_cast<double>(std::max<std::size_t>(s, 1));
  return ceil_count(c_t * sd * (1.0 + std::log(sd)) / (eps * eps));
}

/// Sampled rows of S for an m-row input (before the sampler's own support clip).
inline std::size_t sampler_rows(std::size_t m, std::size_t k, double eps, double eta, double c_s) {
  const double big_k = static_cast<double>(k) + eps / eta;
  return std::min(m, ceil_count(c_s * big_k * (1.0 + std::log(big_k)) / (eps * eps)));
}

inline SketchPlan make_sketch_plan(std::size_t m, std::size_t n, std::size_t k, double eps, double p, Mode mode,
                                   const SketchConstants& c = {}) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("make_sketch_plan: p must be >= 1");
  if (!(eps > 0.0 && eps <= 0.5)) throw std::invalid_argument("make_sketch_plan: eps must lie in (0, 1/2]");
  if (k < 1 || k > n || n > m) {
    throw std::invalid_argument("make_sketch_plan: need 1 <= k <= n <= m, got k=" + std::to_string(k) +
                                " n=" + std::to_string(n) + " m=" + std::to_string(m));
  }
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  SketchPlan plan;
  plan.mode = mode;
  if (p < 2.0) {
    plan.eta1 = c.c1 * std::pow(eps * eps / kd, 2.0 / p);
    plan.eta2 = c.c2 * eps * eps / std::pow(kd, 2.0 / p - 1.0);
  } else {
    plan.eta1 = c.c1 * std::pow(eps, 1.0 + 2.0 / p) / (std::pow(kd, 2.0 / p) * std::pow(nd, 1.0 - 2.0 / p));
    plan.eta2 = c.c2 * eps * eps / std::pow(nd, 1.0 - 2.0 / p);
  }
  plan.eta1 = std::min(plan.eta1, 1.0);
  plan.eta2 = std::min(plan.eta2, 1.0);
  plan.r_kyfan = ceil_count(kd / eps);

  if (mode == Mode::simplified_experiment) {
    plan.s_rows = k * k;
    plan.t_cols = n;
    plan.r_embed = n;
    plan.identity_t = plan.identity_r = true;
    return plan;
  }
  plan.s_rows = std::max(k, sampler_rows(m, k, eps, std::min(plan.eta1, eps), c.c_s));
  plan.t_cols = std::max(k, embedding_width(plan.s_rows, eps, c.c_t));
  plan.r_embed = std::max(k, ceil_count(c.c_r * kd / plan.eta2));
  if (plan.t_cols >= n) {
    plan.t_cols = n;
    plan.identity_t = true;
  }
  if (plan.r_embed >= n) {
    plan.r_embed = n;
    plan.identity_r = true;
  }
  return plan;
}

/// T of the pipeline: a right-applied subspace embedding for the row space of SA.
inline SketchOperator build_row_sampler_T(const DenseMatrix& sa, double eps, RandomStream& stream,
                                          Mode mode = Mode::exact_paper, double c_t = 4.0) {
  if (!(eps > 0.0 && eps <= 0.5)) throw std::invalid_argument("build_row_sampler_T: eps must lie in (0, 1/2]");
  if (mode == Mode::simplified_experiment) return IdentitySketch{sa.cols()};
  const std::size_t width = embedding_width(sa.rows(), eps, c_t);
  if (width >= sa.cols()) return IdentitySketch{sa.cols()};
  return build_countsketch(sa.cols(), width, stream);
}

}  // namespace sketchlra
