#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchlra/dense_matrix.hpp"
#include "sketchlra/errors.hpp"
#include "sketchlra/norms.hpp"
#include "sketchlra/random.hpp"
#include "sketchlra/sketch.hpp"
#include "sketchlra/sparse_matrix.hpp"
#include "sketchlra/svd.hpp"

namespace sketchlra {

/// Multiply-add counts per pipeline stage.
struct StageCounters {
  OpCounter sketch_left;   // S applied to A
  OpCounter sketch_right;  // A R in the regression
  OpCounter dense;         // small dense products, depend on sketch dims only
  OpCounter regression;    // A Z when R is the identity or on fallback

  std::uint64_t total() const {
    return sketch_left.multiply_adds + sketch_right.multiply_adds + dense.multiply_adds + regression.multiply_adds;
  }
};

struct StageTimes {
  double sketch_ms = 0.0;
  double dense_ms = 0.0;
  double regression_ms = 0.0;
};

struct SketchSeeds {
  std::uint64_t s = 0;
  std::uint64_t t = 0;
  std::uint64_t r = 0;
};

struct SolveReport {
  std::string algo;
  LowRankFactors factors;
  SketchPlan plan;
  SketchSeeds seeds;
  StageCounters counters;
  StageTimes elapsed;
  std::optional<double> relative_error;
  std::vector<std::string> warnings;
  bool fallback_used = false;
  bool transposed = false;
};

struct SolveOptions {
  Mode mode = Mode::exact_paper;
  SketchConstants constants{};
};

namespace detail {

class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void require_rank(const SparseMatrix& a, std::size_t k) {
  if (k < 1 || k >= std::min(a.rows(), a.cols())) {
    throw std::invalid_argument("k=" + std::to_string(k) + " must satisfy 1 <= k < min(m, n) = " +
                                std::to_string(std::min(a.rows(), a.cols())));
  }
}

inline double clamp_eps(double eps, std::vector<std::string>& warnings) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be > 0");
  if (eps > 0.5) {
    warnings.push_back("eps=" + std::to_string(eps) + " clamped to 0.5");
    return 0.5;
  }
  return eps;
}

// Turns factors of B = A^T into factors of A with orthonormal Z.
inline LowRankFactors untranspose(const LowRankFactors& f) {
  const SvdResult y = svd(f.y);
  LowRankFactors out;
  out.k = f.k;
  out.z = y.u;
  out.y = matmul(f.z, y.v);
  for (std::size_t i = 0; i < out.y.rows(); ++i) {
    for (std::size_t j = 0; j < out.y.cols(); ++j) out.y(i, j) *= y.sigma[j];
  }
  return out;
}

}  // namespace detail

struct RegressionResult {
  DenseMatrix y;
  bool fallback_used = false;
  std::uint64_t seed = 0;
};

/// argmin_Y ||(A - Y Z^T) R||_F = (A R)(Z^T R)^+. Falls back to Y = A Z when
/// Z^T R loses rank.
inline RegressionResult solve_regression_sketched(const SparseMatrix& a, const DenseMatrix& z, const SketchOperator& r,
                                                  StageCounters* counters = nullptr) {
  require_inner_dims(a.cols(), z.rows(), "solve_regression_sketched");
  OpCounter* right = counters ? &counters->sketch_right : nullptr;
  OpCounter* dense = counters ? &counters->dense : nullptr;
  OpCounter* regr = counters ? &counters->regression : nullptr;
  RegressionResult out;
  out.seed = sketch_seed(r);
  const auto* cs = std::get_if<CountSketchOperator>(&r);
  if (cs == nullptr) {
    out.y = multiply(a, z, regr);
    return out;
  }
  const std::size_t k = z.cols();
  if (cs->sketch_dim < k) throw std::invalid_argument("solve_regression_sketched: r_embed must be >= k");
  const DenseMatrix ar = apply_countsketch_right(a, *cs, right);
  const DenseMatrix rtz = apply_countsketch_left(*cs, z, dense);  // (Z^T R)^T, r x k
  const SvdResult f = svd(rtz);                                   // R^T Z = U S V^T, (Z^T R)^+ = U S^-1 V^T
  if (k == 0 || f.sigma[k - 1] <= rank_tol * f.sigma[0]) {
    out.fallback_used = true;
    out.y = multiply(a, z, regr);
    return out;
  }
  DenseMatrix aru = matmul(ar, f.u, dense);
  for (std::size_t i = 0; i < aru.rows(); ++i) {
    for (std::size_t j = 0; j < k; ++j) aru(i, j) /= f.sigma[j];
  }
  out.y = matmul_nt(aru, f.v, dense);
  return out;
}

inline RegressionResult solve_regression_sketched(const SparseMatrix& a, const DenseMatrix& z, std::size_t r_embed,
                                                  RandomStream& stream, StageCounters* counters = nullptr) {
  if (r_embed < z.cols()) throw std::invalid_argument("solve_regression_sketched: r_embed must be >= k");
  return solve_regression_sketched(a, z, build_countsketch(a.cols(), r_embed, stream), counters);
}

namespace detail {

struct Subspace {
  DenseMatrix z;
  SketchSeeds seeds;
};

// Lines S through Z of the pipeline for a tall A. eta1 drives the sampler.
inline Subspace find_subspace(const SparseMatrix& a, std::size_t k, double eps, const SketchPlan& plan,
                              const SolveOptions& opt, RandomStream& stream, SolveReport& rep) {
  StageClock clock;
  Subspace out;
  DenseMatrix sa;
  RandomStream s_stream = stream.split("S");
  if (plan.mode == Mode::simplified_experiment) {
    const CountSketchOperator s = build_countsketch(a.rows(), plan.s_rows, s_stream);
    out.seeds.s = s.seed;
    sa = apply_countsketch_left(s, a, &rep.counters.sketch_left);
  } else {
    const SparseMatrix at = a.transposed();
    const SamplingSketch s = build_column_sampler(at, k, eps, std::min(plan.eta1, eps), s_stream, opt.constants.c_s);
    out.seeds.s = s.seed;
    if (s.degenerate) rep.warnings.push_back("row sampler degenerate: A is zero");
    sa = apply_row_sampler(s, a, &rep.counters.sketch_left).to_dense();
  }
  rep.elapsed.sketch_ms += clock.lap_ms();

  RandomStream t_stream = stream.split("T");
  const SketchOperator t = build_row_sampler_T(sa, eps, t_stream, plan.mode, opt.constants.c_t);
  out.seeds.t = sketch_seed(t);
  const DenseMatrix sat = apply_right(sa, t, &rep.counters.dense);
  const SvdResult f = svd(sat);
  const std::size_t kk = std::min(k, f.sigma.size());
  const DenseMatrix uk = f.u.leading_columns(kk);
  DenseMatrix z = orthonormal_rowspace(matmul_tn(uk, sa, &rep.counters.dense));
  if (z.cols() < k) {
    rep.warnings.push_back("sketched row space has rank " + std::to_string(z.cols()) + " < k; padded");
    z = extend_orthonormal_columns(z, k);
  }
  out.z = std::move(z);
  rep.elapsed.dense_ms += clock.lap_ms();
  return out;
}

}  // namespace detail

/// Rank-k approximation A ~ Y Z^T in Schatten p-norm.
inline SolveReport solve_schatten(const SparseMatrix& a_in, std::size_t k, double p, double eps, RandomStream stream,
                                  const SolveOptions& opt = {}) {
  detail::require_rank(a_in, k);
  require_schatten_p(p);
  SolveReport rep;
  rep.algo = "schatten_p";
  eps = detail::clamp_eps(eps, rep.warnings);
  rep.transposed = a_in.rows() < a_in.cols();
  const SparseMatrix a = rep.transposed ? a_in.transposed() : a_in;

  rep.plan = make_sketch_plan(a.rows(), a.cols(), k, eps, p, opt.mode, opt.constants);
  detail::Subspace sub = detail::find_subspace(a, k, eps, rep.plan, opt, stream, rep);
  rep.seeds = sub.seeds;

  detail::StageClock clock;
  SketchOperator r = IdentitySketch{a.cols()};
  if (!rep.plan.identity_r) {
    RandomStream r_stream = stream.split("R");
    r = build_countsketch(a.cols(), rep.plan.r_embed, r_stream);
  }
  RegressionResult reg = solve_regression_sketched(a, sub.z, r, &rep.counters);
  rep.seeds.r = reg.seed;
  rep.fallback_used = reg.fallback_used;
  if (reg.fallback_used) rep.warnings.push_back("Z^T R rank-deficient; used Y = A Z");
  rep.elapsed.regression_ms += clock.lap_ms();

  rep.factors = LowRankFactors{std::move(reg.y), std::move(sub.z), k};
  if (rep.transposed) rep.factors = detail::untranspose(rep.factors);
  return rep;
}

/// Baseline: Z = top-k right singular vectors of S A for a k^2-row CountSketch S, Y = A Z.
inline SolveReport solve_frobenius_baseline(const SparseMatrix& a, std::size_t k, RandomStream stream) {
  detail::require_rank(a, k);
  SolveReport rep;
  rep.algo = "frobenius_baseline";
  rep.plan.mode = Mode::simplified_experiment;
  rep.plan.s_rows = k * k;
  rep.plan.t_cols = rep.plan.r_embed = a.cols();
  rep.plan.identity_t = rep.plan.identity_r = true;
  detail::StageClock clock;
  RandomStream s_stream = stream.split("S");
  const CountSketchOperator s = build_countsketch(a.rows(), k * k, s_stream);
  rep.seeds.s = s.seed;
  const DenseMatrix sa = apply_countsketch_left(s, a, &rep.counters.sketch_left);
  rep.elapsed.sketch_ms = clock.lap_ms();
  DenseMatrix z = svd(sa).v.leading_columns(std::min(k, sa.rows()));
  if (z.cols() < k) z = extend_orthonormal_columns(z, k);
  rep.elapsed.dense_ms = clock.lap_ms();
  DenseMatrix y = multiply(a, z, &rep.counters.regression);
  rep.elapsed.regression_ms = clock.lap_ms();
  rep.factors = LowRankFactors{std::move(y), std::move(z), k};
  return rep;
}

/// Rank-k approximation under a generalized loss Phi. Refuses losses whose
/// growth constants are not finite on the condition grid.
inline SolveReport solve_generalized(const SparseMatrix& a_in, std::size_t k, const LossSpec& loss, double eps,
                                     RandomStream stream, const SolveOptions& opt = {}) {
  if (loss.kind == LossSpec::Kind::schatten) return solve_schatten(a_in, k, loss.p, eps, stream, opt);
  detail::require_rank(a_in, k);
  SolveReport rep;
  rep.algo = "generalized(" + loss.phi.name() + ")";
  eps = detail::clamp_eps(eps, rep.warnings);
  const ConditionReport cond = check_phi_conditions(loss.phi, std::min(eps, 0.5));
  if (!cond.ok()) throw std::invalid_argument(loss.phi.name() + " rejected: " + cond.violation());

  rep.transposed = a_in.rows() < a_in.cols();
  const SparseMatrix a = rep.transposed ? a_in.transposed() : a_in;
  rep.plan = make_sketch_plan(a.rows(), a.cols(), k, eps, 2.0, opt.mode, opt.constants);
  const double r = static_cast<double>(rep.plan.r_kyfan);
  rep.plan.eta1 = std::min(eps, opt.constants.c3 * std::pow(eps / r, 1.0 / std::max(cond.alpha, 1e-12)));
  if (opt.mode == Mode::exact_paper) {
    rep.plan.s_rows = std::max(k, sampler_rows(a.rows(), k, eps, rep.plan.eta1, opt.constants.c_s));
    rep.plan.t_cols = std::min(a.cols(), embedding_width(rep.plan.s_rows, eps, opt.constants.c_t));
    rep.plan.identity_t = rep.plan.t_cols == a.cols();
  }
  rep.plan.identity_r = true;
  rep.plan.r_embed = a.cols();

  detail::Subspace sub = detail::find_subspace(a, k, eps, rep.plan, opt, stream, rep);
  rep.seeds = sub.seeds;
  detail::StageClock clock;
  DenseMatrix y = multiply(a, sub.z, &rep.counters.regression);
  rep.elapsed.regression_ms = clock.lap_ms();
  rep.factors = LowRankFactors{std::move(y), std::move(sub.z), k};
  if (rep.transposed) rep.factors = detail::untranspose(rep.factors);
  return rep;
}

struct OracleResult {
  LowRankFactors factors;
  Spectrum spectrum;
  double wall_ms = 0.0;

  /// sigma of A - A_k.
  Spectrum residual_spectrum() const { return spectrum.tail(factors.k); }
};

inline constexpr std::size_t oracle_size_limit = 5000;

inline void require_oracle_size(const SparseMatrix& a) {
  if (std::min(a.rows(), a.cols()) > oracle_size_limit) {
    throw size_guard_error("exact oracle refuses min(m, n) = " + std::to_string(std::min(a.rows(), a.cols())) +
                           " > " + std::to_string(oracle_size_limit) + "; drop --oracle");
  }
}

/// Truncated SVD A_k by dense factorization (ground truth, desk scale only).
inline OracleResult exact_oracle(const SparseMatrix& a, std::size_t k) {
  require_oracle_size(a);
  detail::StageClock clock;
  const SvdResult f = svd(a.to_dense());
  OracleResult out{truncate_rank(f, k), f.sigma, 0.0};
  out.wall_ms = clock.lap_ms();
  return out;
}

/// Singular values of A - Y Z^T (materializes the residual).
inline Spectrum residual_spectrum(const SparseMatrix& a, const LowRankFactors& f) {
  DenseMatrix r = a.to_dense();
  r -= f.product();
  return singular_values(r);
}

/// Loss(A - Y Z^T) / Loss(A - A_k) - 1. When A is (numerically) rank k the
/// denominator vanishes and the error is Loss(A - Y Z^T) / Loss(A) instead.
inline double relative_error(const Spectrum& residual, const Spectrum& full, std::size_t k, const LossSpec& loss) {
  const double got = loss.evaluate(residual);
  const double best = loss.evaluate(full.tail(std::min(k, full.size())));
  const double whole = loss.evaluate(full);
  if (best <= 1e-10 * whole) return whole > 0.0 ? got / whole : 0.0;
  return got / best - 1.0;
}

inline double relative_error(const SparseMatrix& a, const LowRankFactors& f, const OracleResult& oracle,
                             const LossSpec& loss) {
  return relative_error(residual_spectrum(a, f), oracle.spectrum, oracle.factors.k, loss);
}

struct DiagnosticReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_lower_gap = 0.0;  // max of (lower bound - sketched head), positive on violation
  double worst_upper_gap = 0.0;  // max of (sketched head - upper bound)

  double violation_fraction() const {
    return trials == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(trials);
  }
};

/// Checks the two-sided head inequality
///   (1 - c eps) ||A(I-Q)||_(p,r)^p - slack <= ||SA(I-Q)||_(p,r)^p <= (1 + c eps) ||A(I-Q)||_(p,r)^p + slack
/// on `trials` random rank-k projections Q. For p <= 2, c = 1 and slack = r eta1^(p/2) ||A-A_k||_p^p;
/// for p > 2, c = K_p = (p/2)(1+eps)^(p/2-1) and slack = C_{p/2,eps} r eta1^(p/2) ||A-A_k||_F^p.
inline DiagnosticReport diagnose_kyfan_preservation(const DenseMatrix& a, const DenseMatrix& sa, std::size_t k,
                                                    double p, std::size_t r, double eta1, double eps,
                                                    std::size_t trials, RandomStream& stream) {
  require_schatten_p(p);
  require_inner_dims(a.cols(), sa.cols(), "diagnose_kyfan_preservation");
  const std::size_t n = a.cols();
  if (k < 1 || k >= n) throw std::invalid_argument("diagnose_kyfan_preservation: need 1 <= k < n");
  const Spectrum full = singular_values(a);
  const Spectrum tail = full.tail(std::min(k, full.size()));
  double slack = 0.0, c = 1.0;
  if (p <= 2.0) {
    slack = static_cast<double>(r) * std::pow(eta1, p / 2.0) * std::pow(schatten_norm(tail, p), p);
  } else {
    c = (p / 2.0) * std::pow(1.0 + eps, p / 2.0 - 1.0);
    slack = cpe_constant(p / 2.0, eps) * static_cast<double>(r) * std::pow(eta1, p / 2.0) *
            std::pow(schatten_norm(tail, 2.0), p);
  }
  auto head = [&](const DenseMatrix& m) {
    const Spectrum s = singular_values(m);
    return s.size() == 0 ? 0.0 : std::pow(kyfan_pr_norm(s, p, std::min(r, s.size())), p);
  };

  DiagnosticReport rep;
  rep.trials = trials;
  rep.worst_lower_gap = rep.worst_upper_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    const DenseMatrix q = DenseMatrix::gaussian(n, k, stream);
    const DenseMatrix basis = orthonormal_rowspace(q.transposed());  // n x k orthonormal
    auto residual = [&](const DenseMatrix& m) { return m - matmul_nt(matmul(m, basis), basis); };
    const double exact = head(residual(a));
    const double sketched = sa.rows() == 0 ? 0.0 : head(residual(sa));
    const double lower = (1.0 - c * eps) * exact - slack;
    const double upper = (1.0 + c * eps) * exact + slack;
    const double tol = 1e-9 * std::max(exact, 1e-300);
    rep.worst_lower_gap = std::max(rep.worst_lower_gap, lower - sketched);
    rep.worst_upper_gap = std::max(rep.worst_upper_gap, sketched - upper);
    if (sketched < lower - tol || sketched > upper + tol) ++rep.violations;
  }
  return rep;
}

}  // namespace sketchlra
