#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sketchlra/solver.hpp"

using namespace sketchlra;

namespace {

SparseMatrix sparse(const DenseMatrix& d) { return SparseMatrix::from_dense(d); }

double schatten_of(const DenseMatrix& m, double p) { return schatten_norm(singular_values(m), p); }

// diag(1, 1/sqrt(k) x 2k, 0, ...) padded to n x n.
DenseMatrix spiked_diagonal(std::size_t k, std::size_t n) {
  std::vector<double> d(n, 0.0);
  d[0] = 1.0;
  for (std::size_t i = 1; i <= 2 * k; ++i) d[i] = 1.0 / std::sqrt(static_cast<double>(k));
  return DenseMatrix::diagonal(d, n, n);
}

}  // namespace

TEST(SolveSchatten, ExactRankKIsRecovered) {
  RandomStream rng(40);
  for (Mode mode : {Mode::exact_paper, Mode::simplified_experiment}) {
    for (auto [m, n, k] : {std::tuple<std::size_t, std::size_t, std::size_t>{60, 40, 3}, {30, 80, 4}, {45, 45, 6}}) {
      const SparseMatrix a = sparse(oracle::random_rank_k(m, n, k, rng));
      for (double p : {1.0, 1.5, 2.0, 3.0, 4.0}) {
        const SolveReport rep = solve_schatten(a, k, p, 0.5, rng.split("solve", m * 10 + k), {mode, {}});
        ASSERT_EQ(rep.factors.y.rows(), m);
        ASSERT_EQ(rep.factors.z.rows(), n);
        ASSERT_EQ(rep.factors.z.cols(), k);
        EXPECT_LE(orthonormality_defect(rep.factors.z), 1e-9);
        const OracleResult o = exact_oracle(a, k);
        EXPECT_LE(relative_error(a, rep.factors, o, LossSpec::schatten(p)), 1e-6) << "p=" << p << " m=" << m;
        EXPECT_EQ(rep.transposed, m < n);
      }
    }
  }
}

TEST(SolveSchatten, SpikedDiagonalKeepsTopDirection) {
  const std::size_t k = 5;
  const SparseMatrix a = sparse(spiked_diagonal(k, 40));
  RandomStream rng(41);
  for (Mode mode : {Mode::exact_paper, Mode::simplified_experiment}) {
    for (int t = 0; t < 10; ++t) {
      const SolveReport rep = solve_schatten(a, k, 1.0, 0.5, rng.split("t", t), {mode, {}});
      double top = 0;
      for (std::size_t j = 0; j < k; ++j) top += rep.factors.z(0, j) * rep.factors.z(0, j);
      // A k^2-bucket CountSketch can merge e_1 with the flat block, so only the sampler is held to this.
      if (mode == Mode::exact_paper) {
        EXPECT_GE(top, 0.99);
      }
      EXPECT_GE(top, 0.5) << to_string(mode);
      EXPECT_LT(relative_error(a, rep.factors, exact_oracle(a, k), LossSpec::schatten(1)), 1.0);
    }
  }
}

TEST(SolveSchatten, RejectsBadRankAndClampsEps) {
  RandomStream rng(42);
  const SparseMatrix a = sparse(DenseMatrix::gaussian(10, 6, rng));
  EXPECT_THROW(solve_schatten(a, 6, 1, 0.5, rng), std::invalid_argument);
  EXPECT_THROW(solve_schatten(a, 0, 1, 0.5, rng), std::invalid_argument);
  EXPECT_THROW(solve_schatten(a, 2, 0.5, 0.5, rng), std::invalid_argument);
  const SolveReport rep = solve_schatten(a, 2, 1, 0.9, rng);
  ASSERT_FALSE(rep.warnings.empty());
  EXPECT_NE(rep.warnings.front().find("clamped"), std::string::npos);
}

TEST(SolveSchatten, BitIdenticalForFixedSeed) {
  RandomStream rng(43);
  const SparseMatrix a = oracle::random_sparse(120, 90, 0.1, rng);
  const SketchConstants small{1, 1, 1, 0.05, 0.05, 0.05};
  for (Mode mode : {Mode::exact_paper, Mode::simplified_experiment}) {
    const SolveReport r1 = solve_schatten(a, 4, 1.5, 0.5, RandomStream(7), {mode, small});
    const SolveReport r2 = solve_schatten(a, 4, 1.5, 0.5, RandomStream(7), {mode, small});
    EXPECT_EQ(r1.factors.y, r2.factors.y);
    EXPECT_EQ(r1.factors.z, r2.factors.z);
    EXPECT_EQ(r1.seeds.s, r2.seeds.s);
    EXPECT_EQ(r1.seeds.r, r2.seeds.r);
    const SolveReport r3 = solve_schatten(a, 4, 1.5, 0.5, RandomStream(8), {mode, small});
    EXPECT_NE(r1.seeds.s, r3.seeds.s);
  }
}

TEST(SolveSchatten, SubsampledPipelineStaysNearOptimal) {
  // Small constants force real sampling in S, T and R on a 300 x 200 input.
  RandomStream rng(44);
  const SparseMatrix a = sparse(oracle::low_rank_plus_noise(300, 200, 8, 0.05, rng));
  const SketchConstants small{1, 1, 1, 0.05, 0.05, 1};
  const OracleResult o = exact_oracle(a, 4);
  std::vector<double> errs;
  for (int t = 0; t < 10; ++t) {
    const SolveReport rep = solve_schatten(a, 4, 1.0, 0.5, rng.split("t", t), {Mode::exact_paper, small});
    EXPECT_FALSE(rep.plan.identity_r);
    EXPECT_LT(rep.plan.s_rows, 300u);
    errs.push_back(relative_error(a, rep.factors, o, LossSpec::schatten(1)));
  }
  EXPECT_LE(oracle::sorted_median(errs), 0.5);
}

TEST(SolveSchatten, HeadTailBoundOnSmallInstances) {
  RandomStream rng(45);
  for (int t = 0; t < 10; ++t) {
    const DenseMatrix ad = oracle::low_rank_plus_noise(40, 30, 6, 0.2, rng);
    const SparseMatrix a = sparse(ad);
    const std::size_t k = 3;
    const double p = 1.0, eps = 0.5;
    const std::size_t r = static_cast<std::size_t>(std::ceil(k / eps));
    const SolveReport rep = solve_schatten(a, k, p, eps, rng.split("t", t));
    const DenseMatrix resid = ad - matmul_nt(matmul(ad, rep.factors.z), rep.factors.z);
    const Spectrum sa = singular_values(ad);
    const double lhs = schatten_tail_power(singular_values(resid), p, r);
    const double rhs = schatten_tail_power(sa, p, r) +
                       static_cast<double>(k) / static_cast<double>(r) * std::pow(schatten_norm(sa.tail(k), p), p);
    EXPECT_LE(lhs, rhs * (1 + 1e-12));
  }
}

TEST(SolveSchatten, CountersSplitIntoNnzAndDimensionTerms) {
  RandomStream rng(46);
  const SparseMatrix a = oracle::random_sparse(200, 150, 0.05, rng);
  const SolveReport rep = solve_schatten(a, 5, 1.0, 0.5, RandomStream(1), {Mode::simplified_experiment, {}});
  EXPECT_EQ(rep.counters.sketch_left.multiply_adds, a.nnz());
  EXPECT_EQ(rep.counters.regression.multiply_adds, a.nnz() * 5);
  EXPECT_EQ(rep.counters.sketch_right.multiply_adds, 0u);
  // U_k^T (SA) with SA of 25 rows.
  EXPECT_EQ(rep.counters.dense.multiply_adds, 5u * 25u * 150u);
}

TEST(Regression, IdentityReturnsAZ) {
  RandomStream rng(47);
  const SparseMatrix a = oracle::random_sparse(30, 20, 0.3, rng);
  const DenseMatrix z = oracle::random_orthonormal(20, 4, rng);
  const RegressionResult r = solve_regression_sketched(a, z, IdentitySketch{20});
  EXPECT_EQ(r.y, multiply(a, z));
  EXPECT_FALSE(r.fallback_used);
}

TEST(Regression, ConsistentSystemHasZeroResidual) {
  RandomStream rng(48);
  const DenseMatrix z = oracle::random_orthonormal(40, 5, rng);
  const DenseMatrix a = matmul_nt(DenseMatrix::gaussian(60, 5, rng), z);
  const RegressionResult r = solve_regression_sketched(sparse(a), z, 30, rng);
  EXPECT_FALSE(r.fallback_used);
  EXPECT_LE(frobenius_norm(a - matmul_nt(r.y, z)), 1e-10 * frobenius_norm(a));
}

TEST(Regression, SketchedBoundHolds) {
  RandomStream rng(49);
  int ok = 0;
  for (int t = 0; t < 100; ++t) {
    const DenseMatrix ad = DenseMatrix::gaussian(60, 40, rng);
    const SparseMatrix a = sparse(ad);
    const DenseMatrix z = oracle::random_orthonormal(40, 5, rng);
    const DenseMatrix az = matmul(ad, z);
    const RegressionResult r = solve_regression_sketched(a, z, 400, rng);
    ok += frobenius_norm(az - r.y) <= 0.25 * frobenius_norm(ad - matmul_nt(az, z));
  }
  EXPECT_GE(ok, 90);
}

TEST(Regression, RankDeficientSketchFallsBack) {
  CountSketchOperator r = CountSketchOperator::from_seed(4, 2, 1);
  std::fill(r.bucket.begin(), r.bucket.end(), 0u);  // every row collides
  const DenseMatrix z{{1, 0}, {0, 1}, {0, 0}, {0, 0}};
  const SparseMatrix a = sparse(DenseMatrix{{1, 2, 3, 4}, {5, 6, 7, 8}});
  StageCounters c;
  const RegressionResult out = solve_regression_sketched(a, z, r, &c);
  EXPECT_TRUE(out.fallback_used);
  EXPECT_EQ(out.y, multiply(a, z));
  EXPECT_EQ(c.regression.multiply_adds, a.nnz() * 2);
}

TEST(Regression, IdentityMakesResidualMatchProjection) {
  RandomStream rng(50);
  const DenseMatrix ad = DenseMatrix::gaussian(25, 18, rng);
  const DenseMatrix z = oracle::random_orthonormal(18, 4, rng);
  const RegressionResult r = solve_regression_sketched(sparse(ad), z, IdentitySketch{18});
  for (double p : {1.0, 2.0, 3.0}) {
    EXPECT_NEAR(schatten_of(ad - matmul_nt(r.y, z), p), schatten_of(ad - matmul(ad, oracle::projector(z)), p), 1e-10);
  }
}

TEST(FrobeniusBaseline, ExactRankK) {
  RandomStream rng(51);
  const SparseMatrix a = sparse(oracle::random_rank_k(50, 35, 4, rng));
  const SolveReport rep = solve_frobenius_baseline(a, 4, rng);
  const OracleResult o = exact_oracle(a, 4);
  EXPECT_LE(relative_error(a, rep.factors, o, LossSpec::schatten(2)), 1e-6);
  EXPECT_LE(relative_error(a, rep.factors, o, LossSpec::schatten(1)), 1e-6);
  EXPECT_EQ(rep.plan.s_rows, 16u);
}

TEST(FrobeniusBaseline, TopDirectionOnlyIsPoorInNuclearNorm) {
  // Keeping only the top direction of the spiked diagonal is sqrt(2)-optimal in
  // Frobenius norm but 2k/(k+1)-optimal in nuclear norm.
  const std::size_t k = 25;
  const DenseMatrix a = spiked_diagonal(k, 60);
  DenseMatrix top_only = a;
  top_only(0, 0) = 0.0;
  const OracleResult o = exact_oracle(sparse(a), k);
  const Spectrum best = o.residual_spectrum();
  const double ratio1 = schatten_of(top_only, 1) / schatten_norm(best, 1);
  const double ratio2 = schatten_of(top_only, 2) / schatten_norm(best, 2);
  EXPECT_NEAR(ratio1, 2.0 * k / (k + 1.0), 1e-12);
  EXPECT_GE(ratio1, 1.5);
  EXPECT_LE(ratio2, std::sqrt(2.0) + 1e-12);
}

TEST(Generalized, ExactRankKHuber) {
  RandomStream rng(52);
  const SparseMatrix a = sparse(oracle::random_rank_k(40, 30, 3, rng));
  const LossSpec loss = LossSpec::generalized(ScalarLoss::huber(1));
  const SolveReport rep = solve_generalized(a, 3, loss, 0.5, rng);
  EXPECT_LE(loss.evaluate(residual_spectrum(a, rep.factors)), 1e-9);
}

TEST(Generalized, QuadraticHuberMatchesSchattenTwo) {
  const SparseMatrix a = sparse(DenseMatrix{{5, 0, 0}, {0, 3, 0}, {0, 0, 1}});
  RandomStream rng(53);
  const SolveReport g = solve_generalized(a, 1, LossSpec::generalized(ScalarLoss::huber(10)), 0.5, rng);
  const SolveReport s = solve_schatten(a, 1, 2.0, 0.5, rng);
  EXPECT_NEAR(std::abs(g.factors.z(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(s.factors.z(0, 0)), 1.0, 1e-12);
}

TEST(Generalized, NearOptimalOnNoisyInstances) {
  RandomStream rng(54);
  for (const ScalarLoss& phi : {ScalarLoss::l1_l2(), ScalarLoss::huber(1), ScalarLoss::tukey(2, 3)}) {
    const LossSpec loss = LossSpec::generalized(phi);
    for (int t = 0; t < 3; ++t) {
      const SparseMatrix a = sparse(oracle::low_rank_plus_noise(80, 60, 30, 0.1, rng));
      const SolveReport rep = solve_generalized(a, 5, loss, 0.5, rng.split(phi.name(), t));
      const OracleResult o = exact_oracle(a, 5);
      EXPECT_LE(loss.evaluate(residual_spectrum(a, rep.factors)), 1.5 * loss.evaluate(o.residual_spectrum()))
          << phi.name();
    }
  }
}

TEST(Generalized, RefusesLossFailingConditions) {
  RandomStream rng(55);
  const SparseMatrix a = sparse(DenseMatrix::gaussian(10, 8, rng));
  try {
    solve_generalized(a, 2, LossSpec::generalized(ScalarLoss::tukey(2, 0)), 0.5, rng);
    FAIL() << "expected refusal";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("positive"), std::string::npos);
  }
}

TEST(ExactOracle, Examples) {
  const OracleResult d = exact_oracle(sparse(DenseMatrix{{5, 0, 0}, {0, 3, 0}, {0, 0, 1}}), 2);
  ASSERT_EQ(d.residual_spectrum().size(), 1u);
  EXPECT_NEAR(d.residual_spectrum()[0], 1.0, 1e-14);

  const OracleResult c = exact_oracle(sparse(DenseMatrix{{20, 20}, {1, 2}}), 1);
  EXPECT_NEAR(schatten_norm(c.residual_spectrum(), 1), 0.7051, 1e-4);

  EXPECT_THROW(exact_oracle(SparseMatrix(5001, 5001), 1), size_guard_error);
}

TEST(ExactOracle, BeatsRandomProjectionsInFractionalNorm) {
  RandomStream rng(56);
  const DenseMatrix ad = DenseMatrix::gaussian(15, 10, rng);
  const OracleResult o = exact_oracle(sparse(ad), 3);
  const double best = schatten_norm(o.residual_spectrum(), 1.7);
  EXPECT_NEAR(best, schatten_of(ad - o.factors.product(), 1.7), 1e-10);
  for (int t = 0; t < 500; ++t) {
    const DenseMatrix q = oracle::random_orthonormal(10, 3, rng);
    EXPECT_LE(best, schatten_of(ad - matmul(ad, oracle::projector(q)), 1.7) * (1 + 1e-12));
  }
}

TEST(Diagnostic, IdentityAndZeroSketches) {
  RandomStream rng(57);
  const DenseMatrix a = oracle::low_rank_plus_noise(30, 20, 5, 0.1, rng);
  for (double p : {1.0, 3.0}) {
    const DiagnosticReport exact = diagnose_kyfan_preservation(a, a, 3, p, 6, 0.0, 0.1, 50, rng);
    EXPECT_EQ(exact.violations, 0u);
    const DiagnosticReport zero = diagnose_kyfan_preservation(a, DenseMatrix(30, 20), 3, p, 6, 0.01, 0.1, 50, rng);
    EXPECT_EQ(zero.violations, 50u);
  }
}

TEST(Diagnostic, ColumnSamplerPreservesHeads) {
  RandomStream rng(58);
  const DenseMatrix ad = oracle::low_rank_plus_noise(100, 80, 20, 0.1, rng);
  const SparseMatrix a = sparse(ad);
  const std::size_t k = 5;
  const double eps = 0.5;
  for (double p : {1.0, 3.0}) {
    const SketchPlan plan = make_sketch_plan(100, 80, k, eps, p, Mode::exact_paper);
    RandomStream s_stream = rng.split("S");
    const SamplingSketch s = build_column_sampler(a.transposed(), k, eps, plan.eta1, s_stream);
    const DenseMatrix sa = apply_row_sampler(s, a).to_dense();
    const DiagnosticReport rep = diagnose_kyfan_preservation(ad, sa, k, p, plan.r_kyfan, plan.eta1, eps, 200, rng);
    EXPECT_LE(rep.violation_fraction(), 0.1) << "p=" << p;
  }
}
