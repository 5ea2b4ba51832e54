#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "sketchlra/experiment.hpp"

using namespace sketchlra;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sketchlra_test_experiment";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t parse_error_line(const std::string& text, bool bow) {
  std::istringstream in(text);
  try {
    if (bow) read_bag_of_words(in);
    else read_matrix_market(in);
  } catch (const parse_error& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Synthetic, DenseWhenDensityIsOne) {
  RandomStream rng(60);
  const SparseMatrix a = generate_synthetic(7, 9, 1.0, rng);
  EXPECT_EQ(a.rows(), 9u);
  EXPECT_EQ(a.cols(), 7u);
  EXPECT_EQ(a.nnz(), 63u);
  for (double v : a.values()) EXPECT_TRUE(v > 0.0 && v <= 1.0);
}

TEST(Synthetic, RejectsZeroDensity) {
  RandomStream rng(61);
  EXPECT_THROW(generate_synthetic(5, 5, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(5, 5, 1.5, rng), std::invalid_argument);
}

TEST(Synthetic, NnzWithinBinomialBandAtFullScale) {
  RandomStream rng(62);
  const SparseMatrix a = generate_synthetic(3000, 3000, 0.05, rng);
  const double mean = 9e6 * 0.05, sd = std::sqrt(9e6 * 0.05 * 0.95);
  EXPECT_NEAR(static_cast<double>(a.nnz()), mean, 3 * sd);
}

TEST(Synthetic, SameSeedSameMatrix) {
  ExperimentConfig cfg;
  cfg.source = SyntheticSource{60, 80, 0.1};
  cfg.seed = 9;
  EXPECT_EQ(load_source(cfg).matrix.fingerprint(), load_source(cfg).matrix.fingerprint());
  ExperimentConfig other = cfg;
  other.seed = 10;
  EXPECT_NE(load_source(cfg).matrix.fingerprint(), load_source(other).matrix.fingerprint());
}

TEST(LoadMatrix, SingleEntryMatrixMarket) {
  std::istringstream in("%%MatrixMarket matrix coordinate real general\n% comment\n1 1 1\n1 1 2.5\n");
  const SparseMatrix a = read_matrix_market(in);
  EXPECT_EQ(a.rows(), 1u);
  EXPECT_EQ(a.cols(), 1u);
  EXPECT_EQ(a.triplets(), (std::vector<Triplet>{{0, 0, 2.5}}));
}

TEST(LoadMatrix, BagOfWordsFixture) {
  const fs::path p = scratch("docword.fixture.txt");
  {
    std::ofstream out(p);
    out << "3\n4\n5\n1 1 2\n1 3 1\n2 2 4\n3 1 1\n3 4 7\n";
  }
  const LoadedMatrix m = load_matrix(p.string(), MatrixFormat::bag_of_words);
  // 3 docs < 4 words, so the stored matrix is words x docs.
  EXPECT_TRUE(m.transposed);
  EXPECT_EQ(m.matrix.rows(), 4u);
  EXPECT_EQ(m.matrix.cols(), 3u);
  const std::vector<Triplet> want{{0, 0, 2}, {0, 2, 1}, {1, 1, 4}, {2, 0, 1}, {3, 2, 7}};
  EXPECT_EQ(m.matrix.triplets(), want);
  EXPECT_EQ(m.matrix.transposed().triplets(),
            (std::vector<Triplet>{{0, 0, 2}, {0, 2, 1}, {1, 1, 4}, {2, 0, 1}, {2, 3, 7}}));
}

TEST(LoadMatrix, BagOfWordsKeepsOrientationWhenTall) {
  std::istringstream in("4\n2\n2\n1 1 3\n4 2 5\n");
  const LoadedMatrix m = read_bag_of_words(in);
  EXPECT_FALSE(m.transposed);
  EXPECT_EQ(m.matrix.rows(), 4u);
}

TEST(LoadMatrix, ErrorsCarryLineNumbers) {
  const std::string head = "%%MatrixMarket matrix coordinate real general\n2 2 2\n";
  EXPECT_EQ(parse_error_line(head + "1 1 1.0\n3 1 2.0\n", false), 4u);
  EXPECT_EQ(parse_error_line(head + "1 1 1.0\n1 1 2.0\n", false), 4u);
  EXPECT_EQ(parse_error_line(head + "1 1 x\n", false), 3u);
  EXPECT_EQ(parse_error_line(head + "1 1 1.0\n", false), 3u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix array real general\n2 2\n", false), 1u);
  EXPECT_EQ(parse_error_line("2\n2\n1\n1 3 1\n", true), 4u);
  EXPECT_EQ(parse_error_line("2\n2\n2\n1 1 1\n1 1 1\n", true), 5u);
  EXPECT_EQ(parse_error_line("2\nx\n", true), 2u);
}

TEST(LoadMatrix, MissingFile) {
  EXPECT_THROW(load_matrix("/nonexistent/file.mtx", MatrixFormat::matrix_market), std::runtime_error);
}

TEST(LoadMatrix, MatrixMarketRoundTrip) {
  RandomStream rng(63);
  const SparseMatrix a = oracle::random_sparse(17, 11, 0.3, rng);
  std::stringstream buf;
  write_matrix_market(buf, a);
  EXPECT_EQ(read_matrix_market(buf), a);
}

TEST(Csv, EmptyRecordsGiveHeaderOnlyFiles) {
  const fs::path base = scratch("empty");
  emit_csv({}, {}, base.string());
  EXPECT_EQ(lines_of(base.string() + ".trials.csv"), std::vector<std::string>{trials_header});
  EXPECT_EQ(lines_of(base.string() + ".summary.csv"), std::vector<std::string>{summary_header});
}

TEST(Csv, OneRecordIsTwoLines) {
  const fs::path base = scratch("one");
  const TrialRecord r{5, 0, "schatten_p", 0.0123456789, 12.5, 42, false};
  emit_csv({r}, summarize({r}), base.string());
  const auto lines = lines_of(base.string() + ".trials.csv");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1], "5,0,schatten_p,0.0123457,12.5,42,0");
}

TEST(Csv, RoundTripToSerializationPrecision) {
  RandomStream rng(64);
  std::vector<TrialRecord> recs;
  for (std::size_t t = 0; t < 30; ++t) {
    recs.push_back({10, t, t % 2 ? "frobenius_baseline" : "schatten_p", rng.uniform01() * 0.1,
                    rng.uniform01() * 1000, rng.next_u64(), t % 7 == 0});
  }
  std::stringstream a, b;
  write_trials_csv(a, recs);
  write_summary_csv(b, summarize(recs));
  const auto back = read_trials_csv(a);
  auto sorted = recs;
  canonical_order(sorted);
  ASSERT_EQ(back.size(), sorted.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].k, sorted[i].k);
    EXPECT_EQ(back[i].trial, sorted[i].trial);
    EXPECT_EQ(back[i].algo, sorted[i].algo);
    EXPECT_EQ(back[i].seed, sorted[i].seed);
    EXPECT_EQ(back[i].fallback, sorted[i].fallback);
    EXPECT_NEAR(back[i].rel_error, sorted[i].rel_error, 5e-6 * std::abs(sorted[i].rel_error));
    EXPECT_NEAR(back[i].wall_ms, sorted[i].wall_ms, 5e-6 * std::abs(sorted[i].wall_ms));
  }
  // A second pass through text is exact.
  std::stringstream again;
  write_trials_csv(again, back);
  a.clear();
  a.seekg(0);
  EXPECT_EQ(again.str(), a.str());
  const auto summary = read_summary_csv(b);
  EXPECT_EQ(summary.size(), 2u);
}

TEST(Csv, MalformedInputIsRejected) {
  std::istringstream bad_header("k,trial\n");
  EXPECT_THROW(read_trials_csv(bad_header), parse_error);
  std::istringstream bad_row(std::string(trials_header) + "\n5,0,x,0.1,1,abc,0\n");
  EXPECT_THROW(read_trials_csv(bad_row), parse_error);
}

TEST(Median, MatchesIndependentSortedMedian) {
  RandomStream rng(65);
  for (std::size_t n : {1u, 2u, 7u, 50u, 51u}) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    EXPECT_EQ(median(v), oracle::sorted_median(v));
  }
  EXPECT_TRUE(std::isnan(median({})));
  EXPECT_EQ(median({3, 1, 2, 10}), 2.5);
}

TEST(Summary, FiftyTrialMedianIsMeanOfMiddleTwo) {
  RandomStream rng(66);
  std::vector<TrialRecord> recs;
  std::vector<double> errs;
  for (std::size_t t = 0; t < 50; ++t) {
    errs.push_back(rng.uniform01());
    recs.push_back({5, t, "schatten_p", errs.back(), 1.0, t, false});
  }
  const auto s = summarize(recs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].n_trials, 50u);
  EXPECT_EQ(s[0].median_rel_error, oracle::sorted_median(errs));
}

TEST(RunExperiment, DeterministicAndThreadIndependent) {
  ExperimentConfig cfg;
  cfg.source = SyntheticSource{80, 100, 0.1};
  cfg.k_list = {3, 5};
  cfg.trials = 4;
  cfg.oracle = true;
  cfg.record_timing = false;
  const ExperimentResult r1 = run_experiment(cfg);
  const ExperimentResult r2 = run_experiment(cfg);
  cfg.threads = 4;
  const ExperimentResult r3 = run_experiment(cfg);
  EXPECT_EQ(r1.records, r2.records);
  EXPECT_EQ(r1.records, r3.records);
  EXPECT_EQ(r1.matrix_fingerprint, r3.matrix_fingerprint);
  // Per k: one exact_svd row plus trials x 2 algorithms.
  EXPECT_EQ(r1.records.size(), 2u * (1 + 4 * 2));
  EXPECT_EQ(r1.summary.size(), 2u * 3);
  for (const auto& r : r1.records) EXPECT_GE(r.rel_error, -1e-9);
}

TEST(RunExperiment, ExactRankInputHasNegligibleError) {
  RandomStream rng(67);
  const SparseMatrix a = SparseMatrix::from_dense(oracle::random_rank_k(70, 50, 4, rng));
  ExperimentConfig cfg;
  cfg.k_list = {4};
  cfg.trials = 3;
  cfg.oracle = true;
  cfg.generalized = {ScalarLoss::huber(1)};
  const ExperimentResult r = run_experiment(cfg, a);
  for (const auto& s : r.summary) EXPECT_LE(s.median_rel_error, 1e-6) << s.algo;
  EXPECT_EQ(r.summary.size(), 4u);
}

TEST(RunExperiment, WithoutOracleErrorsAreNan) {
  ExperimentConfig cfg;
  cfg.source = SyntheticSource{40, 40, 0.2};
  cfg.k_list = {2};
  cfg.trials = 2;
  const ExperimentResult r = run_experiment(cfg);
  for (const auto& rec : r.records) EXPECT_TRUE(std::isnan(rec.rel_error));
  std::stringstream out;
  write_summary_csv(out, r.summary);
  EXPECT_NE(out.str().find("nan"), std::string::npos);
}

TEST(RunExperiment, ConfigValidation) {
  ExperimentConfig cfg;
  cfg.trials = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.trials = 1;
  cfg.source = SyntheticSource{10, 10, 0.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.source = SyntheticSource{10, 10, 0.5};
  cfg.k_list = {10};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.k_list = {};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(RunExperiment, OracleGuardSurfaces) {
  ExperimentConfig cfg;
  cfg.k_list = {1};
  cfg.trials = 1;
  cfg.oracle = true;
  EXPECT_THROW(run_experiment(cfg, SparseMatrix(5001, 5002)), size_guard_error);
}
