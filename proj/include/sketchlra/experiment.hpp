#pragma once

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include "sketchlra/errors.hpp"
#include "sketchlra/io.hpp"
#include "sketchlra/norms.hpp"
#include "sketchlra/random.hpp"
#include "sketchlra/solver.hpp"
#include "sketchlra/sparse_matrix.hpp"

namespace sketchlra {

/// m x n matrix whose entries are independently nonzero with probability
/// `density`, nonzero values uniform in (0, 1].
inline SparseMatrix generate_synthetic(std::size_t n, std::size_t m, double density, RandomStream& stream) {
  if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("density must lie in (0, 1]");
  if (n == 0 || m == 0) throw std::invalid_argument("generate_synthetic: dimensions must be positive");
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(density * static_cast<double>(n) * static_cast<double>(m) * 1.1) + 16);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (density < 1.0 && !(stream.uniform01() < density)) continue;
      t.push_back({i, j, stream.uniform_open_closed()});
    }
  }
  return SparseMatrix::from_triplets(m, n, std::move(t));
}

struct SyntheticSource {
  std::size_t n = 500;
  std::size_t m = 500;
  double density = 0.05;
};

struct FileSource {
  std::string path;
  MatrixFormat format = MatrixFormat::matrix_market;
};

struct ExperimentConfig {
  std::variant<SyntheticSource, FileSource> source = SyntheticSource{};
  std::vector<std::size_t> k_list{5, 10, 20};
  double p = 1.0;
  double eps = 0.5;
  std::size_t trials = 50;
  std::uint64_t seed = 1;
  Mode mode = Mode::simplified_experiment;
  bool oracle = false;
  std::string output;
  std::vector<ScalarLoss> generalized;  // extra algorithms, one per loss
  std::size_t threads = 1;
  bool record_timing = true;
  SketchConstants constants{};

  void validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (k_list.empty()) throw std::invalid_argument("k list must be nonempty");
    require_schatten_p(p);
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
    if (const auto* s = std::get_if<SyntheticSource>(&source)) {
      if (!(s->density > 0.0 && s->density <= 1.0)) throw std::invalid_argument("density must lie in (0, 1]");
      if (s->n == 0 || s->m == 0) throw std::invalid_argument("n and m must be positive");
      for (std::size_t k : k_list) {
        if (k < 1 || k >= std::min(s->n, s->m)) {
          throw std::invalid_argument("k=" + std::to_string(k) + " must satisfy 1 <= k < min(m, n)");
        }
      }
    }
  }
};

struct TrialRecord {
  std::size_t k = 0;
  std::size_t trial = 0;
  std::string algo;
  double rel_error = std::numeric_limits<double>::quiet_NaN();  // NaN when the oracle is off
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  bool fallback = false;

  bool operator==(const TrialRecord&) const = default;
};

struct SummaryRow {
  std::size_t k = 0;
  std::string algo;
  double median_rel_error = std::numeric_limits<double>::quiet_NaN();
  double median_wall_ms = 0.0;
  std::size_t n_trials = 0;

  bool operator==(const SummaryRow&) const = default;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  std::vector<SummaryRow> summary;
  std::uint64_t matrix_fingerprint = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t nnz = 0;
  bool transposed = false;
};

/// Sorted-middle median; mean of the middle two for even counts. NaN for empty input.
inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline void canonical_order(std::vector<TrialRecord>& records) {
  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.k, a.algo, a.trial) < std::tie(b.k, b.algo, b.trial);
  });
}

inline std::vector<SummaryRow> summarize(std::vector<TrialRecord> records) {
  canonical_order(records);
  std::vector<SummaryRow> out;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    std::vector<double> err, ms;
    while (j < records.size() && records[j].k == records[i].k && records[j].algo == records[i].algo) {
      err.push_back(records[j].rel_error);
      ms.push_back(records[j].wall_ms);
      ++j;
    }
    const bool any_nan = std::any_of(err.begin(), err.end(), [](double e) { return std::isnan(e); });
    out.push_back({records[i].k, records[i].algo,
                   any_nan ? std::numeric_limits<double>::quiet_NaN() : median(err), median(ms), j - i});
    i = j;
  }
  return out;
}

inline LoadedMatrix load_source(const ExperimentConfig& cfg) {
  if (const auto* f = std::get_if<FileSource>(&cfg.source)) return load_matrix(f->path, f->format);
  const auto& s = std::get<SyntheticSource>(cfg.source);
  RandomStream matrix_stream = RandomStream(cfg.seed).split("matrix");
  return {generate_synthetic(s.n, s.m, s.density, matrix_stream), false};
}

namespace detail {

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count && !failed.load();) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Runs the Schatten-p pipeline and the Frobenius baseline (plus any
/// generalized losses) `trials` times per k on one matrix.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const SparseMatrix& a, bool transposed = false) {
  cfg.validate();
  for (std::size_t k : cfg.k_list) detail::require_rank(a, k);
  ExperimentResult res;
  res.matrix_fingerprint = a.fingerprint();
  res.rows = a.rows();
  res.cols = a.cols();
  res.nnz = a.nnz();
  res.transposed = transposed;

  const RandomStream root(cfg.seed);
  const SolveOptions opt{cfg.mode, cfg.constants};
  const LossSpec schatten = LossSpec::schatten(cfg.p);

  std::optional<SvdResult> full;
  double oracle_ms = 0.0;
  if (cfg.oracle) {
    require_oracle_size(a);
    const auto t0 = std::chrono::steady_clock::now();
    full = svd(a.to_dense());
    oracle_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  for (std::size_t k : cfg.k_list) {
    std::optional<OracleResult> oracle;
    if (full) {
      oracle = OracleResult{truncate_rank(*full, k), full->sigma, oracle_ms};
      res.records.push_back({k, 0, "exact_svd", 0.0, cfg.record_timing ? oracle_ms : 0.0, 0, false});
    }
    const std::size_t n_algos = 2 + cfg.generalized.size();
    std::vector<TrialRecord> cell(cfg.trials * n_algos);
    detail::parallel_for(cfg.trials * n_algos, cfg.threads, [&](std::size_t job) {
      const std::size_t trial = job / n_algos, algo = job % n_algos;
      const RandomStream trial_stream = root.split("trial", trial).split("k", k);
      const auto t0 = std::chrono::steady_clock::now();
      SolveReport rep;
      LossSpec loss = schatten;
      std::uint64_t seed = 0;
      if (algo == 0) {
        const RandomStream s = trial_stream.split("schatten_p");
        seed = s.seed();
        rep = solve_schatten(a, k, cfg.p, cfg.eps, s, opt);
      } else if (algo == 1) {
        const RandomStream s = trial_stream.split("frobenius_baseline");
        seed = s.seed();
        rep = solve_frobenius_baseline(a, k, s);
      } else {
        loss = LossSpec::generalized(cfg.generalized[algo - 2]);
        const RandomStream s = trial_stream.split(loss.name());
        seed = s.seed();
        rep = solve_generalized(a, k, loss, cfg.eps, s, opt);
        rep.algo = "generalized_" + loss.name();
      }
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      TrialRecord rec{k, trial, rep.algo, std::numeric_limits<double>::quiet_NaN(), cfg.record_timing ? ms : 0.0,
                      seed, rep.fallback_used};
      if (oracle) rec.rel_error = relative_error(a, rep.factors, *oracle, loss);
      cell[job] = std::move(rec);
    });
    res.records.insert(res.records.end(), cell.begin(), cell.end());
  }
  canonical_order(res.records);
  res.summary = summarize(res.records);
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const LoadedMatrix m = load_source(cfg);
  return run_experiment(cfg, m.matrix, m.transposed);
}

namespace detail {

inline std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "': " + std::strerror(errno));
  return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) f.push_back(cur);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

inline double csv_double(const std::string& s, const std::string& src, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw parse_error(src, line, "invalid number '" + s + "'");
  return v;
}

inline std::uint64_t csv_u64(const std::string& s, const std::string& src, std::size_t line) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw parse_error(src, line, "invalid integer '" + s + "'");
  }
  return std::strtoull(s.c_str(), nullptr, 10);
}

}  // namespace detail

inline constexpr const char* trials_header = "k,trial,algo,rel_error,wall_ms,seed,fallback";
inline constexpr const char* summary_header = "k,algo,median_rel_error,median_wall_ms,n_trials";

inline void write_trials_csv(std::ostream& out, std::vector<TrialRecord> records) {
  canonical_order(records);
  out << trials_header << '\n';
  for (const auto& r : records) {
    out << r.k << ',' << r.trial << ',' << r.algo << ',' << detail::fmt6(r.rel_error) << ','
        << detail::fmt6(r.wall_ms) << ',' << r.seed << ',' << (r.fallback ? 1 : 0) << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, std::vector<SummaryRow> summary) {
  std::sort(summary.begin(), summary.end(),
            [](const SummaryRow& a, const SummaryRow& b) { return std::tie(a.k, a.algo) < std::tie(b.k, b.algo); });
  out << summary_header << '\n';
  for (const auto& s : summary) {
    out << s.k << ',' << s.algo << ',' << detail::fmt6(s.median_rel_error) << ',' << detail::fmt6(s.median_wall_ms)
        << ',' << s.n_trials << '\n';
  }
}

/// Writes `<path>.trials.csv` and `<path>.summary.csv`.
inline void emit_csv(const std::vector<TrialRecord>& records, const std::vector<SummaryRow>& summary,
                     const std::string& path) {
  {
    std::ofstream out = detail::open_out(path + ".trials.csv");
    write_trials_csv(out, records);
    if (!out) throw std::runtime_error("write failed for '" + path + ".trials.csv'");
  }
  std::ofstream out = detail::open_out(path + ".summary.csv");
  write_summary_csv(out, summary);
  if (!out) throw std::runtime_error("write failed for '" + path + ".summary.csv'");
}

inline std::vector<TrialRecord> read_trials_csv(std::istream& in, const std::string& src = "<trials>") {
  std::string line;
  if (!std::getline(in, line) || line != trials_header) throw parse_error(src, 1, "missing trials header");
  std::vector<TrialRecord> out;
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw parse_error(src, no, "expected 7 fields");
    TrialRecord r;
    r.k = detail::csv_u64(f[0], src, no);
    r.trial = detail::csv_u64(f[1], src, no);
    r.algo = f[2];
    r.rel_error = detail::csv_double(f[3], src, no);
    r.wall_ms = detail::csv_double(f[4], src, no);
    r.seed = detail::csv_u64(f[5], src, no);
    if (f[6] != "0" && f[6] != "1") throw parse_error(src, no, "fallback must be 0 or 1");
    r.fallback = f[6] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& in, const std::string& src = "<summary>") {
  std::string line;
  if (!std::getline(in, line) || line != summary_header) throw parse_error(src, 1, "missing summary header");
  std::vector<SummaryRow> out;
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 5) throw parse_error(src, no, "expected 5 fields");
    out.push_back({detail::csv_u64(f[0], src, no), f[1], detail::csv_double(f[2], src, no),
                   detail::csv_double(f[3], src, no), detail::csv_u64(f[4], src, no)});
  }
  return out;
}

}  // namespace sketchlra
