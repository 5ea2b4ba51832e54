#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sketchlra/sketchlra.hpp"

using namespace sketchlra;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

struct SourceArgs {
  std::string input;
  std::string format = "matrix_market";
  std::size_t n = 500;
  std::size_t m = 500;
  double density = 0.05;
};

struct CommonArgs {
  SourceArgs source;
  double p = 1.0;
  double eps = 0.5;
  std::uint64_t seed = 1;
  std::string mode = "exact_paper";
  bool oracle = false;
  std::string out;
};

void add_source(CLI::App* cmd, SourceArgs& s) {
  cmd->add_option("--input", s.input, "Matrix file; synthetic data is generated when omitted");
  cmd->add_option("--format", s.format, "matrix_market (mm) or bag_of_words (bow)")->capture_default_str();
  cmd->add_option("--n", s.n, "Synthetic column count")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--m", s.m, "Synthetic row count")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--density", s.density, "Synthetic nonzero probability in (0, 1]")->capture_default_str();
}

void add_common(CLI::App* cmd, CommonArgs& c) {
  add_source(cmd, c.source);
  cmd->add_option("--p", c.p, "Schatten exponent, p >= 1")->capture_default_str();
  cmd->add_option("--eps", c.eps, "Accuracy parameter in (0, 0.5]")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
}

std::variant<SyntheticSource, FileSource> to_source(const SourceArgs& s) {
  if (!s.input.empty()) return FileSource{s.input, parse_format(s.format)};
  return SyntheticSource{s.n, s.m, s.density};
}

LoadedMatrix load(const SourceArgs& s, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.source = to_source(s);
  cfg.seed = seed;
  if (const auto* syn = std::get_if<SyntheticSource>(&cfg.source)) {
    if (!(syn->density > 0.0 && syn->density <= 1.0)) throw std::invalid_argument("density must lie in (0, 1]");
  }
  return load_source(cfg);
}

std::optional<ScalarLoss> parse_loss(const std::string& spec) {
  // huber:TAU, tukey:P:TAU, l1_l2
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string f; std::getline(ss, f, ':');) parts.push_back(f);
  auto num = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts.at(i), &used);
      if (used != parts[i].size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("bad loss spec '" + spec + "'");
    }
  };
  if (parts.empty()) throw std::invalid_argument("empty loss spec");
  if (parts[0] == "schatten") return std::nullopt;
  if (parts[0] == "l1_l2" && parts.size() == 1) return ScalarLoss::l1_l2();
  if (parts[0] == "huber" && parts.size() == 2) return ScalarLoss::huber(num(1));
  if (parts[0] == "tukey" && parts.size() == 3) return ScalarLoss::tukey(num(1), num(2));
  throw std::invalid_argument("bad loss spec '" + spec + "' (expected huber:TAU, tukey:P:TAU or l1_l2)");
}

void write_dense_mm(const std::string& path, const DenseMatrix& d) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << d.rows() << ' ' << d.cols() << ' ' << d.rows() * d.cols() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d(i, j));
      out << i + 1 << ' ' << j + 1 << ' ' << buf << '\n';
    }
  }
}

int run_solve(const CommonArgs& c, std::size_t k, const std::string& loss_spec) {
  const LoadedMatrix lm = load(c.source, c.seed);
  const SparseMatrix& a = lm.matrix;
  const SolveOptions opt{parse_mode(c.mode), {}};
  const std::optional<ScalarLoss> phi = parse_loss(loss_spec);
  const LossSpec loss = phi ? LossSpec::generalized(*phi) : LossSpec::schatten(c.p);
  const RandomStream stream = RandomStream(c.seed).split("solve");
  const SolveReport rep =
      phi ? solve_generalized(a, k, loss, c.eps, stream, opt) : solve_schatten(a, k, c.p, c.eps, stream, opt);

  std::printf("matrix      %zu x %zu, nnz %zu%s\n", a.rows(), a.cols(), a.nnz(),
              lm.transposed ? " (transposed on load)" : "");
  std::printf("algorithm   %s, loss %s, mode %s\n", rep.algo.c_str(), loss.name().c_str(), c.mode.c_str());
  std::printf("rank        %zu, factors Y %zu x %zu, Z %zu x %zu\n", k, rep.factors.y.rows(), rep.factors.y.cols(),
              rep.factors.z.rows(), rep.factors.z.cols());
  std::printf("plan        eta1 %.4g eta2 %.4g r %zu s %zu t %zu r_embed %zu\n", rep.plan.eta1, rep.plan.eta2,
              rep.plan.r_kyfan, rep.plan.s_rows, rep.plan.t_cols, rep.plan.r_embed);
  std::printf("seeds       S %llu T %llu R %llu\n", static_cast<unsigned long long>(rep.seeds.s),
              static_cast<unsigned long long>(rep.seeds.t), static_cast<unsigned long long>(rep.seeds.r));
  std::printf("madds       left %llu right %llu dense %llu regression %llu\n",
              static_cast<unsigned long long>(rep.counters.sketch_left.multiply_adds),
              static_cast<unsigned long long>(rep.counters.sketch_right.multiply_adds),
              static_cast<unsigned long long>(rep.counters.dense.multiply_adds),
              static_cast<unsigned long long>(rep.counters.regression.multiply_adds));
  std::printf("time_ms     sketch %.2f dense %.2f regression %.2f\n", rep.elapsed.sketch_ms, rep.elapsed.dense_ms,
              rep.elapsed.regression_ms);
  if (rep.fallback_used) std::printf("fallback    regression fell back to A Z\n");
  for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  if (!rep.factors.y.all_finite() || !rep.factors.z.all_finite()) {
    std::fprintf(stderr, "error: non-finite factors\n");
    return exit_numerical;
  }
  if (c.oracle) {
    const OracleResult o = exact_oracle(a, k);
    const double err = relative_error(a, rep.factors, o, loss);
    std::printf("rel_error   %.6g (oracle %.2f ms)\n", err, o.wall_ms);
  }
  if (!c.out.empty()) {
    write_dense_mm(c.out + ".Y.mtx", rep.factors.y);
    write_dense_mm(c.out + ".Z.mtx", rep.factors.z);
    std::printf("wrote       %s.Y.mtx %s.Z.mtx\n", c.out.c_str(), c.out.c_str());
  }
  return 0;
}

int run_bench(const CommonArgs& c, const std::vector<std::size_t>& ks, std::size_t trials, std::size_t threads,
              const std::vector<std::string>& losses) {
  ExperimentConfig cfg;
  cfg.source = to_source(c.source);
  cfg.k_list = ks;
  cfg.p = c.p;
  cfg.eps = c.eps;
  cfg.trials = trials;
  cfg.seed = c.seed;
  cfg.mode = parse_mode(c.mode);
  cfg.oracle = c.oracle;
  cfg.output = c.out;
  cfg.threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  for (const auto& l : losses) {
    if (auto phi = parse_loss(l)) cfg.generalized.push_back(*phi);
  }
  const ExperimentResult r = run_experiment(cfg);
  std::fprintf(stderr, "matrix %zu x %zu, nnz %zu%s, fingerprint %016llx\n", r.rows, r.cols, r.nnz,
               r.transposed ? " (transposed on load)" : "", static_cast<unsigned long long>(r.matrix_fingerprint));
  if (c.out.empty()) {
    write_summary_csv(std::cout, r.summary);
  } else {
    emit_csv(r.records, r.summary, c.out);
    std::fprintf(stderr, "wrote %s.trials.csv %s.summary.csv\n", c.out.c_str(), c.out.c_str());
  }
  for (const auto& row : r.summary) {
    if (cfg.oracle && !std::isfinite(row.median_rel_error)) return exit_numerical;
  }
  return 0;
}

int run_diagnose(const CommonArgs& c, std::size_t k, std::size_t trials) {
  const LoadedMatrix lm = load(c.source, c.seed);
  SparseMatrix a = lm.matrix;
  if (a.rows() < a.cols()) a = a.transposed();
  require_oracle_size(a);
  if (k < 1 || k >= a.cols()) throw std::invalid_argument("k must satisfy 1 <= k < min(m, n)");
  const SketchPlan plan = make_sketch_plan(a.rows(), a.cols(), k, c.eps, c.p, Mode::exact_paper);
  RandomStream root(c.seed);
  RandomStream s_stream = root.split("S");
  const SamplingSketch s = build_column_sampler(a.transposed(), k, c.eps, plan.eta1, s_stream);
  const DenseMatrix sa = apply_row_sampler(s, a).to_dense();
  RandomStream q_stream = root.split("diagnose");
  const DiagnosticReport rep =
      diagnose_kyfan_preservation(a.to_dense(), sa, k, c.p, plan.r_kyfan, plan.eta1, c.eps, trials, q_stream);
  std::printf("matrix            %zu x %zu, nnz %zu\n", a.rows(), a.cols(), a.nnz());
  std::printf("sampler           %zu of %zu rows%s\n", s.sample_count(), a.rows(), s.clipped ? " (clipped)" : "");
  std::printf("p %g k %zu r %zu eta1 %.4g\n", c.p, k, plan.r_kyfan, plan.eta1);
  std::printf("violations        %zu of %zu (fraction %.4f)\n", rep.violations, rep.trials, rep.violation_fraction());
  std::printf("worst lower gap   %.6g\n", rep.worst_lower_gap);
  std::printf("worst upper gap   %.6g\n", rep.worst_upper_gap);
  return 0;
}

int run_gen(const SourceArgs& s, std::uint64_t seed, const std::string& out) {
  if (!(s.density > 0.0 && s.density <= 1.0)) throw std::invalid_argument("density must lie in (0, 1]");
  SourceArgs syn = s;
  syn.input.clear();
  const LoadedMatrix lm = load(syn, seed);
  write_matrix_market(out, lm.matrix);
  std::fprintf(stderr, "wrote %s: %zu x %zu, nnz %zu\n", out.c_str(), lm.matrix.rows(), lm.matrix.cols(),
               lm.matrix.nnz());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse low-rank approximation under Schatten norms"};
  app.require_subcommand(1);

  CommonArgs solve_args;
  std::size_t solve_k = 5;
  std::string solve_loss = "schatten";
  auto* solve = app.add_subcommand("solve", "Rank-k approximation of one matrix");
  add_common(solve, solve_args);
  solve->add_option("--k", solve_k, "Target rank")->capture_default_str();
  solve->add_option("--mode", solve_args.mode, "exact_paper or simplified_experiment")->capture_default_str();
  solve->add_flag("--oracle", solve_args.oracle, "Compare against the exact SVD");
  solve->add_option("--loss", solve_loss, "schatten, huber:TAU, tukey:P:TAU or l1_l2")->capture_default_str();
  solve->add_option("--out", solve_args.out, "Write factors to OUT.Y.mtx and OUT.Z.mtx");

  CommonArgs bench_args;
  bench_args.mode = "simplified_experiment";
  std::vector<std::size_t> bench_k{5, 10, 20};
  std::size_t bench_trials = 50, bench_threads = 0;
  std::vector<std::string> bench_losses;
  auto* bench = app.add_subcommand("bench", "Multi-trial comparison against the Frobenius baseline");
  add_common(bench, bench_args);
  bench->add_option("--k", bench_k, "Target ranks")->delimiter(',')->capture_default_str();
  bench->add_option("--trials", bench_trials, "Trials per rank")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--mode", bench_args.mode, "exact_paper or simplified_experiment")->capture_default_str();
  bench->add_flag("--oracle", bench_args.oracle, "Record relative errors against the exact SVD");
  bench->add_option("--loss", bench_losses, "Extra generalized losses (huber:TAU, tukey:P:TAU, l1_l2)");
  bench->add_option("--threads", bench_threads, "Worker threads, 0 for all cores")->capture_default_str();
  bench->add_option("--out", bench_args.out, "Write OUT.trials.csv and OUT.summary.csv");

  CommonArgs diag_args;
  std::size_t diag_k = 5, diag_trials = 200;
  auto* diagnose = app.add_subcommand("diagnose", "Ky-Fan head preservation of the row sampler");
  add_common(diagnose, diag_args);
  diagnose->add_option("--k", diag_k, "Target rank")->capture_default_str();
  diagnose->add_option("--trials", diag_trials, "Random projections to test")->capture_default_str();

  SourceArgs gen_args;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic matrix in Matrix Market format");
  gen->add_option("--n", gen_args.n, "Columns")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--m", gen_args.m, "Rows")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--density", gen_args.density, "Nonzero probability in (0, 1]")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Root seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (*solve) return run_solve(solve_args, solve_k, solve_loss);
    if (*bench) return run_bench(bench_args, bench_k, bench_trials, bench_threads, bench_losses);
    if (*diagnose) return run_diagnose(diag_args, diag_k, diag_trials);
    if (*gen) return run_gen(gen_args, gen_seed, gen_out);
  } catch (const convergence_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return exit_numerical;
  } catch (const parse_error& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return exit_config;
  } catch (const size_guard_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return exit_config;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_config;
  }
  return exit_config;
}
