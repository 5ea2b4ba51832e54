#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchlra/svd.hpp"

namespace sketchlra {

inline void require_schatten_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw std::invalid_argument("Schatten exponent p must be finite and >= 1, got " + std::to_string(p));
  }
}

namespace detail {

// (sum_{i<count} sigma_i^p)^(1/p), scaled by sigma_0 to stay in range.
inline double scaled_lp(const Spectrum& sigma, double p, std::size_t count) {
  if (count == 0 || sigma[0] == 0.0) return 0.0;
  const double top = sigma[0];
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += std::pow(sigma[i] / top, p);
  return top * std::pow(s, 1.0 / p);
}

}  // namespace detail

/// (sum_i sigma_i^p)^(1/p). p = 2 is the Frobenius norm, p = 1 the nuclear norm.
inline double schatten_norm(const Spectrum& sigma, double p) {
  require_schatten_p(p);
  return detail::scaled_lp(sigma, p, sigma.size());
}

/// Ky-Fan (p, r) norm: the Schatten p-norm of the top r singular values only.
inline double kyfan_pr_norm(const Spectrum& sigma, double p, std::size_t r) {
  require_schatten_p(p);
  if (r < 1 || r > sigma.size()) {
    throw std::invalid_argument("kyfan_pr_norm: r=" + std::to_string(r) + " outside [1, " +
                                std::to_string(sigma.size()) + "]");
  }
  return detail::scaled_lp(sigma, p, r);
}

/// sum_{i >= r} sigma_i^p (0-based r), the tail complement of the Ky-Fan head.
inline double schatten_tail_power(const Spectrum& sigma, double p, std::size_t r) {
  double s = 0.0;
  for (std::size_t i = r; i < sigma.size(); ++i) s += std::pow(sigma[i], p);
  return s;
}

/// C_{p,eps} = p (1 + 1/eps)^(p-1). For x in [eps, 1]:
/// (1+x)^p <= 1 + C x^p and (1-x)^p >= 1 - C x^p.
inline double cpe_constant(double p, double eps) {
  require_schatten_p(p);
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("cpe_constant: eps must lie in (0, 1]");
  return p * std::pow(1.0 + 1.0 / eps, p - 1.0);
}

/// Scalar loss phi applied to singular values.
struct ScalarLoss {
  enum class Family { tukey, l1_l2, huber };

  Family family = Family::huber;
  double p = 2.0;    // tukey exponent
  double tau = 1.0;  // tukey / huber threshold

  /// x^p below tau, tau^p above.
  static ScalarLoss tukey(double p, double tau) { return checked({Family::tukey, p, tau}); }
  /// 2 (sqrt(1 + x^2/2) - 1).
  static ScalarLoss l1_l2() { return {Family::l1_l2, 2.0, 0.0}; }
  /// x^2/2 below tau, tau (x - tau/2) above.
  static ScalarLoss huber(double tau) { return checked({Family::huber, 2.0, tau}); }

  std::string name() const {
    switch (family) {
      case Family::tukey: return "tukey(p=" + trim(p) + " tau=" + trim(tau) + ")";
      case Family::l1_l2: return "l1_l2";
      case Family::huber: return "huber(tau=" + trim(tau) + ")";
    }
    return "?";
  }

  static std::string trim(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

 private:
  static ScalarLoss checked(ScalarLoss l) {
    if (!(l.tau >= 0.0) || !std::isfinite(l.tau)) throw std::invalid_argument("loss threshold tau must be >= 0");
    if (!(l.p > 0.0) || !std::isfinite(l.p)) throw std::invalid_argument("loss exponent p must be > 0");
    return l;
  }
};

inline double phi_eval(const ScalarLoss& loss, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("phi_eval: argument must be >= 0");
  switch (loss.family) {
    case ScalarLoss::Family::tukey:
      return x <= loss.tau ? std::pow(x, loss.p) : std::pow(loss.tau, loss.p);
    case ScalarLoss::Family::l1_l2: {
      // 2 (sqrt(1+u) - 1) written without cancellation for small x.
      const double u = 0.5 * x * x;
      return 2.0 * u / (std::sqrt(1.0 + u) + 1.0);
    }
    case ScalarLoss::Family::huber:
      return x <= loss.tau ? 0.5 * x * x : loss.tau * (x - 0.5 * loss.tau);
  }
  return 0.0;
}

/// Phi(A) = sum_i phi(sigma_i).
inline double phi_objective(const Spectrum& sigma, const ScalarLoss& loss) {
  double s = 0.0;
  for (double v : sigma) s += phi_eval(loss, v);
  return s;
}

/// Phi_r(A) = sum_{i <= r} phi(sigma_i).
inline double phi_head(const Spectrum& sigma, const ScalarLoss& loss, std::size_t r) {
  if (r > sigma.size()) throw std::invalid_argument("phi_head: r exceeds spectrum length");
  double s = 0.0;
  for (std::size_t i = 0; i < r; ++i) s += phi_eval(loss, sigma[i]);
  return s;
}

/// Objective of a low-rank problem: a Schatten p-norm or a generalized Phi.
struct LossSpec {
  enum class Kind { schatten, generalized };

  Kind kind = Kind::schatten;
  double p = 1.0;
  ScalarLoss phi{};

  static LossSpec schatten(double p) {
    require_schatten_p(p);
    return {Kind::schatten, p, {}};
  }
  static LossSpec generalized(ScalarLoss phi) { return {Kind::generalized, 1.0, phi}; }

  double evaluate(const Spectrum& sigma) const {
    return kind == Kind::schatten ? schatten_norm(sigma, p) : phi_objective(sigma, phi);
  }

  std::string name() const {
    return kind == Kind::schatten ? "schatten(p=" + ScalarLoss::trim(p) + ")" : phi.name();
  }
};

/// n points log-spaced over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = n == 1 ? lo : std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return g;
}

inline std::vector<double> default_condition_grid() { return log_grid(1e-6, 1e6, 241); }

/// Grid estimates of the growth constants a scalar loss must have finite:
///   (a) alpha: phi((1 +- eps) x) within (1 +- alpha eps) phi(x)
///   (b) K1, K2: increments phi(x +- y) - phi(x) relative to phi(y), y in [eps x, x]
///   (c) L: phi(eps x) / phi(x)
///   (d) gamma: phi(x + y) / (phi(x) + phi(y))
/// Every constant is a supremum over the grid, so it underestimates the true sup.
struct ConditionReport {
  double eps = 0.0;
  double alpha = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double l = 0.0;
  double gamma = 0.0;
  bool nondecreasing = true;
  bool positive = true;
  bool zero_at_origin = true;

  static constexpr double finite_limit = 1e12;

  static bool is_finite(double v) { return std::isfinite(v) && v <= finite_limit; }

  /// Empty when every condition holds, otherwise names the first violation.
  std::string violation() const {
    if (!zero_at_origin) return "phi(0) must be 0";
    if (!positive) return "phi must be positive for x > 0";
    if (!nondecreasing) return "phi must be non-decreasing";
    if (!is_finite(alpha)) return "condition (a): alpha is unbounded";
    if (!is_finite(k1)) return "condition (b): K1 is unbounded";
    if (!is_finite(k2)) return "condition (b): K2 is unbounded";
    if (!is_finite(l)) return "condition (c): L is unbounded";
    if (!is_finite(gamma)) return "condition (d): gamma is unbounded";
    return {};
  }

  bool ok() const { return violation().empty(); }
};

inline ConditionReport check_phi_conditions(const ScalarLoss& loss, double eps,
                                            const std::vector<double>& grid = default_condition_grid(),
                                            std::size_t y_points = 41) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("check_phi_conditions: eps must lie in (0, 1)");
  if (grid.empty()) throw std::invalid_argument("check_phi_conditions: empty grid");
  for (double x : grid) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("check_phi_conditions: grid must be positive");
  }
  auto phi = [&](double x) { return phi_eval(loss, x); };
  auto ratio = [](double num, double den) {
    if (den > 0.0) return num / den;
    return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  auto bump = [](double& acc, double v) {
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    acc = std::max(acc, v);
  };

  ConditionReport rep;
  rep.eps = eps;
  rep.zero_at_origin = phi(0.0) == 0.0;
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(phi(sorted[i]) > 0.0)) rep.positive = false;
    if (i > 0 && phi(sorted[i]) < phi(sorted[i - 1])) rep.nondecreasing = false;
  }

  const std::vector<double> fractions = log_grid(eps, 1.0, y_points);
  for (double x : grid) {
    const double fx = phi(x);
    bump(rep.alpha, ratio(phi((1.0 + eps) * x) - fx, eps * fx));
    bump(rep.alpha, ratio(fx - phi((1.0 - eps) * x), eps * fx));
    bump(rep.l, ratio(phi(eps * x), fx));
    for (double f : fractions) {
      const double y = f * x;
      const double fy = phi(y);
      bump(rep.k1, ratio(phi(x + y) - fx, fy));
      bump(rep.k2, ratio(fx - phi(std::max(0.0, x - y)), fy));
    }
    for (double y : grid) bump(rep.gamma, ratio(phi(x + y), fx + phi(y)));
  }
  return rep;
}

}  // namespace sketchlra
