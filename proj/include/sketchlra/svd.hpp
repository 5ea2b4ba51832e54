#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sketchlra/dense_matrix.hpp"
#include "sketchlra/errors.hpp"

namespace sketchlra {

/// Relative tolerance for the factorization identities of SvdResult.
inline constexpr double svd_tol = 1e-9;
/// Iteration cap: Jacobi sweeps, or implicit QR steps per singular value.
inline constexpr int svd_max_sweeps = 60;
/// Singular values below rank_tol * sigma_max count as zero.
inline constexpr double rank_tol = 1e-10;

/// Singular values, non-increasing and non-negative.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
        throw std::invalid_argument("Spectrum: values must be finite and non-negative");
      }
      if (i > 0 && values_[i] > values_[i - 1]) {
        throw std::invalid_argument("Spectrum: values must be non-increasing");
      }
    }
  }

  /// Takes absolute values and sorts descending.
  static Spectrum from_unsorted(std::vector<double> values) {
    for (double& v : values) v = std::abs(v);
    std::sort(values.begin(), values.end(), std::greater<>());
    return Spectrum(std::move(values));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  /// sigma_{first}, sigma_{first+1}, ... as a new spectrum.
  Spectrum tail(std::size_t first) const {
    first = std::min(first, values_.size());
    return Spectrum(std::vector<double>(values_.begin() + first, values_.end()));
  }

 private:
  std::vector<double> values_;
};

/// Thin SVD A = U diag(sigma) V^T with s = min(m, n) columns in U and V.
struct SvdResult {
  DenseMatrix u;
  Spectrum sigma;
  DenseMatrix v;
};

/// A rank-k factorization X = Y Z^T, where Z has orthonormal columns.
/// The product is never formed by the solvers.
struct LowRankFactors {
  DenseMatrix y;
  DenseMatrix z;
  std::size_t k = 0;

  DenseMatrix product() const { return matmul_nt(y, z); }
};

namespace detail {

inline void require_svd_input(const DenseMatrix& a) {
  if (std::min(a.rows(), a.cols()) < 1) throw std::invalid_argument("svd: matrix has no entries");
  if (!a.all_finite()) throw invalid_input_error("svd: matrix has non-finite entries");
}

/// Householder reflector in place: on return x[0] holds beta and x[1:] the
/// tail of v (v[0] = 1 implied), so that (I - tau v v^T) x_in = beta e_1.
inline double make_reflector(std::span<double> x) {
  double tail = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) tail += x[i] * x[i];
  if (tail == 0.0) return 0.0;
  const double alpha = x[0];
  const double beta = -std::copysign(std::sqrt(alpha * alpha + tail), alpha);
  const double tau = (beta - alpha) / beta;
  const double scale = 1.0 / (alpha - beta);
  for (std::size_t i = 1; i < x.size(); ++i) x[i] *= scale;
  x[0] = beta;
  return tau;
}

inline void givens(double f, double g, double& c, double& s, double& r) {
  if (g == 0.0) {
    c = 1.0;
    s = 0.0;
    r = f;
    return;
  }
  r = std::hypot(f, g);
  c = f / r;
  s = g / r;
}

// Rows p and q of a row-major matrix: p <- c p + s q, q <- -s p + c q.
inline void rotate_rows(DenseMatrix& m, std::size_t p, std::size_t q, double c, double s) {
  auto rp = m.row(p);
  auto rq = m.row(q);
  for (std::size_t j = 0; j < rp.size(); ++j) {
    const double x = rp[j];
    const double y = rq[j];
    rp[j] = c * x + s * y;
    rq[j] = -s * x + c * y;
  }
}

/// Rows of `basis` listed in `missing` are replaced by unit vectors orthogonal
/// to every other row. Used when zero singular values leave singular vectors
/// undetermined.
inline void complete_orthonormal_rows(DenseMatrix& basis, const std::vector<bool>& missing) {
  const std::size_t dim = basis.cols();
  std::vector<std::size_t> done;
  for (std::size_t i = 0; i < basis.rows(); ++i) {
    if (!missing[i]) done.push_back(i);
  }
  std::size_t candidate = 0;
  for (std::size_t i = 0; i < basis.rows(); ++i) {
    if (!missing[i]) continue;
    for (; candidate < dim; ++candidate) {
      std::vector<double> w(dim, 0.0);
      w[candidate] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j : done) {
          auto b = basis.row(j);
          const double proj = std::inner_product(w.begin(), w.end(), b.begin(), 0.0);
          for (std::size_t l = 0; l < dim; ++l) w[l] -= proj * b[l];
        }
      }
      const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (norm > 0.5) {
        auto dst = basis.row(i);
        for (std::size_t l = 0; l < dim; ++l) dst[l] = w[l] / norm;
        done.push_back(i);
        ++candidate;
        break;
      }
    }
  }
}

/// Flips negative values and sorts descending, permuting rows of ut/vt along.
inline SvdResult finish_svd(std::vector<double> sigma, DenseMatrix ut, DenseMatrix vt, bool want_vectors) {
  const std::size_t s = sigma.size();
  if (want_vectors) {
    for (std::size_t i = 0; i < s; ++i) {
      if (sigma[i] < 0.0) {
        sigma[i] = -sigma[i];
        for (double& x : vt.row(i)) x = -x;
      }
    }
  } else {
    for (double& x : sigma) x = std::abs(x);
  }
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });
  std::vector<double> sorted(s);
  for (std::size_t i = 0; i < s; ++i) sorted[i] = sigma[order[i]];
  SvdResult out;
  out.sigma = Spectrum(std::move(sorted));
  if (want_vectors) {
    out.u = DenseMatrix(ut.cols(), s);
    out.v = DenseMatrix(vt.cols(), s);
    for (std::size_t c = 0; c < s; ++c) {
      auto urow = ut.row(order[c]);
      for (std::size_t r = 0; r < urow.size(); ++r) out.u(r, c) = urow[r];
      auto vrow = vt.row(order[c]);
      for (std::size_t r = 0; r < vrow.size(); ++r) out.v(r, c) = vrow[r];
    }
  }
  return out;
}

/// Golub-Kahan-Reinsch SVD of a tall matrix (rows >= cols): Householder
/// bidiagonalization followed by implicit-shift QR on the bidiagonal.
inline SvdResult golub_kahan_tall(DenseMatrix b, bool want_vectors) {
  const std::size_t m = b.rows();
  const std::size_t n = b.cols();
  std::vector<double> d(n, 0.0), e(n > 0 ? n - 1 : 0, 0.0);
  std::vector<std::vector<double>> left(n), right(n);
  std::vector<double> tau_left(n, 0.0), tau_right(n, 0.0);
  std::vector<double> x, w(n);

  for (std::size_t j = 0; j < n; ++j) {
    x.resize(m - j);
    for (std::size_t r = j; r < m; ++r) x[r - j] = b(r, j);
    const double tl = make_reflector(x);
    d[j] = x[0];
    x[0] = 1.0;
    tau_left[j] = tl;
    if (tl != 0.0 && j + 1 < n) {
      std::fill(w.begin() + j + 1, w.end(), 0.0);
      for (std::size_t r = j; r < m; ++r) {
        const double vr = x[r - j];
        auto row = b.row(r);
        for (std::size_t c = j + 1; c < n; ++c) w[c] += vr * row[c];
      }
      for (std::size_t r = j; r < m; ++r) {
        const double f = tl * x[r - j];
        auto row = b.row(r);
        for (std::size_t c = j + 1; c < n; ++c) row[c] -= f * w[c];
      }
    }
    if (want_vectors) left[j] = x;

    if (j + 1 < n) {
      std::vector<double> u(b.row(j).begin() + j + 1, b.row(j).end());
      const double tr = make_reflector(u);
      e[j] = u[0];
      u[0] = 1.0;
      tau_right[j] = tr;
      if (tr != 0.0) {
        for (std::size_t r = j + 1; r < m; ++r) {
          auto row = b.row(r);
          double s = 0.0;
          for (std::size_t c = 0; c < u.size(); ++c) s += row[j + 1 + c] * u[c];
          s *= tr;
          for (std::size_t c = 0; c < u.size(); ++c) row[j + 1 + c] -= s * u[c];
        }
      }
      if (want_vectors) right[j] = std::move(u);
    }
  }

  // Ut is n x m (rows are left singular vectors), Vt is n x n.
  DenseMatrix ut, vt;
  if (want_vectors) {
    ut = DenseMatrix(n, m);
    vt = DenseMatrix::identity(n);
    for (std::size_t i = 0; i < n; ++i) ut(i, i) = 1.0;
    for (std::size_t jj = n; jj-- > 0;) {
      const double tl = tau_left[jj];
      if (tl == 0.0) continue;
      const auto& v = left[jj];
      for (std::size_t c = jj; c < n; ++c) {
        auto row = ut.row(c);
        double s = 0.0;
        for (std::size_t r = 0; r < v.size(); ++r) s += row[jj + r] * v[r];
        s *= tl;
        for (std::size_t r = 0; r < v.size(); ++r) row[jj + r] -= s * v[r];
      }
    }
    for (std::size_t jj = n >= 2 ? n - 1 : 0; jj-- > 0;) {
      const double tr = tau_right[jj];
      if (tr == 0.0) continue;
      const auto& v = right[jj];
      for (std::size_t c = jj + 1; c < n; ++c) {
        auto row = vt.row(c);
        double s = 0.0;
        for (std::size_t r = 0; r < v.size(); ++r) s += row[jj + 1 + r] * v[r];
        s *= tr;
        for (std::size_t r = 0; r < v.size(); ++r) row[jj + 1 + r] -= s * v[r];
      }
    }
  }

  const double eps = std::numeric_limits<double>::epsilon();
  double anorm = 0.0;
  for (std::size_t i = 0; i < n; ++i) anorm = std::max(anorm, std::abs(d[i]) + (i + 1 < n ? std::abs(e[i]) : 0.0));
  const double tol = eps * anorm;
  const std::size_t cap = static_cast<std::size_t>(svd_max_sweeps) * std::max<std::size_t>(n, 1);
  std::size_t steps = 0;

  std::size_t hi = n - 1;
  while (hi > 0) {
    for (std::size_t i = 0; i < hi; ++i) {
      if (std::abs(e[i]) <= tol || std::abs(e[i]) <= eps * (std::abs(d[i]) + std::abs(d[i + 1]))) e[i] = 0.0;
    }
    if (e[hi - 1] == 0.0) {
      --hi;
      continue;
    }
    std::size_t lo = hi - 1;
    while (lo > 0 && e[lo - 1] != 0.0) --lo;

    bool chased = false;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (std::abs(d[i]) > tol) continue;
      d[i] = 0.0;
      double c, s, r;
      if (i < hi) {
        // Zero row i's superdiagonal with left rotations against rows i+1..hi.
        double f = e[i];
        e[i] = 0.0;
        for (std::size_t j = i + 1; j <= hi; ++j) {
          givens(d[j], f, c, s, r);
          d[j] = r;
          if (want_vectors) rotate_rows(ut, j, i, c, s);
          if (j < hi) {
            f = -s * e[j];
            e[j] = c * e[j];
          }
        }
      } else {
        // Zero column hi's superdiagonal with right rotations against columns hi-1..lo.
        double f = e[hi - 1];
        e[hi - 1] = 0.0;
        for (std::size_t j = hi; j-- > lo;) {
          givens(d[j], f, c, s, r);
          d[j] = r;
          if (want_vectors) rotate_rows(vt, j, hi, c, s);
          if (j > lo) {
            f = -s * e[j - 1];
            e[j - 1] = c * e[j - 1];
          }
        }
      }
      chased = true;
      break;
    }
    if (chased) continue;

    if (++steps > cap) {
      double residual = 0.0;
      for (double v : e) residual = std::max(residual, std::abs(v));
      throw convergence_error("svd: implicit QR did not converge", residual);
    }

    // Wilkinson shift from the trailing 2x2 block of B^T B.
    const double dm = d[hi - 1], dn = d[hi], em = e[hi - 1];
    const double el = hi - 1 > lo ? e[hi - 2] : 0.0;
    const double ta = dm * dm + el * el;
    const double tb = dm * em;
    const double tc = dn * dn + em * em;
    double mu = tc;
    if (tb != 0.0) {
      const double delta = 0.5 * (ta - tc);
      mu = tc - tb * tb / (delta + std::copysign(std::hypot(delta, tb), delta));
    }

    double f = d[lo] * d[lo] - mu;
    double g = d[lo] * e[lo];
    for (std::size_t k = lo; k < hi; ++k) {
      double c, s, r;
      givens(f, g, c, s, r);
      if (k > lo) e[k - 1] = r;
      f = c * d[k] + s * e[k];
      e[k] = c * e[k] - s * d[k];
      g = s * d[k + 1];
      d[k + 1] = c * d[k + 1];
      if (want_vectors) rotate_rows(vt, k, k + 1, c, s);

      givens(f, g, c, s, r);
      d[k] = r;
      f = c * e[k] + s * d[k + 1];
      d[k + 1] = c * d[k + 1] - s * e[k];
      if (k + 1 < hi) {
        g = s * e[k + 1];
        e[k + 1] = c * e[k + 1];
      }
      if (want_vectors) rotate_rows(ut, k, k + 1, c, s);
    }
    e[hi - 1] = f;
  }

  return finish_svd(std::move(d), std::move(ut), std::move(vt), want_vectors);
}

inline SvdResult swap_sides(SvdResult r) {
  std::swap(r.u, r.v);
  return r;
}

}  // namespace detail

/// Thin SVD by Householder bidiagonalization and implicit-shift QR.
/// Throws invalid_input_error on non-finite input and convergence_error when
/// the QR iteration exceeds its cap.
inline SvdResult svd(const DenseMatrix& a) {
  detail::require_svd_input(a);
  if (a.rows() >= a.cols()) return detail::golub_kahan_tall(a, true);
  return detail::swap_sides(detail::golub_kahan_tall(a.transposed(), true));
}

/// Singular values only; skips accumulation of the singular vectors.
inline Spectrum singular_values(const DenseMatrix& a) {
  detail::require_svd_input(a);
  if (a.rows() >= a.cols()) return detail::golub_kahan_tall(a, false).sigma;
  return detail::golub_kahan_tall(a.transposed(), false).sigma;
}

/// One-sided (Hestenes) Jacobi SVD. Slower than svd() but computes small
/// singular values to high relative accuracy; also serves as an independent
/// cross-check of the bidiagonal route.
inline SvdResult jacobi_svd(const DenseMatrix& a) {
  detail::require_svd_input(a);
  if (a.rows() < a.cols()) return detail::swap_sides(jacobi_svd(a.transposed()));

  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  DenseMatrix wt = a.transposed();  // rows are the working columns
  DenseMatrix vt = DenseMatrix::identity(n);
  const double tol = std::numeric_limits<double>::epsilon() * std::sqrt(static_cast<double>(m));

  auto dot = [](std::span<const double> x, std::span<const double> y) {
    return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
  };

  double off = 0.0;
  int sweep = 0;
  for (; sweep < svd_max_sweeps; ++sweep) {
    off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(wt.row(p), wt.row(p));
        const double beta = dot(wt.row(q), wt.row(q));
        const double gamma = dot(wt.row(p), wt.row(q));
        if (alpha == 0.0 || beta == 0.0) continue;
        const double coupling = std::abs(gamma) / std::sqrt(alpha * beta);
        if (coupling <= tol) continue;
        off = std::max(off, coupling);
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        detail::rotate_rows(wt, p, q, c, -s);
        detail::rotate_rows(vt, p, q, c, -s);
      }
    }
    if (off <= tol) break;
  }
  if (sweep == svd_max_sweeps) throw convergence_error("jacobi_svd: sweep cap reached", off);

  std::vector<double> sigma(n);
  double smax = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sigma[j] = std::sqrt(dot(wt.row(j), wt.row(j)));
    smax = std::max(smax, sigma[j]);
  }
  std::vector<bool> missing(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    if (sigma[j] == 0.0 || sigma[j] <= smax * std::numeric_limits<double>::epsilon() * static_cast<double>(m)) {
      missing[j] = true;
      continue;
    }
    for (double& x : wt.row(j)) x /= sigma[j];
  }
  detail::complete_orthonormal_rows(wt, missing);
  return detail::finish_svd(std::move(sigma), std::move(wt), std::move(vt), true);
}

/// Eigenvalues of a symmetric matrix, descending, by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(const DenseMatrix& s) {
  if (s.rows() != s.cols()) throw std::invalid_argument("symmetric_eigenvalues: matrix is not square");
  if (!s.all_finite()) throw invalid_input_error("symmetric_eigenvalues: non-finite entries");
  const std::size_t n = s.rows();
  DenseMatrix a = s;
  const double scale = frobenius_norm(a);
  const double eps = std::numeric_limits<double>::epsilon();
  double off = 0.0;
  int sweep = 0;
  for (; sweep < svd_max_sweeps; ++sweep) {
    off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    }
    off = std::sqrt(off);
    if (off <= eps * scale || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        detail::rotate_rows(a, p, q, c, -sn);
      }
    }
  }
  if (sweep == svd_max_sweeps) throw convergence_error("symmetric_eigenvalues: sweep cap reached", off);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a(i, i);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// Y = U_k diag(sigma_1..k), Z = V_k, so that Y Z^T = A_k.
inline LowRankFactors truncate_rank(const SvdResult& r, std::size_t k) {
  if (k < 1 || k > r.sigma.size()) {
    throw std::invalid_argument("truncate_rank: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(r.sigma.size()) + "]");
  }
  LowRankFactors f;
  f.k = k;
  f.y = r.u.leading_columns(k);
  for (std::size_t i = 0; i < f.y.rows(); ++i) {
    for (std::size_t j = 0; j < k; ++j) f.y(i, j) *= r.sigma[j];
  }
  f.z = r.v.leading_columns(k);
  return f;
}

/// Orthonormal basis (as columns) of the row space of M. Directions with
/// singular value below rank_tol * sigma_max are dropped.
inline DenseMatrix orthonormal_rowspace(const DenseMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return DenseMatrix(m.cols(), 0);
  const SvdResult r = svd(m);
  const double smax = r.sigma.size() > 0 ? r.sigma[0] : 0.0;
  std::size_t rank = 0;
  while (rank < r.sigma.size() && smax > 0.0 && r.sigma[rank] > rank_tol * smax) ++rank;
  return r.v.leading_columns(rank);
}

/// Appends unit columns to an orthonormal basis until it has `target` columns.
inline DenseMatrix extend_orthonormal_columns(const DenseMatrix& q, std::size_t target) {
  if (q.cols() >= target) return q;
  DenseMatrix rows(target, q.rows());
  std::vector<bool> missing(target, true);
  for (std::size_t j = 0; j < q.cols(); ++j) {
    for (std::size_t i = 0; i < q.rows(); ++i) rows(j, i) = q(i, j);
    missing[j] = false;
  }
  detail::complete_orthonormal_rows(rows, missing);
  return rows.transposed();
}

}  // namespace sketchlra
