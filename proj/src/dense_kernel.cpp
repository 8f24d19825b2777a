#include "rsvd/dense_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rsvd {

namespace {

constexpr double kSymmetryRelTol = 1e-12;
constexpr double kPivotRelTol = 1e-13;
constexpr int kSvdSweepCap = 60;
constexpr double kSvdConvergenceTol = 1e-14;

void require_square(const SmallMatrix& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch(std::string(who) + ": matrix is " +
                            std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", need square");
  }
}

void require_finite(const SmallMatrix& m, const char* who) {
  for (double x : m.data()) {
    if (!std::isfinite(x)) {
      throw InvalidParams(std::string(who) + ": non-finite entry");
    }
  }
}

}  // namespace

SmallMatrix cholesky(const SmallMatrix& c) {
  require_square(c, "cholesky");
  require_finite(c, "cholesky");
  const std::size_t n = c.rows();

  const double scale = max_abs(c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::fabs(c(i, j) - c(j, i)) > kSymmetryRelTol * scale) {
        throw NotSymmetric("cholesky: entry (" + std::to_string(i) + "," +
                           std::to_string(j) + ") differs from its mirror");
      }
    }
  }

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, c(i, i));
  const double pivot_floor = kPivotRelTol * max_diag;

  SmallMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = c(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0 || d <= pivot_floor) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) +
                                " is " + std::to_string(d) +
                                ", matrix is not positive definite");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = c(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

SmallMatrix upper_tri_inverse(const SmallMatrix& r) {
  require_square(r, "upper_tri_inverse");
  require_finite(r, "upper_tri_inverse");
  const std::size_t n = r.rows();

  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (r(i, j) != 0.0) {
        throw InvalidParams("upper_tri_inverse: nonzero below the diagonal");
      }
    }
  }

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_diag = std::max(max_diag, std::fabs(r(i, i)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(r(i, i)) <= kPivotRelTol * max_diag) {
      throw SingularMatrix("upper_tri_inverse: diagonal entry " +
                           std::to_string(i) + " is negligible");
    }
  }

  // Column-by-column back substitution; the result is upper triangular.
  SmallMatrix x(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    x(j, j) = 1.0 / r(j, j);
    for (std::size_t ii = j; ii-- > 0;) {
      double s = 0.0;
      for (std::size_t l = ii + 1; l <= j; ++l) s += r(ii, l) * x(l, j);
      x(ii, j) = -s / r(ii, ii);
    }
  }
  return x;
}

namespace {

// Orthonormal completion for a column whose singular value vanished: take the
// first coordinate vector whose residual against the already-placed columns
// keeps a workable norm.
void complete_column(SmallMatrix& u, std::size_t col) {
  const std::size_t n = u.rows();
  std::vector<double> cand(n);
  for (std::size_t basis = 0; basis < n; ++basis) {
    std::fill(cand.begin(), cand.end(), 0.0);
    cand[basis] = 1.0;
    for (std::size_t other = 0; other < u.cols(); ++other) {
      if (other == col) continue;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += u(i, other) * cand[i];
      for (std::size_t i = 0; i < n; ++i) cand[i] -= dot * u(i, other);
    }
    double norm = 0.0;
    for (double x : cand) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.5) {
      for (std::size_t i = 0; i < n; ++i) u(i, col) = cand[i] / norm;
      return;
    }
  }
  throw NoConvergence("small_svd: failed to complete an orthonormal basis");
}

}  // namespace

SingularTriple small_svd(const SmallMatrix& m) {
  require_square(m, "small_svd");
  require_finite(m, "small_svd");
  const std::size_t n = m.rows();

  SmallMatrix w = m;
  SmallMatrix v = SmallMatrix::identity(n);

  const double fro = frobenius_norm(m);
  // Convergence is measured on the Gram matrix of the working columns, so
  // the threshold lives at the squared scale of the input.
  const double off_threshold = kSvdConvergenceTol * fro * fro;

  bool converged = (fro == 0.0);
  for (int sweep = 0; sweep < kSvdSweepCap && !converged; ++sweep) {
    double off_sq = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          alpha += w(i, p) * w(i, p);
          beta += w(i, q) * w(i, q);
          gamma += w(i, p) * w(i, q);
        }
        off_sq += gamma * gamma;
        if (gamma == 0.0) continue;

        const double tau = (beta - alpha) / (2.0 * gamma);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = cs * wp - sn * wq;
          w(i, q) = sn * wp + cs * wq;
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = cs * vp - sn * vq;
          v(i, q) = sn * vp + cs * vq;
        }
      }
    }
    converged = std::sqrt(off_sq) <= off_threshold;
  }
  if (!converged) {
    throw NoConvergence("small_svd: no convergence within " +
                        std::to_string(kSvdSweepCap) + " sweeps");
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w(i, j) * w(i, j);
    norms[j] = std::sqrt(s);
  }

  // Stable sort by descending norm so equal singular values keep sweep order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return norms[a] > norms[b];
  });

  SingularTriple out;
  out.u = SmallMatrix(n, n);
  out.v = SmallMatrix(n, n);
  out.sigma.resize(n);
  const double sigma_max = norms[order[0]];
  const double zero_floor = 1e-14 * sigma_max;

  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = norms[src];
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = v(i, src);
    if (norms[src] > zero_floor) {
      for (std::size_t i = 0; i < n; ++i) out.u(i, j) = w(i, src) / norms[src];
    }
  }
  // Columns below the floor carry no usable direction; rebuild them so u
  // stays orthogonal.
  for (std::size_t j = 0; j < n; ++j) {
    if (out.sigma[j] <= zero_floor) complete_column(out.u, j);
  }

  for (std::size_t j = 0; j < n; ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::fabs(out.u(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (out.u(arg, j) < 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        out.u(i, j) = -out.u(i, j);
        out.v(i, j) = -out.v(i, j);
      }
    }
  }
  return out;
}

}  // namespace rsvd
