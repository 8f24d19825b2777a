#include "rsvd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace rsvd::oracle {

namespace {

constexpr int kOracleSweepCap = 100;
constexpr double kRotationThreshold = 1e-15;

// One-sided Jacobi over column-major storage, column-cyclic pivot order,
// atan2-based rotation angles. Runs until a full sweep rotates nothing.
void jacobi_orthogonalize(std::vector<std::vector<double>>& cols,
                          std::vector<std::vector<double>>& v_cols) {
  const std::size_t n = cols.size();
  for (int sweep = 0; sweep < kOracleSweepCap; ++sweep) {
    bool rotated = false;
    for (std::size_t q = 1; q < n; ++q) {
      for (std::size_t p = 0; p < q; ++p) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < cols[p].size(); ++i) {
          alpha += cols[p][i] * cols[p][i];
          beta += cols[q][i] * cols[q][i];
          gamma += cols[p][i] * cols[q][i];
        }
        if (std::fabs(gamma) <= kRotationThreshold * std::sqrt(alpha * beta)) continue;

        const double theta = 0.5 * std::atan2(2.0 * gamma, beta - alpha);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (std::size_t i = 0; i < cols[p].size(); ++i) {
          const double xp = cols[p][i], xq = cols[q][i];
          cols[p][i] = c * xp - s * xq;
          cols[q][i] = s * xp + c * xq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v_cols[p][i], vq = v_cols[q][i];
          v_cols[p][i] = c * vp - s * vq;
          v_cols[q][i] = s * vp + c * vq;
        }
        rotated = true;
      }
    }
    if (!rotated) return;
  }
  throw NoConvergence("dense_svd_oracle: no convergence within " +
                      std::to_string(kOracleSweepCap) + " sweeps");
}

void fill_orthonormal_completion(SmallMatrix& u, std::size_t col) {
  const std::size_t m = u.rows();
  for (std::size_t basis = 0; basis < m; ++basis) {
    std::vector<double> cand(m, 0.0);
    cand[basis] = 1.0;
    for (std::size_t other = 0; other < u.cols(); ++other) {
      if (other == col) continue;
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += u(i, other) * cand[i];
      for (std::size_t i = 0; i < m; ++i) cand[i] -= dot * u(i, other);
    }
    double norm = 0.0;
    for (double x : cand) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.5) {
      for (std::size_t i = 0; i < m; ++i) u(i, col) = cand[i] / norm;
      return;
    }
  }
  throw NoConvergence("dense_svd_oracle: basis completion failed");
}

void apply_sign_convention(SmallMatrix& u, SmallMatrix& v) {
  for (std::size_t j = 0; j < u.cols(); ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < u.rows(); ++i) {
      if (std::fabs(u(i, j)) > best) {
        best = std::fabs(u(i, j));
        arg = i;
      }
    }
    if (u(arg, j) < 0.0) {
      for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
      for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
    }
  }
}

SingularTriple svd_tall(const SmallMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();

  std::vector<std::vector<double>> cols(n, std::vector<double>(m));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) cols[j][i] = a(i, j);
  }
  std::vector<std::vector<double>> v_cols(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) v_cols[j][j] = 1.0;

  jacobi_orthogonalize(cols, v_cols);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    norms[j] = std::sqrt(
        std::inner_product(cols[j].begin(), cols[j].end(), cols[j].begin(), 0.0));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SingularTriple out;
  out.u = SmallMatrix(m, n);
  out.v = SmallMatrix(n, n);
  out.sigma.resize(n);
  const double sigma_max = norms[order[0]];
  const double floor = 1e-14 * sigma_max;

  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = norms[src];
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = v_cols[src][i];
    if (norms[src] > floor) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, j) = cols[src][i] / norms[src];
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (out.sigma[j] <= floor) fill_orthonormal_completion(out.u, j);
  }
  apply_sign_convention(out.u, out.v);
  return out;
}

}  // namespace

SingularTriple dense_svd_oracle(const SmallMatrix& a) {
  if (static_cast<std::uint64_t>(a.rows()) * a.cols() > kMaxOracleEntries) {
    throw TooLarge("dense_svd_oracle: " + std::to_string(a.rows()) + "x" +
                   std::to_string(a.cols()) + " exceeds the verification cap");
  }
  if (a.rows() >= a.cols()) return svd_tall(a);
  SingularTriple t = svd_tall(transpose(a));
  std::swap(t.u, t.v);
  return t;
}

SmallMatrix materialize(const std::vector<SparseRow>& a) {
  if (a.empty()) throw InvalidParams("materialize: no input rows");
  std::map<std::uint64_t, const SparseRow*> by_key;
  std::uint64_t max_col = 0;
  bool any = false;
  for (const SparseRow& row : a) {
    if (!by_key.emplace(row.key, &row).second) {
      throw InvalidParams("materialize: duplicate row key " + std::to_string(row.key));
    }
    for (const SparseEntry& e : row.entries) {
      max_col = std::max(max_col, e.col);
      any = true;
    }
  }
  const std::uint64_t m = by_key.size();
  const std::uint64_t n = any ? max_col + 1 : 1;
  if (m * n > kMaxOracleEntries) {
    throw TooLarge("materialize: " + std::to_string(m) + "x" + std::to_string(n) +
                   " exceeds the verification cap");
  }
  SmallMatrix out(m, n);
  std::size_t i = 0;
  for (const auto& [key, row] : by_key) {
    for (const SparseEntry& e : row->entries) out(i, e.col) = e.value;
    ++i;
  }
  return out;
}

ErrorReport compare(const std::vector<SparseRow>& a, const SvdResult& result,
                    std::uint64_t k) {
  if (result.sigma.size() != k) {
    throw InvalidParams("compare: sigma has " + std::to_string(result.sigma.size()) +
                        " values, expected " + std::to_string(k));
  }
  const SmallMatrix dense = materialize(a);
  const std::size_t m = dense.rows();
  const std::size_t n = dense.cols();

  if (result.u_rows.size() != m) {
    throw InvalidParams("compare: U has " + std::to_string(result.u_rows.size()) +
                        " rows, input has " + std::to_string(m));
  }
  std::vector<const DenseRow*> u_sorted;
  u_sorted.reserve(m);
  for (const DenseRow& row : result.u_rows) u_sorted.push_back(&row);
  std::sort(u_sorted.begin(), u_sorted.end(),
            [](const DenseRow* x, const DenseRow* y) { return x->key < y->key; });

  SmallMatrix u(m, k);
  for (std::size_t i = 0; i < m; ++i) {
    if (u_sorted[i]->values.size() != k) {
      throw InvalidParams("compare: U row " + std::to_string(u_sorted[i]->key) +
                          " has wrong width");
    }
    for (std::uint64_t j = 0; j < k; ++j) u(i, j) = u_sorted[i]->values[j];
  }

  const SingularTriple truth = dense_svd_oracle(dense);

  ErrorReport report;
  report.max_orthonormality_defect_u = max_abs_diff(
      matmul(transpose(u), u), SmallMatrix::identity(k));

  report.sigma_rel_errors.resize(k);
  const double sigma_top = truth.sigma.empty() ? 0.0 : truth.sigma[0];
  for (std::uint64_t i = 0; i < k; ++i) {
    const double oracle_sigma = i < truth.sigma.size() ? truth.sigma[i] : 0.0;
    // Relative to the oracle value, floored at machine scale of the top
    // singular value so exactly-zero tails stay finite.
    const double denom = std::max(oracle_sigma, std::max(1e-15 * sigma_top, 1e-300));
    report.sigma_rel_errors[i] = std::fabs(result.sigma[i] - oracle_sigma) / denom;
  }

  double tail = 0.0;
  for (std::size_t i = k; i < truth.sigma.size(); ++i) tail += truth.sigma[i] * truth.sigma[i];
  report.optimal_rank_k_error = std::sqrt(tail);

  if (result.v_rows) {
    SmallMatrix v(n, k);
    for (const DenseRow& row : *result.v_rows) {
      if (row.key >= n) {
        throw InvalidParams("compare: V row key " + std::to_string(row.key) +
                            " outside column range");
      }
      if (row.values.size() != k) {
        throw InvalidParams("compare: V row " + std::to_string(row.key) + " has wrong width");
      }
      for (std::uint64_t j = 0; j < k; ++j) v(row.key, j) = row.values[j];
    }
    report.max_orthonormality_defect_v = max_abs_diff(
        matmul(transpose(v), v), SmallMatrix::identity(k));

    double err_sq = 0.0, a_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double recon = 0.0;
        for (std::uint64_t l = 0; l < k; ++l) recon += u(i, l) * result.sigma[l] * v(j, l);
        const double diff = dense(i, j) - recon;
        err_sq += diff * diff;
        a_sq += dense(i, j) * dense(i, j);
      }
    }
    report.rel_frobenius_reconstruction =
        std::sqrt(err_sq) / std::max(std::sqrt(a_sq), 1e-300);
  }
  return report;
}

bool verify_passes(const ErrorReport& report, double a_frobenius,
                   const VerifyTolerances& tol) {
  if (report.max_orthonormality_defect_u > tol.orthonormality) return false;
  if (report.max_orthonormality_defect_v &&
      *report.max_orthonormality_defect_v > tol.orthonormality) {
    return false;
  }
  for (double err : report.sigma_rel_errors) {
    if (err > tol.sigma_rel) return false;
  }
  if (report.rel_frobenius_reconstruction) {
    const double budget =
        std::max(tol.reconstruction,
                 2.0 * report.optimal_rank_k_error / std::max(a_frobenius, 1e-300));
    if (*report.rel_frobenius_reconstruction > budget) return false;
  }
  return true;
}

}  // namespace rsvd::oracle
