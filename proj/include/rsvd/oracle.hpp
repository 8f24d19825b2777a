#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rsvd/dense_kernel.hpp"
#include "rsvd/rows.hpp"
#include "rsvd/rsvd_jobs.hpp"
#include "rsvd/small_matrix.hpp"

namespace rsvd::oracle {

// Dense matrices above this entry count are refused rather than sampled.
inline constexpr std::uint64_t kMaxOracleEntries = 1000000;

/// Full SVD of a dense m x n matrix by a self-contained one-sided Jacobi
/// sweep. Deliberately a separate implementation from small_svd: agreement
/// between the two is evidence, not tautology. Throws TooLarge above the
/// entry cap.
SingularTriple dense_svd_oracle(const SmallMatrix& a);

/// Sparse rows to a dense matrix; rows ordered by ascending key, one column
/// per id up to the largest seen. Throws TooLarge above the entry cap.
SmallMatrix materialize(const std::vector<SparseRow>& a);

struct ErrorReport {
  std::optional<double> rel_frobenius_reconstruction;  // absent without V
  double max_orthonormality_defect_u = 0.0;
  std::optional<double> max_orthonormality_defect_v;   // absent without V
  std::vector<double> sigma_rel_errors;
  double optimal_rank_k_error = 0.0;
};

/// Measures a pipeline result against the dense oracle of the same input.
ErrorReport compare(const std::vector<SparseRow>& a, const SvdResult& result,
                    std::uint64_t k);

struct VerifyTolerances {
  double orthonormality = 1e-8;
  double sigma_rel = 1e-6;
  double reconstruction = 1e-8;
};

/// Pass rule for the verify command: orthonormality and sigma tolerances as
/// given; reconstruction must beat max(tolerance, 2x the optimal rank-k
/// error relative to ||A||_F), so inputs with a genuine residual tail are
/// judged against the best any rank-k factorization could do.
bool verify_passes(const ErrorReport& report, double a_frobenius,
                   const VerifyTolerances& tol);

}  // namespace rsvd::oracle
