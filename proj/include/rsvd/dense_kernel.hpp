#pragma once

#include <vector>

#include "rsvd/small_matrix.hpp"

namespace rsvd {

// m = u * diag(sigma) * v^T with u, v orthogonal and sigma non-increasing.
struct SingularTriple {
  SmallMatrix u;
  std::vector<double> sigma;
  SmallMatrix v;
};

/// Cholesky factor L (lower triangular, positive diagonal) of a symmetric
/// positive definite matrix: c = L * L^T.
/// Throws NotSymmetric, NotPositiveDefinite.
SmallMatrix cholesky(const SmallMatrix& c);

/// Inverse of an upper triangular matrix by back substitution.
/// Throws SingularMatrix when a diagonal entry is negligible.
SmallMatrix upper_tri_inverse(const SmallMatrix& r);

/// SVD of a square matrix by one-sided Jacobi rotations (cyclic-by-row
/// pivot order, 60-sweep cap). Sign convention: the largest-magnitude entry
/// of each u column is non-negative, ties broken by lowest row index; v is
/// flipped along with u so the product is unchanged. Zero singular values
/// stay in place and their u columns are completed to an orthonormal basis.
/// Throws NoConvergence if the sweep cap is hit.
SingularTriple small_svd(const SmallMatrix& m);

}  // namespace rsvd
