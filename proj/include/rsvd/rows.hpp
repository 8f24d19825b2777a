#pragma once

#include <cstdint>
#include <vector>

namespace rsvd {

struct SparseEntry {
  std::uint64_t col = 0;
  double value = 0.0;

  bool operator==(const SparseEntry&) const = default;
};

// One row of the sparse input matrix A. Entries are sorted by column id and
// hold only nonzero values; a missing column is an implicit zero.
struct SparseRow {
  std::uint64_t key = 0;
  std::vector<SparseEntry> entries;

  bool operator==(const SparseRow&) const = default;
};

// One row of a dense m x k or n x k matrix (Y, Q, U, V, B^T).
struct DenseRow {
  std::uint64_t key = 0;
  std::vector<double> values;

  bool operator==(const DenseRow&) const = default;
};

struct MatrixDims {
  std::uint64_t m = 0;  // row count of A (distinct keys)
  std::uint64_t n = 0;  // column count of A (max column id + 1)
  std::uint64_t k = 0;  // target rank
};

}  // namespace rsvd
