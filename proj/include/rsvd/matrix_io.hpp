#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rsvd/rows.hpp"
#include "rsvd/small_matrix.hpp"

namespace rsvd {

// Shortest decimal form that parses back to the same binary64.
std::string format_double(double value);

// Strict full-token parse; rejects NaN/Inf and trailing garbage.
double parse_double(std::string_view token, std::uint64_t line = 0);

// "<key>\t<col>:<val> <col>:<val> ...". Out-of-order pairs are sorted,
// explicit zero values normalize to absence, duplicates are an error.
SparseRow parse_sparse_row(std::string_view line, std::uint64_t line_no = 0);
std::string serialize_sparse_row(const SparseRow& row);

// "<key>\t<v1> <v2> ... <vk>".
DenseRow parse_dense_row(std::string_view line, std::uint64_t line_no = 0);
std::string serialize_dense_row(const DenseRow& row);

// First line "rows cols", then one line per row.
SmallMatrix parse_small_matrix(std::string_view text);
std::string serialize_small_matrix(const SmallMatrix& m);

std::vector<SparseRow> read_sparse_file(const std::string& path);
void write_sparse_file(const std::string& path, const std::vector<SparseRow>& rows);

std::vector<DenseRow> read_dense_file(const std::string& path);
// Rows are written in ascending key order.
void write_dense_file(const std::string& path, std::vector<DenseRow> rows);

SmallMatrix read_small_matrix_file(const std::string& path);
void write_small_matrix_file(const std::string& path, const SmallMatrix& m);

/// Synthetic test matrix: a sum of `rank` random outer products, the i-th
/// weighted 2^-i, with each entry kept with probability `density`.
/// Deterministic in `seed`.
std::vector<SparseRow> generate_synthetic(std::uint64_t m, std::uint64_t n,
                                          std::uint64_t rank, double density,
                                          std::uint64_t seed);

}  // namespace rsvd
