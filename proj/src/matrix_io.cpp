#include "rsvd/matrix_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rsvd/errors.hpp"
#include "rsvd/rng.hpp"

namespace rsvd {

namespace {

std::uint64_t parse_uint(std::string_view token, const char* what,
                         std::uint64_t line) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw MalformedRecord(std::string("bad ") + what + " '" + std::string(token) + "'", line);
  }
  return out;
}

// Split on single spaces, dropping empty pieces so repeated or trailing
// spaces are tolerated.
std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t next = s.find(' ', pos);
    const std::size_t end = (next == std::string_view::npos) ? s.size() : next;
    if (end > pos) out.push_back(s.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw InvalidParams("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view token, std::uint64_t line) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw MalformedRecord("bad value '" + std::string(token) + "'", line);
  }
  if (!std::isfinite(out)) {
    throw MalformedRecord("non-finite value '" + std::string(token) + "'", line);
  }
  return out;
}

SparseRow parse_sparse_row(std::string_view line, std::uint64_t line_no) {
  line = strip_cr(line);
  const std::size_t tab = line.find('\t');
  if (tab == std::string_view::npos) {
    throw MalformedRecord("missing tab after row key", line_no);
  }
  SparseRow row;
  row.key = parse_uint(line.substr(0, tab), "row key", line_no);

  for (std::string_view token : split_spaces(line.substr(tab + 1))) {
    const std::size_t colon = token.find(':');
    if (colon == std::string_view::npos) {
      throw MalformedRecord("pair '" + std::string(token) + "' has no colon", line_no);
    }
    SparseEntry e;
    e.col = parse_uint(token.substr(0, colon), "column id", line_no);
    e.value = parse_double(token.substr(colon + 1), line_no);
    if (e.value == 0.0) continue;  // zeros are represented by absence
    row.entries.push_back(e);
  }

  std::stable_sort(row.entries.begin(), row.entries.end(),
                   [](const SparseEntry& a, const SparseEntry& b) { return a.col < b.col; });
  for (std::size_t i = 1; i < row.entries.size(); ++i) {
    if (row.entries[i].col == row.entries[i - 1].col) {
      throw MalformedRecord("duplicate column id " + std::to_string(row.entries[i].col), line_no);
    }
  }
  return row;
}

std::string serialize_sparse_row(const SparseRow& row) {
  std::string out = std::to_string(row.key);
  out.push_back('\t');
  for (std::size_t i = 0; i < row.entries.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(row.entries[i].col);
    out.push_back(':');
    out += format_double(row.entries[i].value);
  }
  return out;
}

DenseRow parse_dense_row(std::string_view line, std::uint64_t line_no) {
  line = strip_cr(line);
  const std::size_t tab = line.find('\t');
  if (tab == std::string_view::npos) {
    throw MalformedRecord("missing tab after row key", line_no);
  }
  DenseRow row;
  row.key = parse_uint(line.substr(0, tab), "row key", line_no);
  for (std::string_view token : split_spaces(line.substr(tab + 1))) {
    row.values.push_back(parse_double(token, line_no));
  }
  return row;
}

std::string serialize_dense_row(const DenseRow& row) {
  std::string out = std::to_string(row.key);
  out.push_back('\t');
  for (std::size_t i = 0; i < row.values.size(); ++i) {
    if (i) out.push_back(' ');
    out += format_double(row.values[i]);
  }
  return out;
}

SmallMatrix parse_small_matrix(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw MalformedRecord("empty matrix text", 1);
  const auto header = split_spaces(strip_cr(line));
  if (header.size() != 2) throw MalformedRecord("matrix header is not 'rows cols'", 1);
  const std::uint64_t rows = parse_uint(header[0], "row count", 1);
  const std::uint64_t cols = parse_uint(header[1], "column count", 1);
  if (rows == 0 || cols == 0) throw MalformedRecord("matrix dimensions must be >= 1", 1);

  SmallMatrix m(rows, cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw MalformedRecord("matrix text ends after " + std::to_string(i) + " rows", i + 1);
    }
    const auto tokens = split_spaces(strip_cr(line));
    if (tokens.size() != cols) {
      throw MalformedRecord("matrix row has " + std::to_string(tokens.size()) +
                            " values, expected " + std::to_string(cols), i + 2);
    }
    for (std::uint64_t j = 0; j < cols; ++j) {
      m(i, j) = parse_double(tokens[j], i + 2);
    }
  }
  return m;
}

std::string serialize_small_matrix(const SmallMatrix& m) {
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(' ');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<SparseRow> read_sparse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParams("cannot open " + path);
  std::vector<SparseRow> rows;
  std::string line;
  for (std::uint64_t line_no = 1; std::getline(in, line); ++line_no) {
    rows.push_back(parse_sparse_row(line, line_no));
  }
  return rows;
}

void write_sparse_file(const std::string& path, const std::vector<SparseRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidParams("cannot write " + path);
  for (const SparseRow& row : rows) out << serialize_sparse_row(row) << '\n';
}

std::vector<DenseRow> read_dense_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParams("cannot open " + path);
  std::vector<DenseRow> rows;
  std::string line;
  for (std::uint64_t line_no = 1; std::getline(in, line); ++line_no) {
    rows.push_back(parse_dense_row(line, line_no));
  }
  return rows;
}

void write_dense_file(const std::string& path, std::vector<DenseRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const DenseRow& a, const DenseRow& b) { return a.key < b.key; });
  std::ofstream out(path);
  if (!out) throw InvalidParams("cannot write " + path);
  for (const DenseRow& row : rows) out << serialize_dense_row(row) << '\n';
}

SmallMatrix read_small_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParams("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_small_matrix(buf.str());
}

void write_small_matrix_file(const std::string& path, const SmallMatrix& m) {
  std::ofstream out(path);
  if (!out) throw InvalidParams("cannot write " + path);
  out << serialize_small_matrix(m);
}

std::vector<SparseRow> generate_synthetic(std::uint64_t m, std::uint64_t n,
                                          std::uint64_t rank, double density,
                                          std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidParams("gen: need rows >= 1 and cols >= 1");
  if (rank > std::min(m, n)) throw InvalidParams("gen: rank exceeds min(rows, cols)");
  if (!(density > 0.0) || density > 1.0) throw InvalidParams("gen: density must be in (0, 1]");

  // Right factors, one n-vector per component.
  std::vector<std::vector<double>> right(rank, std::vector<double>(n));
  for (std::uint64_t i = 0; i < rank; ++i) {
    const std::uint64_t si = seed_mix(seed_mix(seed, 2), i);
    for (std::uint64_t c = 0; c < n; ++c) right[i][c] = normal_at(seed_mix(si, c));
  }

  std::vector<SparseRow> rows(m);
  std::vector<double> left(rank);
  for (std::uint64_t r = 0; r < m; ++r) {
    for (std::uint64_t i = 0; i < rank; ++i) {
      left[i] = std::ldexp(normal_at(seed_mix(seed_mix(seed_mix(seed, 1), i), r)),
                           -static_cast<int>(i));
    }
    SparseRow& row = rows[r];
    row.key = r;
    const std::uint64_t sr = seed_mix(seed_mix(seed, 3), r);
    for (std::uint64_t c = 0; c < n; ++c) {
      if (uniform_at(seed_mix(sr, c)) >= density) continue;
      double val = 0.0;
      for (std::uint64_t i = 0; i < rank; ++i) val += left[i] * right[i][c];
      if (val != 0.0) row.entries.push_back({c, val});
    }
  }
  return rows;
}

}  // namespace rsvd
