#pragma once

#include <cstddef>
#include <vector>

#include "rsvd/errors.hpp"

namespace rsvd {

// Dense row-major matrix small enough to live on one machine (k x k in the
// pipeline, up to the oracle cap in verification).
class SmallMatrix {
 public:
  SmallMatrix() = default;

  SmallMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw InvalidParams("SmallMatrix dimensions must be >= 1");
    }
  }

  static SmallMatrix identity(std::size_t n) {
    SmallMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const SmallMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

SmallMatrix matmul(const SmallMatrix& a, const SmallMatrix& b);
SmallMatrix transpose(const SmallMatrix& a);

double frobenius_norm(const SmallMatrix& a);
double max_abs(const SmallMatrix& a);

// max-norm of a - b; DimensionMismatch if shapes differ.
double max_abs_diff(const SmallMatrix& a, const SmallMatrix& b);

}  // namespace rsvd
