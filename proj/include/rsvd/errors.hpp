#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rsvd {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

// Parse failure; line is 1-based when the record came from a file, 0 otherwise.
class MalformedRecord : public Error {
 public:
  explicit MalformedRecord(const std::string& msg, std::uint64_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}

  std::uint64_t line() const { return line_; }

 private:
  std::uint64_t line_;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

class DuplicateJoinKey : public Error {
 public:
  using Error::Error;
};

// Wraps the first mapper/reducer failure of a job with record context.
// The original exception stays reachable through cause().
class JobError : public Error {
 public:
  JobError(const std::string& msg, std::exception_ptr cause)
      : Error(msg), cause_(std::move(cause)) {}

  const std::exception_ptr& cause() const { return cause_; }

 private:
  std::exception_ptr cause_;
};

// The sketch (or its Gram matrix) lost rank; carries remediation guidance.
class RankDeficientSketch : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

}  // namespace rsvd
