#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rsvd/errors.hpp"

namespace rsvd::mr {

// Keyed record with an opaque payload; the consuming job declares the schema.
struct Record {
  std::uint64_t key = 0;
  std::string payload;

  bool operator==(const Record&) const = default;
};

struct JobStats {
  std::uint64_t input_records = 0;
  std::uint64_t map_emits = 0;
  std::uint64_t shuffle_bytes = 0;
  std::uint64_t passes_over_a = 0;
  std::uint64_t dropped_join_keys = 0;

  void absorb(const JobStats& other) {
    input_records += other.input_records;
    map_emits += other.map_emits;
    shuffle_bytes += other.shuffle_bytes;
    passes_over_a += other.passes_over_a;
    dropped_join_keys += other.dropped_join_keys;
  }
};

using Mapper = std::function<std::vector<Record>(std::uint64_t key, const std::string& payload)>;
using JoinMapper = std::function<std::vector<Record>(std::uint64_t key, const std::string& left,
                                                     const std::string& right)>;
using Reducer = std::function<std::vector<Record>(std::uint64_t key,
                                                  const std::vector<std::string>& payloads)>;
using FinalLocalReduce = std::function<std::vector<Record>(const std::vector<Record>&)>;

// A job with no reducer passes mapper output through unchanged, in input
// order. With a reducer, every key is reduced exactly once, with its payloads
// delivered sorted by (origin record key, origin sequence); reducer outputs
// are concatenated in ascending key order. This fixes the floating-point
// reduction order, so results are identical at any partition count.
struct JobSpec {
  std::string name;
  Mapper mapper;
  Reducer reducer;                      // optional
  FinalLocalReduce final_local_reduce;  // optional; runs once, single-threaded
  std::size_t partitions = 1;
};

struct JobResult {
  std::vector<Record> output;
  JobStats stats;
};

JobResult run_job(const JobSpec& spec, const std::vector<Record>& input);

struct JoinedRow {
  std::uint64_t key = 0;
  std::string left;
  std::string right;
};

struct JoinResult {
  std::vector<JoinedRow> rows;          // ascending key order
  std::uint64_t dropped_keys = 0;       // keys present on only one side
};

// Inner join on key; each side must have unique keys (DuplicateJoinKey).
JoinResult join_rows(const std::vector<Record>& left, const std::vector<Record>& right);

// Same contract as JobSpec, but the mapper sees co-grouped (left, right) pairs.
struct JoinJobSpec {
  std::string name;
  JoinMapper mapper;
  Reducer reducer;
  FinalLocalReduce final_local_reduce;
  std::size_t partitions = 1;
};

JobResult run_join_job(const JoinJobSpec& spec, const std::vector<Record>& left,
                       const std::vector<Record>& right);

// RSVD_WORKERS env var, else hardware concurrency, else 1.
std::size_t default_partitions();

}  // namespace rsvd::mr
