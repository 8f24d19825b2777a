#include "rsvd/mr_engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <thread>

namespace rsvd::mr {

namespace {

struct TaggedEmit {
  std::uint64_t emit_key;
  std::string payload;
  std::uint64_t origin_key;
  std::uint64_t origin_index;  // position in the job input stream
  std::uint32_t emit_seq;      // position within one mapper invocation
};

struct WorkerFailure {
  std::uint64_t order;  // input index (map) or group key (reduce)
  std::uint64_t record_key;
  std::exception_ptr error;
};

std::string what_of(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

// Keep the failure with the smallest order so the reported error does not
// depend on thread scheduling.
void note_failure(std::optional<WorkerFailure>& slot, WorkerFailure f) {
  if (!slot || f.order < slot->order) slot = std::move(f);
}

void run_partitioned(std::size_t partitions, std::size_t item_count,
                     const std::function<void(std::size_t worker, std::size_t begin,
                                              std::size_t end)>& body) {
  if (item_count == 0) return;
  const std::size_t workers = std::min(partitions, item_count);
  if (workers <= 1) {
    body(0, 0, item_count);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (item_count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(begin + chunk, item_count);
    threads.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
  for (std::thread& t : threads) t.join();
}

// Shared by run_job and run_join_job; `invoke(i)` calls the user mapper on
// input item i, `key_at(i)` names it for error context.
JobResult run_engine(const std::string& name, std::size_t partitions,
                     const Reducer& reducer, const FinalLocalReduce& final_local_reduce,
                     std::size_t item_count,
                     const std::function<std::vector<Record>(std::size_t)>& invoke,
                     const std::function<std::uint64_t(std::size_t)>& key_at) {
  if (partitions < 1) throw InvalidParams("job '" + name + "': partitions must be >= 1");

  JobResult result;
  result.stats.input_records = item_count;

  // --- map phase ---------------------------------------------------------
  const std::size_t workers = std::max<std::size_t>(1, std::min(partitions, item_count));
  std::vector<std::vector<TaggedEmit>> emits_per_worker(workers);
  std::vector<std::optional<WorkerFailure>> map_failures(workers);

  run_partitioned(partitions, item_count, [&](std::size_t w, std::size_t begin, std::size_t end) {
    auto& local = emits_per_worker[w];
    for (std::size_t i = begin; i < end; ++i) {
      try {
        std::vector<Record> out = invoke(i);
        for (std::uint32_t seq = 0; seq < out.size(); ++seq) {
          local.push_back({out[seq].key, std::move(out[seq].payload), key_at(i), i, seq});
        }
      } catch (...) {
        note_failure(map_failures[w], {i, key_at(i), std::current_exception()});
        return;
      }
    }
  });

  std::optional<WorkerFailure> failure;
  for (auto& f : map_failures) {
    if (f) note_failure(failure, std::move(*f));
  }
  if (failure) {
    throw JobError("job '" + name + "': mapper failed on record key " +
                       std::to_string(failure->record_key) + " (input #" +
                       std::to_string(failure->order) + "): " + what_of(failure->error),
                   failure->error);
  }

  std::vector<TaggedEmit> emits;
  for (auto& local : emits_per_worker) {
    result.stats.map_emits += local.size();
    std::move(local.begin(), local.end(), std::back_inserter(emits));
  }
  emits_per_worker.clear();

  if (!reducer) {
    // Reduce is a no-op: pass mapper output through in input order. Worker
    // slices are contiguous, so concatenation already is that order.
    result.output.reserve(emits.size());
    for (TaggedEmit& e : emits) result.output.push_back({e.emit_key, std::move(e.payload)});
  } else {
    // --- shuffle ----------------------------------------------------------
    for (const TaggedEmit& e : emits) result.stats.shuffle_bytes += e.payload.size();
    std::sort(emits.begin(), emits.end(), [](const TaggedEmit& a, const TaggedEmit& b) {
      return std::tie(a.emit_key, a.origin_key, a.origin_index, a.emit_seq) <
             std::tie(b.emit_key, b.origin_key, b.origin_index, b.emit_seq);
    });

    struct Group {
      std::uint64_t key;
      std::vector<std::string> payloads;
    };
    std::vector<Group> groups;
    for (std::size_t i = 0; i < emits.size();) {
      Group g{emits[i].emit_key, {}};
      std::size_t j = i;
      while (j < emits.size() && emits[j].emit_key == g.key) {
        g.payloads.push_back(std::move(emits[j].payload));
        ++j;
      }
      groups.push_back(std::move(g));
      i = j;
    }
    emits.clear();

    // --- reduce phase -----------------------------------------------------
    const std::size_t rworkers = std::max<std::size_t>(1, std::min(partitions, groups.size()));
    std::vector<std::vector<Record>> out_per_worker(rworkers);
    std::vector<std::optional<WorkerFailure>> reduce_failures(rworkers);

    run_partitioned(partitions, groups.size(),
                    [&](std::size_t w, std::size_t begin, std::size_t end) {
                      for (std::size_t g = begin; g < end; ++g) {
                        try {
                          std::vector<Record> out = reducer(groups[g].key, groups[g].payloads);
                          std::move(out.begin(), out.end(), std::back_inserter(out_per_worker[w]));
                        } catch (...) {
                          note_failure(reduce_failures[w],
                                       {groups[g].key, groups[g].key, std::current_exception()});
                          return;
                        }
                      }
                    });

    for (auto& f : reduce_failures) {
      if (f) note_failure(failure, std::move(*f));
    }
    if (failure) {
      throw JobError("job '" + name + "': reducer failed on key " +
                         std::to_string(failure->record_key) + ": " + what_of(failure->error),
                     failure->error);
    }

    // Groups are key-sorted and worker slices contiguous, so this is
    // ascending key order.
    for (auto& local : out_per_worker) {
      std::move(local.begin(), local.end(), std::back_inserter(result.output));
    }
  }

  if (final_local_reduce) {
    std::stable_sort(result.output.begin(), result.output.end(),
                     [](const Record& a, const Record& b) { return a.key < b.key; });
    result.output = final_local_reduce(result.output);
  }
  return result;
}

std::vector<Record> sorted_unique_side(const std::vector<Record>& side, const char* side_name) {
  std::vector<Record> sorted = side;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Record& a, const Record& b) { return a.key < b.key; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].key == sorted[i - 1].key) {
      throw DuplicateJoinKey(std::string(side_name) + " join input has duplicate key " +
                             std::to_string(sorted[i].key));
    }
  }
  return sorted;
}

}  // namespace

JobResult run_job(const JobSpec& spec, const std::vector<Record>& input) {
  if (!spec.mapper) throw InvalidParams("job '" + spec.name + "': mapper is required");
  return run_engine(
      spec.name, spec.partitions, spec.reducer, spec.final_local_reduce, input.size(),
      [&](std::size_t i) { return spec.mapper(input[i].key, input[i].payload); },
      [&](std::size_t i) { return input[i].key; });
}

JoinResult join_rows(const std::vector<Record>& left, const std::vector<Record>& right) {
  const std::vector<Record> l = sorted_unique_side(left, "left");
  const std::vector<Record> r = sorted_unique_side(right, "right");

  JoinResult out;
  std::size_t i = 0, j = 0;
  while (i < l.size() && j < r.size()) {
    if (l[i].key < r[j].key) {
      ++out.dropped_keys;
      ++i;
    } else if (r[j].key < l[i].key) {
      ++out.dropped_keys;
      ++j;
    } else {
      out.rows.push_back({l[i].key, l[i].payload, r[j].payload});
      ++i;
      ++j;
    }
  }
  out.dropped_keys += (l.size() - i) + (r.size() - j);
  return out;
}

JobResult run_join_job(const JoinJobSpec& spec, const std::vector<Record>& left,
                       const std::vector<Record>& right) {
  if (!spec.mapper) throw InvalidParams("job '" + spec.name + "': mapper is required");
  JoinResult joined = join_rows(left, right);
  JobResult result = run_engine(
      spec.name, spec.partitions, spec.reducer, spec.final_local_reduce, joined.rows.size(),
      [&](std::size_t i) {
        const JoinedRow& row = joined.rows[i];
        return spec.mapper(row.key, row.left, row.right);
      },
      [&](std::size_t i) { return joined.rows[i].key; });
  result.stats.dropped_join_keys = joined.dropped_keys;
  return result;
}

std::size_t default_partitions() {
  if (const char* env = std::getenv("RSVD_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

}  // namespace rsvd::mr
