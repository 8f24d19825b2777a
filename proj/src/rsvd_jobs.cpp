#include "rsvd/rsvd_jobs.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rsvd/matrix_io.hpp"
#include "rsvd/rng.hpp"

namespace rsvd {

namespace {

std::vector<mr::Record> to_records(const std::vector<SparseRow>& rows) {
  std::vector<mr::Record> out;
  out.reserve(rows.size());
  for (const SparseRow& row : rows) out.push_back({row.key, serialize_sparse_row(row)});
  return out;
}

std::vector<mr::Record> to_records(const std::vector<DenseRow>& rows) {
  std::vector<mr::Record> out;
  out.reserve(rows.size());
  for (const DenseRow& row : rows) out.push_back({row.key, serialize_dense_row(row)});
  return out;
}

std::vector<DenseRow> to_dense_rows(const std::vector<mr::Record>& records) {
  std::vector<DenseRow> out;
  out.reserve(records.size());
  for (const mr::Record& rec : records) out.push_back(parse_dense_row(rec.payload));
  return out;
}

// Rethrows `cause` as its concrete domain type carrying `msg`, or does
// nothing if the type is not one of ours.
void rethrow_domain_error(const std::string& msg, const std::exception_ptr& cause) {
  if (!cause) return;
  try {
    std::rethrow_exception(cause);
  } catch (const RankDeficientSketch&) {
    throw RankDeficientSketch(msg);
  } catch (const MalformedRecord& e) {
    throw MalformedRecord(msg);
  } catch (const DuplicateJoinKey&) {
    throw DuplicateJoinKey(msg);
  } catch (const SingularMatrix&) {
    throw SingularMatrix(msg);
  } catch (const NotPositiveDefinite&) {
    throw NotPositiveDefinite(msg);
  } catch (const NotSymmetric&) {
    throw NotSymmetric(msg);
  } catch (const NoConvergence&) {
    throw NoConvergence(msg);
  } catch (const DimensionMismatch&) {
    throw DimensionMismatch(msg);
  } catch (const InvalidParams&) {
    throw InvalidParams(msg);
  } catch (...) {
  }
}

// Rethrows any pipeline error with the stage name prepended, keeping the
// concrete type so callers can still catch what they expect. Engine-level
// JobError wrappers are unwrapped back to the domain type they carry.
template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) {
  const auto prefix = [&stage](const std::exception& e) {
    return "stage '" + stage + "': " + e.what();
  };
  try {
    return fn();
  } catch (const RankDeficientSketch& e) {
    throw RankDeficientSketch(prefix(e));
  } catch (const MalformedRecord& e) {
    throw MalformedRecord(prefix(e));
  } catch (const DuplicateJoinKey& e) {
    throw DuplicateJoinKey(prefix(e));
  } catch (const SingularMatrix& e) {
    throw SingularMatrix(prefix(e));
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite(prefix(e));
  } catch (const NotSymmetric& e) {
    throw NotSymmetric(prefix(e));
  } catch (const NoConvergence& e) {
    throw NoConvergence(prefix(e));
  } catch (const DimensionMismatch& e) {
    throw DimensionMismatch(prefix(e));
  } catch (const InvalidParams& e) {
    throw InvalidParams(prefix(e));
  } catch (const JobError& e) {
    rethrow_domain_error(prefix(e), e.cause());
    throw JobError(prefix(e), e.cause());
  }
}

DenseRow parse_dense_payload_checked(const std::string& payload, std::uint64_t k) {
  DenseRow row = parse_dense_row(payload);
  if (row.values.size() != k) {
    throw DimensionMismatch("row " + std::to_string(row.key) + " has " +
                            std::to_string(row.values.size()) + " values, expected " +
                            std::to_string(k));
  }
  return row;
}

// Elementwise sum of the delivered partial rows, in delivery order.
mr::Reducer vector_sum_reducer(std::uint64_t k) {
  return [k](std::uint64_t key, const std::vector<std::string>& payloads) {
    DenseRow sum{key, std::vector<double>(k, 0.0)};
    for (const std::string& payload : payloads) {
      const DenseRow part = parse_dense_payload_checked(payload, k);
      for (std::uint64_t i = 0; i < k; ++i) sum.values[i] += part.values[i];
    }
    return std::vector<mr::Record>{{key, serialize_dense_row(sum)}};
  };
}

}  // namespace

std::vector<double> gaussian_row(std::uint64_t global_seed, std::uint64_t column_id,
                                 std::uint64_t k) {
  SplitMix64 g{seed_mix(global_seed, column_id)};
  std::vector<double> out(k);
  for (std::uint64_t i = 0; i < k; i += 2) {
    const std::uint64_t a = g.next();
    const std::uint64_t b = g.next();
    const auto [z0, z1] = normal_pair(a, b);
    out[i] = z0;
    if (i + 1 < k) out[i + 1] = z1;
  }
  return out;
}

std::vector<DenseRow> random_projection_job(const std::vector<SparseRow>& a,
                                            const ProjectionConfig& cfg,
                                            std::size_t partitions, StatsSink* sink) {
  return run_stage("random_projection", [&] {
    const std::uint64_t k = cfg.k;
    const std::uint64_t seed = cfg.global_seed;

    mr::JobSpec spec;
    spec.name = "random_projection";
    spec.partitions = partitions;
    spec.mapper = [k, seed](std::uint64_t key, const std::string& payload) {
      const SparseRow row = parse_sparse_row(payload);
      DenseRow result{key, std::vector<double>(k, 0.0)};
      for (const SparseEntry& e : row.entries) {
        const std::vector<double> omega_row = gaussian_row(seed, e.col, k);
        for (std::uint64_t i = 0; i < k; ++i) result.values[i] += e.value * omega_row[i];
      }
      return std::vector<mr::Record>{{key, serialize_dense_row(result)}};
    };

    mr::JobResult res = mr::run_job(spec, to_records(a));
    res.stats.passes_over_a = 1;
    if (sink) sink->add("random_projection", res.stats);
    return to_dense_rows(res.output);
  });
}

SmallMatrix ata_cholesky_job(const std::vector<DenseRow>& x, std::uint64_t k,
                             std::size_t partitions, StatsSink* sink,
                             const std::string& stage) {
  return run_stage(stage, [&]() -> SmallMatrix {
    mr::JobSpec spec;
    spec.name = stage;
    spec.partitions = partitions;
    spec.mapper = [k](std::uint64_t key, const std::string& payload) {
      const DenseRow row = parse_dense_payload_checked(payload, k);
      (void)key;
      std::vector<mr::Record> out;
      out.reserve(k);
      for (std::uint64_t i = 0; i < k; ++i) {
        DenseRow outer{i, std::vector<double>(k)};
        for (std::uint64_t j = 0; j < k; ++j) outer.values[j] = row.values[i] * row.values[j];
        out.push_back({i, serialize_dense_row(outer)});
      }
      return out;
    };
    spec.reducer = vector_sum_reducer(k);
    spec.final_local_reduce = [k](const std::vector<mr::Record>& rows) {
      SmallMatrix gram(k, k);
      if (!rows.empty()) {
        if (rows.size() != k) {
          throw InvalidParams("gram assembly expected " + std::to_string(k) + " rows, got " +
                              std::to_string(rows.size()));
        }
        for (const mr::Record& rec : rows) {
          const DenseRow row = parse_dense_payload_checked(rec.payload, k);
          for (std::uint64_t j = 0; j < k; ++j) gram(row.key, j) = row.values[j];
        }
      }
      const SmallMatrix r = transpose(cholesky(gram));
      return std::vector<mr::Record>{{0, serialize_small_matrix(r)}};
    };

    try {
      mr::JobResult res = mr::run_job(spec, to_records(x));
      if (sink) sink->add(stage, res.stats);
      return parse_small_matrix(res.output.at(0).payload);
    } catch (const NotPositiveDefinite& e) {
      throw RankDeficientSketch(std::string(e.what()) +
                                "; the sketch is rank deficient -- lower k or try a "
                                "different --seed");
    }
  });
}

std::vector<DenseRow> q_job(const std::vector<DenseRow>& x, const SmallMatrix& r,
                            std::size_t partitions, StatsSink* sink,
                            const std::string& stage) {
  return run_stage(stage, [&] {
    // Broadcast value: inverted once, shared read-only by every mapper.
    const SmallMatrix r_inv = upper_tri_inverse(r);
    const std::uint64_t k = r.rows();

    mr::JobSpec spec;
    spec.name = stage;
    spec.partitions = partitions;
    spec.mapper = [&r_inv, k](std::uint64_t key, const std::string& payload) {
      const DenseRow row = parse_dense_payload_checked(payload, k);
      DenseRow q{key, std::vector<double>(k, 0.0)};
      for (std::uint64_t l = 0; l < k; ++l) {
        const double xl = row.values[l];
        if (xl == 0.0) continue;
        for (std::uint64_t c = l; c < k; ++c) q.values[c] += xl * r_inv(l, c);
      }
      return std::vector<mr::Record>{{key, serialize_dense_row(q)}};
    };

    mr::JobResult res = mr::run_job(spec, to_records(x));
    if (sink) sink->add(stage, res.stats);
    return to_dense_rows(res.output);
  });
}

std::vector<DenseRow> atq_job(const std::vector<SparseRow>& a,
                              const std::vector<DenseRow>& q, std::uint64_t k,
                              std::size_t partitions, StatsSink* sink) {
  return run_stage("atq", [&] {
    mr::JoinJobSpec spec;
    spec.name = "atq";
    spec.partitions = partitions;
    spec.mapper = [k](std::uint64_t key, const std::string& left, const std::string& right) {
      const SparseRow a_row = parse_sparse_row(left);
      const DenseRow q_row = parse_dense_payload_checked(right, k);
      (void)key;
      std::vector<mr::Record> out;
      out.reserve(a_row.entries.size());
      for (const SparseEntry& e : a_row.entries) {
        DenseRow scaled{e.col, std::vector<double>(k)};
        for (std::uint64_t i = 0; i < k; ++i) scaled.values[i] = e.value * q_row.values[i];
        out.push_back({e.col, serialize_dense_row(scaled)});
      }
      return out;
    };
    spec.reducer = vector_sum_reducer(k);

    mr::JobResult res = mr::run_join_job(spec, to_records(a), to_records(q));
    res.stats.passes_over_a = 1;
    if (sink) sink->add("atq", res.stats);
    return to_dense_rows(res.output);
  });
}

std::vector<DenseRow> qutilde_job(const std::vector<DenseRow>& q, const SmallMatrix& f,
                                  std::size_t partitions, StatsSink* sink,
                                  const std::string& stage) {
  return run_stage(stage, [&] {
    if (f.rows() != f.cols()) {
      throw DimensionMismatch("broadcast factor must be square");
    }
    const std::uint64_t k = f.rows();

    mr::JobSpec spec;
    spec.name = stage;
    spec.partitions = partitions;
    spec.mapper = [&f, k](std::uint64_t key, const std::string& payload) {
      const DenseRow row = parse_dense_payload_checked(payload, k);
      DenseRow out{key, std::vector<double>(k, 0.0)};
      for (std::uint64_t l = 0; l < k; ++l) {
        const double xl = row.values[l];
        if (xl == 0.0) continue;
        for (std::uint64_t c = 0; c < k; ++c) out.values[c] += xl * f(l, c);
      }
      return std::vector<mr::Record>{{key, serialize_dense_row(out)}};
    };

    mr::JobResult res = mr::run_job(spec, to_records(q));
    if (sink) sink->add(stage, res.stats);
    return to_dense_rows(res.output);
  });
}

QrResult cholesky_qr(const std::vector<DenseRow>& x, std::size_t partitions,
                     StatsSink* sink) {
  if (x.empty()) throw InvalidParams("cholesky_qr: no input rows");
  const std::uint64_t k = x.front().values.size();
  if (k == 0) throw InvalidParams("cholesky_qr: rows must have at least one value");
  QrResult out;
  out.r = ata_cholesky_job(x, k, partitions, sink, "ata_cholesky");
  out.q_rows = q_job(x, out.r, partitions, sink);
  return out;
}

SvdResult map_reduce_svd(const std::vector<SparseRow>& a, const ProjectionConfig& cfg,
                         bool compute_v, std::size_t partitions) {
  if (cfg.k < 1) throw InvalidParams("k must be >= 1");

  std::set<std::uint64_t> keys;
  std::uint64_t max_col = 0;
  bool any_nonzero = false;
  for (const SparseRow& row : a) {
    keys.insert(row.key);
    for (const SparseEntry& e : row.entries) {
      max_col = std::max(max_col, e.col);
      any_nonzero = true;
    }
  }
  const std::uint64_t m = keys.size();
  const std::uint64_t n = any_nonzero ? max_col + 1 : 0;
  if (cfg.k > m) {
    throw InvalidParams("k = " + std::to_string(cfg.k) + " exceeds row count " +
                        std::to_string(m));
  }
  // An all-zero A has no usable column count; let it fall through to the
  // rank check on the Gram matrix instead of failing on dimensions.
  if (any_nonzero && cfg.k > n) {
    throw InvalidParams("k = " + std::to_string(cfg.k) + " exceeds column count " +
                        std::to_string(n));
  }

  StatsSink sink;
  SvdResult result;

  const std::vector<DenseRow> y = random_projection_job(a, cfg, partitions, &sink);
  result.r_y = ata_cholesky_job(y, cfg.k, partitions, &sink, "ata_cholesky(Y)");
  const std::vector<DenseRow> q_y = q_job(y, result.r_y, partitions, &sink, "q_job(Y)");
  const std::vector<DenseRow> bt = atq_job(a, q_y, cfg.k, partitions, &sink);
  result.r_bt = ata_cholesky_job(bt, cfg.k, partitions, &sink, "ata_cholesky(BT)");

  // R_BT = u_tilde * diag(sigma) * w^T. Since B^T = Q_BT R_BT, the SVD of B
  // is w * diag(sigma) * (Q_BT u_tilde)^T, so rows of Q_Y pick up w and rows
  // of Q_BT pick up u_tilde.
  const SingularTriple triple =
      run_stage("small_svd(R_BT)", [&] { return small_svd(result.r_bt); });
  result.sigma = triple.sigma;
  result.u_rows = qutilde_job(q_y, triple.v, partitions, &sink, "qutilde(U)");

  if (compute_v) {
    const std::vector<DenseRow> q_bt =
        q_job(bt, result.r_bt, partitions, &sink, "q_job(BT)");
    std::vector<DenseRow> v = qutilde_job(q_bt, triple.u, partitions, &sink, "qutilde(V)");
    // Columns of A with no nonzero entries never reached B^T; they are zero
    // rows of V.
    std::vector<DenseRow> full;
    full.reserve(n);
    std::sort(v.begin(), v.end(),
              [](const DenseRow& lhs, const DenseRow& rhs) { return lhs.key < rhs.key; });
    std::size_t idx = 0;
    for (std::uint64_t j = 0; j < n; ++j) {
      if (idx < v.size() && v[idx].key == j) {
        full.push_back(std::move(v[idx]));
        ++idx;
      } else {
        full.push_back({j, std::vector<double>(cfg.k, 0.0)});
      }
    }
    result.v_rows = std::move(full);
  }

  result.stage_stats = sink.stages();
  result.stats = sink.total();
  result.stats.input_records = a.size();
  return result;
}

void write_svd_outputs(const std::string& out_dir, const SvdResult& result,
                       std::uint64_t wall_ms) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  write_dense_file((dir / "U.txt").string(), result.u_rows);

  const std::uint64_t k = result.sigma.size();
  SmallMatrix s(k, k);
  for (std::uint64_t i = 0; i < k; ++i) s(i, i) = result.sigma[i];
  write_small_matrix_file((dir / "S.txt").string(), s);

  if (result.v_rows) {
    write_dense_file((dir / "V.txt").string(), *result.v_rows);
  } else {
    fs::remove(dir / "V.txt");  // no stale V from a previous run
  }
  write_small_matrix_file((dir / "R_Y.txt").string(), result.r_y);
  write_small_matrix_file((dir / "R_BT.txt").string(), result.r_bt);

  nlohmann::json stats{
      {"input_records", result.stats.input_records},
      {"map_emits", result.stats.map_emits},
      {"shuffle_bytes", result.stats.shuffle_bytes},
      {"passes_over_A", result.stats.passes_over_a},
      {"dropped_join_keys", result.stats.dropped_join_keys},
      {"wall_ms", wall_ms},
  };
  std::ofstream out(dir / "stats.json");
  if (!out) throw InvalidParams("cannot write stats.json in " + out_dir);
  out << stats.dump(2) << '\n';
}

}  // namespace rsvd
