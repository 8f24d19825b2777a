#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsvd/dense_kernel.hpp"
#include "rsvd/mr_engine.hpp"
#include "rsvd/rows.hpp"
#include "rsvd/small_matrix.hpp"

namespace rsvd {

// Identical config implies the identical implicit Gaussian matrix Omega.
struct ProjectionConfig {
  std::uint64_t k = 0;
  std::uint64_t global_seed = 0;
};

// Per-stage counters collected while a pipeline runs.
struct StageStats {
  std::string stage;
  mr::JobStats stats;
};

class StatsSink {
 public:
  void add(const std::string& stage, const mr::JobStats& stats) {
    stages_.push_back({stage, stats});
    total_.absorb(stats);
  }

  const std::vector<StageStats>& stages() const { return stages_; }
  const mr::JobStats& total() const { return total_; }

  const mr::JobStats* find(const std::string& stage) const {
    for (const StageStats& s : stages_) {
      if (s.stage == stage) return &s.stats;
    }
    return nullptr;
  }

 private:
  std::vector<StageStats> stages_;
  mr::JobStats total_;
};

struct SvdResult {
  std::vector<DenseRow> u_rows;                  // m x k, input row order
  std::vector<double> sigma;                     // k, non-increasing
  std::optional<std::vector<DenseRow>> v_rows;   // n x k, ascending key order
  SmallMatrix r_y;                               // debug: R of the sketch QR
  SmallMatrix r_bt;                              // debug: R of the B^T QR
  mr::JobStats stats;                            // aggregated; passes_over_a = 2
  std::vector<StageStats> stage_stats;
};

/// Row j of the implicit n x k Gaussian matrix Omega, regenerated on demand:
/// per-column seed from (global_seed, j), then k Box-Muller deviates over
/// successive splitmix64 uniforms. Never materialized as a whole.
std::vector<double> gaussian_row(std::uint64_t global_seed, std::uint64_t column_id,
                                 std::uint64_t k);

/// Y = A * Omega as a map-only job; zero rows of A become zero rows of Y.
std::vector<DenseRow> random_projection_job(const std::vector<SparseRow>& a,
                                            const ProjectionConfig& cfg,
                                            std::size_t partitions = 1,
                                            StatsSink* sink = nullptr);

/// R (upper triangular) of the QR of X via Cholesky of the Gram matrix:
/// mappers emit per-row outer-product rows, reducers sum them, and the final
/// local reduce runs cholesky on the assembled k x k matrix.
/// Throws RankDeficientSketch when the Gram matrix is not positive definite.
SmallMatrix ata_cholesky_job(const std::vector<DenseRow>& x, std::uint64_t k,
                             std::size_t partitions = 1, StatsSink* sink = nullptr,
                             const std::string& stage = "ata_cholesky");

/// Q = X * R^-1, map-only; R^-1 is computed once and broadcast.
std::vector<DenseRow> q_job(const std::vector<DenseRow>& x, const SmallMatrix& r,
                            std::size_t partitions = 1, StatsSink* sink = nullptr,
                            const std::string& stage = "q_job");

/// B^T = A^T * Q via a key join of A and Q rows: each nonzero a_ij emits
/// a_ij * q_i keyed by j, and the reducer sums per column id. Columns of A
/// with no nonzeros are absent from the output.
std::vector<DenseRow> atq_job(const std::vector<SparseRow>& a,
                              const std::vector<DenseRow>& q, std::uint64_t k,
                              std::size_t partitions = 1, StatsSink* sink = nullptr);

/// Map-only row-times-matrix: every row of q is multiplied by the broadcast
/// k x k factor f.
std::vector<DenseRow> qutilde_job(const std::vector<DenseRow>& q, const SmallMatrix& f,
                                  std::size_t partitions = 1, StatsSink* sink = nullptr,
                                  const std::string& stage = "qutilde");

struct QrResult {
  std::vector<DenseRow> q_rows;
  SmallMatrix r;
};

/// Tall-and-skinny QR of dense rows: R from the Gram Cholesky, Q = X * R^-1.
QrResult cholesky_qr(const std::vector<DenseRow>& x, std::size_t partitions = 1,
                     StatsSink* sink = nullptr);

/// The full pipeline: project, QR the sketch, form B^T = A^T Q, QR and SVD
/// that, then multiply back. Exactly two passes over A.
SvdResult map_reduce_svd(const std::vector<SparseRow>& a, const ProjectionConfig& cfg,
                         bool compute_v = false, std::size_t partitions = 1);

/// Writes U.txt, S.txt, V.txt (when present), R_Y.txt, R_BT.txt and
/// stats.json into out_dir, creating it if needed.
void write_svd_outputs(const std::string& out_dir, const SvdResult& result,
                       std::uint64_t wall_ms);

}  // namespace rsvd
