#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsvd/matrix_io.hpp"
#include "rsvd/mr_engine.hpp"
#include "rsvd/oracle.hpp"
#include "rsvd/rsvd_jobs.hpp"

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ms(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

int cmd_gen(std::uint64_t rows, std::uint64_t cols, std::uint64_t rank, double density,
            std::uint64_t seed, const std::string& out) {
  const auto matrix = rsvd::generate_synthetic(rows, cols, rank, density, seed);
  rsvd::write_sparse_file(out, matrix);
  std::uint64_t nnz = 0;
  for (const auto& row : matrix) nnz += row.entries.size();
  std::cout << "wrote " << rows << "x" << cols << " matrix with " << nnz
            << " nonzeros to " << out << "\n";
  return 0;
}

int cmd_svd(const std::string& input, std::uint64_t k, std::uint64_t seed,
            std::size_t partitions, bool compute_v, const std::string& out_dir) {
  const auto start = Clock::now();
  const auto a = rsvd::read_sparse_file(input);
  const rsvd::SvdResult result =
      rsvd::map_reduce_svd(a, {k, seed}, compute_v, partitions);
  const std::uint64_t wall = elapsed_ms(start);
  rsvd::write_svd_outputs(out_dir, result, wall);

  std::cout << "sigma:";
  for (double s : result.sigma) std::cout << ' ' << rsvd::format_double(s);
  std::cout << "\npasses_over_A: " << result.stats.passes_over_a
            << "  map_emits: " << result.stats.map_emits
            << "  shuffle_bytes: " << result.stats.shuffle_bytes
            << "\nwall_ms: " << wall << "\noutputs in " << out_dir << "\n";
  return 0;
}

int cmd_qr(const std::string& input, std::size_t partitions, const std::string& out_dir) {
  const auto rows = rsvd::read_dense_file(input);
  const rsvd::QrResult qr = rsvd::cholesky_qr(rows, partitions);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  rsvd::write_dense_file((fs::path(out_dir) / "Q.txt").string(), qr.q_rows);
  rsvd::write_small_matrix_file((fs::path(out_dir) / "R.txt").string(), qr.r);

  const std::uint64_t k = qr.r.rows();
  rsvd::SmallMatrix gram(k, k);
  for (const auto& row : qr.q_rows) {
    for (std::uint64_t i = 0; i < k; ++i) {
      for (std::uint64_t j = 0; j < k; ++j) gram(i, j) += row.values[i] * row.values[j];
    }
  }
  const double defect = rsvd::max_abs_diff(gram, rsvd::SmallMatrix::identity(k));
  std::cout << "orthonormality_defect: " << rsvd::format_double(defect) << "\n";
  return 0;
}

int cmd_verify(const std::string& input, const std::string& svd_dir,
               const rsvd::oracle::VerifyTolerances& tol) {
  namespace fs = std::filesystem;
  const auto a = rsvd::read_sparse_file(input);

  rsvd::SvdResult result;
  result.u_rows = rsvd::read_dense_file((fs::path(svd_dir) / "U.txt").string());
  const rsvd::SmallMatrix s =
      rsvd::read_small_matrix_file((fs::path(svd_dir) / "S.txt").string());
  if (s.rows() != s.cols()) throw rsvd::InvalidParams("S.txt is not square");
  const std::uint64_t k = s.rows();
  result.sigma.resize(k);
  for (std::uint64_t i = 0; i < k; ++i) result.sigma[i] = s(i, i);
  const fs::path v_path = fs::path(svd_dir) / "V.txt";
  if (fs::exists(v_path)) result.v_rows = rsvd::read_dense_file(v_path.string());

  const rsvd::oracle::ErrorReport report = rsvd::oracle::compare(a, result, k);

  double a_sq = 0.0;
  for (const auto& row : a) {
    for (const auto& e : row.entries) a_sq += e.value * e.value;
  }
  const bool ok = rsvd::oracle::verify_passes(report, std::sqrt(a_sq), tol);

  nlohmann::json j;
  if (report.rel_frobenius_reconstruction) {
    j["rel_frobenius_reconstruction"] = *report.rel_frobenius_reconstruction;
  }
  j["max_orthonormality_defect_u"] = report.max_orthonormality_defect_u;
  if (report.max_orthonormality_defect_v) {
    j["max_orthonormality_defect_v"] = *report.max_orthonormality_defect_v;
  }
  j["sigma_rel_errors"] = report.sigma_rel_errors;
  j["optimal_rank_k_error"] = report.optimal_rank_k_error;
  std::cout << j.dump(2) << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate rank-k SVD of sparse matrices via random projection "
               "and map/reduce Cholesky QR"};
  app.require_subcommand(1);

  std::uint64_t rows = 0, cols = 0, rank = 0, seed = 0, k = 0;
  double density = 1.0;
  std::string input, out, out_dir, svd_dir;
  std::size_t partitions = 0;
  bool compute_v = false;
  rsvd::oracle::VerifyTolerances tol;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic sparse matrix");
  gen->add_option("--rows", rows, "Row count")->required()->check(CLI::Range(std::uint64_t{1}, std::numeric_limits<std::uint64_t>::max()));
  gen->add_option("--cols", cols, "Column count")->required()->check(CLI::Range(std::uint64_t{1}, std::numeric_limits<std::uint64_t>::max()));
  gen->add_option("--rank", rank, "Number of outer-product components")->required();
  gen->add_option("--density", density, "Probability of keeping an entry (0, 1]");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", out, "Output path")->required();

  CLI::App* svd = app.add_subcommand("svd", "Run the rank-k SVD pipeline");
  svd->add_option("--input", input, "Sparse input file")->required();
  svd->add_option("--k", k, "Target rank")->required()->check(CLI::Range(std::uint64_t{1}, std::numeric_limits<std::uint64_t>::max()));
  svd->add_option("--seed", seed, "Projection seed");
  svd->add_option("--partitions", partitions, "Worker count (default: RSVD_WORKERS or cores)")
      ->check(CLI::Range(std::uint64_t{1}, std::numeric_limits<std::uint64_t>::max()));
  svd->add_flag("--compute-v", compute_v, "Also compute and write V.txt");
  svd->add_option("--out-dir", out_dir, "Output directory")->required();

  CLI::App* qr = app.add_subcommand("qr", "Tall-and-skinny QR of dense rows");
  qr->add_option("--input", input, "Dense input file")->required();
  qr->add_option("--partitions", partitions, "Worker count")->check(CLI::Range(std::uint64_t{1}, std::numeric_limits<std::uint64_t>::max()));
  qr->add_option("--out-dir", out_dir, "Output directory")->required();

  CLI::App* verify = app.add_subcommand("verify", "Check outputs against the dense oracle");
  verify->add_option("--input", input, "Sparse input file")->required();
  verify->add_option("--svd-dir", svd_dir, "Directory holding U.txt, S.txt, V.txt")->required();
  verify->add_option("--tol-orth", tol.orthonormality, "Orthonormality tolerance");
  verify->add_option("--tol-sigma", tol.sigma_rel, "Relative sigma tolerance");
  verify->add_option("--tol-recon", tol.reconstruction, "Reconstruction tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (partitions == 0) partitions = rsvd::mr::default_partitions();

  try {
    if (gen->parsed()) return cmd_gen(rows, cols, rank, density, seed, out);
    if (svd->parsed()) return cmd_svd(input, k, seed, partitions, compute_v, out_dir);
    if (qr->parsed()) return cmd_qr(input, partitions, out_dir);
    if (verify->parsed()) return cmd_verify(input, svd_dir, tol);
  } catch (const rsvd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
