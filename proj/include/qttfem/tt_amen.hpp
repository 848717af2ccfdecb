#pragma once

#include "qttfem/tensor_train.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qttfem {

enum class LocalSolver { direct, iterative };

struct AmenConfig {
  /// Target for ||A x - f|| / ||f|| (Euclidean).
  double residual_tol = 1e-8;
  int max_sweeps = 50;
  Index enrichment_rank = 4;
  /// Local systems up to this size use a dense Cholesky; larger ones (or all
  /// of them with LocalSolver::iterative) use preconditioned CG.
  LocalSolver local_solver = LocalSolver::direct;
  Index direct_limit = 4096;
  int local_iterations = 400;
  /// Truncation of the solution cores. A zero tolerance means
  /// 0.01 * residual_tol. The rank cap keeps direct local systems
  /// ((cap + enrichment)^2 * 4) within direct_limit.
  TruncationPolicy rounding{0.0, 20};
  /// Stop (not converged) after two consecutive sweeps that fail to lower
  /// the energy 1/2 x^T A x - f^T x by more than this fraction of |energy|.
  double stagnation_tol = 1e-12;
  /// Seed of the random start of the enrichment train.
  std::uint64_t seed = 0x5eed;

  void validate() const;
};

struct SolveReport {
  bool converged = false;
  int sweeps_used = 0;
  /// True ||A x - f|| / ||f|| of the returned x (exact product, QR norm).
  double final_relative_residual = 0.0;
  /// Ranks of x after each sweep.
  std::vector<std::vector<Index>> rank_profile_history;
  /// Residual projected onto the enrichment train, relative to ||f||, after
  /// each sweep. A cheap lower estimate of the true relative residual.
  std::vector<double> residual_history;
  /// Energy functional after each sweep.
  std::vector<double> energy_history;
  double wall_time_s = 0.0;
  std::string stop_reason;
};

struct AmenResult {
  TensorTrain x;
  SolveReport report;
};

/// Solves A x = f for symmetric positive definite A by alternating
/// single-core Galerkin updates with residual-based enrichment. Without
/// convergence the lowest-energy iterate is returned.
AmenResult amen_solve(const TTOperator& a, const TensorTrain& f, const std::optional<TensorTrain>& x0,
                      const AmenConfig& config);

/// ||A x - f||, divided by ||f|| when `relative` and ||f|| > 0.
double residual_norm(const TTOperator& a, const TensorTrain& x, const TensorTrain& f, const TruncationPolicy& rounding,
                     bool relative = true);

/// Relative Frobenius norm of A - A^T, estimated in TT arithmetic.
double asymmetry(const TTOperator& a);

}  // namespace qttfem
