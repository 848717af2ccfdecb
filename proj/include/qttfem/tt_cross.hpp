#pragma once

#include "qttfem/tensor_train.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace qttfem {

/// Black-box tensor entry: multi-index -> value.
using Evaluator = std::function<double(std::span<const Index>)>;

struct CrossConfig {
  Index initial_rank = 4;
  int max_sweeps = 30;
  /// Target for the sampled relative error; ranks grow while it is exceeded.
  double rel_convergence_tol = 1e-12;
  Index validation_sample_count = 256;
  Index max_rank = 64;
  Index rank_increment = 2;
  /// Dominance tolerance passed to maxvol.
  double maxvol_tol = 0.05;
  std::uint64_t seed = 20240611;

  void validate() const;
};

struct CrossReport {
  bool converged = false;
  int sweeps = 0;
  /// Sampled relative error after each sweep.
  std::vector<double> sweep_errors;
  /// Minimum over sweep_errors; belongs to the returned train.
  double estimated_rel_error = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t evaluations = 0;
  /// Some maxvol call fell back to the pivoted-LU row choice.
  bool maxvol_fallback = false;
  std::vector<Index> final_ranks;
  /// Full multi-indices the returned train interpolates exactly.
  std::vector<std::vector<Index>> pivots;
};

struct CrossResult {
  TensorTrain tt;
  CrossReport report;
};

struct MaxvolResult {
  std::vector<Index> rows;
  bool fallback = false;
  int iterations = 0;
};

/// Rows of a tall matrix whose square submatrix S satisfies
/// max |A S^{-1}| <= 1 + tol. Rank deficiency falls back to the pivoted-LU
/// row choice and sets `fallback`.
MaxvolResult maxvol_select(const Matrix& a, double tol = 0.05, int max_iterations = 200);

CrossResult cross_interpolate(const Evaluator& f, std::span<const Index> dims, const CrossConfig& config);

/// Cross interpolation of 1 / v. Every sampled value must be nonzero and all
/// must share one sign; otherwise DomainError names the offending index.
CrossResult reciprocal_tt(const Evaluator& v, std::span<const Index> dims, const CrossConfig& config);

}  // namespace qttfem
