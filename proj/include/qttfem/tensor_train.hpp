#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace qttfem {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

inline constexpr Index kUnboundedRank = std::numeric_limits<Index>::max();

/// Default cap on the number of entries a dense bridge may materialize.
inline constexpr Index kDenseEntryCap = Index{1} << 22;

/// Controls rank truncation in every rounding call.
///
/// `rel_tolerance` is the relative Frobenius error allowed for one rounding
/// call; `max_rank` caps every bond dimension after truncation.
struct TruncationPolicy {
  double rel_tolerance = 1e-12;
  Index max_rank = kUnboundedRank;

  void validate() const;

  static TruncationPolicy exact() { return {0.0, kUnboundedRank}; }
};

/// Order-3 array with shape (left, mode, right), stored with the left rank
/// index varying fastest, then the mode index, then the right rank index.
///
/// This layout makes both unfoldings free: the left unfolding is a
/// column-major (left*mode) x right matrix and the right unfolding is a
/// column-major left x (mode*right) matrix.
struct Core {
  Index left = 1;
  Index mode = 1;
  Index right = 1;
  std::vector<double> data;

  Core() : data(1, 0.0) {}
  Core(Index l, Index n, Index r) : left(l), mode(n), right(r), data(static_cast<std::size_t>(l * n * r), 0.0) {}

  Index size() const { return left * mode * right; }

  double& operator()(Index a, Index i, Index b) { return data[static_cast<std::size_t>(a + left * (i + mode * b))]; }
  double operator()(Index a, Index i, Index b) const {
    return data[static_cast<std::size_t>(a + left * (i + mode * b))];
  }

  MatrixMap left_unfolding() { return {data.data(), left * mode, right}; }
  ConstMatrixMap left_unfolding() const { return {data.data(), left * mode, right}; }
  MatrixMap right_unfolding() { return {data.data(), left, mode * right}; }
  ConstMatrixMap right_unfolding() const { return {data.data(), left, mode * right}; }

  /// left x right matrix of the core at mode index i.
  Matrix slice(Index i) const;
};

/// A vector in tensor-train format. Boundary ranks are 1 and adjacent core
/// ranks agree; both are checked on construction.
class TensorTrain {
 public:
  TensorTrain() = default;
  explicit TensorTrain(std::vector<Core> cores);

  Index order() const { return static_cast<Index>(cores_.size()); }
  const Core& core(Index k) const { return cores_[static_cast<std::size_t>(k)]; }
  const std::vector<Core>& cores() const { return cores_; }
  std::vector<Core> take_cores() && { return std::move(cores_); }

  std::vector<Index> mode_dims() const;
  /// Bond dimensions r_0, ..., r_K (boundary ranks included).
  std::vector<Index> ranks() const;
  Index max_rank() const;
  /// Product of mode dimensions, saturating at the largest Index.
  Index dense_size() const;

  static TensorTrain constant(std::span<const Index> dims, double value);
  static TensorTrain ones(std::span<const Index> dims) { return constant(dims, 1.0); }
  /// Canonical zero: all ranks 1, all entries 0.
  static TensorTrain zeros(std::span<const Index> dims) { return constant(dims, 0.0); }
  static TensorTrain unit(std::span<const Index> dims, std::span<const Index> multi_index);
  /// Random Gaussian cores with the requested interior ranks (size order-1).
  static TensorTrain random(std::span<const Index> dims, std::span<const Index> interior_ranks, std::mt19937_64& rng);

 private:
  std::vector<Core> cores_;
};

/// A matrix in tensor-train operator format. Core k has shape
/// (r_{k-1}, row_dims[k], col_dims[k], r_k); it is stored as a `Core` whose
/// mode index fuses (row, col) as row + row_dim * col.
class TTOperator {
 public:
  TTOperator() = default;
  TTOperator(std::vector<Core> cores, std::vector<Index> row_dims, std::vector<Index> col_dims);

  Index order() const { return static_cast<Index>(cores_.size()); }
  const Core& core(Index k) const { return cores_[static_cast<std::size_t>(k)]; }
  const std::vector<Core>& cores() const { return cores_; }
  const std::vector<Index>& row_dims() const { return row_dims_; }
  const std::vector<Index>& col_dims() const { return col_dims_; }
  std::vector<Index> ranks() const;
  Index max_rank() const;

  double element(Index k, Index a, Index i, Index j, Index b) const;

  /// View with fused (row, col) modes; rounding and addition reuse the
  /// vector kernels through it.
  TensorTrain as_tensor_train() const { return TensorTrain(cores_); }
  static TTOperator from_fused(const TensorTrain& t, std::vector<Index> row_dims, std::vector<Index> col_dims);

  static TTOperator identity(std::span<const Index> dims);
  static TTOperator zeros(std::span<const Index> row_dims, std::span<const Index> col_dims);

 private:
  std::vector<Core> cores_;
  std::vector<Index> row_dims_;
  std::vector<Index> col_dims_;
};

// ---------------------------------------------------------------------------
// Quantics index encoding (digit 0 is the most significant bit)

std::vector<Index> qtt_encode(std::uint64_t linear_index, int d);
std::uint64_t qtt_decode(std::span<const Index> digits);

/// Mixed-radix big-endian encoding for arbitrary mode dimensions.
std::vector<Index> multi_index_from_linear(Index linear, std::span<const Index> dims);
Index linear_from_multi_index(std::span<const Index> multi_index, std::span<const Index> dims);

// ---------------------------------------------------------------------------
// Dense bridges (test scale only, guarded by a size cap)

TensorTrain tt_from_dense(std::span<const double> values, std::span<const Index> dims, const TruncationPolicy& policy);
std::vector<double> tt_to_dense(const TensorTrain& t, Index entry_cap = kDenseEntryCap);

TTOperator tt_op_from_dense(const Matrix& dense, std::span<const Index> row_dims, std::span<const Index> col_dims,
                            const TruncationPolicy& policy);
Matrix tt_op_to_dense(const TTOperator& op, Index entry_cap = kDenseEntryCap);

// ---------------------------------------------------------------------------
// Vector arithmetic

double tt_entry(const TensorTrain& t, std::span<const Index> multi_index);
TensorTrain tt_add(const TensorTrain& a, const TensorTrain& b);
TensorTrain tt_scale(const TensorTrain& a, double c);
/// a + c*b in one block-diagonal construction.
TensorTrain tt_axpy(double c, const TensorTrain& b, const TensorTrain& a);
TensorTrain tt_hadamard(const TensorTrain& a, const TensorTrain& b);
double tt_dot(const TensorTrain& a, const TensorTrain& b);
double tt_norm(const TensorTrain& a);
double tt_sum(const TensorTrain& a);
TensorTrain tt_round(const TensorTrain& a, const TruncationPolicy& policy);

/// Orthogonalize right-to-left so that cores 1..K-1 are right-orthonormal.
/// Returns the Frobenius norm (carried entirely by core 0).
double tt_right_orthogonalize(std::vector<Core>& cores);
/// Orthogonalize left-to-right so that cores 0..K-2 are left-orthonormal.
double tt_left_orthogonalize(std::vector<Core>& cores);

// ---------------------------------------------------------------------------
// Operator arithmetic

TensorTrain tt_apply(const TTOperator& op, const TensorTrain& x, const TruncationPolicy& policy);
/// y^T A x by direct contraction (no intermediate rounding).
double tt_op_bilinear(const TensorTrain& y, const TTOperator& op, const TensorTrain& x);
/// Exact product without rounding (ranks multiply).
TensorTrain tt_apply_exact(const TTOperator& op, const TensorTrain& x);
/// ||op x - f|| without rounding; product cores are formed one at a time.
double tt_residual_norm(const TTOperator& op, const TensorTrain& x, const TensorTrain& f);
TTOperator tt_op_add(const TTOperator& a, const TTOperator& b);
TTOperator tt_op_scale(const TTOperator& a, double c);
TTOperator tt_op_compose(const TTOperator& a, const TTOperator& b);
TTOperator tt_op_transpose(const TTOperator& a);
TTOperator tt_op_round(const TTOperator& a, const TruncationPolicy& policy);
double tt_op_norm(const TTOperator& a);
double tt_op_entry(const TTOperator& a, std::span<const Index> row_index, std::span<const Index> col_index);
/// Operator with v on its diagonal.
TTOperator tt_diag(const TensorTrain& v);
/// The diagonal of a square operator as a vector.
TensorTrain tt_op_diagonal(const TTOperator& a);
/// A tensor product of two trains: cores of `a` followed by cores of `b`.
TTOperator tt_op_kron(const TTOperator& a, const TTOperator& b);
TensorTrain tt_kron(const TensorTrain& a, const TensorTrain& b);

// ---------------------------------------------------------------------------
// Memory accounting

struct Footprint {
  std::uint64_t scalars = 0;
  std::uint64_t bytes = 0;
  /// Bytes a dense array of the same shape would take (saturating).
  double dense_equivalent_bytes = 0.0;
};

Footprint memory_footprint(const TensorTrain& t);
Footprint memory_footprint(const TTOperator& op);

}  // namespace qttfem
