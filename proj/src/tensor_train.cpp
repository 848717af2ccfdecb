#include "qttfem/tensor_train.hpp"

#include "qttfem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qttfem {

namespace {

std::size_t as_size(Index i) { return static_cast<std::size_t>(i); }

void require_same_dims(std::span<const Index> a, std::span<const Index> b, const char* what) {
  if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
    throw DomainError(std::string(what) + ": mode dimensions differ");
  }
}

Core core_from_left_unfolding(const Matrix& m, Index left, Index mode) {
  Core c(left, mode, m.cols());
  c.left_unfolding() = m;
  return c;
}

Core core_from_right_unfolding(const Matrix& m, Index mode, Index right) {
  Core c(m.rows(), mode, right);
  c.right_unfolding() = m;
  return c;
}

/// Smallest rank whose discarded tail has Frobenius norm <= abs_tol.
Index truncation_rank(const Vector& sigma, double abs_tol, Index max_rank) {
  Index r = sigma.size();
  double tail = 0.0;
  const double tol2 = abs_tol * abs_tol;
  while (r > 1) {
    const double next = tail + sigma(r - 1) * sigma(r - 1);
    if (next > tol2) break;
    tail = next;
    --r;
  }
  return std::max<Index>(1, std::min(r, max_rank));
}

Index saturating_product(std::span<const Index> dims) {
  Index p = 1;
  for (Index n : dims) {
    if (n != 0 && p > std::numeric_limits<Index>::max() / n) return std::numeric_limits<Index>::max();
    p *= n;
  }
  return p;
}

std::vector<Index> fused_dims(std::span<const Index> rows, std::span<const Index> cols) {
  std::vector<Index> out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) out[k] = rows[k] * cols[k];
  return out;
}

void validate_train(const std::vector<Core>& cores) {
  if (cores.empty()) throw DomainError("TensorTrain: at least one core is required");
  if (cores.front().left != 1 || cores.back().right != 1) throw DomainError("TensorTrain: boundary ranks must be 1");
  for (std::size_t k = 0; k < cores.size(); ++k) {
    const Core& c = cores[k];
    if (c.left < 1 || c.mode < 1 || c.right < 1 || c.data.size() != as_size(c.size()))
      throw DomainError("TensorTrain: malformed core " + std::to_string(k));
    if (k + 1 < cores.size() && c.right != cores[k + 1].left)
      throw DomainError("TensorTrain: rank mismatch between cores " + std::to_string(k) + " and " +
                        std::to_string(k + 1));
  }
}

}  // namespace

void TruncationPolicy::validate() const {
  if (!(rel_tolerance >= 0.0)) throw DomainError("TruncationPolicy: rel_tolerance must be >= 0");
  if (max_rank < 1) throw DomainError("TruncationPolicy: max_rank must be >= 1");
}

Matrix Core::slice(Index i) const {
  Matrix s(left, right);
  for (Index b = 0; b < right; ++b)
    for (Index a = 0; a < left; ++a) s(a, b) = (*this)(a, i, b);
  return s;
}

// ---------------------------------------------------------------------------

TensorTrain::TensorTrain(std::vector<Core> cores) : cores_(std::move(cores)) { validate_train(cores_); }

std::vector<Index> TensorTrain::mode_dims() const {
  std::vector<Index> d;
  d.reserve(cores_.size());
  for (const Core& c : cores_) d.push_back(c.mode);
  return d;
}

std::vector<Index> TensorTrain::ranks() const {
  std::vector<Index> r;
  r.reserve(cores_.size() + 1);
  r.push_back(1);
  for (const Core& c : cores_) r.push_back(c.right);
  return r;
}

Index TensorTrain::max_rank() const {
  Index m = 1;
  for (const Core& c : cores_) m = std::max(m, c.right);
  return m;
}

Index TensorTrain::dense_size() const {
  const auto dims = mode_dims();
  return saturating_product(dims);
}

TensorTrain TensorTrain::constant(std::span<const Index> dims, double value) {
  if (dims.empty()) throw DomainError("TensorTrain::constant: empty dims");
  std::vector<Core> cores;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    Core c(1, dims[k], 1);
    std::fill(c.data.begin(), c.data.end(), k == 0 ? value : 1.0);
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

TensorTrain TensorTrain::unit(std::span<const Index> dims, std::span<const Index> multi_index) {
  if (dims.size() != multi_index.size()) throw DomainError("TensorTrain::unit: index length mismatch");
  std::vector<Core> cores;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (multi_index[k] < 0 || multi_index[k] >= dims[k]) throw DomainError("TensorTrain::unit: digit out of range");
    Core c(1, dims[k], 1);
    c(0, multi_index[k], 0) = 1.0;
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

TensorTrain TensorTrain::random(std::span<const Index> dims, std::span<const Index> interior_ranks,
                                std::mt19937_64& rng) {
  if (interior_ranks.size() + 1 != dims.size()) throw DomainError("TensorTrain::random: need order-1 ranks");
  std::normal_distribution<double> gauss;
  std::vector<Core> cores;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const Index l = k == 0 ? 1 : interior_ranks[k - 1];
    const Index r = k + 1 == dims.size() ? 1 : interior_ranks[k];
    Core c(l, dims[k], r);
    for (double& v : c.data) v = gauss(rng);
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

// ---------------------------------------------------------------------------

TTOperator::TTOperator(std::vector<Core> cores, std::vector<Index> row_dims, std::vector<Index> col_dims)
    : cores_(std::move(cores)), row_dims_(std::move(row_dims)), col_dims_(std::move(col_dims)) {
  if (row_dims_.size() != col_dims_.size() || row_dims_.size() != cores_.size())
    throw DomainError("TTOperator: row/col dims must match the core count");
  for (std::size_t k = 0; k < cores_.size(); ++k)
    if (cores_[k].mode != row_dims_[k] * col_dims_[k]) throw DomainError("TTOperator: core mode != rows*cols");
  validate_train(cores_);
}

std::vector<Index> TTOperator::ranks() const { return as_tensor_train().ranks(); }

Index TTOperator::max_rank() const {
  Index m = 1;
  for (const Core& c : cores_) m = std::max(m, c.right);
  return m;
}

double TTOperator::element(Index k, Index a, Index i, Index j, Index b) const {
  return core(k)(a, i + row_dims_[as_size(k)] * j, b);
}

TTOperator TTOperator::from_fused(const TensorTrain& t, std::vector<Index> row_dims, std::vector<Index> col_dims) {
  return TTOperator(t.cores(), std::move(row_dims), std::move(col_dims));
}

TTOperator TTOperator::identity(std::span<const Index> dims) {
  std::vector<Core> cores;
  for (Index n : dims) {
    Core c(1, n * n, 1);
    for (Index i = 0; i < n; ++i) c(0, i + n * i, 0) = 1.0;
    cores.push_back(std::move(c));
  }
  return TTOperator(std::move(cores), {dims.begin(), dims.end()}, {dims.begin(), dims.end()});
}

TTOperator TTOperator::zeros(std::span<const Index> row_dims, std::span<const Index> col_dims) {
  if (row_dims.size() != col_dims.size()) throw DomainError("TTOperator::zeros: dims length mismatch");
  auto fused = fused_dims(row_dims, col_dims);
  return from_fused(TensorTrain::zeros(fused), {row_dims.begin(), row_dims.end()}, {col_dims.begin(), col_dims.end()});
}

// ---------------------------------------------------------------------------

std::vector<Index> qtt_encode(std::uint64_t linear_index, int d) {
  if (d < 1 || d > 62) throw DomainError("qtt_encode: d must be in [1, 62]");
  if (linear_index >= (std::uint64_t{1} << d)) throw DomainError("qtt_encode: index out of range");
  std::vector<Index> digits(as_size(d));
  for (int k = 0; k < d; ++k) digits[as_size(k)] = static_cast<Index>((linear_index >> (d - 1 - k)) & 1U);
  return digits;
}

std::uint64_t qtt_decode(std::span<const Index> digits) {
  std::uint64_t v = 0;
  for (Index b : digits) {
    if (b != 0 && b != 1) throw DomainError("qtt_decode: digits must be binary");
    v = (v << 1) | static_cast<std::uint64_t>(b);
  }
  return v;
}

std::vector<Index> multi_index_from_linear(Index linear, std::span<const Index> dims) {
  std::vector<Index> idx(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    idx[k] = linear % dims[k];
    linear /= dims[k];
  }
  if (linear != 0) throw DomainError("multi_index_from_linear: index out of range");
  return idx;
}

Index linear_from_multi_index(std::span<const Index> multi_index, std::span<const Index> dims) {
  if (multi_index.size() != dims.size()) throw DomainError("linear_from_multi_index: length mismatch");
  Index v = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (multi_index[k] < 0 || multi_index[k] >= dims[k]) throw DomainError("linear_from_multi_index: out of range");
    v = v * dims[k] + multi_index[k];
  }
  return v;
}

// ---------------------------------------------------------------------------

TensorTrain tt_from_dense(std::span<const double> values, std::span<const Index> dims,
                          const TruncationPolicy& policy) {
  policy.validate();
  if (dims.empty()) throw DomainError("tt_from_dense: empty dims");
  const Index total = saturating_product(dims);
  if (total != static_cast<Index>(values.size())) throw DomainError("tt_from_dense: value count != product of dims");
  if (total > kDenseEntryCap) throw CapacityError("tt_from_dense: input exceeds dense cap");

  const Index order = static_cast<Index>(dims.size());
  double norm = 0.0;
  for (double v : values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) return TensorTrain::zeros(dims);
  const double delta = order > 1 ? policy.rel_tolerance * norm / std::sqrt(static_cast<double>(order - 1)) : 0.0;

  // work(a + r*i, rest) with rest in row-major (big-endian) order.
  Index rest = total / dims[0];
  Matrix work(dims[0], rest);
  for (Index i = 0; i < dims[0]; ++i)
    for (Index c = 0; c < rest; ++c) work(i, c) = values[as_size(i * rest + c)];

  std::vector<Core> cores;
  Index left = 1;
  for (Index k = 0; k + 1 < order; ++k) {
    const Index n = dims[as_size(k)];
    Eigen::JacobiSVD<Matrix> svd(work, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index r = truncation_rank(svd.singularValues(), delta, policy.max_rank);
    cores.push_back(core_from_left_unfolding(svd.matrixU().leftCols(r), left, n));
    Matrix sv = svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
    const Index n_next = dims[as_size(k + 1)];
    const Index rest_next = rest / n_next;
    Matrix next(r * n_next, rest_next);
    for (Index i = 0; i < n_next; ++i)
      for (Index c = 0; c < rest_next; ++c)
        for (Index a = 0; a < r; ++a) next(a + r * i, c) = sv(a, i * rest_next + c);
    work = std::move(next);
    rest = rest_next;
    left = r;
  }
  cores.push_back(core_from_left_unfolding(work, left, dims[as_size(order - 1)]));
  return TensorTrain(std::move(cores));
}

std::vector<double> tt_to_dense(const TensorTrain& t, Index entry_cap) {
  const Index total = t.dense_size();
  if (total > entry_cap) throw CapacityError("tt_to_dense: " + std::to_string(total) + " entries exceed cap");
  // partial(prefix, rank) with prefix in big-endian order
  Matrix partial = Matrix::Ones(1, 1);
  for (const Core& c : t.cores()) {
    Matrix next(partial.rows() * c.mode, c.right);
    for (Index i = 0; i < c.mode; ++i) {
      Matrix prod = partial * c.slice(i);
      for (Index p = 0; p < partial.rows(); ++p) next.row(p * c.mode + i) = prod.row(p);
    }
    partial = std::move(next);
  }
  return {partial.data(), partial.data() + partial.size()};
}

TTOperator tt_op_from_dense(const Matrix& dense, std::span<const Index> row_dims, std::span<const Index> col_dims,
                            const TruncationPolicy& policy) {
  if (row_dims.size() != col_dims.size()) throw DomainError("tt_op_from_dense: dims length mismatch");
  if (saturating_product(row_dims) != dense.rows() || saturating_product(col_dims) != dense.cols())
    throw DomainError("tt_op_from_dense: matrix shape does not match dims");
  // Reorder into the fused big-endian index (row_k + m_k * col_k)_k.
  const auto fused = fused_dims(row_dims, col_dims);
  const Index total = dense.size();
  if (total > kDenseEntryCap) throw CapacityError("tt_op_from_dense: input exceeds dense cap");
  std::vector<double> values(as_size(total));
  std::vector<Index> ri(row_dims.size()), ci(col_dims.size());
  for (Index f = 0; f < total; ++f) {
    auto digits = multi_index_from_linear(f, fused);
    for (std::size_t k = 0; k < digits.size(); ++k) {
      ri[k] = digits[k] % row_dims[k];
      ci[k] = digits[k] / row_dims[k];
    }
    values[as_size(f)] = dense(linear_from_multi_index(ri, row_dims), linear_from_multi_index(ci, col_dims));
  }
  return TTOperator::from_fused(tt_from_dense(values, fused, policy), {row_dims.begin(), row_dims.end()},
                                {col_dims.begin(), col_dims.end()});
}

Matrix tt_op_to_dense(const TTOperator& op, Index entry_cap) {
  const Index rows = saturating_product(op.row_dims());
  const Index cols = saturating_product(op.col_dims());
  if (rows > entry_cap || cols > entry_cap || rows * cols > entry_cap)
    throw CapacityError("tt_op_to_dense: operator exceeds dense cap");
  const auto flat = tt_to_dense(op.as_tensor_train(), entry_cap);
  const auto fused = fused_dims(op.row_dims(), op.col_dims());
  Matrix dense(rows, cols);
  std::vector<Index> ri(fused.size()), ci(fused.size());
  for (Index f = 0; f < static_cast<Index>(flat.size()); ++f) {
    auto digits = multi_index_from_linear(f, fused);
    for (std::size_t k = 0; k < digits.size(); ++k) {
      ri[k] = digits[k] % op.row_dims()[k];
      ci[k] = digits[k] / op.row_dims()[k];
    }
    dense(linear_from_multi_index(ri, op.row_dims()), linear_from_multi_index(ci, op.col_dims())) = flat[as_size(f)];
  }
  return dense;
}

// ---------------------------------------------------------------------------

double tt_entry(const TensorTrain& t, std::span<const Index> multi_index) {
  if (static_cast<Index>(multi_index.size()) != t.order()) throw DomainError("tt_entry: index length mismatch");
  std::vector<double> v(1, 1.0), next;
  for (Index k = 0; k < t.order(); ++k) {
    const Core& c = t.core(k);
    const Index i = multi_index[as_size(k)];
    if (i < 0 || i >= c.mode) throw DomainError("tt_entry: digit out of range at core " + std::to_string(k));
    next.assign(as_size(c.right), 0.0);
    for (Index b = 0; b < c.right; ++b) {
      double s = 0.0;
      for (Index a = 0; a < c.left; ++a) s += v[as_size(a)] * c(a, i, b);
      next[as_size(b)] = s;
    }
    v.swap(next);
  }
  return v[0];
}

TensorTrain tt_axpy(double c, const TensorTrain& b, const TensorTrain& a) {
  require_same_dims(a.mode_dims(), b.mode_dims(), "tt_add");
  const Index order = a.order();
  if (order == 1) {
    Core out = a.core(0);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += c * b.core(0).data[i];
    return TensorTrain({std::move(out)});
  }
  std::vector<Core> cores;
  for (Index k = 0; k < order; ++k) {
    const Core& ca = a.core(k);
    const Core& cb = b.core(k);
    const bool first = k == 0;
    const bool last = k == order - 1;
    const Index l = first ? 1 : ca.left + cb.left;
    const Index r = last ? 1 : ca.right + cb.right;
    Core out(l, ca.mode, r);
    const double scale_b = first ? c : 1.0;
    for (Index i = 0; i < ca.mode; ++i) {
      for (Index bb = 0; bb < ca.right; ++bb)
        for (Index aa = 0; aa < ca.left; ++aa) out(aa, i, bb) = ca(aa, i, bb);
      const Index loff = first ? 0 : ca.left;
      const Index roff = last ? 0 : ca.right;
      for (Index bb = 0; bb < cb.right; ++bb)
        for (Index aa = 0; aa < cb.left; ++aa) out(loff + aa, i, roff + bb) += scale_b * cb(aa, i, bb);
    }
    cores.push_back(std::move(out));
  }
  return TensorTrain(std::move(cores));
}

TensorTrain tt_add(const TensorTrain& a, const TensorTrain& b) { return tt_axpy(1.0, b, a); }

TensorTrain tt_scale(const TensorTrain& a, double c) {
  std::vector<Core> cores = a.cores();
  for (double& v : cores.front().data) v *= c;
  return TensorTrain(std::move(cores));
}

TensorTrain tt_hadamard(const TensorTrain& a, const TensorTrain& b) {
  require_same_dims(a.mode_dims(), b.mode_dims(), "tt_hadamard");
  std::vector<Core> cores;
  for (Index k = 0; k < a.order(); ++k) {
    const Core& ca = a.core(k);
    const Core& cb = b.core(k);
    Core out(ca.left * cb.left, ca.mode, ca.right * cb.right);
    for (Index rb = 0; rb < cb.right; ++rb)
      for (Index ra = 0; ra < ca.right; ++ra)
        for (Index i = 0; i < ca.mode; ++i)
          for (Index lb = 0; lb < cb.left; ++lb) {
            const double vb = cb(lb, i, rb);
            for (Index la = 0; la < ca.left; ++la) out(la + ca.left * lb, i, ra + ca.right * rb) = ca(la, i, ra) * vb;
          }
    cores.push_back(std::move(out));
  }
  return TensorTrain(std::move(cores));
}

double tt_dot(const TensorTrain& a, const TensorTrain& b) {
  require_same_dims(a.mode_dims(), b.mode_dims(), "tt_dot");
  Matrix w = Matrix::Ones(1, 1);
  for (Index k = 0; k < a.order(); ++k) {
    const Core& ca = a.core(k);
    const Core& cb = b.core(k);
    Matrix t = w * cb.right_unfolding();  // (ra, n*rb')
    ConstMatrixMap t_left(t.data(), ca.left * ca.mode, cb.right);
    w = ca.left_unfolding().transpose() * t_left;
  }
  return w(0, 0);
}

double tt_right_orthogonalize(std::vector<Core>& cores) {
  for (std::size_t k = cores.size(); k-- > 1;) {
    Core& c = cores[k];
    const Matrix mt = c.right_unfolding().transpose();  // (n*r) x l
    Eigen::HouseholderQR<Matrix> qr(mt);
    const Index q = std::min(mt.rows(), mt.cols());
    Matrix qmat = qr.householderQ() * Matrix::Identity(mt.rows(), q);
    Matrix r = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();  // q x l
    Core& prev = cores[k - 1];
    Matrix prev_new = prev.left_unfolding() * r.transpose();
    c = core_from_right_unfolding(qmat.transpose(), c.mode, c.right);
    prev = core_from_left_unfolding(prev_new, prev.left, prev.mode);
  }
  return ConstMatrixMap(cores.front().data.data(), 1, cores.front().size()).norm();
}

double tt_left_orthogonalize(std::vector<Core>& cores) {
  for (std::size_t k = 0; k + 1 < cores.size(); ++k) {
    Core& c = cores[k];
    const Matrix m = c.left_unfolding();
    Eigen::HouseholderQR<Matrix> qr(m);
    const Index q = std::min(m.rows(), m.cols());
    Matrix qmat = qr.householderQ() * Matrix::Identity(m.rows(), q);
    Matrix r = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();  // q x right
    Core& next = cores[k + 1];
    Matrix next_new = r * next.right_unfolding();
    c = core_from_left_unfolding(qmat, c.left, c.mode);
    next = core_from_right_unfolding(next_new, next.mode, next.right);
  }
  return ConstMatrixMap(cores.back().data.data(), 1, cores.back().size()).norm();
}

namespace {

/// Folds core c into the right-to-left QR carry of tt_norm; returns the new
/// carry, or a 1x1 matrix holding the norm when c is the first core.
Matrix fold_norm(const Core& c, const Matrix& carry, bool first) {
  const Matrix absorbed = c.left_unfolding() * carry.transpose();  // (l n) x q
  const Index q = absorbed.cols();
  if (first) return Matrix::Constant(1, 1, absorbed.norm());
  Matrix mt(c.mode * q, c.left);  // transpose of the right unfolding
  for (Index b = 0; b < q; ++b)
    for (Index i = 0; i < c.mode; ++i)
      for (Index l = 0; l < c.left; ++l) mt(i + c.mode * b, l) = absorbed(l + c.left * i, b);
  Eigen::HouseholderQR<Matrix> qr(mt);
  const Index rows = std::min(mt.rows(), mt.cols());
  return qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
}

}  // namespace

double tt_norm(const TensorTrain& a) {
  // Right-to-left QR sweep keeping only the triangular factors.
  Matrix carry = Matrix::Identity(1, 1);
  for (Index k = a.order() - 1; k >= 0; --k) {
    carry = fold_norm(a.core(k), carry, k == 0);
    if (k == 0) return carry(0, 0);
  }
  return 0.0;
}

double tt_sum(const TensorTrain& a) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
  for (const Core& c : a.cores()) {
    Matrix s = Matrix::Zero(c.left, c.right);
    for (Index i = 0; i < c.mode; ++i) s += c.slice(i);
    v = v * s;
  }
  return v(0);
}

TensorTrain tt_round(const TensorTrain& a, const TruncationPolicy& policy) {
  policy.validate();
  std::vector<Core> cores = a.cores();
  const double norm = tt_right_orthogonalize(cores);
  if (!std::isfinite(norm)) throw DomainError("tt_round: non-finite tensor train");
  if (norm == 0.0) return TensorTrain::zeros(a.mode_dims());
  const Index order = static_cast<Index>(cores.size());
  if (order == 1) return TensorTrain(std::move(cores));
  const double delta = policy.rel_tolerance * norm / std::sqrt(static_cast<double>(order - 1));
  for (Index k = 0; k + 1 < order; ++k) {
    Core& c = cores[as_size(k)];
    Eigen::JacobiSVD<Matrix> svd(c.left_unfolding(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index r = truncation_rank(svd.singularValues(), delta, policy.max_rank);
    Matrix sv = svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
    Core& next = cores[as_size(k + 1)];
    Matrix next_new = sv * next.right_unfolding();
    c = core_from_left_unfolding(svd.matrixU().leftCols(r), c.left, c.mode);
    next = core_from_right_unfolding(next_new, next.mode, next.right);
  }
  return TensorTrain(std::move(cores));
}

// ---------------------------------------------------------------------------

namespace {

Core product_core(const TTOperator& op, const TensorTrain& x, Index k) {
  const Core& ca = op.core(k);
  const Core& cx = x.core(k);
  const Index m = op.row_dims()[as_size(k)];
  const Index n = op.col_dims()[as_size(k)];
  Core out(ca.left * cx.left, m, ca.right * cx.right);
  for (Index xb = 0; xb < cx.right; ++xb)
    for (Index q = 0; q < ca.right; ++q)
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i)
          for (Index xa = 0; xa < cx.left; ++xa) {
            const double vx = cx(xa, j, xb);
            if (vx == 0.0) continue;
            for (Index p = 0; p < ca.left; ++p)
              out(p + ca.left * xa, i, q + ca.right * xb) += ca(p, i + m * j, q) * vx;
          }
  return out;
}

}  // namespace

TensorTrain tt_apply_exact(const TTOperator& op, const TensorTrain& x) {
  if (op.order() != x.order()) throw DomainError("tt_apply: operator/vector order mismatch");
  require_same_dims(op.col_dims(), x.mode_dims(), "tt_apply");
  std::vector<Core> cores;
  for (Index k = 0; k < x.order(); ++k) cores.push_back(product_core(op, x, k));
  return TensorTrain(std::move(cores));
}

double tt_residual_norm(const TTOperator& op, const TensorTrain& x, const TensorTrain& f) {
  if (op.order() != x.order() || op.order() != f.order()) throw DomainError("tt_residual_norm: order mismatch");
  require_same_dims(op.col_dims(), x.mode_dims(), "tt_residual_norm");
  require_same_dims(op.row_dims(), f.mode_dims(), "tt_residual_norm");
  const Index order = x.order();
  if (order == 1) return tt_norm(tt_axpy(-1.0, f, tt_apply_exact(op, x)));
  // Cores of A x - f in the block layout of tt_axpy, built one at a time.
  Matrix carry = Matrix::Identity(1, 1);
  for (Index k = order - 1; k >= 0; --k) {
    const Core p = product_core(op, x, k);
    const Core& cf = f.core(k);
    const bool first = k == 0, last = k == order - 1;
    const Index l = first ? 1 : p.left + cf.left;
    const Index r = last ? 1 : p.right + cf.right;
    Core c(l, p.mode, r);
    const Index loff = first ? 0 : p.left, roff = last ? 0 : p.right;
    const double sf = first ? -1.0 : 1.0;
    for (Index i = 0; i < p.mode; ++i) {
      for (Index b = 0; b < p.right; ++b)
        for (Index a = 0; a < p.left; ++a) c(a, i, b) = p(a, i, b);
      for (Index b = 0; b < cf.right; ++b)
        for (Index a = 0; a < cf.left; ++a) c(loff + a, i, roff + b) += sf * cf(a, i, b);
    }
    carry = fold_norm(c, carry, first);
    if (first) return carry(0, 0);
  }
  return 0.0;
}

TensorTrain tt_apply(const TTOperator& op, const TensorTrain& x, const TruncationPolicy& policy) {
  if (policy.rel_tolerance == 0.0 && policy.max_rank == kUnboundedRank) return tt_apply_exact(op, x);
  return tt_round(tt_apply_exact(op, x), policy);
}

double tt_op_bilinear(const TensorTrain& y, const TTOperator& op, const TensorTrain& x) {
  if (op.order() != x.order() || op.order() != y.order()) throw DomainError("tt_op_bilinear: order mismatch");
  require_same_dims(op.col_dims(), x.mode_dims(), "tt_op_bilinear");
  require_same_dims(op.row_dims(), y.mode_dims(), "tt_op_bilinear");
  // env[(p, alpha), q]: y rank p, operator rank alpha, x rank q
  Matrix env = Matrix::Ones(1, 1);
  for (Index k = 0; k < x.order(); ++k) {
    const Core& ca = op.core(k);
    const Core& cx = x.core(k);
    const Core& cy = y.core(k);
    const Index m = op.row_dims()[as_size(k)], n = op.col_dims()[as_size(k)];
    const Index p = cy.left, ra = ca.left, q = cx.left;
    Matrix next = Matrix::Zero(cy.right * ca.right, cx.right);
    // t1[(p, alpha), (j, q')] = env * x
    const Matrix t1 = env * Eigen::Map<const Matrix>(cx.data.data(), q, n * cx.right);
    for (Index qb = 0; qb < cx.right; ++qb)
      for (Index be = 0; be < ca.right; ++be)
        for (Index j = 0; j < n; ++j)
          for (Index i = 0; i < m; ++i)
            for (Index al = 0; al < ra; ++al) {
              const double av = ca(al, i + m * j, be);
              if (av == 0.0) continue;
              for (Index pb = 0; pb < cy.right; ++pb) {
                double acc = 0.0;
                for (Index pp = 0; pp < p; ++pp) acc += cy(pp, i, pb) * t1(pp + p * al, j + n * qb);
                next(pb + cy.right * be, qb) += av * acc;
              }
            }
    env = std::move(next);
  }
  return env(0, 0);
}

TTOperator tt_op_add(const TTOperator& a, const TTOperator& b) {
  require_same_dims(a.row_dims(), b.row_dims(), "tt_op_add");
  require_same_dims(a.col_dims(), b.col_dims(), "tt_op_add");
  return TTOperator::from_fused(tt_add(a.as_tensor_train(), b.as_tensor_train()), a.row_dims(), a.col_dims());
}

TTOperator tt_op_scale(const TTOperator& a, double c) {
  return TTOperator::from_fused(tt_scale(a.as_tensor_train(), c), a.row_dims(), a.col_dims());
}

TTOperator tt_op_compose(const TTOperator& a, const TTOperator& b) {
  if (a.order() != b.order()) throw DomainError("tt_op_compose: order mismatch");
  require_same_dims(a.col_dims(), b.row_dims(), "tt_op_compose");
  std::vector<Core> cores;
  for (Index k = 0; k < a.order(); ++k) {
    const Core& ca = a.core(k);
    const Core& cb = b.core(k);
    const Index m = a.row_dims()[as_size(k)];
    const Index n = a.col_dims()[as_size(k)];
    const Index l = b.col_dims()[as_size(k)];
    Core out(ca.left * cb.left, m * l, ca.right * cb.right);
    for (Index t = 0; t < cb.right; ++t)
      for (Index q = 0; q < ca.right; ++q)
        for (Index c = 0; c < l; ++c)
          for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < n; ++j)
              for (Index s = 0; s < cb.left; ++s) {
                const double vb = cb(s, j + n * c, t);
                if (vb == 0.0) continue;
                for (Index p = 0; p < ca.left; ++p)
                  out(p + ca.left * s, i + m * c, q + ca.right * t) += ca(p, i + m * j, q) * vb;
              }
    cores.push_back(std::move(out));
  }
  return TTOperator(std::move(cores), a.row_dims(), b.col_dims());
}

TTOperator tt_op_transpose(const TTOperator& a) {
  std::vector<Core> cores;
  for (Index k = 0; k < a.order(); ++k) {
    const Core& c = a.core(k);
    const Index m = a.row_dims()[as_size(k)];
    const Index n = a.col_dims()[as_size(k)];
    Core out(c.left, c.mode, c.right);
    for (Index b = 0; b < c.right; ++b)
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j)
          for (Index p = 0; p < c.left; ++p) out(p, j + n * i, b) = c(p, i + m * j, b);
    cores.push_back(std::move(out));
  }
  return TTOperator(std::move(cores), a.col_dims(), a.row_dims());
}

TTOperator tt_op_round(const TTOperator& a, const TruncationPolicy& policy) {
  return TTOperator::from_fused(tt_round(a.as_tensor_train(), policy), a.row_dims(), a.col_dims());
}

double tt_op_norm(const TTOperator& a) { return tt_norm(a.as_tensor_train()); }

double tt_op_entry(const TTOperator& a, std::span<const Index> row_index, std::span<const Index> col_index) {
  if (static_cast<Index>(row_index.size()) != a.order() || static_cast<Index>(col_index.size()) != a.order())
    throw DomainError("tt_op_entry: index length mismatch");
  std::vector<Index> fused(row_index.size());
  for (std::size_t k = 0; k < fused.size(); ++k) {
    if (row_index[k] < 0 || row_index[k] >= a.row_dims()[k] || col_index[k] < 0 || col_index[k] >= a.col_dims()[k])
      throw DomainError("tt_op_entry: index out of range");
    fused[k] = row_index[k] + a.row_dims()[k] * col_index[k];
  }
  return tt_entry(a.as_tensor_train(), fused);
}

TTOperator tt_diag(const TensorTrain& v) {
  std::vector<Core> cores;
  for (const Core& c : v.cores()) {
    Core out(c.left, c.mode * c.mode, c.right);
    for (Index b = 0; b < c.right; ++b)
      for (Index i = 0; i < c.mode; ++i)
        for (Index a = 0; a < c.left; ++a) out(a, i + c.mode * i, b) = c(a, i, b);
    cores.push_back(std::move(out));
  }
  auto dims = v.mode_dims();
  return TTOperator(std::move(cores), dims, dims);
}

TensorTrain tt_op_diagonal(const TTOperator& a) {
  require_same_dims(a.row_dims(), a.col_dims(), "tt_op_diagonal");
  std::vector<Core> cores;
  for (Index k = 0; k < a.order(); ++k) {
    const Core& c = a.core(k);
    const Index n = a.row_dims()[as_size(k)];
    Core out(c.left, n, c.right);
    for (Index b = 0; b < c.right; ++b)
      for (Index i = 0; i < n; ++i)
        for (Index p = 0; p < c.left; ++p) out(p, i, b) = c(p, i + n * i, b);
    cores.push_back(std::move(out));
  }
  return TensorTrain(std::move(cores));
}

TTOperator tt_op_kron(const TTOperator& a, const TTOperator& b) {
  std::vector<Core> cores = a.cores();
  cores.insert(cores.end(), b.cores().begin(), b.cores().end());
  std::vector<Index> rows = a.row_dims(), cols = a.col_dims();
  rows.insert(rows.end(), b.row_dims().begin(), b.row_dims().end());
  cols.insert(cols.end(), b.col_dims().begin(), b.col_dims().end());
  return TTOperator(std::move(cores), std::move(rows), std::move(cols));
}

TensorTrain tt_kron(const TensorTrain& a, const TensorTrain& b) {
  std::vector<Core> cores = a.cores();
  cores.insert(cores.end(), b.cores().begin(), b.cores().end());
  return TensorTrain(std::move(cores));
}

// ---------------------------------------------------------------------------

Footprint memory_footprint(const TensorTrain& t) {
  Footprint f;
  double dense = 1.0;
  for (const Core& c : t.cores()) {
    f.scalars += static_cast<std::uint64_t>(c.size());
    dense *= static_cast<double>(c.mode);
  }
  f.bytes = f.scalars * sizeof(double);
  f.dense_equivalent_bytes = dense * sizeof(double);
  return f;
}

Footprint memory_footprint(const TTOperator& op) { return memory_footprint(op.as_tensor_train()); }

}  // namespace qttfem
