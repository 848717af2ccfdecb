#include "qttfem/tt_cross.hpp"

#include "qttfem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace qttfem {

namespace {

using MultiIndex = std::vector<Index>;
using IndexSet = std::vector<MultiIndex>;

std::string format_index(std::span<const Index> idx) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < idx.size(); ++k) os << (k ? "," : "") << idx[k];
  os << ')';
  return os.str();
}

Index saturating_product(std::span<const Index> dims) {
  Index p = 1;
  for (Index n : dims) {
    if (p > std::numeric_limits<Index>::max() / n) return std::numeric_limits<Index>::max();
    p *= n;
  }
  return p;
}

class CrossState {
 public:
  CrossState(const Evaluator& f, std::span<const Index> dims, const CrossConfig& config)
      : f_(f), dims_(dims.begin(), dims.end()), config_(config), rng_(config.seed),
        left_(dims.size() + 1), right_(dims.size() + 1), cap_(dims.size() + 1, 1) {
    const std::size_t k_count = dims_.size();
    for (std::size_t k = 1; k < k_count; ++k) {
      const std::span<const Index> all(dims_);
      cap_[k] = std::min({saturating_product(all.first(k)), saturating_product(all.subspan(k)), config.max_rank});
    }
    left_[0] = {MultiIndex{}};
    right_[k_count] = {MultiIndex{}};
    for (std::size_t k = k_count - 1; k >= 1; --k) {
      right_[k].clear();
      grow_right(k, std::min(config.initial_rank, cap_[k]));
    }
    for (std::size_t k = 1; k < k_count; ++k) left_[k] = {MultiIndex(k, 0)};
  }

  double eval(std::span<const Index> idx) {
    const double v = f_(idx);
    ++evaluations_;
    if (!std::isfinite(v)) throw EvaluationError("cross: non-finite sample at index " + format_index(idx));
    return v;
  }

  /// Entries f(left[k][a], i, right[k+1][b]) as a core.
  Core fiber_core(std::size_t k) {
    const IndexSet& l = left_[k];
    const IndexSet& r = right_[k + 1];
    Core c(static_cast<Index>(l.size()), dims_[k], static_cast<Index>(r.size()));
    MultiIndex idx(dims_.size());
    for (Index b = 0; b < c.right; ++b)
      for (Index i = 0; i < c.mode; ++i)
        for (Index a = 0; a < c.left; ++a) {
          const auto& pl = l[static_cast<std::size_t>(a)];
          const auto& pr = r[static_cast<std::size_t>(b)];
          std::copy(pl.begin(), pl.end(), idx.begin());
          idx[k] = i;
          std::copy(pr.begin(), pr.end(), idx.begin() + static_cast<std::ptrdiff_t>(k + 1));
          c(a, i, b) = eval(idx);
        }
    return c;
  }

  /// Orthonormal basis of the columns of m and its maxvol interpolation
  /// matrix Q Q[rows]^{-1}.
  std::pair<Matrix, std::vector<Index>> skeleton(const Matrix& m) {
    const Index r = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), r);
    auto mv = maxvol_select(q, config_.maxvol_tol);
    fallback_ = fallback_ || mv.fallback;
    Matrix sub(r, r);
    for (Index p = 0; p < r; ++p) sub.row(p) = q.row(mv.rows[static_cast<std::size_t>(p)]);
    const Matrix interp = sub.transpose().partialPivLu().solve(q.transpose()).transpose();
    return {interp, std::move(mv.rows)};
  }

  TensorTrain sweep_forward() {
    const std::size_t kc = dims_.size();
    std::vector<Core> cores(kc);
    for (std::size_t k = 0; k + 1 < kc; ++k) {
      const Core c = fiber_core(k);
      auto [interp, rows] = skeleton(c.left_unfolding());
      IndexSet next;
      for (Index p : rows) {
        MultiIndex prefix = left_[k][static_cast<std::size_t>(p % c.left)];
        prefix.push_back(p / c.left);
        next.push_back(std::move(prefix));
      }
      Core q(c.left, c.mode, interp.cols());
      q.left_unfolding() = interp;
      cores[k] = std::move(q);
      left_[k + 1] = std::move(next);
    }
    cores[kc - 1] = fiber_core(kc - 1);
    pivots_.clear();
    for (const auto& prefix : left_[kc - 1])
      for (Index i = 0; i < dims_[kc - 1]; ++i) {
        MultiIndex idx = prefix;
        idx.push_back(i);
        pivots_.push_back(std::move(idx));
      }
    return TensorTrain(std::move(cores));
  }

  TensorTrain sweep_backward() {
    const std::size_t kc = dims_.size();
    std::vector<Core> cores(kc);
    for (std::size_t k = kc - 1; k >= 1; --k) {
      const Core c = fiber_core(k);
      auto [interp, rows] = skeleton(c.right_unfolding().transpose());
      IndexSet next;
      for (Index p : rows) {
        MultiIndex suffix{p % c.mode};
        const auto& tail = right_[k + 1][static_cast<std::size_t>(p / c.mode)];
        suffix.insert(suffix.end(), tail.begin(), tail.end());
        next.push_back(std::move(suffix));
      }
      Core q(interp.cols(), c.mode, c.right);
      q.right_unfolding() = interp.transpose();
      cores[k] = std::move(q);
      right_[k] = std::move(next);
    }
    cores[0] = fiber_core(0);
    pivots_.clear();
    for (Index i = 0; i < dims_[0]; ++i)
      for (const auto& suffix : right_[1]) {
        MultiIndex idx{i};
        idx.insert(idx.end(), suffix.begin(), suffix.end());
        pivots_.push_back(std::move(idx));
      }
    return TensorTrain(std::move(cores));
  }

  /// Adds random suffixes to right[k] up to `target` distinct entries.
  void grow_right(std::size_t k, Index target) {
    std::set<MultiIndex> seen(right_[k].begin(), right_[k].end());
    target = std::min(target, cap_[k]);
    for (int attempt = 0; static_cast<Index>(right_[k].size()) < target && attempt < 64 * target; ++attempt) {
      MultiIndex s;
      for (std::size_t m = k; m < dims_.size(); ++m) s.push_back(draw(dims_[m]));
      if (seen.insert(s).second) right_[k].push_back(std::move(s));
    }
  }

  void grow_left(std::size_t k, Index target) {
    std::set<MultiIndex> seen(left_[k].begin(), left_[k].end());
    target = std::min(target, cap_[k]);
    for (int attempt = 0; static_cast<Index>(left_[k].size()) < target && attempt < 64 * target; ++attempt) {
      MultiIndex s;
      for (std::size_t m = 0; m < k; ++m) s.push_back(draw(dims_[m]));
      if (seen.insert(s).second) left_[k].push_back(std::move(s));
    }
  }

  /// Enlarges the index sets feeding the next sweep; false when every bond
  /// is already at its cap.
  bool grow(bool forward) {
    bool grew = false;
    for (std::size_t k = 1; k < dims_.size(); ++k) {
      auto& set = forward ? right_[k] : left_[k];
      const Index before = static_cast<Index>(set.size());
      const Index target = before + config_.rank_increment;
      if (forward)
        grow_right(k, target);
      else
        grow_left(k, target);
      grew = grew || static_cast<Index>(set.size()) > before;
    }
    return grew;
  }

  Index draw(Index n) { return std::uniform_int_distribution<Index>(0, n - 1)(rng_); }

  std::uint64_t evaluations() const { return evaluations_; }
  bool fallback() const { return fallback_; }
  const IndexSet& pivots() const { return pivots_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  const Evaluator& f_;
  std::vector<Index> dims_;
  CrossConfig config_;
  std::mt19937_64 rng_;
  std::vector<IndexSet> left_;
  std::vector<IndexSet> right_;
  std::vector<Index> cap_;
  IndexSet pivots_;
  std::uint64_t evaluations_ = 0;
  bool fallback_ = false;
};

}  // namespace

void CrossConfig::validate() const {
  if (initial_rank < 1 || max_sweeps < 1 || validation_sample_count < 1 || max_rank < 1 || rank_increment < 1)
    throw DomainError("CrossConfig: counts and ranks must be positive");
  if (!(rel_convergence_tol > 0.0)) throw DomainError("CrossConfig: rel_convergence_tol must be > 0");
  if (!(maxvol_tol >= 0.0)) throw DomainError("CrossConfig: maxvol_tol must be >= 0");
}

MaxvolResult maxvol_select(const Matrix& a, double tol, int max_iterations) {
  const Index n = a.rows();
  const Index r = a.cols();
  if (r == 0 || n < r) throw DomainError("maxvol: need a tall matrix with rows >= columns >= 1");

  MaxvolResult result;
  Eigen::FullPivLU<Matrix> lu(a);
  const auto perm = lu.permutationP().indices();
  // Row perm^{-1}: P * A puts pivot rows first.
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) order[static_cast<std::size_t>(perm(p))] = p;
  result.rows.assign(order.begin(), order.begin() + r);
  if (lu.rank() < r) {
    result.fallback = true;
    return result;
  }

  Matrix sub(r, r);
  for (Index p = 0; p < r; ++p) sub.row(p) = a.row(result.rows[static_cast<std::size_t>(p)]);
  Matrix b = sub.transpose().partialPivLu().solve(a.transpose()).transpose();
  for (; result.iterations < max_iterations; ++result.iterations) {
    Index i = 0, j = 0;
    const double big = b.cwiseAbs().maxCoeff(&i, &j);
    if (big <= 1.0 + tol) break;
    // Swap row i into slot j and update B = A S^{-1} by a rank-one correction.
    const Vector col = b.col(j);
    Eigen::RowVectorXd row = b.row(i);
    row(j) -= 1.0;
    b.noalias() -= col * row / b(i, j);
    result.rows[static_cast<std::size_t>(j)] = i;
  }
  return result;
}

CrossResult cross_interpolate(const Evaluator& f, std::span<const Index> dims, const CrossConfig& config) {
  config.validate();
  if (dims.empty()) throw DomainError("cross: empty mode dimension list");
  for (Index n : dims)
    if (n < 1) throw DomainError("cross: mode dimensions must be positive");

  CrossResult out;
  out.report.seed = config.seed;
  CrossState state(f, dims, config);

  if (dims.size() == 1) {
    Core c(1, dims[0], 1);
    for (Index i = 0; i < dims[0]; ++i) {
      const Index idx[1] = {i};
      c(0, i, 0) = state.eval(idx);
      out.report.pivots.push_back({i});
    }
    out.tt = TensorTrain({std::move(c)});
    out.report.converged = true;
    out.report.final_ranks = out.tt.ranks();
    out.report.evaluations = state.evaluations();
    return out;
  }

  // Validation set drawn from its own stream so it does not depend on the
  // number of pivots drawn during initialization.
  std::mt19937_64 sample_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::vector<Index>> samples(static_cast<std::size_t>(config.validation_sample_count));
  std::vector<double> sample_values(samples.size());
  double sample_norm = 0.0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (Index n : dims) samples[s].push_back(std::uniform_int_distribution<Index>(0, n - 1)(sample_rng));
    sample_values[s] = state.eval(samples[s]);
    sample_norm += sample_values[s] * sample_values[s];
  }
  sample_norm = std::sqrt(sample_norm);

  auto sampled_error = [&](const TensorTrain& t) {
    double err = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const double diff = tt_entry(t, samples[s]) - sample_values[s];
      err += diff * diff;
    }
    err = std::sqrt(err);
    return sample_norm > 0.0 ? err / sample_norm : err;
  };

  double best = std::numeric_limits<double>::infinity();
  bool forward = true;
  int stalled = 0;
  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    TensorTrain t = forward ? state.sweep_forward() : state.sweep_backward();
    const double err = sampled_error(t);
    out.report.sweep_errors.push_back(err);
    out.report.sweeps = sweep + 1;
    if (err < best) {
      best = err;
      out.tt = std::move(t);
      out.report.pivots = state.pivots();
    }
    if (err <= config.rel_convergence_tol) {
      out.report.converged = true;
      break;
    }
    forward = !forward;
    const bool grew = state.grow(forward);
    const std::size_t n = out.report.sweep_errors.size();
    const bool stagnant = n >= 2 && err >= 0.5 * out.report.sweep_errors[n - 2];
    stalled = (!grew && stagnant) ? stalled + 1 : 0;
    if (stalled >= 2) break;
  }

  out.report.estimated_rel_error = best;
  out.report.evaluations = state.evaluations();
  out.report.maxvol_fallback = state.fallback();
  out.tt = tt_round(out.tt, {std::min(1e-14, 0.01 * config.rel_convergence_tol), kUnboundedRank});
  out.report.final_ranks = out.tt.ranks();
  return out;
}

CrossResult reciprocal_tt(const Evaluator& v, std::span<const Index> dims, const CrossConfig& config) {
  int sign = 0;
  Evaluator inv = [&](std::span<const Index> idx) {
    const double x = v(idx);
    if (!std::isfinite(x)) throw EvaluationError("reciprocal: non-finite value at index " + format_index(idx));
    if (x == 0.0) throw DomainError("reciprocal: zero value at index " + format_index(idx));
    const int s = x > 0.0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) throw DomainError("reciprocal: sign change at index " + format_index(idx));
    return 1.0 / x;
  };
  return cross_interpolate(inv, dims, config);
}

}  // namespace qttfem
