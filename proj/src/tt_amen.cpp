#include "qttfem/tt_amen.hpp"

#include "qttfem/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>

namespace qttfem {

void AmenConfig::validate() const {
  if (!(residual_tol > 0.0)) throw ConfigError("amen: residual_tol must be positive");
  if (max_sweeps < 1) throw ConfigError("amen: max_sweeps must be positive");
  if (enrichment_rank < 1) throw ConfigError("amen: enrichment_rank must be >= 1");
  if (direct_limit < 1 || local_iterations < 1) throw ConfigError("amen: local solver limits must be positive");
  if (rounding.rel_tolerance < 0.0 || rounding.max_rank < 1) throw ConfigError("amen: invalid rounding policy");
  if (!(stagnation_tol >= 0.0)) throw ConfigError("amen: stagnation_tol must be nonnegative");
}

namespace {

std::size_t sz(Index k) { return static_cast<std::size_t>(k); }

// Rounded operators carry asymmetry at the level of their rounding tolerance.
constexpr double kSymmetryTol = 1e-6;

/// Interface (environment) tensor between a "test" train and a "trial" train
/// through an operator: data[p + P (alpha + Ra q)].
struct Env {
  Index p = 1, ra = 1, q = 1;
  Matrix m = Matrix::Ones(1, 1);  // P x (Ra Q)
};

/// Interface between a test train and a plain vector train: P x Rf.
using VecEnv = Matrix;

/// One orientation of the problem: cores of A and f, possibly reversed.
struct Sys {
  std::vector<Core> a;
  std::vector<Core> f;
  std::vector<Index> n;
};

Core reversed_core(const Core& c) {
  Core out(c.right, c.mode, c.left);
  for (Index b = 0; b < c.right; ++b)
    for (Index i = 0; i < c.mode; ++i)
      for (Index a = 0; a < c.left; ++a) out(b, i, a) = c(a, i, b);
  return out;
}

std::vector<Core> reversed(const std::vector<Core>& cores) {
  std::vector<Core> out;
  out.reserve(cores.size());
  for (auto it = cores.rbegin(); it != cores.rend(); ++it) out.push_back(reversed_core(*it));
  return out;
}

/// T[(p, i), (beta, q')] = sum L[p, alpha, q] A[alpha, i, j, beta] V[q, j, q'].
Matrix half_apply(const Env& l, const Core& a, Index n, const Core& v) {
  const Index p = l.p, ra = a.left, rb = a.right, q = v.left, q2 = v.right;
  // T1[(p, alpha), (j, q')]
  const Matrix lm = Eigen::Map<const Matrix>(l.m.data(), p * ra, q);
  const Matrix t1 = lm * v.left_unfolding().reshaped(q, n * q2);
  // M1[(p, q'), (alpha, j)]
  Matrix m1(p * q2, ra * n);
  for (Index qq = 0; qq < q2; ++qq)
    for (Index j = 0; j < n; ++j)
      for (Index al = 0; al < ra; ++al)
        for (Index pp = 0; pp < p; ++pp) m1(pp + p * qq, al + ra * j) = t1(pp + p * al, j + n * qq);
  // Amat[(alpha, j), (i, beta)]
  Matrix am(ra * n, n * rb);
  for (Index be = 0; be < rb; ++be)
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        for (Index al = 0; al < ra; ++al) am(al + ra * j, i + n * be) = a(al, i + n * j, be);
  const Matrix t2 = m1 * am;  // [(p, q'), (i, beta)]
  Matrix out(p * n, rb * q2);
  for (Index qq = 0; qq < q2; ++qq)
    for (Index be = 0; be < rb; ++be)
      for (Index i = 0; i < n; ++i)
        for (Index pp = 0; pp < p; ++pp) out(pp + p * i, be + rb * qq) = t2(pp + p * qq, i + n * be);
  return out;
}

Env left_step(const Env& l, const Core& u, const Core& a, Index n, const Core& v) {
  Env out;
  out.p = u.right;
  out.ra = a.right;
  out.q = v.right;
  out.m = u.left_unfolding().transpose() * half_apply(l, a, n, v);
  return out;
}

/// T[(p, i), gamma'] = sum L[p, gamma] F[gamma, i, gamma'].
Matrix half_vec(const VecEnv& l, const Core& f) {
  Matrix out(l.rows() * f.mode, f.right);
  for (Index i = 0; i < f.mode; ++i) {
    const Matrix s = l * f.slice(i);
    for (Index g = 0; g < f.right; ++g)
      for (Index p = 0; p < l.rows(); ++p) out(p + l.rows() * i, g) = s(p, g);
  }
  return out;
}

VecEnv left_vec_step(const VecEnv& l, const Core& u, const Core& f) {
  return u.left_unfolding().transpose() * half_vec(l, f);
}

/// Local operator y = (L x A x R) u as an (p n) x p2 matrix; R is the right
/// environment in left-environment layout of the reversed train.
Matrix local_apply(const Env& l, const Core& a, Index n, const Env& r, const Core& u) {
  return half_apply(l, a, n, u) * r.m.transpose();
}

Matrix local_rhs(const VecEnv& l, const Core& f, const VecEnv& r) { return half_vec(l, f) * r.transpose(); }

/// Dense local matrix B[(a, i, b), (a', j, b')] in the core's column-major layout.
Matrix local_dense(const Env& l, const Core& a, Index n, const Env& r) {
  const Index p = l.p, q = l.q, ra = a.left, rb = a.right, p2 = r.p, q2 = r.q;
  // AR[alpha, (i, bp, j, bq)] = sum_beta A[alpha, i, j, beta] R[bp, beta, bq]
  Matrix af(ra * n * n, rb);  // rows alpha + ra (i + n j)
  std::copy(a.data.begin(), a.data.end(), af.data());
  Matrix rf(rb, p2 * q2);  // rows beta, cols bp + p2 bq
  for (Index bq = 0; bq < q2; ++bq)
    for (Index be = 0; be < rb; ++be)
      for (Index bp = 0; bp < p2; ++bp) rf(be, bp + p2 * bq) = r.m(bp, be + rb * bq);
  const Matrix ar = af * rf;  // [(alpha, i, j), (bp, bq)]
  Matrix arp(ra, n * p2 * n * q2);  // cols (i + n bp) + n p2 (j + n bq)
  const Index mr = n * p2;
  for (Index bq = 0; bq < q2; ++bq)
    for (Index bp = 0; bp < p2; ++bp)
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
          for (Index al = 0; al < ra; ++al)
            arp(al, (i + n * bp) + mr * (j + n * bq)) = ar(al + ra * (i + n * j), bp + p2 * bq);
  Matrix lt(p * q, ra);  // rows ap + p aq
  for (Index aq = 0; aq < q; ++aq)
    for (Index al = 0; al < ra; ++al)
      for (Index ap = 0; ap < p; ++ap) lt(ap + p * aq, al) = l.m(ap, al + ra * aq);
  const Matrix prod = lt * arp;  // [(ap, aq), (rr, c)]
  Matrix b(p * n * p2, q * n * q2);
  const Index mc = n * q2;
  for (Index c = 0; c < mc; ++c)
    for (Index rr = 0; rr < mr; ++rr)
      for (Index aq = 0; aq < q; ++aq)
        for (Index ap = 0; ap < p; ++ap) b(ap + p * rr, aq + q * c) = prod(ap + p * aq, rr + mr * c);
  return b;
}

Eigen::VectorXd local_diagonal(const Env& l, const Core& a, Index n, const Env& r) {
  const Index p = l.p, ra = a.left, rb = a.right, p2 = r.p;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p * n * p2);
  for (Index al = 0; al < ra; ++al)
    for (Index be = 0; be < rb; ++be)
      for (Index i = 0; i < n; ++i) {
        const double v = a(al, i + n * i, be);
        if (v == 0.0) continue;
        for (Index bp = 0; bp < p2; ++bp)
          for (Index ap = 0; ap < p; ++ap)
            out(ap + p * (i + n * bp)) += v * l.m(ap, al + ra * ap) * r.m(bp, be + rb * bp);
      }
  return out;
}

struct PassStats {
  double energy = 0.0;           // 1/2 x^T A x - f^T x at the last local solve
  double projected_residual = 0.0;  // Z-projected residual of the final iterate (last core)
};

struct Solver {
  const AmenConfig& cfg;
  double trunc_tol;
  int sweep = 0;

  Eigen::VectorXd solve_local(const Env& l, const Core& a, Index n, const Env& r, const Eigen::VectorXd& rhs,
                              const Eigen::VectorXd& guess, Index core) const {
    const Index size = rhs.size();
    if (cfg.local_solver == LocalSolver::direct && size <= cfg.direct_limit) {
      auto apply = [&](const Eigen::VectorXd& v) {
        Core c(l.q, n, r.q);
        std::copy(v.data(), v.data() + v.size(), c.data.begin());
        return Eigen::VectorXd(local_apply(l, a, n, r, c).reshaped());
      };
      auto refine = [&](const auto& factor) {
        Eigen::VectorXd x = factor.solve(rhs);
        for (int it = 0; it < 2; ++it) x += factor.solve(rhs - apply(x));
        return x;
      };
      Matrix b = local_dense(l, a, n, r);
      // Symmetrize the lower triangle, which is all the factorizations read.
      for (Index j = 0; j < size; ++j)
        for (Index i = j + 1; i < size; ++i) b(i, j) = 0.5 * (b(i, j) + b(j, i));
      {
        Eigen::LLT<Eigen::Ref<Matrix>> llt(b);
        if (llt.info() == Eigen::Success) return refine(llt);
      }
      // Cholesky broke down (conditioning near 1/eps); pivoted LDL^T instead.
      b = local_dense(l, a, n, r);
      for (Index j = 0; j < size; ++j)
        for (Index i = j + 1; i < size; ++i) b(i, j) = 0.5 * (b(i, j) + b(j, i));
      Eigen::LDLT<Eigen::Ref<Matrix>> ldlt(b);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
        throw SolverError("amen: local system not positive definite (sweep " + std::to_string(sweep) + ", core " +
                          std::to_string(core) + ")");
      return refine(ldlt);
    }
    // Jacobi-preconditioned CG, warm started.
    const Eigen::VectorXd diag = local_diagonal(l, a, n, r);
    for (Index k = 0; k < size; ++k)
      if (!(diag(k) > 0.0))
        throw SolverError("amen: local system has a nonpositive diagonal (sweep " + std::to_string(sweep) +
                          ", core " + std::to_string(core) + ")");
    auto apply = [&](const Eigen::VectorXd& v) {
      Core c(l.q, n, r.q);
      std::copy(v.data(), v.data() + v.size(), c.data.begin());
      const Matrix y = local_apply(l, a, n, r, c);
      return Eigen::VectorXd(y.reshaped());
    };
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return Eigen::VectorXd::Zero(size);
    Eigen::VectorXd x = guess;
    Eigen::VectorXd res = rhs - apply(x);
    const double target = 0.01 * cfg.residual_tol * rhs_norm;
    Eigen::VectorXd z = res.cwiseQuotient(diag);
    Eigen::VectorXd p = z;
    double rz = res.dot(z);
    for (int it = 0; it < cfg.local_iterations && res.norm() > target; ++it) {
      const Eigen::VectorXd ap = apply(p);
      const double pap = p.dot(ap);
      if (!(pap > 0.0))
        throw SolverError("amen: local system not positive definite (sweep " + std::to_string(sweep) + ", core " +
                          std::to_string(core) + ")");
      const double alpha = rz / pap;
      x += alpha * p;
      res -= alpha * ap;
      z = res.cwiseQuotient(diag);
      const double rz_new = res.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    return x;
  }

  /// One left-to-right pass. x and z are right-orthogonal from core 1 on.
  PassStats pass(const Sys& sys, std::vector<Core>& x, std::vector<Core>& z) {
    PassStats stats;
    const Index order = static_cast<Index>(x.size());
    // Right environments built as left environments of the reversed trains.
    const auto xr = reversed(x), zr = reversed(z), ar = reversed(sys.a), fr = reversed(sys.f);
    std::vector<Env> rxx(sz(order) + 1), rzx(sz(order) + 1);
    std::vector<VecEnv> rxf(sz(order) + 1, VecEnv::Ones(1, 1)), rzf(sz(order) + 1, VecEnv::Ones(1, 1));
    for (Index k = order - 1; k >= 1; --k) {
      const Index kr = order - 1 - k;
      const Index n = sys.n[sz(k)];
      rxx[sz(k)] = left_step(rxx[sz(k) + 1], xr[sz(kr)], ar[sz(kr)], n, xr[sz(kr)]);
      rzx[sz(k)] = left_step(rzx[sz(k) + 1], zr[sz(kr)], ar[sz(kr)], n, xr[sz(kr)]);
      rxf[sz(k)] = left_vec_step(rxf[sz(k) + 1], xr[sz(kr)], fr[sz(kr)]);
      rzf[sz(k)] = left_vec_step(rzf[sz(k) + 1], zr[sz(kr)], fr[sz(kr)]);
    }

    Env lxx, lzx;
    VecEnv lxf = VecEnv::Ones(1, 1), lzf = VecEnv::Ones(1, 1);
    for (Index k = 0; k < order; ++k) {
      const Index n = sys.n[sz(k)];
      const Core& a = sys.a[sz(k)];
      const Core& f = sys.f[sz(k)];
      Core& xc = x[sz(k)];
      const Env& rx = rxx[sz(k) + 1];
      const Matrix rhs_m = local_rhs(lxf, f, rxf[sz(k) + 1]);
      const Eigen::VectorXd rhs = rhs_m.reshaped();
      const Eigen::VectorXd guess = Eigen::Map<const Eigen::VectorXd>(xc.data.data(), xc.size());
      const Eigen::VectorXd sol = solve_local(lxx, a, n, rx, rhs, guess, k);
      Core u(xc.left, n, xc.right);
      std::copy(sol.data(), sol.data() + sol.size(), u.data.begin());

      if (k + 1 == order) {
        stats.energy = -0.5 * sol.dot(rhs);
        stats.projected_residual =
            (local_apply(lzx, a, n, rzx[sz(k) + 1], u) - local_rhs(lzf, f, rzf[sz(k) + 1])).norm();
        xc = std::move(u);
        break;
      }

      // Truncate the solved core.
      const Matrix um = u.left_unfolding();
      Eigen::JacobiSVD<Matrix> svd(um, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& s = svd.singularValues();
      const double total = s.norm();
      Index r = s.size();
      {
        double tail = 0.0;
        const double delta = trunc_tol * total;
        while (r > 1 && tail + s(r - 1) * s(r - 1) <= delta * delta) {
          tail += s(r - 1) * s(r - 1);
          --r;
        }
        r = std::min(r, cfg.rounding.max_rank);
      }
      const Matrix uu = svd.matrixU().leftCols(r);
      const Matrix sv = s.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();

      // Residual projections for the enrichment and the Z update.
      const Matrix resid_z = local_apply(lzx, a, n, rzx[sz(k) + 1], u) - local_rhs(lzf, f, rzf[sz(k) + 1]);
      const Matrix resid_x = local_apply(lxx, a, n, rzx[sz(k) + 1], u) - local_rhs(lxf, f, rzf[sz(k) + 1]);

      Core& zc = z[sz(k)];
      {
        Eigen::JacobiSVD<Matrix> zsvd(resid_z, Eigen::ComputeThinU);
        const Index rz = zc.right;
        Matrix zu = Matrix::Zero(resid_z.rows(), rz);
        const Index avail = std::min<Index>(rz, zsvd.matrixU().cols());
        zu.leftCols(avail) = zsvd.matrixU().leftCols(avail);
        if (avail < rz) {
          // Pad with an orthonormal complement.
          Eigen::HouseholderQR<Matrix> qr(zu);
          zu = qr.householderQ() * Matrix::Identity(zu.rows(), rz);
        }
        Core nz(zc.left, n, rz);
        std::copy(zu.data(), zu.data() + zu.size(), nz.data.begin());
        zc = std::move(nz);
      }

      Matrix aug(um.rows(), r + resid_x.cols());
      aug << uu, resid_x;
      Eigen::HouseholderQR<Matrix> qr(aug);
      const Index rnew = std::min(aug.rows(), aug.cols());
      const Matrix q = qr.householderQ() * Matrix::Identity(aug.rows(), rnew);
      const Matrix coeff = q.transpose() * uu * sv;  // rnew x old right rank

      Core& next = x[sz(k) + 1];
      const Matrix next_new = coeff * next.right_unfolding();
      Core nx(rnew, next.mode, next.right);
      std::copy(next_new.data(), next_new.data() + next_new.size(), nx.data.begin());
      next = std::move(nx);
      Core qx(xc.left, n, rnew);
      std::copy(q.data(), q.data() + q.size(), qx.data.begin());
      xc = std::move(qx);

      lxx = left_step(lxx, xc, a, n, xc);
      lzx = left_step(lzx, zc, a, n, xc);
      lxf = left_vec_step(lxf, xc, f);
      lzf = left_vec_step(lzf, zc, f);
    }
    return stats;
  }
};

}  // namespace

double residual_norm(const TTOperator& a, const TensorTrain& x, const TensorTrain& f, const TruncationPolicy& rounding,
                     bool relative) {
  if (a.row_dims() != f.mode_dims() || a.col_dims() != x.mode_dims())
    throw DomainError("residual_norm: shape mismatch");
  const bool exact = rounding.rel_tolerance == 0.0 && rounding.max_rank == kUnboundedRank;
  const double r = exact ? tt_residual_norm(a, x, f) : tt_norm(tt_axpy(-1.0, f, tt_apply(a, x, rounding)));
  if (!relative) return r;
  const double fn = tt_norm(f);
  return fn > 0.0 ? r / fn : r;
}

double asymmetry(const TTOperator& a) {
  const double n = tt_op_norm(a);
  if (n == 0.0) return 0.0;
  return tt_op_norm(tt_op_add(a, tt_op_scale(tt_op_transpose(a), -1.0))) / n;
}

AmenResult amen_solve(const TTOperator& a, const TensorTrain& f, const std::optional<TensorTrain>& x0,
                      const AmenConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto dims = f.mode_dims();
  if (a.row_dims() != dims || a.col_dims() != dims) throw DomainError("amen: operator and right-hand side disagree");
  if (x0 && x0->mode_dims() != dims) throw DomainError("amen: initial guess has the wrong shape");
  if (asymmetry(a) > kSymmetryTol)
    throw DomainError("amen: operator is not symmetric; apply the symmetric Dirichlet projection P A P + s (I - P)");

  AmenResult result;
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  const double fnorm = tt_norm(f);
  if (fnorm == 0.0) {
    result.x = TensorTrain::zeros(dims);
    result.report.converged = true;
    result.report.stop_reason = "zero right-hand side";
    result.report.wall_time_s = elapsed();
    return result;
  }

  const double trunc_tol =
      config.rounding.rel_tolerance > 0.0 ? config.rounding.rel_tolerance : 0.01 * config.residual_tol;
  const TruncationPolicy check = TruncationPolicy::exact();

  TensorTrain x;
  if (x0) {
    x = *x0;
  } else {
    const double count = static_cast<double>(f.dense_size());
    const double mean_f = tt_sum(f) / count;
    const double mean_diag = tt_sum(tt_op_diagonal(a)) / count;
    if (mean_f != 0.0 && mean_diag != 0.0)
      x = TensorTrain::constant(dims, mean_f / mean_diag);
    else
      x = tt_round(f, {0.1, 8});
  }

  Sys fwd{a.cores(), f.cores(), dims};
  Sys bwd{reversed(fwd.a), reversed(fwd.f), std::vector<Index>(dims.rbegin(), dims.rend())};

  std::vector<Core> xc = x.cores();
  tt_right_orthogonalize(xc);
  std::mt19937_64 rng(config.seed);
  std::vector<Index> zranks;
  for (std::size_t k = 1; k < dims.size(); ++k) zranks.push_back(config.enrichment_rank);
  std::vector<Core> zc = tt_round(TensorTrain::random(dims, zranks, rng), TruncationPolicy::exact()).cores();
  // exact rounding trims ranks that exceed the feasible bound near the ends
  tt_right_orthogonalize(zc);

  Solver solver{config, trunc_tol};
  bool forward = true;
  const bool trace = std::getenv("QTTFEM_AMEN_TRACE") != nullptr;
  double best_energy = std::numeric_limits<double>::infinity();
  int stalled_passes = 0;
  // energy at the last failed true-residual check; no recheck until it improves
  double checked_energy = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    solver.sweep = sweep;
    const PassStats st = solver.pass(forward ? fwd : bwd, xc, zc);
    xc = reversed(xc);
    zc = reversed(zc);
    forward = !forward;
    TensorTrain current(forward ? xc : reversed(xc));
    const double est = st.projected_residual / fnorm;
    result.report.sweeps_used = sweep;
    result.report.residual_history.push_back(est);
    result.report.energy_history.push_back(st.energy);
    result.report.rank_profile_history.push_back(current.ranks());
    if (trace)
      std::fprintf(stderr, "amen sweep %d energy %.16e projected residual %.3e max rank %ld (%.2f s)\n", sweep,
                   st.energy, est, static_cast<long>(current.max_rank()), elapsed());

    if (st.energy < best_energy - config.stagnation_tol * std::abs(st.energy)) {
      stalled_passes = 0;
    } else {
      ++stalled_passes;
    }
    if (st.energy < best_energy) {
      best_energy = st.energy;
      result.x = current;
    }
    if (est <= config.residual_tol && st.energy < checked_energy - config.stagnation_tol * std::abs(st.energy)) {
      checked_energy = st.energy;
      const double res = residual_norm(a, current, f, check);
      if (res <= config.residual_tol) {
        result.x = std::move(current);
        result.report.converged = true;
        result.report.final_relative_residual = res;
        result.report.stop_reason = "residual below tolerance";
        break;
      }
    }
    if (stalled_passes >= 2) {
      result.report.stop_reason = "energy stagnated";
      break;
    }
  }
  if (result.report.stop_reason.empty()) result.report.stop_reason = "max sweeps reached";
  if (!result.report.converged) result.report.final_relative_residual = residual_norm(a, result.x, f, check);
  result.report.wall_time_s = elapsed();
  return result;
}

}  // namespace qttfem
