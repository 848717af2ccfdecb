#include "qttfem/elasticity.hpp"

#include "qttfem/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace qttfem {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::vector<Index> kBits(int d) { return std::vector<Index>(static_cast<std::size_t>(d), 2); }

/// Affine coefficients of one scalar field f(i, j) = c0 + ci i + cj j.
struct Affine {
  double c0 = 0.0, ci = 0.0, cj = 0.0;
  double at(double i, double j) const { return c0 + ci * i + cj * j; }
};

TensorTrain affine_train(const Affine& f, int d) {
  const auto ones = TensorTrain::ones(kBits(d));
  if (f.cj == 0.0) return fuse_axes(axis_linear(d, f.c0, f.ci), ones);
  if (f.ci == 0.0) return fuse_axes(ones, axis_linear(d, f.c0, f.cj));
  return tt_round(tt_add(fuse_axes(axis_linear(d, f.c0, f.ci), ones), fuse_axes(ones, axis_linear(d, 0.0, f.cj))),
                  {1e-15, kUnboundedRank});
}

/// The five affine fields J11, J12, J21, J22, det J at one reference point.
struct AffineJacobian {
  std::array<Affine, 4> jac;
  Affine det;
};

AffineJacobian affine_fields(const QuadDomain& domain, int d, double xi, double eta) {
  const double h = grid_spacing(d);
  const double hh = 0.5 * h;
  const Point2 a = domain.edge_a(), b = domain.edge_b(), w = domain.twist();
  // s = s0 + h i, t = t0 + h j
  const double s0 = h * 0.5 * (1.0 + xi);
  const double t0 = h * 0.5 * (1.0 + eta);
  AffineJacobian out;
  out.jac[0] = {hh * (a.x + t0 * w.x), 0.0, hh * h * w.x};  // J11 = dx/dxi
  out.jac[1] = {hh * (b.x + s0 * w.x), hh * h * w.x, 0.0};  // J12 = dx/deta
  out.jac[2] = {hh * (a.y + t0 * w.y), 0.0, hh * h * w.y};  // J21 = dy/dxi
  out.jac[3] = {hh * (b.y + s0 * w.y), hh * h * w.y, 0.0};  // J22 = dy/deta
  const double k = hh * hh;
  out.det = {k * (cross(a, b) + s0 * cross(a, w) + t0 * cross(w, b)), k * h * cross(a, w), k * h * cross(w, b)};
  return out;
}

/// Coefficient vectors over (J11, J12, J21, J22) of the adjugate-pulled
/// gradient components: G_x = J22 dxi - J21 deta, G_y = -J12 dxi + J11 deta.
std::array<Eigen::Vector4d, 2> gradient_forms(Corner c, double xi, double eta) {
  const Eigen::Vector2d g = shape_gradient(c, xi, eta);
  return {Eigen::Vector4d(0.0, 0.0, -g(1), g(0)), Eigen::Vector4d(g(1), -g(0), 0.0, 0.0)};
}

constexpr std::array<std::pair<int, int>, 10> kProductPairs{
    std::pair{0, 0}, std::pair{0, 1}, std::pair{0, 2}, std::pair{0, 3}, std::pair{1, 1},
    std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 2}, std::pair{2, 3}, std::pair{3, 3}};

/// Linear combination sum_k c_k t_k, skipping zero coefficients.
TensorTrain combine(const std::vector<std::pair<double, const TensorTrain*>>& terms, std::span<const Index> dims,
                    const TruncationPolicy& policy) {
  std::optional<TensorTrain> acc;
  for (const auto& [c, t] : terms) {
    if (c == 0.0) continue;
    acc = acc ? tt_axpy(c, *t, *acc) : tt_scale(*t, c);
  }
  if (!acc) return TensorTrain::zeros(dims);
  return tt_round(*acc, policy);
}

constexpr TruncationPolicy kExactish{1e-14, kUnboundedRank};

}  // namespace

Eigen::Matrix2d affine_jacobian(const QuadDomain& domain, int d, std::uint64_t i, std::uint64_t j, double xi,
                                double eta) {
  const auto f = affine_fields(domain, d, xi, eta);
  const auto di = static_cast<double>(i), dj = static_cast<double>(j);
  Eigen::Matrix2d m;
  m << f.jac[0].at(di, dj), f.jac[1].at(di, dj), f.jac[2].at(di, dj), f.jac[3].at(di, dj);
  return m;
}

JacobianField build_jacobian_field(const QuadDomain& domain, int d, const QuadratureRule& rule,
                                   const CrossConfig& cross) {
  domain.validate();
  const auto dims = grid_dims(d);
  const double last = std::ldexp(1.0, d) - 1.0;
  JacobianField field;
  field.d = d;
  field.rule = rule;
  for (const auto& q : rule.points) {
    const AffineJacobian f = affine_fields(domain, d, q.xi, q.eta);
    for (double i : {0.0, last})
      for (double j : {0.0, last})
        if (!(f.det.at(i, j) > 0.0))
          throw DomainError("jacobian: nonpositive determinant near element (" + std::to_string(static_cast<long>(i)) +
                            "," + std::to_string(static_cast<long>(j)) + "); the mesh is degenerate");
    std::array<TensorTrain, 4> jac;
    for (std::size_t k = 0; k < 4; ++k) jac[k] = affine_train(f.jac[k], d);
    field.jac.push_back(std::move(jac));
    field.det.push_back(affine_train(f.det, d));
    const Affine det = f.det;
    auto eval = [det](std::span<const Index> idx) {
      const auto [i, j] = deinterleave(idx);
      return det.at(static_cast<double>(i), static_cast<double>(j));
    };
    auto inv = reciprocal_tt(eval, dims, cross);
    field.inv_det.push_back(std::move(inv.tt));
    field.cross_reports.push_back(std::move(inv.report));
  }
  return field;
}

TensorTrain corner_pair_block(const JacobianField& field, const Lame& lame, Corner c1, int alpha1, Corner c2,
                              int alpha2, const TruncationPolicy& policy) {
  if (alpha1 < 0 || alpha1 > 1 || alpha2 < 0 || alpha2 > 1) throw DomainError("corner_pair_block: bad component");
  const auto dims = grid_dims(field.d);
  const Eigen::Matrix2d k = constitutive_pair(alpha1, alpha2, lame);
  std::optional<TensorTrain> block;
  for (std::size_t q = 0; q < field.rule.points.size(); ++q) {
    const auto& pt = field.rule.points[q];
    const auto l1 = gradient_forms(c1, pt.xi, pt.eta);
    const auto l2 = gradient_forms(c2, pt.xi, pt.eta);
    Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        if (k(a, b) != 0.0) c += k(a, b) * l1[static_cast<std::size_t>(a)] * l2[static_cast<std::size_t>(b)].transpose();

    const auto& jac = field.jac[q];
    std::vector<TensorTrain> products;
    std::vector<std::pair<double, const TensorTrain*>> terms;
    products.reserve(kProductPairs.size());
    for (auto [r, s] : kProductPairs) {
      const double coef = r == s ? c(r, s) : c(r, s) + c(s, r);
      if (coef == 0.0) continue;
      products.push_back(tt_round(tt_hadamard(jac[static_cast<std::size_t>(r)], jac[static_cast<std::size_t>(s)]), kExactish));
      terms.emplace_back(coef, &products.back());
    }
    const TensorTrain poly = combine(terms, dims, kExactish);
    const TensorTrain term = tt_scale(tt_round(tt_hadamard(field.inv_det[q], poly), policy), pt.weight);
    block = block ? tt_round(tt_add(*block, term), policy) : term;
  }
  return *block;
}

TensorTrain mass_pair_block(const JacobianField& field, Corner c1, Corner c2, const TruncationPolicy& policy) {
  std::vector<std::pair<double, const TensorTrain*>> terms;
  for (std::size_t q = 0; q < field.rule.points.size(); ++q) {
    const auto& pt = field.rule.points[q];
    terms.emplace_back(pt.weight * shape_value(c1, pt.xi, pt.eta) * shape_value(c2, pt.xi, pt.eta), &field.det[q]);
  }
  return combine(terms, grid_dims(field.d), policy);
}

TTOperator assemble_stiffness_raw(const JacobianField& field, const Lame& lame, const TruncationPolicy& policy,
                                  Index* max_block_rank, std::uint64_t order_seed) {
  const TruncationPolicy block_policy{0.1 * policy.rel_tolerance, policy.max_rank};
  struct Pair {
    Corner c1, c2;
    int a1, a2;
  };
  std::vector<Pair> pairs;
  for (Corner c1 : kCorners)
    for (Corner c2 : kCorners)
      for (int a1 = 0; a1 < 2; ++a1)
        for (int a2 = 0; a2 < 2; ++a2) pairs.push_back({c1, c2, a1, a2});
  if (order_seed != 0) {
    std::mt19937_64 rng(order_seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
  }
  std::optional<TTOperator> acc;
  Index worst = 0;
  for (const Pair& pr : pairs) {
    const TensorTrain block = corner_pair_block(field, lame, pr.c1, pr.a1, pr.c2, pr.a2, block_policy);
    worst = std::max(worst, block.max_rank());
    TTOperator s = scatter_corner_pair(block, pr.c1, pr.c2, pr.a1, pr.a2);
    acc = acc ? tt_op_round(tt_op_add(*acc, s), policy) : tt_op_round(s, policy);
  }
  if (max_block_rank) *max_block_rank = worst;
  return *acc;
}

TTOperator assemble_mass(const JacobianField& field, const TruncationPolicy& policy) {
  const TruncationPolicy block_policy{0.1 * policy.rel_tolerance, policy.max_rank};
  std::optional<TTOperator> acc;
  for (Corner c1 : kCorners)
    for (Corner c2 : kCorners) {
      const TensorTrain block = mass_pair_block(field, c1, c2, block_policy);
      TTOperator s = scatter_corner_pair(block, c1, c2, Eigen::Matrix2d::Identity());
      acc = acc ? tt_op_round(tt_op_add(*acc, s), policy) : tt_op_round(s, policy);
    }
  return *acc;
}

TTOperator apply_dirichlet(const TTOperator& a_raw, const TTOperator& projector, const TruncationPolicy& policy,
                           double* scale) {
  const TensorTrain diag = tt_op_diagonal(a_raw);
  const double dof = static_cast<double>(diag.dense_size());
  const double s = tt_sum(diag) / dof;
  if (scale) *scale = s;
  const TTOperator pap = tt_op_round(tt_op_compose(tt_op_compose(projector, a_raw), projector), policy);
  const TensorTrain p = tt_op_diagonal(projector);
  const auto dims = p.mode_dims();
  const TensorTrain fixed = tt_axpy(-1.0, p, TensorTrain::ones(dims));
  return tt_op_round(tt_op_add(pap, tt_diag(tt_scale(fixed, s))), policy);
}

TensorTrain body_force_nodal(int d, double fx, double fy) {
  const auto dims = grid_dims(d);
  const TensorTrain x = embed_component(TensorTrain::constant(dims, fx), 0);
  const TensorTrain y = embed_component(TensorTrain::constant(dims, fy), 1);
  return tt_round(tt_add(x, y), kExactish);
}

TensorTrain assemble_rhs(const TTOperator& mass, const TensorTrain& f_nodal, const TTOperator& projector,
                         const TruncationPolicy& policy) {
  if (f_nodal.mode_dims() != mass.col_dims()) throw DomainError("assemble_rhs: load has the wrong shape");
  return tt_apply(projector, tt_apply(mass, f_nodal, policy), policy);
}

AssembledSystem assemble_stiffness(const Problem& problem, const AssemblyConfig& config) {
  problem.validate();
  config.rounding.validate();
  const auto t0 = Clock::now();
  AssembledSystem sys;
  sys.topology = GridTopology::make(problem.d);
  sys.config_hash = discretization_hash(problem);

  auto t = Clock::now();
  const JacobianField field =
      build_jacobian_field(problem.domain, problem.d, QuadratureRule::make(problem.quadrature), config.cross);
  sys.report.jacobian_s = seconds_since(t);
  sys.report.cross_reports = field.cross_reports;

  t = Clock::now();
  sys.a_raw = assemble_stiffness_raw(field, problem.material.lame(), config.rounding, &sys.report.max_block_rank,
                                     config.order_seed);
  sys.projector = build_interior_projector(problem.bcs, problem.d);
  sys.a = apply_dirichlet(sys.a_raw, sys.projector, config.rounding, &sys.report.dirichlet_scale);
  sys.report.stiffness_s = seconds_since(t);

  // Keep the field for the mass assembly of assemble_system.
  t = Clock::now();
  sys.mass = assemble_mass(field, config.rounding);
  sys.report.mass_s = seconds_since(t);
  sys.report.total_s = seconds_since(t0);
  return sys;
}

AssembledSystem assemble_system(const Problem& problem, const AssemblyConfig& config) {
  const auto t0 = Clock::now();
  AssembledSystem sys = assemble_stiffness(problem, config);
  const auto t = Clock::now();
  sys.f = assemble_rhs(sys.mass, body_force_nodal(problem.d, problem.force_x, problem.force_y), sys.projector,
                       {std::min(1e-12, config.rounding.rel_tolerance), kUnboundedRank});
  sys.report.rhs_s = seconds_since(t);
  sys.report.total_s = seconds_since(t0);
  return sys;
}

ElasticitySolution solve_elasticity(const Problem& problem, const AssemblyConfig& assembly, const AmenConfig& amen) {
  ElasticitySolution out;
  out.system = assemble_system(problem, assembly);
  const auto t = Clock::now();
  auto result = amen_solve(out.system.a, out.system.f, std::nullopt, amen);
  out.solve_s = seconds_since(t);
  out.u = std::move(result.x);
  out.solve = std::move(result.report);
  return out;
}

double strain_energy(const TTOperator& a, const TensorTrain& u) {
  if (a.col_dims() != u.mode_dims()) throw DomainError("strain_energy: shape mismatch");
  return 0.5 * tt_op_bilinear(u, a, u);
}

double tip_deflection(const TensorTrain& u, int d) {
  const std::uint64_t n = std::uint64_t{1} << d;
  double worst = 0.0;
  for (std::uint64_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(tt_entry(u, dof_multi_index(1, n - 1, j, d))));
  return worst;
}

}  // namespace qttfem
