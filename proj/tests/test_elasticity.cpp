#include "qttfem/elasticity.hpp"
#include "qttfem/errors.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace qttfem {
namespace {

using testing::max_abs;
using testing::max_abs_diff;

QuadDomain test_trapezoid() { return QuadDomain::trapezoid(2.0, 1.2, 1.0); }

// Dense reference assembly by the classical element loop.
struct DenseSystem {
  Matrix a_raw;
  Matrix mass;
};

DenseSystem dense_assembly(const QuadDomain& domain, int d, const Lame& lame, const QuadratureRule& rule) {
  const std::uint64_t n = std::uint64_t{1} << d;
  const Index dofs = 2 * static_cast<Index>(n * n);
  DenseSystem s{Matrix::Zero(dofs, dofs), Matrix::Zero(dofs, dofs)};
  for (std::uint64_t i = 0; i + 1 < n; ++i)
    for (std::uint64_t j = 0; j + 1 < n; ++j) {
      const auto nodes = element_nodes(domain, d, i, j);
      const auto k = element_stiffness(nodes, lame, rule);
      const auto m = element_mass(nodes, rule);
      for (int c1 = 0; c1 < 4; ++c1)
        for (int c2 = 0; c2 < 4; ++c2) {
          const auto& p = kCorners[static_cast<std::size_t>(c1)];
          const auto& q = kCorners[static_cast<std::size_t>(c2)];
          for (int a1 = 0; a1 < 2; ++a1)
            for (int a2 = 0; a2 < 2; ++a2) {
              const auto r = static_cast<Index>(dof_linear_index(a1, i + p.di, j + p.dj, d));
              const auto c = static_cast<Index>(dof_linear_index(a2, i + q.di, j + q.dj, d));
              s.a_raw(r, c) += k(2 * c1 + a1, 2 * c2 + a2);
              if (a1 == a2) s.mass(r, c) += m(c1, c2);
            }
        }
    }
  return s;
}

std::vector<double> dense_of(const TensorTrain& t) { return tt_to_dense(t); }

double rel_max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// Material and kernel

TEST(Material, PlaneStressLameAluminium) {
  const Lame l = plane_stress_lame(68e9, 0.33);
  EXPECT_NEAR(l.lambda_bar, 25182358882.280327, 1e-4);
  EXPECT_NEAR(l.mu, 25563909774.43609, 1e-4);
}

TEST(Material, LameRoundTripsThroughDualForm) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> e(1e6, 1e12), nu(-0.9, 0.49);
  for (int k = 0; k < 20; ++k) {
    const double youngs = e(rng), poisson = nu(rng);
    const Lame l = plane_stress_lame(youngs, poisson);
    EXPECT_NEAR(l.lambda_bar / (l.lambda_bar + 2.0 * l.mu), poisson, 1e-12);
    EXPECT_NEAR(4.0 * l.mu * (l.lambda_bar + l.mu) / (l.lambda_bar + 2.0 * l.mu) / youngs, 1.0, 1e-12);
  }
}

TEST(Material, RejectsNonPhysicalParameters) {
  EXPECT_THROW(plane_stress_lame(-1.0, 0.3), DomainError);
  EXPECT_THROW(plane_stress_lame(1.0, 0.5), DomainError);
  EXPECT_THROW(plane_stress_lame(1.0, -1.0), DomainError);
  MaterialParams m;
  m.density = -1.0;
  EXPECT_THROW(m.validate(), DomainError);
}

TEST(Quadrature, GaussIntegratesCubicsExactly) {
  const auto rule = QuadratureRule::gauss2x2();
  double w = 0.0, x2y2 = 0.0, x3y = 0.0;
  for (const auto& q : rule.points) {
    w += q.weight;
    x2y2 += q.weight * q.xi * q.xi * q.eta * q.eta;
    x3y += q.weight * q.xi * q.xi * q.xi * q.eta;
  }
  EXPECT_NEAR(w, 4.0, 1e-15);
  EXPECT_NEAR(x2y2, 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(x3y, 0.0, 1e-15);
  const auto mid = QuadratureRule::midpoint();
  ASSERT_EQ(mid.points.size(), 1u);
  EXPECT_EQ(mid.points[0].weight, 4.0);
}

TEST(Kernel, ShapeFunctionsPartitionUnity) {
  for (double xi : {-1.0, -0.3, 0.4, 1.0})
    for (double eta : {-1.0, 0.2, 1.0}) {
      double s = 0.0;
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      for (const auto& c : kCorners) {
        s += shape_value(c, xi, eta);
        g += shape_gradient(c, xi, eta);
      }
      EXPECT_NEAR(s, 1.0, 1e-15);
      EXPECT_NEAR(g.norm(), 0.0, 1e-15);
    }
  EXPECT_EQ(shape_value(kCorners[2], 1.0, 1.0), 1.0);
  EXPECT_EQ(shape_value(kCorners[2], -1.0, 1.0), 0.0);
}

// Exact Q4 stiffness of the unit square for E = 1, nu = 0 (symbolic integration).
TEST(Kernel, UnitSquareElementStiffnessBootstrap) {
  const double e = 1.0 / 8.0, h = 1.0 / 2.0, q = 1.0 / 4.0;
  Eigen::Matrix<double, 8, 8> expected;
  expected << h, e, -q, -e, -q, -e, 0, e,  //
      e, h, e, 0, -e, -q, -e, -q,          //
      -q, e, h, -e, 0, -e, -q, e,          //
      -e, 0, -e, h, e, -q, e, -q,          //
      -q, -e, 0, e, h, e, -q, -e,          //
      -e, -q, -e, -q, e, h, e, 0,          //
      0, -e, -q, e, -q, e, h, -e,          //
      e, -q, e, -q, -e, 0, -e, h;
  const auto nodes = element_nodes(QuadDomain::unit_square(), 1, 0, 0);
  const auto k = element_stiffness(nodes, plane_stress_lame(1.0, 0.0), QuadratureRule::gauss2x2());
  EXPECT_LT((k - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Kernel, ElementStiffnessSymmetricWithRigidBodyKernel) {
  const QuadDomain dom = test_trapezoid();
  const Lame lame = plane_stress_lame(68e9, 0.33);
  const auto nodes = element_nodes(dom, 3, 2, 5);
  const auto k = element_stiffness(nodes, lame, QuadratureRule::gauss2x2());
  EXPECT_LT((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12 * k.cwiseAbs().maxCoeff());
  Eigen::Matrix<double, 8, 3> modes;
  for (int c = 0; c < 4; ++c) {
    const auto& p = nodes[static_cast<std::size_t>(c)];
    modes.row(2 * c) << 1.0, 0.0, -p.y;
    modes.row(2 * c + 1) << 0.0, 1.0, p.x;
  }
  EXPECT_LT((k * modes).cwiseAbs().maxCoeff(), 1e-9 * k.cwiseAbs().maxCoeff() * modes.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> es(k);
  EXPECT_GT(es.eigenvalues()(3), 1e-6 * es.eigenvalues()(7));  // exactly three zero modes
}

TEST(Kernel, ElementMassIntegratesArea) {
  const auto nodes = element_nodes(test_trapezoid(), 2, 1, 0);
  const auto m = element_mass(nodes, QuadratureRule::gauss2x2());
  const double area = 0.5 * std::abs((nodes[2].x - nodes[0].x) * (nodes[3].y - nodes[1].y) -
                                     (nodes[3].x - nodes[1].x) * (nodes[2].y - nodes[0].y));
  EXPECT_NEAR(m.sum(), area, 1e-14);
}

// ---------------------------------------------------------------------------
// Geometry

TEST(Geometry, GridPointsHitDomainCorners) {
  const QuadDomain dom = test_trapezoid();
  const int d = 4;
  const std::uint64_t last = (std::uint64_t{1} << d) - 1;
  const Point2 p[4] = {grid_point(dom, d, 0, 0), grid_point(dom, d, last, 0), grid_point(dom, d, last, last),
                       grid_point(dom, d, 0, last)};
  for (int c = 0; c < 4; ++c) {
    EXPECT_NEAR(p[c].x, dom.corners[static_cast<std::size_t>(c)].x, 1e-14);
    EXPECT_NEAR(p[c].y, dom.corners[static_cast<std::size_t>(c)].y, 1e-14);
  }
  EXPECT_THROW(grid_point(dom, d, last + 1, 0), DomainError);
}

TEST(Geometry, DomainValidationAndArea) {
  EXPECT_NEAR(test_trapezoid().area(), 1.6, 1e-15);
  EXPECT_NO_THROW(test_trapezoid().validate());
  QuadDomain clockwise;
  clockwise.corners = {Point2{0, 0}, Point2{0, 1}, Point2{1, 1}, Point2{1, 0}};
  EXPECT_THROW(clockwise.validate(), DomainError);
  QuadDomain dart;
  dart.corners = {Point2{0, 0}, Point2{2, 0}, Point2{0.2, 0.2}, Point2{0, 2}};
  EXPECT_THROW(dart.validate(), DomainError);
}

TEST(Geometry, AffineJacobianMatchesNodalJacobian) {
  const QuadDomain dom = test_trapezoid();
  const int d = 3;
  const auto rule = QuadratureRule::gauss2x2();
  for (std::uint64_t i = 0; i + 1 < 8; ++i)
    for (std::uint64_t j = 0; j + 1 < 8; ++j)
      for (const auto& q : rule.points) {
        const Eigen::Matrix2d ref = element_jacobian(element_nodes(dom, d, i, j), q.xi, q.eta);
        EXPECT_LT((affine_jacobian(dom, d, i, j, q.xi, q.eta) - ref).cwiseAbs().maxCoeff(), 1e-14);
      }
}

TEST(Geometry, JacobianMatchesFiniteDifferenceOfElementMap) {
  const QuadDomain dom = test_trapezoid();
  const int d = 3;
  const std::uint64_t i = 3, j = 4;
  const auto nodes = element_nodes(dom, d, i, j);
  auto map = [&](double xi, double eta) {
    Eigen::Vector2d x = Eigen::Vector2d::Zero();
    for (std::size_t c = 0; c < 4; ++c) x += shape_value(kCorners[c], xi, eta) * Eigen::Vector2d(nodes[c].x, nodes[c].y);
    return x;
  };
  const double xi = 0.3, eta = -0.6, step = 1e-6;
  Eigen::Matrix2d fd;
  fd.col(0) = (map(xi + step, eta) - map(xi - step, eta)) / (2 * step);
  fd.col(1) = (map(xi, eta + step) - map(xi, eta - step)) / (2 * step);
  EXPECT_LT((affine_jacobian(dom, d, i, j, xi, eta) - fd).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Geometry, JacobianTrainsAreAffineAndLowRank) {
  const QuadDomain dom = test_trapezoid();
  const int d = 4;
  const auto field = build_jacobian_field(dom, d, QuadratureRule::gauss2x2(), CrossConfig{});
  const std::uint64_t n = 16;
  for (std::size_t q = 0; q < field.jac.size(); ++q) {
    std::vector<const TensorTrain*> fields{&field.det[q]};
    for (const auto& t : field.jac[q]) fields.push_back(&t);
    for (const TensorTrain* t : fields) {
      EXPECT_LE(t->max_rank(), 3);
      // three-point reconstruction f(i, j) = f00 + i (f10 - f00) + j (f01 - f00)
      const double f00 = tt_entry(*t, interleave(0, 0, d));
      const double f10 = tt_entry(*t, interleave(1, 0, d));
      const double f01 = tt_entry(*t, interleave(0, 1, d));
      const auto dense = dense_of(*t);
      const double scale = std::max(max_abs(dense), 1e-300);
      for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < n; ++j) {
          const double expect = f00 + static_cast<double>(i) * (f10 - f00) + static_cast<double>(j) * (f01 - f00);
          EXPECT_NEAR(dense[node_linear_index(i, j, d)], expect, 1e-12 * scale);
        }
    }
  }
}

TEST(Geometry, JacobianTrainsMatchAffineFormula) {
  const QuadDomain dom = test_trapezoid();
  const int d = 3;
  const auto rule = QuadratureRule::gauss2x2();
  const auto field = build_jacobian_field(dom, d, rule, CrossConfig{});
  for (std::size_t q = 0; q < rule.points.size(); ++q)
    for (std::uint64_t i = 0; i < 8; ++i)
      for (std::uint64_t j = 0; j < 8; ++j) {
        const auto idx = interleave(i, j, d);
        const Eigen::Matrix2d ref = affine_jacobian(dom, d, i, j, rule.points[q].xi, rule.points[q].eta);
        EXPECT_NEAR(tt_entry(field.jac[q][0], idx), ref(0, 0), 1e-14);
        EXPECT_NEAR(tt_entry(field.jac[q][1], idx), ref(0, 1), 1e-14);
        EXPECT_NEAR(tt_entry(field.jac[q][2], idx), ref(1, 0), 1e-14);
        EXPECT_NEAR(tt_entry(field.jac[q][3], idx), ref(1, 1), 1e-14);
        EXPECT_NEAR(tt_entry(field.det[q], idx), ref.determinant(), 1e-14);
      }
}

TEST(Geometry, UnitSquareDeterminantAtD2) {
  const auto field = build_jacobian_field(QuadDomain::unit_square(), 2, QuadratureRule::gauss2x2(), CrossConfig{});
  for (std::size_t q = 0; q < 4; ++q) {
    for (double v : dense_of(field.det[q])) EXPECT_NEAR(v, 1.0 / 36.0, 1e-16);
    for (double v : dense_of(field.inv_det[q])) EXPECT_NEAR(v, 36.0, 1e-12);
    EXPECT_EQ(field.inv_det[q].max_rank(), 1);
  }
}

TEST(Geometry, ReciprocalDeterminantOnTrapezoid) {
  const QuadDomain dom = test_trapezoid();
  const int d = 4;
  const auto rule = QuadratureRule::gauss2x2();
  const auto field = build_jacobian_field(dom, d, rule, CrossConfig{});
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const auto inv = dense_of(field.inv_det[q]);
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 16; ++i)
      for (std::uint64_t j = 0; j < 16; ++j) {
        const double exact = 1.0 / affine_jacobian(dom, d, i, j, rule.points[q].xi, rule.points[q].eta).determinant();
        worst = std::max(worst, std::abs(inv[node_linear_index(i, j, d)] - exact) / std::abs(exact));
      }
    EXPECT_LE(worst, 1e-10);
  }
}

TEST(Geometry, TangledDomainIsRejected) {
  QuadDomain bad;
  bad.corners = {Point2{0, 0}, Point2{1, 0}, Point2{-0.5, 1}, Point2{0.6, 1}};
  EXPECT_THROW(build_jacobian_field(bad, 3, QuadratureRule::gauss2x2(), CrossConfig{}), DomainError);
}

// ---------------------------------------------------------------------------
// Blocks and assembly

TEST(Blocks, CornerPairBlocksMatchElementKernel) {
  const QuadDomain dom = test_trapezoid();
  const int d = 3;
  const Lame lame = plane_stress_lame(68e9, 0.33);
  const auto rule = QuadratureRule::gauss2x2();
  const auto field = build_jacobian_field(dom, d, rule, CrossConfig{});
  std::vector<Eigen::Matrix<double, 8, 8>> ke;
  std::vector<Eigen::Matrix4d> me;
  for (std::uint64_t i = 0; i + 1 < 8; ++i)
    for (std::uint64_t j = 0; j + 1 < 8; ++j) {
      ke.push_back(element_stiffness(element_nodes(dom, d, i, j), lame, rule));
      me.push_back(element_mass(element_nodes(dom, d, i, j), rule));
    }
  const double kscale = 68e9, mscale = me[0].cwiseAbs().maxCoeff();
  for (int c1 = 0; c1 < 4; ++c1)
    for (int c2 = 0; c2 < 4; ++c2) {
      const Corner p = kCorners[static_cast<std::size_t>(c1)], r = kCorners[static_cast<std::size_t>(c2)];
      const auto mb = dense_of(mass_pair_block(field, p, r, {1e-14, kUnboundedRank}));
      for (int a1 = 0; a1 < 2; ++a1)
        for (int a2 = 0; a2 < 2; ++a2) {
          const auto kb = dense_of(corner_pair_block(field, lame, p, a1, r, a2, {1e-13, kUnboundedRank}));
          std::size_t e = 0;
          for (std::uint64_t i = 0; i + 1 < 8; ++i)
            for (std::uint64_t j = 0; j + 1 < 8; ++j, ++e) {
              const auto at = node_linear_index(i, j, d);
              EXPECT_NEAR(kb[at], ke[e](2 * c1 + a1, 2 * c2 + a2), 1e-10 * kscale);
              if (a1 == 0 && a2 == 0) EXPECT_NEAR(mb[at], me[e](c1, c2), 1e-12 * mscale);
            }
        }
    }
}

TEST(Blocks, RectangleBlocksAreConstant) {
  const auto field = build_jacobian_field(QuadDomain::rectangle(20.0, 1.0), 5, QuadratureRule::gauss2x2(), CrossConfig{});
  const auto b = corner_pair_block(field, plane_stress_lame(68e9, 0.33), kCorners[0], 0, kCorners[2], 1,
                                   {1e-12, kUnboundedRank});
  EXPECT_EQ(b.max_rank(), 1);
}

class AssemblyOracle : public ::testing::TestWithParam<std::tuple<int, bool>> {};

TEST_P(AssemblyOracle, MatchesDenseElementLoop) {
  const auto [d, trapezoid] = GetParam();
  Problem p = Problem::beam(d);
  if (trapezoid) {
    p.domain = test_trapezoid();
    p.bcs[BoundarySide::bottom] = BoundaryCondition::dirichlet_zero;
  }
  AssemblyConfig cfg;
  const auto sys = assemble_system(p, cfg);
  const auto ref = dense_assembly(p.domain, d, p.material.lame(), QuadratureRule::make(p.quadrature));
  EXPECT_LT(rel_max_diff(tt_op_to_dense(sys.a_raw), ref.a_raw), 1e-9);
  EXPECT_LT(rel_max_diff(tt_op_to_dense(sys.mass), ref.mass), 1e-9);

  // Dirichlet treatment
  const auto ind = dense_of(tt_op_diagonal(sys.projector));
  const Matrix pm = testing::as_eigen(ind).asDiagonal();
  const double s = ref.a_raw.diagonal().mean();
  EXPECT_NEAR(sys.report.dirichlet_scale, s, 1e-12 * s);
  const Matrix eye = Matrix::Identity(pm.rows(), pm.cols());
  const Matrix a_ref = pm * ref.a_raw * pm + s * (eye - pm);
  EXPECT_LT(rel_max_diff(tt_op_to_dense(sys.a), a_ref), 1e-9);

  // load
  Vector fn = Vector::Zero(pm.rows());
  fn.head(pm.rows() / 2).setConstant(p.force_x);
  fn.tail(pm.rows() / 2).setConstant(p.force_y);
  const Vector f_ref = pm * (ref.mass * fn);
  const auto f = dense_of(sys.f);
  EXPECT_LT((testing::as_eigen(f) - f_ref).cwiseAbs().maxCoeff(), 1e-9 * f_ref.cwiseAbs().maxCoeff());
}

INSTANTIATE_TEST_SUITE_P(SmallGrids, AssemblyOracle,
                         ::testing::Combine(::testing::Values(2, 3), ::testing::Values(false, true)));

TEST(Assembly, MassAndGravityTotals) {
  Problem p = Problem::beam(4);
  p.domain = test_trapezoid();
  const auto sys = assemble_system(p, AssemblyConfig{});
  const auto ones = TensorTrain::ones(dof_dims(4));
  EXPECT_NEAR(tt_dot(ones, tt_apply(sys.mass, ones, TruncationPolicy::exact())), 2.0 * p.domain.area(), 1e-12);
  const auto load = tt_apply(sys.mass, body_force_nodal(4, p.force_x, p.force_y), TruncationPolicy::exact());
  EXPECT_NEAR(tt_sum(load) / (p.force_y * p.domain.area()), 1.0, 1e-12);
  EXPECT_NEAR(p.force_y, -2700.0 * 9.81, 1e-12);
}

TEST(Assembly, StiffnessSymmetricPositiveDefinite) {
  for (bool trap : {false, true}) {
    Problem p = Problem::beam(3);
    if (trap) p.domain = test_trapezoid();
    const auto sys = assemble_stiffness(p, AssemblyConfig{});
    const Matrix a = tt_op_to_dense(sys.a);
    EXPECT_LT(rel_max_diff(a, a.transpose()) , 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Assembly, RawStiffnessAnnihilatesRigidBodyModes) {
  const int d = 5;
  Problem p = Problem::beam(d);
  p.domain = test_trapezoid();
  const auto sys = assemble_stiffness(p, AssemblyConfig{});
  const std::uint64_t n = 32;
  const Index half = static_cast<Index>(n * n);
  std::vector<std::vector<double>> modes(3, std::vector<double>(2 * static_cast<std::size_t>(half), 0.0));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) {
      const Point2 x = grid_point(p.domain, d, i, j);
      const auto k = node_linear_index(i, j, d);
      modes[0][k] = 1.0;
      modes[1][k + static_cast<std::size_t>(half)] = 1.0;
      modes[2][k] = -x.y;
      modes[2][k + static_cast<std::size_t>(half)] = x.x;
    }
  const double anorm = tt_op_norm(sys.a_raw);
  for (const auto& m : modes) {
    const auto r = tt_from_dense(m, dof_dims(d), {1e-15, kUnboundedRank});
    const double res = tt_norm(tt_apply(sys.a_raw, r, TruncationPolicy::exact()));
    EXPECT_LE(res, 1e-9 * anorm * tt_norm(r));
  }
}

TEST(Assembly, RectangleRanksStableAcrossLevels) {
  Index r6 = 0, r8 = 0;
  {
    const auto s = assemble_stiffness(Problem::beam(6), AssemblyConfig{});
    r6 = s.a.max_rank();
  }
  {
    const auto s = assemble_stiffness(Problem::beam(8), AssemblyConfig{});
    r8 = s.a.max_rank();
  }
  EXPECT_EQ(r6, r8);
}

TEST(Assembly, PatchTestInteriorEquilibrium) {
  const int d = 4;
  Problem p = Problem::beam(d);
  p.domain = test_trapezoid();
  const auto sys = assemble_stiffness(p, AssemblyConfig{});
  const Matrix a = tt_op_to_dense(sys.a_raw);
  const std::uint64_t n = 16;
  const Index half = static_cast<Index>(n * n);
  Vector u(2 * half);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) {
      const Point2 x = grid_point(p.domain, d, i, j);
      const auto k = static_cast<Index>(node_linear_index(i, j, d));
      u(k) = 0.3 + 1e-3 * x.x - 2e-4 * x.y;
      u(k + half) = -0.1 + 5e-4 * x.x + 7e-4 * x.y;
    }
  const Vector r = a * u;
  const double scale = a.cwiseAbs().maxCoeff() * u.cwiseAbs().maxCoeff();
  for (std::uint64_t i = 1; i + 1 < n; ++i)
    for (std::uint64_t j = 1; j + 1 < n; ++j) {
      const auto k = static_cast<Index>(node_linear_index(i, j, d));
      EXPECT_LE(std::abs(r(k)), 1e-9 * scale);
      EXPECT_LE(std::abs(r(k + half)), 1e-9 * scale);
    }
}

TEST(Assembly, AccumulationOrderDoesNotMatter) {
  Problem p = Problem::beam(4);
  p.domain = test_trapezoid();
  AssemblyConfig shuffled;
  shuffled.order_seed = 12345;
  const Matrix a = tt_op_to_dense(assemble_stiffness(p, AssemblyConfig{}).a);
  const Matrix b = tt_op_to_dense(assemble_stiffness(p, shuffled).a);
  EXPECT_LT(rel_max_diff(b, a), 1e-9);
}

TEST(Assembly, SymmetricUnderBilinearProbes) {
  const auto sys = assemble_stiffness(Problem::beam(7), AssemblyConfig{});
  std::mt19937_64 rng(17);
  for (int k = 0; k < 3; ++k) {
    const auto x = TensorTrain::random(dof_dims(7), std::vector<Index>(7, 2), rng);
    const auto y = TensorTrain::random(dof_dims(7), std::vector<Index>(7, 2), rng);
    const double xy = tt_op_bilinear(x, sys.a, y), yx = tt_op_bilinear(y, sys.a, x);
    EXPECT_LE(std::abs(xy - yx), 1e-9 * std::max(std::abs(xy), tt_op_norm(sys.a) * tt_norm(x) * tt_norm(y) * 1e-6));
  }
}

TEST(Assembly, MidpointRuleStillAssembles) {
  Problem p = Problem::beam(2);
  p.quadrature = QuadratureKind::midpoint;
  const auto sys = assemble_system(p, AssemblyConfig{});
  const auto ref = dense_assembly(p.domain, 2, p.material.lame(), QuadratureRule::midpoint());
  EXPECT_LT(rel_max_diff(tt_op_to_dense(sys.a_raw), ref.a_raw), 1e-9);
}

// ---------------------------------------------------------------------------
// Problem description

TEST(Problem, BeamPresetAndAnalyticDeflection) {
  const Problem p = Problem::beam(8);
  EXPECT_NO_THROW(p.validate());
  EXPECT_NEAR(p.domain.area(), 20.0, 1e-12);
  EXPECT_TRUE(p.bcs.is_dirichlet(BoundarySide::left));
  EXPECT_FALSE(p.bcs.is_dirichlet(BoundarySide::right));
  EXPECT_NEAR(beam_analytic_deflection(p.material, 20.0, 1.0, 9.81), 0.093483529411764706, 1e-15);
}

TEST(Problem, ValidationErrorsAreConfigErrors) {
  Problem p = Problem::beam(3);
  p.d = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = Problem::beam(3);
  p.material.poisson_ratio = 0.7;
  EXPECT_THROW(p.validate(), ConfigError);
  p = Problem::beam(3);
  p.bcs = BoundarySpec{};
  for (auto& s : p.bcs.sides) s = BoundaryCondition::neumann_free;
  EXPECT_THROW(p.validate(), ConfigError);
  p = Problem::beam(3);
  p.domain.corners[2] = Point2{0.1, 0.1};
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Problem, DiscretizationHashSeesEveryField) {
  const Problem base = Problem::beam(5);
  const auto h = discretization_hash(base);
  EXPECT_EQ(h, discretization_hash(Problem::beam(5)));
  std::vector<Problem> variants(7, base);
  variants[0].d = 6;
  variants[1].domain.corners[2].x += 1e-9;
  variants[2].material.youngs_modulus *= 1.0 + 1e-12;
  variants[3].material.poisson_ratio = 0.3;
  variants[4].bcs[BoundarySide::top] = BoundaryCondition::dirichlet_zero;
  variants[5].force_x = 1.0;
  variants[6].quadrature = QuadratureKind::midpoint;
  for (const auto& v : variants) EXPECT_NE(discretization_hash(v), h);
}

// ---------------------------------------------------------------------------
// Observables

TEST(Observables, StrainEnergyAndTipDeflection) {
  const int d = 3;
  const auto sys = assemble_stiffness(Problem::beam(d), AssemblyConfig{});
  std::mt19937_64 rng(3);
  const auto u = TensorTrain::random(dof_dims(d), std::vector<Index>(static_cast<std::size_t>(d), 3), rng);
  const auto ud = dense_of(u);
  const Vector uv = testing::as_eigen(ud);
  const double ref = 0.5 * uv.dot(tt_op_to_dense(sys.a) * uv);
  EXPECT_NEAR(strain_energy(sys.a, u), ref, 1e-12 * std::abs(ref));
  EXPECT_NEAR(0.5 * tt_op_bilinear(u, sys.a, u), ref, 1e-12 * std::abs(ref));

  double tip = 0.0;
  for (std::uint64_t j = 0; j < 8; ++j) tip = std::max(tip, std::abs(ud[dof_linear_index(1, 7, j, d)]));
  EXPECT_NEAR(tip_deflection(u, d), tip, 1e-14);
}

TEST(Solve, ZeroLoadAndLinearity) {
  Problem p = Problem::beam(3);
  p.force_y = 0.0;
  const auto zero = solve_elasticity(p, AssemblyConfig{}, AmenConfig{});
  EXPECT_EQ(tt_norm(zero.u), 0.0);
  EXPECT_EQ(strain_energy(zero.system.a, zero.u), 0.0);
  EXPECT_EQ(tip_deflection(zero.u, 3), 0.0);

  const Problem once = Problem::beam(3);
  Problem twice = once;
  twice.force_y *= 2.0;
  const auto s1 = solve_elasticity(once, AssemblyConfig{}, AmenConfig{});
  const auto s2 = solve_elasticity(twice, AssemblyConfig{}, AmenConfig{});
  const auto u1 = dense_of(s1.u), u2 = dense_of(s2.u);
  EXPECT_LE((testing::as_eigen(u2) - 2.0 * testing::as_eigen(u1)).norm(), 1e-8 * testing::as_eigen(u2).norm());
  const double e1 = strain_energy(s1.system.a, s1.u);
  const double e2 = strain_energy(s2.system.a, s2.u);
  EXPECT_NEAR(e2 / e1, 4.0, 4e-8);
}

}  // namespace
}  // namespace qttfem
