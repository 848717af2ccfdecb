#include "qttfem/ref_fem.hpp"

#include "qttfem/errors.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace qttfem {
namespace {

using Clock = std::chrono::steady_clock;
using Triplet = Eigen::Triplet<double, std::int64_t>;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool on_dirichlet(const BoundarySpec& bcs, std::uint64_t i, std::uint64_t j, std::uint64_t last) {
  return (i == 0 && bcs.is_dirichlet(BoundarySide::left)) || (i == last && bcs.is_dirichlet(BoundarySide::right)) ||
         (j == 0 && bcs.is_dirichlet(BoundarySide::bottom)) || (j == last && bcs.is_dirichlet(BoundarySide::top));
}

}  // namespace

SparseSystem classical_assemble(const Problem& problem, const ClassicalConfig& config) {
  problem.validate();
  const int d = problem.d;
  if (d > config.max_d)
    throw CapacityError("classical assembly: d = " + std::to_string(d) + " exceeds the capacity d <= " +
                        std::to_string(config.max_d));
  const auto t0 = Clock::now();
  const std::uint64_t n = std::uint64_t{1} << d;
  const auto half = static_cast<Index>(n * n);
  const Index dofs = 2 * half;
  const Lame lame = problem.material.lame();
  const QuadratureRule rule = QuadratureRule::make(problem.quadrature);

  SparseSystem s;
  s.d = d;
  s.config_hash = discretization_hash(problem);
  s.nodes.resize(static_cast<std::size_t>(half));
  s.interior = Vector::Ones(dofs);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) {
      const auto k = node_linear_index(i, j, d);
      s.nodes[k] = grid_point(problem.domain, d, i, j);
      if (on_dirichlet(problem.bcs, i, j, n - 1)) {
        s.interior(static_cast<Index>(k)) = 0.0;
        s.interior(static_cast<Index>(k) + half) = 0.0;
      }
    }

  std::vector<Triplet> kt, mt;
  const auto elements = static_cast<std::size_t>((n - 1) * (n - 1));
  kt.reserve(elements * 64);
  mt.reserve(elements * 32);
  std::array<Index, 4> node{};
  for (std::uint64_t i = 0; i + 1 < n; ++i)
    for (std::uint64_t j = 0; j + 1 < n; ++j) {
      std::array<Point2, 4> xy;
      for (std::size_t c = 0; c < 4; ++c) {
        node[c] = static_cast<Index>(node_linear_index(i + kCorners[c].di, j + kCorners[c].dj, d));
        xy[c] = s.nodes[static_cast<std::size_t>(node[c])];
      }
      const auto ke = element_stiffness(xy, lame, rule);
      const auto me = element_mass(xy, rule);
      for (int c1 = 0; c1 < 4; ++c1)
        for (int c2 = 0; c2 < 4; ++c2) {
          for (int a1 = 0; a1 < 2; ++a1)
            for (int a2 = 0; a2 < 2; ++a2)
              kt.emplace_back(node[c1] + a1 * half, node[c2] + a2 * half, ke(2 * c1 + a1, 2 * c2 + a2));
          mt.emplace_back(node[c1], node[c2], me(c1, c2));
          mt.emplace_back(node[c1] + half, node[c2] + half, me(c1, c2));
        }
    }
  s.stiffness_raw.resize(dofs, dofs);
  s.stiffness_raw.setFromTriplets(kt.begin(), kt.end());
  s.mass.resize(dofs, dofs);
  s.mass.setFromTriplets(mt.begin(), mt.end());
  kt.clear();
  kt.shrink_to_fit();
  mt.clear();
  mt.shrink_to_fit();

  s.dirichlet_scale = s.stiffness_raw.diagonal().mean();
  std::vector<Triplet> at;
  at.reserve(static_cast<std::size_t>(s.stiffness_raw.nonZeros()));
  for (Index r = 0; r < dofs; ++r) {
    if (s.interior(r) == 0.0) {
      at.emplace_back(r, r, s.dirichlet_scale);
      continue;
    }
    for (SparseMatrix::InnerIterator it(s.stiffness_raw, r); it; ++it)
      if (s.interior(it.col()) != 0.0) at.emplace_back(r, it.col(), it.value());
  }
  s.stiffness.resize(dofs, dofs);
  s.stiffness.setFromTriplets(at.begin(), at.end());

  Vector nodal(dofs);
  nodal.head(half).setConstant(problem.force_x);
  nodal.tail(half).setConstant(problem.force_y);
  s.rhs = s.interior.cwiseProduct(s.mass * nodal);
  s.assembly_s = seconds_since(t0);
  return s;
}

ClassicalSolution classical_solve(const SparseMatrix& a, const Vector& f, const ClassicalSolveOptions& options) {
  if (a.rows() != a.cols() || a.rows() != f.size()) throw DomainError("classical_solve: dimension mismatch");
  const auto t0 = Clock::now();
  ClassicalSolution out;
  const double fnorm = f.norm();
  if (fnorm == 0.0) {
    out.u = Vector::Zero(f.size());
    out.report.method = "none";
    return out;
  }
  if (a.rows() <= options.direct_limit) {
    out.report.method = "cholesky";
    const Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t> ac(a);
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t>> llt(ac);
    if (llt.info() != Eigen::Success) throw SolverError("classical_solve: Cholesky factorization failed");
    out.u = llt.solve(f);
    // two refinement steps
    for (int k = 0; k < 2; ++k) out.u += llt.solve(f - a * out.u);
  } else {
    out.report.method = "cg";
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(options.cg_tol);
    cg.setMaxIterations(options.cg_max_iterations);
    cg.compute(a);
    out.u = cg.solve(f);
    out.report.iterations = cg.iterations();
    if (cg.info() == Eigen::NumericalIssue) throw SolverError("classical_solve: CG breakdown");
  }
  if (!out.u.allFinite()) throw SolverError("classical_solve: non-finite solution");
  out.report.relative_residual = (a * out.u - f).norm() / fnorm;
  out.report.solve_s = seconds_since(t0);
  return out;
}

Observables observables(const SparseSystem& system, const Vector& u) {
  if (u.size() != system.dof_count()) throw DomainError("observables: dimension mismatch");
  Observables o;
  const std::uint64_t n = std::uint64_t{1} << system.d;
  const Index half = system.dof_count() / 2;
  for (std::uint64_t j = 0; j < n; ++j)
    o.max_displacement =
        std::max(o.max_displacement, std::abs(u(half + static_cast<Index>(node_linear_index(n - 1, j, system.d)))));
  o.strain_energy = 0.5 * u.dot(system.stiffness * u);
  return o;
}

void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  out << std::setprecision(17);
  for (Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) out << r + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

void write_matrix_market(const std::string& path, const SparseMatrix& a) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  write_matrix_market(out, a);
  if (!out) throw ConfigError("write to " + path + " failed");
}

}  // namespace qttfem
