#pragma once

// Classical sparse finite element assembly and solve over the same element
// kernel, quadrature and boundary convention as the tensor pipeline.

#include "qttfem/fem_kernel.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qttfem {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

struct ClassicalConfig {
  /// Largest grid exponent accepted; beyond it CapacityError.
  int max_d = 9;
};

/// D.o.f. numbering is dof_linear_index: component-major, then interleaved
/// node digits, so vectors compare directly with dense TT expansions.
struct SparseSystem {
  int d = 1;
  std::uint64_t config_hash = 0;
  SparseMatrix stiffness_raw;
  /// P A_raw P + s (I - P).
  SparseMatrix stiffness;
  SparseMatrix mass;
  Vector rhs;
  /// 1 on free d.o.f., 0 on Dirichlet d.o.f.
  Vector interior;
  double dirichlet_scale = 0.0;
  std::vector<Point2> nodes;  // indexed by node_linear_index
  double assembly_s = 0.0;

  Index dof_count() const { return rhs.size(); }
};

SparseSystem classical_assemble(const Problem& problem, const ClassicalConfig& config = {});

struct ClassicalSolveOptions {
  /// Sparse Cholesky up to this many d.o.f., Jacobi-preconditioned CG above.
  Index direct_limit = Index{2} << 20;
  double cg_tol = 1e-10;
  Index cg_max_iterations = 200000;
};

struct ClassicalSolveReport {
  std::string method;
  double relative_residual = 0.0;
  Index iterations = 0;
  double solve_s = 0.0;
};

struct ClassicalSolution {
  Vector u;
  ClassicalSolveReport report;
};

ClassicalSolution classical_solve(const SparseMatrix& a, const Vector& f, const ClassicalSolveOptions& options = {});
inline ClassicalSolution classical_solve(const SparseSystem& s, const ClassicalSolveOptions& options = {}) {
  return classical_solve(s.stiffness, s.rhs, options);
}

struct Observables {
  double max_displacement = 0.0;  // max |u_y| on the right edge
  double strain_energy = 0.0;     // 1/2 u^T A u
};

Observables observables(const SparseSystem& system, const Vector& u);

/// Coordinate real general Matrix Market text.
void write_matrix_market(std::ostream& out, const SparseMatrix& a);
void write_matrix_market(const std::string& path, const SparseMatrix& a);

}  // namespace qttfem
