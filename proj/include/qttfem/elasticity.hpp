#pragma once

#include "qttfem/fem_kernel.hpp"
#include "qttfem/tt_amen.hpp"
#include "qttfem/tt_cross.hpp"

#include <array>
#include <vector>

namespace qttfem {

/// Per quadrature point: the four Jacobian entries J11, J12, J21, J22, det J
/// and 1 / det J as element-indexed trains on the full 2^d x 2^d index square.
/// J and det J are exact affine functions of (i, j); rows and columns past the
/// last element hold the affine extension and are never scattered.
struct JacobianField {
  int d = 1;
  QuadratureRule rule;
  std::vector<std::array<TensorTrain, 4>> jac;
  std::vector<TensorTrain> det;
  std::vector<TensorTrain> inv_det;
  std::vector<CrossReport> cross_reports;
};

/// Exact Jacobian of element (i, j) at (xi, eta) from the affine formula;
/// also valid for the extension rows i, j = 2^d - 1.
Eigen::Matrix2d affine_jacobian(const QuadDomain& domain, int d, std::uint64_t i, std::uint64_t j, double xi,
                                double eta);

JacobianField build_jacobian_field(const QuadDomain& domain, int d, const QuadratureRule& rule,
                                   const CrossConfig& cross);

/// Element-indexed stiffness contribution coupling (c1, alpha1) with (c2, alpha2).
TensorTrain corner_pair_block(const JacobianField& field, const Lame& lame, Corner c1, int alpha1, Corner c2,
                              int alpha2, const TruncationPolicy& policy);
/// Element-indexed scalar mass contribution coupling corners c1 and c2.
TensorTrain mass_pair_block(const JacobianField& field, Corner c1, Corner c2, const TruncationPolicy& policy);

struct AssemblyConfig {
  /// Rounding after every accumulation into A and M.
  TruncationPolicy rounding{1e-10, kUnboundedRank};
  CrossConfig cross;
  /// Nonzero: accumulate the 64 stiffness blocks in a shuffled order.
  std::uint64_t order_seed = 0;
};

struct AssemblyReport {
  double jacobian_s = 0.0;
  double stiffness_s = 0.0;
  double mass_s = 0.0;
  double rhs_s = 0.0;
  double total_s = 0.0;
  Index max_block_rank = 0;
  /// Scale s of the Dirichlet block s (I - P).
  double dirichlet_scale = 0.0;
  std::vector<CrossReport> cross_reports;
};

struct AssembledSystem {
  GridTopology topology;
  std::uint64_t config_hash = 0;
  TTOperator a_raw;
  TTOperator a;
  TTOperator mass;
  TTOperator projector;
  TensorTrain f;
  AssemblyReport report;
};

/// Sum over all 64 corner/component pairs of the scattered blocks.
TTOperator assemble_stiffness_raw(const JacobianField& field, const Lame& lame, const TruncationPolicy& policy,
                                  Index* max_block_rank = nullptr, std::uint64_t order_seed = 0);
TTOperator assemble_mass(const JacobianField& field, const TruncationPolicy& policy);

/// P A_raw P + s (I - P) with s = mean diagonal of A_raw.
TTOperator apply_dirichlet(const TTOperator& a_raw, const TTOperator& projector, const TruncationPolicy& policy,
                           double* scale = nullptr);

/// Nodal values of a constant body force (fx, fy) as a d.o.f. train.
TensorTrain body_force_nodal(int d, double fx, double fy);

/// f = P (M f_nodal).
TensorTrain assemble_rhs(const TTOperator& mass, const TensorTrain& f_nodal, const TTOperator& projector,
                         const TruncationPolicy& policy);

/// Stiffness with Dirichlet treatment and projector only.
AssembledSystem assemble_stiffness(const Problem& problem, const AssemblyConfig& config);
/// Stiffness, mass and load.
AssembledSystem assemble_system(const Problem& problem, const AssemblyConfig& config);

struct ElasticitySolution {
  TensorTrain u;
  AssembledSystem system;
  SolveReport solve;
  double solve_s = 0.0;
};

ElasticitySolution solve_elasticity(const Problem& problem, const AssemblyConfig& assembly, const AmenConfig& amen);

/// 1/2 u^T A u, by exact contraction.
double strain_energy(const TTOperator& a, const TensorTrain& u);

/// max |u_y| over the nodes of the right edge (i = 2^d - 1), by point evaluation.
double tip_deflection(const TensorTrain& u, int d);

}  // namespace qttfem
