#pragma once

#include "qttfem/tensor_train.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>

namespace qttfem {

/// Counts for a 2^d x 2^d tensor-product grid of bilinear quadrilaterals.
struct GridTopology {
  int d = 1;
  Index points_per_axis = 2;
  Index points_total = 4;
  Index elements_per_axis = 1;
  Index dof_total = 8;

  static GridTopology make(int d);
};

/// Largest grid exponent the index arithmetic supports (4^d fits in 63 bits).
inline constexpr int kMaxGridExponent = 30;

enum class BoundarySide { left = 0, right = 1, bottom = 2, top = 3 };
enum class BoundaryCondition { dirichlet_zero, neumann_free };

const char* side_name(BoundarySide side);

/// Per-side conditions. Left is i = 0, right is i = 2^d - 1, bottom is j = 0,
/// top is j = 2^d - 1.
struct BoundarySpec {
  std::array<BoundaryCondition, 4> sides{BoundaryCondition::neumann_free, BoundaryCondition::neumann_free,
                                         BoundaryCondition::neumann_free, BoundaryCondition::neumann_free};

  BoundaryCondition& operator[](BoundarySide s) { return sides[static_cast<std::size_t>(s)]; }
  BoundaryCondition operator[](BoundarySide s) const { return sides[static_cast<std::size_t>(s)]; }
  bool is_dirichlet(BoundarySide s) const { return (*this)[s] == BoundaryCondition::dirichlet_zero; }
  int dirichlet_count() const;

  /// Throws ConfigError when no side is Dirichlet (singular operator).
  void validate() const;
  /// "left=dirichlet,right=neumann,bottom=neumann,top=neumann"
  std::string to_string() const;

  static BoundarySpec clamped_left();
};

enum class Axis { i, j };

/// Corner offset of a bilinear element relative to its lower-left node.
struct Corner {
  int di = 0;
  int dj = 0;
};

/// Corners in counterclockwise order 00, 10, 11, 01.
inline constexpr std::array<Corner, 4> kCorners{Corner{0, 0}, Corner{1, 0}, Corner{1, 1}, Corner{0, 1}};

/// Mode dimensions of grid-indexed trains: d modes of size 4.
std::vector<Index> grid_dims(int d);
/// Mode dimensions of d.o.f.-indexed trains: component mode 2, then d modes of size 4.
std::vector<Index> dof_dims(int d);

/// Fused digits 2*i_k + j_k, most significant first.
std::vector<Index> interleave(std::uint64_t i, std::uint64_t j, int d);
std::pair<std::uint64_t, std::uint64_t> deinterleave(std::span<const Index> fused);

/// Position of node (i, j) in a dense grid-indexed vector.
std::uint64_t node_linear_index(std::uint64_t i, std::uint64_t j, int d);
/// Position of d.o.f. (component, i, j) in a dense d.o.f.-indexed vector.
std::uint64_t dof_linear_index(int component, std::uint64_t i, std::uint64_t j, int d);
std::vector<Index> dof_multi_index(int component, std::uint64_t i, std::uint64_t j, int d);

/// Binary one-axis trains (d modes of size 2).
TensorTrain axis_linear(int d, double offset = 0.0, double slope = 1.0);
TensorTrain axis_unit(int d, std::uint64_t index);

/// Combine an i-axis and a j-axis train of equal length into one grid train
/// whose entry at interleave(i, j) is ti(i) * tj(j).
TensorTrain fuse_axes(const TensorTrain& ti, const TensorTrain& tj);

TensorTrain build_meshgrid_X(int d);
TensorTrain build_meshgrid_Y(int d);

/// (S v)(n) = v(n - offset) along `axis`, zero where n - offset leaves the grid.
TTOperator build_shift_operator(Axis axis, int offset, int d);

/// 1 on nodes that are the lower-left corner of an element, 0 elsewhere.
TensorTrain build_element_mask(int d);

/// Diagonal of the interior projector on grid nodes (0 on Dirichlet sides).
TensorTrain interior_indicator(const BoundarySpec& bcs, int d);
/// Diagonal d.o.f. projector: 0 for both components of Dirichlet nodes.
TTOperator build_interior_projector(const BoundarySpec& bcs, int d);

/// Global operator with entry at row (alpha1, n1), column (alpha2, n2) equal
/// to sum_m a(m) [n1 = m + c1] [n2 = m + c2], the sum running over elements
/// m (i, j <= 2^d - 2). Values of `a` on the last grid lines are ignored.
/// Ranks are at most 4 * ranks(a).
TTOperator scatter_corner_pair(const TensorTrain& a, Corner c1, Corner c2, int alpha1, int alpha2);
/// Same with a general 2 x 2 component block (identity for the mass operator).
TTOperator scatter_corner_pair(const TensorTrain& a, Corner c1, Corner c2, const Eigen::Matrix2d& components);

/// Grid-indexed vector placed in component `alpha` of a d.o.f. vector.
TensorTrain embed_component(const TensorTrain& grid, int alpha);

}  // namespace qttfem
