#include "qttfem/qtt_mesh.hpp"

#include "qttfem/errors.hpp"

#include <cmath>

namespace qttfem {

namespace {

void require_grid_exponent(int d) {
  if (d < 1 || d > kMaxGridExponent)
    throw DomainError("grid exponent d must be in [1, " + std::to_string(kMaxGridExponent) + "], got " +
                      std::to_string(d));
}

void require_component(int alpha) {
  if (alpha != 0 && alpha != 1) throw DomainError("displacement component must be 0 (x) or 1 (y)");
}

void require_corner(Corner c) {
  if ((c.di != 0 && c.di != 1) || (c.dj != 0 && c.dj != 1)) throw DomainError("corner offsets must be 0 or 1");
}

void require_binary(const TensorTrain& t, const char* what) {
  for (Index n : t.mode_dims())
    if (n != 2) throw DomainError(std::string(what) + ": expected binary modes");
}

/// One-axis shift by +1 as a binary TT operator. The bond carries the carry
/// bit of m + 1 from the least significant digit (last core) towards the
/// first; a carry out of the first core would wrap, so it is dropped.
TTOperator axis_shift(int d) {
  std::vector<Core> cores;
  for (int k = 0; k < d; ++k) {
    const Index left = k == 0 ? 1 : 2;
    const Index right = k == d - 1 ? 1 : 2;
    Core c(left, 4, right);
    for (Index b = 0; b < right; ++b) {
      const Index cin = k == d - 1 ? 1 : b;
      for (Index m = 0; m < 2; ++m) {
        const Index n = (m + cin) % 2;
        const Index cout = (m + cin) / 2;
        if (k == 0 && cout != 0) continue;
        c(k == 0 ? 0 : cout, n + 2 * m, b) = 1.0;
      }
    }
    cores.push_back(std::move(c));
  }
  const std::vector<Index> dims(static_cast<std::size_t>(d), 2);
  return TTOperator(std::move(cores), dims, dims);
}

TTOperator fuse_axes(const TTOperator& si, const TTOperator& sj) {
  if (si.order() != sj.order()) throw DomainError("fuse_axes: trains differ in length");
  std::vector<Core> cores;
  for (Index k = 0; k < si.order(); ++k) {
    const Core& a = si.core(k);
    const Core& b = sj.core(k);
    Core c(a.left * b.left, 16, a.right * b.right);
    for (Index ar = 0; ar < a.right; ++ar)
      for (Index br = 0; br < b.right; ++br)
        for (Index al = 0; al < a.left; ++al)
          for (Index bl = 0; bl < b.left; ++bl)
            for (Index ri = 0; ri < 2; ++ri)
              for (Index ci = 0; ci < 2; ++ci)
                for (Index rj = 0; rj < 2; ++rj)
                  for (Index cj = 0; cj < 2; ++cj)
                    c(al + a.left * bl, (2 * ri + rj) + 4 * (2 * ci + cj), ar + a.right * br) =
                        a(al, ri + 2 * ci, ar) * b(bl, rj + 2 * cj, br);
    cores.push_back(std::move(c));
  }
  const auto dims = grid_dims(static_cast<int>(si.order()));
  return TTOperator(std::move(cores), dims, dims);
}

TensorTrain axis_indicator_without(int d, bool drop_first, bool drop_last) {
  const std::vector<Index> dims(static_cast<std::size_t>(d), 2);
  TensorTrain t = TensorTrain::ones(dims);
  const std::uint64_t last = (std::uint64_t{1} << d) - 1;
  if (drop_first) t = tt_axpy(-1.0, axis_unit(d, 0), t);
  if (drop_last) t = tt_axpy(-1.0, axis_unit(d, last), t);
  // Block sums of 0/1 rank-1 trains; left unrounded so entries stay exact.
  return t;
}

/// Carry automaton of one axis of the corner-pair scatter. The bond carries
/// the carry bit of m + 1; node digits are m or m + 1 depending on the corner
/// offsets. Overflow out of the first core means m is on the last grid line,
/// which is not the lower-left corner of any element, so the term is dropped.
struct AxisStep {
  Index n1, n2, cout;
};

AxisStep axis_step(Index m, Index cin, int delta1, int delta2) {
  const Index t = m + cin;
  const Index shifted = t % 2;
  return {delta1 ? shifted : m, delta2 ? shifted : m, t / 2};
}

}  // namespace

GridTopology GridTopology::make(int d) {
  require_grid_exponent(d);
  GridTopology g;
  g.d = d;
  g.points_per_axis = Index{1} << d;
  g.points_total = g.points_per_axis * g.points_per_axis;
  g.elements_per_axis = g.points_per_axis - 1;
  g.dof_total = 2 * g.points_total;
  return g;
}

const char* side_name(BoundarySide side) {
  switch (side) {
    case BoundarySide::left: return "left";
    case BoundarySide::right: return "right";
    case BoundarySide::bottom: return "bottom";
    case BoundarySide::top: return "top";
  }
  return "?";
}

int BoundarySpec::dirichlet_count() const {
  int n = 0;
  for (auto c : sides) n += c == BoundaryCondition::dirichlet_zero ? 1 : 0;
  return n;
}

void BoundarySpec::validate() const {
  if (dirichlet_count() == 0)
    throw ConfigError("bc: at least one side must be Dirichlet (the operator is singular otherwise)");
}

std::string BoundarySpec::to_string() const {
  std::string s;
  for (int k = 0; k < 4; ++k) {
    const auto side = static_cast<BoundarySide>(k);
    if (k) s += ',';
    s += side_name(side);
    s += is_dirichlet(side) ? "=dirichlet" : "=neumann";
  }
  return s;
}

BoundarySpec BoundarySpec::clamped_left() {
  BoundarySpec b;
  b[BoundarySide::left] = BoundaryCondition::dirichlet_zero;
  return b;
}

std::vector<Index> grid_dims(int d) {
  require_grid_exponent(d);
  return std::vector<Index>(static_cast<std::size_t>(d), 4);
}

std::vector<Index> dof_dims(int d) {
  auto dims = grid_dims(d);
  dims.insert(dims.begin(), 2);
  return dims;
}

std::vector<Index> interleave(std::uint64_t i, std::uint64_t j, int d) {
  require_grid_exponent(d);
  const std::uint64_t n = std::uint64_t{1} << d;
  if (i >= n || j >= n) throw DomainError("interleave: node index outside the 2^d grid");
  std::vector<Index> fused(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const int shift = d - 1 - k;
    fused[static_cast<std::size_t>(k)] = static_cast<Index>(2 * ((i >> shift) & 1U) + ((j >> shift) & 1U));
  }
  return fused;
}

std::pair<std::uint64_t, std::uint64_t> deinterleave(std::span<const Index> fused) {
  std::uint64_t i = 0, j = 0;
  for (Index f : fused) {
    if (f < 0 || f > 3) throw DomainError("deinterleave: fused digit outside [0, 3]");
    i = 2 * i + static_cast<std::uint64_t>(f / 2);
    j = 2 * j + static_cast<std::uint64_t>(f % 2);
  }
  return {i, j};
}

std::uint64_t node_linear_index(std::uint64_t i, std::uint64_t j, int d) {
  std::uint64_t lin = 0;
  for (Index f : interleave(i, j, d)) lin = 4 * lin + static_cast<std::uint64_t>(f);
  return lin;
}

std::uint64_t dof_linear_index(int component, std::uint64_t i, std::uint64_t j, int d) {
  require_component(component);
  return (static_cast<std::uint64_t>(component) << (2 * d)) + node_linear_index(i, j, d);
}

std::vector<Index> dof_multi_index(int component, std::uint64_t i, std::uint64_t j, int d) {
  require_component(component);
  auto idx = interleave(i, j, d);
  idx.insert(idx.begin(), component);
  return idx;
}

TensorTrain axis_linear(int d, double offset, double slope) {
  require_grid_exponent(d);
  auto digit_value = [&](int k, Index bit) {
    return slope * static_cast<double>(bit) * std::ldexp(1.0, d - 1 - k) + (k == 0 ? offset : 0.0);
  };
  std::vector<Core> cores;
  if (d == 1) {
    Core c(1, 2, 1);
    for (Index b = 0; b < 2; ++b) c(0, b, 0) = digit_value(0, b);
    cores.push_back(std::move(c));
    return TensorTrain(std::move(cores));
  }
  // Bond state 0: value already accumulated; state 1: still to come.
  for (int k = 0; k < d; ++k) {
    const Index left = k == 0 ? 1 : 2;
    const Index right = k == d - 1 ? 1 : 2;
    Core c(left, 2, right);
    for (Index b = 0; b < 2; ++b) {
      const double g = digit_value(k, b);
      if (k == 0) {
        c(0, b, 0) = g;
        c(0, b, 1) = 1.0;
      } else if (k == d - 1) {
        c(0, b, 0) = 1.0;
        c(1, b, 0) = g;
      } else {
        c(0, b, 0) = 1.0;
        c(1, b, 0) = g;
        c(1, b, 1) = 1.0;
      }
    }
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

TensorTrain axis_unit(int d, std::uint64_t index) {
  const std::vector<Index> dims(static_cast<std::size_t>(d), 2);
  return TensorTrain::unit(dims, qtt_encode(index, d));
}

TensorTrain fuse_axes(const TensorTrain& ti, const TensorTrain& tj) {
  require_binary(ti, "fuse_axes");
  require_binary(tj, "fuse_axes");
  if (ti.order() != tj.order()) throw DomainError("fuse_axes: trains differ in length");
  std::vector<Core> cores;
  for (Index k = 0; k < ti.order(); ++k) {
    const Core& a = ti.core(k);
    const Core& b = tj.core(k);
    Core c(a.left * b.left, 4, a.right * b.right);
    for (Index ar = 0; ar < a.right; ++ar)
      for (Index br = 0; br < b.right; ++br)
        for (Index x = 0; x < 2; ++x)
          for (Index y = 0; y < 2; ++y)
            for (Index al = 0; al < a.left; ++al)
              for (Index bl = 0; bl < b.left; ++bl)
                c(al + a.left * bl, 2 * x + y, ar + a.right * br) = a(al, x, ar) * b(bl, y, br);
    cores.push_back(std::move(c));
  }
  return TensorTrain(std::move(cores));
}

TensorTrain build_meshgrid_X(int d) {
  return fuse_axes(axis_linear(d), TensorTrain::ones(std::vector<Index>(static_cast<std::size_t>(d), 2)));
}

TensorTrain build_meshgrid_Y(int d) {
  return fuse_axes(TensorTrain::ones(std::vector<Index>(static_cast<std::size_t>(d), 2)), axis_linear(d));
}

TTOperator build_shift_operator(Axis axis, int offset, int d) {
  require_grid_exponent(d);
  if (offset == 0) return TTOperator::identity(grid_dims(d));
  if (offset != 1) throw DomainError("shift offset must be 0 or +1");
  const std::vector<Index> bits(static_cast<std::size_t>(d), 2);
  const TTOperator id = TTOperator::identity(bits);
  const TTOperator s = axis_shift(d);
  return axis == Axis::i ? fuse_axes(s, id) : fuse_axes(id, s);
}

TensorTrain build_element_mask(int d) {
  require_grid_exponent(d);
  const TensorTrain axis = axis_indicator_without(d, false, true);
  return fuse_axes(axis, axis);
}

TensorTrain interior_indicator(const BoundarySpec& bcs, int d) {
  require_grid_exponent(d);
  bcs.validate();
  const TensorTrain pi =
      axis_indicator_without(d, bcs.is_dirichlet(BoundarySide::left), bcs.is_dirichlet(BoundarySide::right));
  const TensorTrain pj =
      axis_indicator_without(d, bcs.is_dirichlet(BoundarySide::bottom), bcs.is_dirichlet(BoundarySide::top));
  return fuse_axes(pi, pj);
}

TTOperator build_interior_projector(const BoundarySpec& bcs, int d) {
  const TensorTrain p = interior_indicator(bcs, d);
  return tt_diag(tt_kron(TensorTrain::ones(std::vector<Index>{2}), p));
}

TensorTrain embed_component(const TensorTrain& grid, int alpha) {
  require_component(alpha);
  return tt_kron(TensorTrain::unit(std::vector<Index>{2}, std::vector<Index>{alpha}), grid);
}

TTOperator scatter_corner_pair(const TensorTrain& a, Corner c1, Corner c2, int alpha1, int alpha2) {
  require_component(alpha1);
  require_component(alpha2);
  Eigen::Matrix2d components = Eigen::Matrix2d::Zero();
  components(alpha1, alpha2) = 1.0;
  return scatter_corner_pair(a, c1, c2, components);
}

TTOperator scatter_corner_pair(const TensorTrain& a, Corner c1, Corner c2, const Eigen::Matrix2d& components) {
  require_corner(c1);
  require_corner(c2);
  for (Index n : a.mode_dims())
    if (n != 4) throw DomainError("scatter_corner_pair: element train must have modes of size 4");
  const auto d = static_cast<int>(a.order());
  require_grid_exponent(d);

  std::vector<Core> cores;
  Core component(1, 4, 1);
  for (Index r = 0; r < 2; ++r)
    for (Index c = 0; c < 2; ++c) component(0, r + 2 * c, 0) = components(r, c);
  cores.push_back(std::move(component));

  for (int k = 0; k < d; ++k) {
    const Core& ak = a.core(k);
    const Index li = k == 0 ? 1 : 2, lj = li;
    const Index ri = k == d - 1 ? 1 : 2, rj = ri;
    Core c(ak.left * li * lj, 16, ak.right * ri * rj);
    for (Index bi = 0; bi < ri; ++bi) {
      const Index cin_i = k == d - 1 ? 1 : bi;
      for (Index bj = 0; bj < rj; ++bj) {
        const Index cin_j = k == d - 1 ? 1 : bj;
        for (Index mi = 0; mi < 2; ++mi) {
          const AxisStep x = axis_step(mi, cin_i, c1.di, c2.di);
          for (Index mj = 0; mj < 2; ++mj) {
            const AxisStep y = axis_step(mj, cin_j, c1.dj, c2.dj);
            if (k == 0 && (x.cout || y.cout)) continue;
            const Index ol = k == 0 ? 0 : x.cout + li * y.cout;
            const Index orr = bi + ri * bj;
            const Index mode = (2 * x.n1 + y.n1) + 4 * (2 * x.n2 + y.n2);
            const Index m = 2 * mi + mj;
            for (Index b = 0; b < ak.right; ++b)
              for (Index al = 0; al < ak.left; ++al)
                c(al + ak.left * ol, mode, b + ak.right * orr) += ak(al, m, b);
          }
        }
      }
    }
    cores.push_back(std::move(c));
  }
  const auto dims = dof_dims(d);
  return TTOperator(std::move(cores), dims, dims);
}

}  // namespace qttfem
