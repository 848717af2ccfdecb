#include "qttfem/fem_kernel.hpp"

#include "qttfem/errors.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace qttfem {

namespace {

constexpr int kDirichletConvention = 1;  // A = P A_raw P + s (I - P), s = mean diag(A_raw)

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n; ++k) h = (h ^ p[k]) * 1099511628211ULL;
  return h;
}

template <class T>
std::uint64_t mix(std::uint64_t h, T v) {
  return fnv1a(h, &v, sizeof v);
}

}  // namespace

void QuadDomain::validate() const {
  for (const auto& p : corners)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("domain: corner coordinates must be finite");
  for (int k = 0; k < 4; ++k) {
    const Point2 p0 = corners[static_cast<std::size_t>(k)];
    const Point2 p1 = corners[static_cast<std::size_t>((k + 1) % 4)];
    const Point2 p2 = corners[static_cast<std::size_t>((k + 2) % 4)];
    const double c = cross({p1.x - p0.x, p1.y - p0.y}, {p2.x - p1.x, p2.y - p1.y});
    if (!(c > 0.0)) throw DomainError("domain: corners must form a convex counterclockwise quadrilateral");
  }
  // det of G' is affine in (s, t); positivity at the four corners covers the square.
  const Point2 a = edge_a(), b = edge_b(), w = twist();
  for (double s : {0.0, 1.0})
    for (double t : {0.0, 1.0}) {
      const double det = cross(a, b) + s * cross(a, w) + t * cross(w, b);
      if (!(det > 0.0)) throw DomainError("domain: degenerate bilinear map (nonpositive Jacobian)");
    }
}

double QuadDomain::area() const {
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += cross(corners[static_cast<std::size_t>(k)], corners[static_cast<std::size_t>((k + 1) % 4)]);
  return 0.5 * s;
}

Point2 QuadDomain::edge_a() const { return {corners[1].x - corners[0].x, corners[1].y - corners[0].y}; }
Point2 QuadDomain::edge_b() const { return {corners[3].x - corners[0].x, corners[3].y - corners[0].y}; }
Point2 QuadDomain::twist() const {
  return {corners[2].x - corners[1].x - corners[3].x + corners[0].x,
          corners[2].y - corners[1].y - corners[3].y + corners[0].y};
}

Point2 QuadDomain::map(double s, double t) const {
  const Point2 a = edge_a(), b = edge_b(), w = twist();
  return {corners[0].x + s * a.x + t * b.x + s * t * w.x, corners[0].y + s * a.y + t * b.y + s * t * w.y};
}

QuadDomain QuadDomain::rectangle(double lx, double ly) {
  QuadDomain q;
  q.corners = {Point2{0, 0}, Point2{lx, 0}, Point2{lx, ly}, Point2{0, ly}};
  return q;
}

QuadDomain QuadDomain::trapezoid(double bottom, double top, double height) {
  QuadDomain q;
  q.corners = {Point2{0, 0}, Point2{bottom, 0}, Point2{0.5 * (bottom + top), height},
               Point2{0.5 * (bottom - top), height}};
  return q;
}

Lame plane_stress_lame(double youngs, double poisson) {
  if (!(youngs > 0.0) || !std::isfinite(youngs)) throw DomainError("youngs modulus must be positive");
  if (!(poisson > -1.0 && poisson < 0.5)) throw DomainError("poisson ratio must lie in (-1, 0.5)");
  return {youngs * poisson / (1.0 - poisson * poisson), youngs / (2.0 * (1.0 + poisson))};
}

void MaterialParams::validate() const {
  plane_stress_lame(youngs_modulus, poisson_ratio);
  if (!(density >= 0.0) || !std::isfinite(density)) throw DomainError("density must be nonnegative");
}

const char* quadrature_name(QuadratureKind kind) { return kind == QuadratureKind::gauss2x2 ? "gauss" : "midpoint"; }

QuadratureRule QuadratureRule::make(QuadratureKind kind) {
  QuadratureRule r;
  r.kind = kind;
  if (kind == QuadratureKind::midpoint) {
    r.points = {{0.0, 0.0, 4.0}};
    r.exact_degree = 1;
    return r;
  }
  const double g = 1.0 / std::sqrt(3.0);
  for (double eta : {-g, g})
    for (double xi : {-g, g}) r.points.push_back({xi, eta, 1.0});
  r.exact_degree = 3;
  return r;
}

double shape_value(Corner c, double xi, double eta) {
  return 0.25 * (1.0 + (2 * c.di - 1) * xi) * (1.0 + (2 * c.dj - 1) * eta);
}

Eigen::Vector2d shape_gradient(Corner c, double xi, double eta) {
  const double sx = 2 * c.di - 1, sy = 2 * c.dj - 1;
  return {0.25 * sx * (1.0 + sy * eta), 0.25 * (1.0 + sx * xi) * sy};
}

Eigen::Matrix2d constitutive_pair(int alpha, int beta, const Lame& lame) {
  Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
  k(alpha, beta) += lame.lambda_bar;
  if (alpha == beta) k += lame.mu * Eigen::Matrix2d::Identity();
  k(beta, alpha) += lame.mu;
  return k;
}

double grid_spacing(int d) {
  if (d < 1 || d > kMaxGridExponent) throw DomainError("grid exponent d must be >= 1");
  return 1.0 / (std::ldexp(1.0, d) - 1.0);
}

Point2 grid_point(const QuadDomain& domain, int d, std::uint64_t i, std::uint64_t j) {
  const double h = grid_spacing(d);
  const std::uint64_t n = std::uint64_t{1} << d;
  if (i >= n || j >= n) throw DomainError("grid_point: node index outside the grid");
  return domain.map(static_cast<double>(i) * h, static_cast<double>(j) * h);
}

std::array<Point2, 4> element_nodes(const QuadDomain& domain, int d, std::uint64_t i, std::uint64_t j) {
  std::array<Point2, 4> nodes;
  for (std::size_t c = 0; c < 4; ++c)
    nodes[c] = grid_point(domain, d, i + static_cast<std::uint64_t>(kCorners[c].di),
                          j + static_cast<std::uint64_t>(kCorners[c].dj));
  return nodes;
}

Eigen::Matrix2d element_jacobian(const std::array<Point2, 4>& nodes, double xi, double eta) {
  Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
  for (std::size_t c = 0; c < 4; ++c) {
    const Eigen::Vector2d g = shape_gradient(kCorners[c], xi, eta);
    j.row(0) += nodes[c].x * g.transpose();
    j.row(1) += nodes[c].y * g.transpose();
  }
  return j;
}

Eigen::Matrix<double, 8, 8> element_stiffness(const std::array<Point2, 4>& nodes, const Lame& lame,
                                              const QuadratureRule& rule) {
  Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
  std::array<Eigen::Matrix2d, 4> pairs;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) pairs[static_cast<std::size_t>(2 * a + b)] = constitutive_pair(a, b, lame);
  for (const auto& q : rule.points) {
    const Eigen::Matrix2d jac = element_jacobian(nodes, q.xi, q.eta);
    const double det = jac.determinant();
    if (!(det > 0.0)) throw DomainError("element: nonpositive Jacobian determinant");
    const Eigen::Matrix2d jit = jac.inverse().transpose();
    std::array<Eigen::Vector2d, 4> g;
    for (std::size_t c = 0; c < 4; ++c) g[c] = jit * shape_gradient(kCorners[c], q.xi, q.eta);
    for (int c1 = 0; c1 < 4; ++c1)
      for (int a = 0; a < 2; ++a)
        for (int c2 = 0; c2 < 4; ++c2)
          for (int b = 0; b < 2; ++b)
            k(2 * c1 + a, 2 * c2 + b) += q.weight * det *
                                          g[static_cast<std::size_t>(c1)].dot(
                                              pairs[static_cast<std::size_t>(2 * a + b)] * g[static_cast<std::size_t>(c2)]);
  }
  return k;
}

Eigen::Matrix4d element_mass(const std::array<Point2, 4>& nodes, const QuadratureRule& rule) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (const auto& q : rule.points) {
    const double det = element_jacobian(nodes, q.xi, q.eta).determinant();
    Eigen::Vector4d phi;
    for (std::size_t c = 0; c < 4; ++c) phi(static_cast<Index>(c)) = shape_value(kCorners[c], q.xi, q.eta);
    m += q.weight * det * phi * phi.transpose();
  }
  return m;
}

void Problem::validate() const {
  if (d < 1 || d > kMaxGridExponent) throw ConfigError("d: grid exponent must be in [1, 30]");
  try {
    domain.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
  try {
    material.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("material: ") + e.what());
  }
  bcs.validate();
  if (!std::isfinite(force_x) || !std::isfinite(force_y)) throw ConfigError("force: body force must be finite");
}

Problem Problem::beam(int d, double gravity) {
  Problem p;
  p.d = d;
  p.domain = QuadDomain::rectangle(20.0, 1.0);
  p.material = MaterialParams{};
  p.bcs = BoundarySpec::clamped_left();
  p.force_x = 0.0;
  p.force_y = -p.material.density * gravity;
  return p;
}

double beam_analytic_deflection(const MaterialParams& m, double length, double height, double gravity) {
  return 3.0 * m.density * gravity * std::pow(length, 4) / (2.0 * m.youngs_modulus * height * height);
}

std::uint64_t discretization_hash(const Problem& p) {
  std::uint64_t h = 14695981039346656037ULL;
  h = mix(h, p.d);
  for (const auto& c : p.domain.corners) h = mix(mix(h, c.x), c.y);
  h = mix(mix(mix(h, p.material.youngs_modulus), p.material.poisson_ratio), p.material.density);
  for (auto s : p.bcs.sides) h = mix(h, static_cast<int>(s));
  h = mix(mix(h, p.force_x), p.force_y);
  h = mix(h, static_cast<int>(p.quadrature));
  h = mix(h, kDirichletConvention);
  return h;
}

}  // namespace qttfem
