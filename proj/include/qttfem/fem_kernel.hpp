#pragma once

// Problem definition and the dense per-element kernel shared by the tensor
// assembly and the classical sparse assembly.

#include "qttfem/qtt_mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qttfem {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

/// Quadrilateral with corners P00, P10, P11, P01 in counterclockwise order.
/// The global bilinear map is G(s, t) = P00 + s a + t b + s t w on [0, 1]^2.
struct QuadDomain {
  std::array<Point2, 4> corners{Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}};

  /// Throws DomainError unless convex, counterclockwise, with det G' > 0.
  void validate() const;
  double area() const;

  Point2 map(double s, double t) const;
  Point2 edge_a() const;  // P10 - P00
  Point2 edge_b() const;  // P01 - P00
  Point2 twist() const;   // P11 - P10 - P01 + P00

  static QuadDomain rectangle(double lx, double ly);
  static QuadDomain unit_square() { return rectangle(1.0, 1.0); }
  /// Bottom edge of length `bottom`, top edge of length `top` centered over it.
  static QuadDomain trapezoid(double bottom, double top, double height);
};

struct Lame {
  double lambda_bar = 0.0;
  double mu = 0.0;
};

/// Plane-stress parameters: mu = E / (2 (1 + nu)), lambda_bar = E nu / (1 - nu^2).
Lame plane_stress_lame(double youngs, double poisson);

struct MaterialParams {
  double youngs_modulus = 68e9;
  double poisson_ratio = 0.33;
  double density = 2700.0;

  void validate() const;
  Lame lame() const { return plane_stress_lame(youngs_modulus, poisson_ratio); }
};

enum class QuadratureKind { gauss2x2, midpoint };

const char* quadrature_name(QuadratureKind kind);

struct QuadraturePoint {
  double xi = 0.0;
  double eta = 0.0;
  double weight = 0.0;
};

/// Rule on the reference square [-1, 1]^2; weights sum to 4.
struct QuadratureRule {
  QuadratureKind kind = QuadratureKind::gauss2x2;
  std::vector<QuadraturePoint> points;
  /// Polynomial degree per variable integrated exactly.
  int exact_degree = 3;

  static QuadratureRule make(QuadratureKind kind);
  static QuadratureRule gauss2x2() { return make(QuadratureKind::gauss2x2); }
  static QuadratureRule midpoint() { return make(QuadratureKind::midpoint); }
};

/// Bilinear shape function of corner c on the reference square, and its
/// gradient (d/dxi, d/deta).
double shape_value(Corner c, double xi, double eta);
Eigen::Vector2d shape_gradient(Corner c, double xi, double eta);

/// Coefficients K with sigma(phi2 e_beta) : eps(phi1 e_alpha) = g1^T K g2,
/// where g1, g2 are the physical gradients of phi1 (test) and phi2 (trial).
Eigen::Matrix2d constitutive_pair(int alpha, int beta, const Lame& lame);

/// Physical node (i, j) of the 2^d x 2^d grid: G(i h, j h), h = 1 / (2^d - 1).
Point2 grid_point(const QuadDomain& domain, int d, std::uint64_t i, std::uint64_t j);
double grid_spacing(int d);

/// Corner nodes of element (i, j) in kCorners order.
std::array<Point2, 4> element_nodes(const QuadDomain& domain, int d, std::uint64_t i, std::uint64_t j);

/// Jacobian d(x, y) / d(xi, eta) of the element map from its corner nodes.
Eigen::Matrix2d element_jacobian(const std::array<Point2, 4>& nodes, double xi, double eta);

/// Element stiffness with local d.o.f. index 2 c + alpha (c in kCorners order).
Eigen::Matrix<double, 8, 8> element_stiffness(const std::array<Point2, 4>& nodes, const Lame& lame,
                                              const QuadratureRule& rule);
/// Scalar element mass matrix over the four corners.
Eigen::Matrix4d element_mass(const std::array<Point2, 4>& nodes, const QuadratureRule& rule);

/// Full problem description shared by both pipelines.
struct Problem {
  int d = 3;
  QuadDomain domain;
  MaterialParams material;
  BoundarySpec bcs = BoundarySpec::clamped_left();
  /// Body force (N/m^3), constant over the domain.
  double force_x = 0.0;
  double force_y = 0.0;
  QuadratureKind quadrature = QuadratureKind::gauss2x2;

  void validate() const;

  /// 20 m x 1 m aluminium cantilever, clamped on the left, under gravity.
  static Problem beam(int d, double gravity = 9.81);
};

/// Closed-form tip deflection 3 rho g L^4 / (2 E H^2) of the beam preset.
double beam_analytic_deflection(const MaterialParams& m, double length, double height, double gravity);

/// Hash of everything that defines the discrete system (grid, geometry,
/// material, boundary conditions, quadrature, Dirichlet convention). Both
/// pipelines record it so a comparison can assert they solved the same thing.
std::uint64_t discretization_hash(const Problem& p);

}  // namespace qttfem
