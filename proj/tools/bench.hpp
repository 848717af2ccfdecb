#pragma once

// Run configuration, metrics and the four CLI commands as library calls so
// the acceptance driver and the tests can reuse them.

#include "qttfem/elasticity.hpp"
#include "qttfem/errors.hpp"
#include "qttfem/ref_fem.hpp"
#include "qttfem/tt_io.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qttfem::bench {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// ConfigError that names the offending field.
class FieldError : public ConfigError {
 public:
  FieldError(std::string field, const std::string& message)
      : ConfigError(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class SolverChoice { tt, classical, both };
enum class OutputFormat { json, csv };

const char* solver_name(SolverChoice s);

struct RunConfig {
  int d = 8;
  std::string preset = "beam";
  QuadDomain domain = QuadDomain::rectangle(20.0, 1.0);
  MaterialParams material;
  BoundarySpec bcs = BoundarySpec::clamped_left();
  double gravity = 9.81;
  /// Explicit body force; otherwise gravity (0, -rho g).
  std::optional<std::array<double, 2>> force;
  QuadratureKind quadrature = QuadratureKind::gauss2x2;
  SolverChoice solver = SolverChoice::tt;
  double tol = 1e-8;
  Index max_rank = 20;
  std::uint64_t seed = 1;
  int classical_max_d = 9;
  std::string save_u;
  std::string load_u;

  /// Throws FieldError for the first invalid field.
  void validate() const;
  Problem problem() const;
  AmenConfig amen() const;
  AssemblyConfig assembly() const;
  /// Closed-form tip deflection when the problem is a gravity-loaded
  /// rectangular cantilever clamped on the left.
  std::optional<double> analytic_deflection() const;
  Json to_json() const;
};

/// Parses "x0,y0:x1,y1:x2,y2:x3,y3".
QuadDomain parse_domain(const std::string& text);
/// Parses "left=dirichlet,right=neumann,..."; unnamed sides are traction free.
BoundarySpec parse_bcs(const std::string& text);
/// Parses "fx,fy".
std::array<double, 2> parse_force(const std::string& text);

struct MetricsReport {
  int d = 0;
  std::uint64_t dof = 0;
  std::string solver;
  int repeat = 0;
  double assembly_time_s = 0.0;
  double solve_time_s = 0.0;
  double total_time_s = 0.0;
  // tensor solver
  std::optional<std::uint64_t> tt_bytes_a, tt_bytes_m, tt_bytes_f, tt_bytes_u;
  std::vector<Index> rank_a, rank_u;
  std::optional<int> sweeps;
  std::optional<bool> converged;
  std::string stop_reason;
  std::optional<double> cross_max_rel_error;
  // classical solver
  std::optional<std::int64_t> classical_nnz;
  std::optional<std::uint64_t> classical_bytes;
  double dense_vector_bytes = 0.0;
  double dense_matrix_bytes = 0.0;
  std::optional<double> final_residual;
  std::optional<double> max_displacement_m;
  std::optional<double> strain_energy_j;
  std::optional<double> analytic_displacement_m;
  std::optional<double> relative_error_vs_analytic;
  std::optional<double> cross_solver_rel_l2;
  std::optional<double> total_time_min_s;
  std::optional<double> total_time_median_s;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string error;

  Json to_json() const;
};

std::vector<std::string> csv_columns();
std::string csv_escape(const std::string& field);
std::string to_csv(const std::vector<MetricsReport>& rows);

struct TtRun {
  MetricsReport report;
  TensorTrain u;
  AssembledSystem system;
};
struct ClassicalRun {
  MetricsReport report;
  Vector u;
};

TtRun run_tt(const RunConfig& config);
ClassicalRun run_classical(const RunConfig& config);

struct SolveOutcome {
  std::vector<MetricsReport> runs;
  std::optional<double> cross_solver_rel_l2;
};

/// Runs the configured solver(s); for "both" fills the cross-solver error.
SolveOutcome cmd_solve(const RunConfig& config);
Json solve_json(const RunConfig& config, const SolveOutcome& outcome);

struct Check {
  std::string name;
  int d = 0;
  std::string domain;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

enum class Fault { none, bc };

/// Oracle-equivalence suite: assembly at d in {2, 3} on the unit square and
/// a trapezoid, solution and energy on the beam up to d_max.
std::vector<Check> cmd_validate(const RunConfig& base, int d_max, Fault fault = Fault::none);
Json checks_json(const std::vector<Check>& checks);
std::string checks_csv(const std::vector<Check>& checks);

/// One row per (d, solver, repeat); classical rows stop at its capacity.
std::vector<MetricsReport> cmd_bench(const RunConfig& base, int d_min, int d_max, int repeats);

/// Human-readable dump of a QTT1 container.
Json export_json(const StoredTrain& train);
/// Dense values, one per line (operators: "rows cols" header, row-major).
std::string export_dense(const StoredTrain& train);

/// Relative L2 difference between a tensor solution and a dense vector.
double relative_l2(const TensorTrain& u, const Vector& reference);

}  // namespace qttfem::bench
