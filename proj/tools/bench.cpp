#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace qttfem::bench {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <class T>
std::string opt_cell(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_same_v<T, double>) return num(*v);
  else if constexpr (std::is_same_v<T, bool>) return *v ? "true" : "false";
  else return std::to_string(*v);
}

std::string join_ranks(const std::vector<Index>& r) {
  std::string s;
  for (std::size_t k = 0; k < r.size(); ++k) s += (k ? ";" : "") + std::to_string(r[k]);
  return s;
}

std::vector<double> split_numbers(const std::string& text, char sep, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw FieldError(field, "'" + item + "' is not a number");
    }
    if (used != item.size() || !std::isfinite(v)) throw FieldError(field, "'" + item + "' is not a finite number");
    out.push_back(v);
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double rel_max_diff(const Matrix& a, const Matrix& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  return scale > 0.0 ? (a - b).cwiseAbs().maxCoeff() / scale : (a - b).cwiseAbs().maxCoeff();
}

double max_of(const std::vector<Index>& r) { return r.empty() ? 0.0 : static_cast<double>(*std::max_element(r.begin(), r.end())); }

}  // namespace

const char* solver_name(SolverChoice s) {
  switch (s) {
    case SolverChoice::tt: return "tt";
    case SolverChoice::classical: return "classical";
    case SolverChoice::both: return "both";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  if (d < 1 || d > kMaxGridExponent) throw FieldError("d", "must be in [1, " + std::to_string(kMaxGridExponent) + "]");
  if (preset != "beam") throw FieldError("preset", "unknown preset '" + preset + "' (available: beam)");
  if (!(material.youngs_modulus > 0.0) || !std::isfinite(material.youngs_modulus))
    throw FieldError("youngs", "must be positive and finite");
  if (!(material.poisson_ratio > -1.0 && material.poisson_ratio < 0.5))
    throw FieldError("poisson", "must lie in (-1, 0.5)");
  if (!(material.density >= 0.0) || !std::isfinite(material.density))
    throw FieldError("density", "must be nonnegative and finite");
  if (!(gravity >= 0.0) || !std::isfinite(gravity)) throw FieldError("gravity", "must be nonnegative and finite");
  try {
    domain.validate();
  } catch (const DomainError& e) {
    throw FieldError("domain", e.what());
  }
  bool any = false;
  for (auto s : bcs.sides) any = any || s == BoundaryCondition::dirichlet_zero;
  if (!any) throw FieldError("bc", "at least one side must be dirichlet");
  if (force && (!std::isfinite((*force)[0]) || !std::isfinite((*force)[1])))
    throw FieldError("force", "components must be finite");
  if (!(tol > 0.0 && tol < 1.0)) throw FieldError("tol", "must lie in (0, 1)");
  if (max_rank < 1) throw FieldError("max-rank", "must be at least 1");
  if (classical_max_d < 1) throw FieldError("classical-max-d", "must be at least 1");
  if (!save_u.empty() && save_u == load_u) throw FieldError("save-u", "must differ from --load-u");
}

Problem RunConfig::problem() const {
  Problem p;
  p.d = d;
  p.domain = domain;
  p.material = material;
  p.bcs = bcs;
  p.quadrature = quadrature;
  if (force) {
    p.force_x = (*force)[0];
    p.force_y = (*force)[1];
  } else {
    p.force_x = 0.0;
    p.force_y = -material.density * gravity;
  }
  return p;
}

AmenConfig RunConfig::amen() const {
  AmenConfig a;
  a.residual_tol = tol;
  a.rounding.max_rank = max_rank;
  a.seed = seed;
  return a;
}

AssemblyConfig RunConfig::assembly() const {
  AssemblyConfig c;
  c.cross.seed = seed;
  return c;
}

std::optional<double> RunConfig::analytic_deflection() const {
  if (force) return std::nullopt;
  const auto& c = domain.corners;
  const bool rect = c[1].y == c[0].y && c[3].x == c[0].x && c[2].x == c[1].x && c[2].y == c[3].y;
  if (!rect || bcs.sides != BoundarySpec::clamped_left().sides) return std::nullopt;
  return beam_analytic_deflection(material, c[1].x - c[0].x, c[3].y - c[0].y, gravity);
}

Json RunConfig::to_json() const {
  Json corners = Json::array();
  for (const auto& p : domain.corners) corners.push_back({p.x, p.y});
  Json sides = Json::object();
  for (BoundarySide s : {BoundarySide::left, BoundarySide::right, BoundarySide::bottom, BoundarySide::top})
    sides[side_name(s)] = bcs.is_dirichlet(s) ? "dirichlet" : "neumann";
  const Problem p = problem();
  return Json{{"d", d},
              {"preset", preset},
              {"domain", corners},
              {"youngs", material.youngs_modulus},
              {"poisson", material.poisson_ratio},
              {"density", material.density},
              {"gravity", gravity},
              {"force", {p.force_x, p.force_y}},
              {"bc", sides},
              {"quadrature", quadrature == QuadratureKind::gauss2x2 ? "gauss" : "midpoint"},
              {"solver", solver_name(solver)},
              {"tol", tol},
              {"max_rank", max_rank},
              {"seed", seed}};
}

QuadDomain parse_domain(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string pt;
  while (std::getline(ss, pt, ':')) {
    const auto xy = split_numbers(pt, ',', "domain");
    if (xy.size() != 2) throw FieldError("domain", "each corner needs two coordinates x,y");
    v.insert(v.end(), xy.begin(), xy.end());
  }
  if (v.size() != 8) throw FieldError("domain", "expected four corners x0,y0:x1,y1:x2,y2:x3,y3");
  QuadDomain q;
  for (std::size_t k = 0; k < 4; ++k) q.corners[k] = Point2{v[2 * k], v[2 * k + 1]};
  return q;
}

BoundarySpec parse_bcs(const std::string& text) {
  BoundarySpec b;
  for (auto& s : b.sides) s = BoundaryCondition::neumann_free;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FieldError("bc", "expected side=kind, got '" + item + "'");
    const std::string side = item.substr(0, eq), kind = item.substr(eq + 1);
    BoundaryCondition c;
    if (kind == "dirichlet") c = BoundaryCondition::dirichlet_zero;
    else if (kind == "neumann") c = BoundaryCondition::neumann_free;
    else throw FieldError("bc", "unknown condition '" + kind + "' (dirichlet or neumann)");
    if (side == "left") b[BoundarySide::left] = c;
    else if (side == "right") b[BoundarySide::right] = c;
    else if (side == "bottom") b[BoundarySide::bottom] = c;
    else if (side == "top") b[BoundarySide::top] = c;
    else throw FieldError("bc", "unknown side '" + side + "' (left, right, bottom, top)");
  }
  return b;
}

std::array<double, 2> parse_force(const std::string& text) {
  const auto v = split_numbers(text, ',', "force");
  if (v.size() != 2) throw FieldError("force", "expected fx,fy");
  return {v[0], v[1]};
}

// ---------------------------------------------------------------------------
// Reports

Json MetricsReport::to_json() const {
  Json j{{"d", d},
         {"dof", dof},
         {"solver", solver},
         {"repeat", repeat},
         {"assembly_time_s", assembly_time_s},
         {"solve_time_s", solve_time_s},
         {"total_time_s", total_time_s},
         {"total_time_min_s", opt(total_time_min_s)},
         {"total_time_median_s", opt(total_time_median_s)},
         {"tt_memory_bytes", nullptr},
         {"dense_equivalent_bytes", {{"vector", dense_vector_bytes}, {"matrix", dense_matrix_bytes}}},
         {"classical_nnz", opt(classical_nnz)},
         {"classical_bytes", opt(classical_bytes)},
         {"rank_profile", {{"A", rank_a}, {"u", rank_u}}},
         {"sweeps", opt(sweeps)},
         {"converged", opt(converged)},
         {"stop_reason", stop_reason.empty() ? Json(nullptr) : Json(stop_reason)},
         {"final_residual", opt(final_residual)},
         {"max_displacement_m", opt(max_displacement_m)},
         {"strain_energy_J", opt(strain_energy_j)},
         {"analytic_displacement_m", opt(analytic_displacement_m)},
         {"relative_error_vs_analytic", opt(relative_error_vs_analytic)},
         {"cross_solver_rel_l2", opt(cross_solver_rel_l2)},
         {"cross_max_rel_error", opt(cross_max_rel_error)},
         {"config_hash", hex64(config_hash)},
         {"seed", seed},
         {"error", error.empty() ? Json(nullptr) : Json(error)}};
  if (tt_bytes_u)
    j["tt_memory_bytes"] = {{"A", opt(tt_bytes_a)}, {"M", opt(tt_bytes_m)}, {"f", opt(tt_bytes_f)}, {"u", opt(tt_bytes_u)}};
  return j;
}

std::vector<std::string> csv_columns() {
  return {"d",
          "dof",
          "solver",
          "repeat",
          "assembly_time_s",
          "solve_time_s",
          "total_time_s",
          "total_time_min_s",
          "total_time_median_s",
          "tt_bytes_a",
          "tt_bytes_m",
          "tt_bytes_f",
          "tt_bytes_u",
          "dense_vector_bytes",
          "dense_matrix_bytes",
          "classical_nnz",
          "classical_bytes",
          "max_rank_a",
          "max_rank_u",
          "rank_profile_a",
          "rank_profile_u",
          "sweeps",
          "converged",
          "stop_reason",
          "final_residual",
          "max_displacement_m",
          "strain_energy_j",
          "analytic_displacement_m",
          "relative_error_vs_analytic",
          "cross_solver_rel_l2",
          "cross_max_rel_error",
          "config_hash",
          "seed",
          "error"};
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string to_csv(const std::vector<MetricsReport>& rows) {
  std::string out;
  const auto cols = csv_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k];
  out += "\r\n";
  for (const auto& r : rows) {
    const std::vector<std::string> cells{std::to_string(r.d),
                                         std::to_string(r.dof),
                                         r.solver,
                                         std::to_string(r.repeat),
                                         num(r.assembly_time_s),
                                         num(r.solve_time_s),
                                         num(r.total_time_s),
                                         opt_cell(r.total_time_min_s),
                                         opt_cell(r.total_time_median_s),
                                         opt_cell(r.tt_bytes_a),
                                         opt_cell(r.tt_bytes_m),
                                         opt_cell(r.tt_bytes_f),
                                         opt_cell(r.tt_bytes_u),
                                         num(r.dense_vector_bytes),
                                         num(r.dense_matrix_bytes),
                                         opt_cell(r.classical_nnz),
                                         opt_cell(r.classical_bytes),
                                         r.rank_a.empty() ? "" : num(max_of(r.rank_a)),
                                         r.rank_u.empty() ? "" : num(max_of(r.rank_u)),
                                         join_ranks(r.rank_a),
                                         join_ranks(r.rank_u),
                                         opt_cell(r.sweeps),
                                         opt_cell(r.converged),
                                         r.stop_reason,
                                         opt_cell(r.final_residual),
                                         opt_cell(r.max_displacement_m),
                                         opt_cell(r.strain_energy_j),
                                         opt_cell(r.analytic_displacement_m),
                                         opt_cell(r.relative_error_vs_analytic),
                                         opt_cell(r.cross_solver_rel_l2),
                                         opt_cell(r.cross_max_rel_error),
                                         hex64(r.config_hash),
                                         std::to_string(r.seed),
                                         r.error};
    for (std::size_t k = 0; k < cells.size(); ++k) out += (k ? "," : "") + csv_escape(cells[k]);
    out += "\r\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

MetricsReport base_report(const RunConfig& config, const char* solver) {
  MetricsReport r;
  r.d = config.d;
  r.dof = 2 * (std::uint64_t{1} << (2 * config.d));
  r.solver = solver;
  r.dense_vector_bytes = 8.0 * static_cast<double>(r.dof);
  r.dense_matrix_bytes = 8.0 * static_cast<double>(r.dof) * static_cast<double>(r.dof);
  r.config_hash = discretization_hash(config.problem());
  r.seed = config.seed;
  r.analytic_displacement_m = config.analytic_deflection();
  return r;
}

void finish_observables(MetricsReport& r, double tip, double energy) {
  r.max_displacement_m = tip;
  r.strain_energy_j = energy;
  if (r.analytic_displacement_m) r.relative_error_vs_analytic = std::abs(tip - *r.analytic_displacement_m) / *r.analytic_displacement_m;
}

}  // namespace

TtRun run_tt(const RunConfig& config) {
  config.validate();
  const Problem p = config.problem();
  std::optional<TensorTrain> x0;
  if (!config.load_u.empty()) {
    StoredTrain stored;
    try {
      stored = load_container(config.load_u);
    } catch (const FormatError& e) {
      throw FieldError("load-u", e.what());
    }
    if (!std::holds_alternative<TensorTrain>(stored) || std::get<TensorTrain>(stored).mode_dims() != dof_dims(p.d))
      throw FieldError("load-u", "container is not a d.o.f. vector for d = " + std::to_string(p.d));
    x0 = std::get<TensorTrain>(stored);
  }
  TtRun run;
  run.report = base_report(config, "tt");
  MetricsReport& r = run.report;
  run.system = assemble_system(p, config.assembly());
  const auto t = Clock::now();
  AmenResult res = amen_solve(run.system.a, run.system.f, x0, config.amen());
  r.solve_time_s = seconds_since(t);
  run.u = std::move(res.x);
  r.assembly_time_s = run.system.report.total_s;
  r.total_time_s = r.assembly_time_s + r.solve_time_s;
  r.tt_bytes_a = memory_footprint(run.system.a).bytes;
  r.tt_bytes_m = memory_footprint(run.system.mass).bytes;
  r.tt_bytes_f = memory_footprint(run.system.f).bytes;
  r.tt_bytes_u = memory_footprint(run.u).bytes;
  r.rank_a = run.system.a.ranks();
  r.rank_u = run.u.ranks();
  r.sweeps = res.report.sweeps_used;
  r.converged = res.report.converged;
  r.stop_reason = res.report.stop_reason;
  r.final_residual = res.report.final_relative_residual;
  double cross = 0.0;
  for (const auto& c : run.system.report.cross_reports) cross = std::max(cross, c.estimated_rel_error);
  r.cross_max_rel_error = cross;
  finish_observables(r, tip_deflection(run.u, p.d), strain_energy(run.system.a, run.u));
  if (!config.save_u.empty()) save_container(config.save_u, run.u);
  return run;
}

ClassicalRun run_classical(const RunConfig& config) {
  config.validate();
  const Problem p = config.problem();
  ClassicalConfig cc;
  cc.max_d = config.classical_max_d;
  ClassicalRun run;
  run.report = base_report(config, "classical");
  MetricsReport& r = run.report;
  const SparseSystem s = classical_assemble(p, cc);
  const ClassicalSolution sol = classical_solve(s);
  run.u = sol.u;
  r.assembly_time_s = s.assembly_s;
  r.solve_time_s = sol.report.solve_s;
  r.total_time_s = r.assembly_time_s + r.solve_time_s;
  r.classical_nnz = s.stiffness.nonZeros();
  r.classical_bytes = static_cast<std::uint64_t>(s.stiffness.nonZeros()) * 16 +
                      static_cast<std::uint64_t>(s.stiffness.rows() + 1) * 8;
  r.final_residual = sol.report.relative_residual;
  const Observables o = observables(s, sol.u);
  finish_observables(r, o.max_displacement, o.strain_energy);
  return run;
}

double relative_l2(const TensorTrain& u, const Vector& reference) {
  const auto dense = tt_to_dense(u);
  const Eigen::Map<const Vector> v(dense.data(), static_cast<Index>(dense.size()));
  if (v.size() != reference.size()) throw DomainError("relative_l2: dimension mismatch");
  const double n = reference.norm();
  return n > 0.0 ? (v - reference).norm() / n : (v - reference).norm();
}

SolveOutcome cmd_solve(const RunConfig& config) {
  config.validate();
  if (config.solver != SolverChoice::tt && config.d > config.classical_max_d)
    throw CapacityError("classical solver: d = " + std::to_string(config.d) + " exceeds the capacity d <= " +
                        std::to_string(config.classical_max_d));
  SolveOutcome out;
  std::optional<TtRun> tt;
  std::optional<ClassicalRun> cl;
  if (config.solver != SolverChoice::classical) tt = run_tt(config);
  if (config.solver != SolverChoice::tt) cl = run_classical(config);
  if (tt && cl) {
    out.cross_solver_rel_l2 = relative_l2(tt->u, cl->u);
    tt->report.cross_solver_rel_l2 = out.cross_solver_rel_l2;
    cl->report.cross_solver_rel_l2 = out.cross_solver_rel_l2;
  }
  if (tt) out.runs.push_back(tt->report);
  if (cl) out.runs.push_back(cl->report);
  return out;
}

Json solve_json(const RunConfig& config, const SolveOutcome& outcome) {
  Json runs = Json::array();
  for (const auto& r : outcome.runs) runs.push_back(r.to_json());
  Json cmp = outcome.cross_solver_rel_l2 ? Json{{"cross_solver_rel_l2", *outcome.cross_solver_rel_l2}} : Json(nullptr);
  return Json{{"schema", "qttfem.metrics"}, {"schema_version", kSchemaVersion}, {"command", "solve"},
              {"config", config.to_json()}, {"runs", runs},          {"comparison", cmp}};
}

// ---------------------------------------------------------------------------
// validate

std::vector<Check> cmd_validate(const RunConfig& base, int d_max, Fault fault) {
  base.validate();
  if (d_max < 2) throw FieldError("d", "validate needs d >= 2");
  if (d_max > base.classical_max_d)
    throw CapacityError("validate: d = " + std::to_string(d_max) + " exceeds the classical capacity d <= " +
                        std::to_string(base.classical_max_d));
  auto faulty = [&](RunConfig c) {
    if (fault == Fault::bc) c.bcs[BoundarySide::right] = BoundaryCondition::dirichlet_zero;
    return c;
  };
  std::vector<Check> checks;
  auto add = [&](std::string name, int d, std::string dom, double measured, double tol) {
    checks.push_back({std::move(name), d, std::move(dom), measured, tol, measured <= tol});
  };

  const std::pair<const char*, QuadDomain> domains[] = {{"unit_square", QuadDomain::unit_square()},
                                                        {"trapezoid", QuadDomain::trapezoid(2.0, 1.2, 1.0)}};
  for (const auto& [name, dom] : domains)
    for (int d : {2, 3}) {
      RunConfig c = base;
      c.d = d;
      c.domain = dom;
      const RunConfig ct = faulty(c);
      const AssembledSystem tt = assemble_system(ct.problem(), ct.assembly());
      ClassicalConfig cc;
      cc.max_d = c.classical_max_d;
      const SparseSystem cl = classical_assemble(c.problem(), cc);
      add("config_hash", d, name, tt.config_hash == cl.config_hash ? 0.0 : 1.0, 0.0);
      add("assembly.A", d, name, rel_max_diff(tt_op_to_dense(tt.a), Matrix(cl.stiffness)), 1e-9);
      add("assembly.M", d, name, rel_max_diff(tt_op_to_dense(tt.mass), Matrix(cl.mass)), 1e-9);
      const auto f = tt_to_dense(tt.f);
      const Eigen::Map<const Vector> fv(f.data(), static_cast<Index>(f.size()));
      const double fs = cl.rhs.cwiseAbs().maxCoeff();
      add("assembly.f", d, name, fs > 0.0 ? (fv - cl.rhs).cwiseAbs().maxCoeff() / fs : (fv - cl.rhs).cwiseAbs().maxCoeff(),
          1e-9);
    }

  for (int d = 2; d <= d_max; ++d) {
    RunConfig c = base;
    c.d = d;
    c.save_u.clear();
    c.load_u.clear();
    const TtRun tt = run_tt(faulty(c));
    const ClassicalRun cl = run_classical(c);
    add("solution.l2", d, "beam", relative_l2(tt.u, cl.u), 1e-6);
    const double e_ref = *cl.report.strain_energy_j;
    add("energy", d, "beam",
        e_ref != 0.0 ? std::abs(*tt.report.strain_energy_j - e_ref) / std::abs(e_ref) : std::abs(*tt.report.strain_energy_j),
        1e-6);
  }
  return checks;
}

Json checks_json(const std::vector<Check>& checks) {
  Json rows = Json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    rows.push_back({{"name", c.name},
                    {"d", c.d},
                    {"domain", c.domain},
                    {"measured", c.measured},
                    {"tolerance", c.tolerance},
                    {"passed", c.passed}});
  }
  return Json{{"schema", "qttfem.validation"}, {"schema_version", kSchemaVersion}, {"passed", all}, {"checks", rows}};
}

std::string checks_csv(const std::vector<Check>& checks) {
  std::string out = "name,d,domain,measured,tolerance,passed\r\n";
  for (const auto& c : checks)
    out += csv_escape(c.name) + "," + std::to_string(c.d) + "," + csv_escape(c.domain) + "," + num(c.measured) + "," +
           num(c.tolerance) + "," + (c.passed ? "true" : "false") + "\r\n";
  return out;
}

// ---------------------------------------------------------------------------
// bench

std::vector<MetricsReport> cmd_bench(const RunConfig& base, int d_min, int d_max, int repeats) {
  base.validate();
  if (d_min < 1 || d_min > d_max) throw FieldError("d-min", "must satisfy 1 <= d-min <= d");
  if (repeats < 1) throw FieldError("repeats", "must be at least 1");
  std::vector<MetricsReport> rows;
  for (int d = d_min; d <= d_max; ++d) {
    RunConfig c = base;
    c.d = d;
    c.save_u.clear();
    const bool want_tt = c.solver != SolverChoice::classical;
    const bool want_cl = c.solver != SolverChoice::tt && d <= c.classical_max_d;
    const std::size_t first = rows.size();
    for (int rep = 0; rep < repeats; ++rep) {
      std::optional<TtRun> tt;
      std::optional<ClassicalRun> cl;
      auto attempt = [&](auto&& run, const char* solver) -> std::optional<std::decay_t<decltype(run())>> {
        try {
          return run();
        } catch (const std::exception& e) {
          MetricsReport r = base_report(c, solver);
          r.repeat = rep;
          r.error = e.what();
          rows.push_back(r);
          return std::nullopt;
        }
      };
      if (want_tt) tt = attempt([&] { return run_tt(c); }, "tt");
      if (want_cl) cl = attempt([&] { return run_classical(c); }, "classical");
      if (tt && cl) {
        const double e = relative_l2(tt->u, cl->u);
        tt->report.cross_solver_rel_l2 = e;
        cl->report.cross_solver_rel_l2 = e;
      }
      if (tt) {
        tt->report.repeat = rep;
        rows.push_back(tt->report);
      }
      if (cl) {
        cl->report.repeat = rep;
        rows.push_back(cl->report);
      }
    }
    for (const char* solver : {"tt", "classical"}) {
      std::vector<double> times;
      for (std::size_t k = first; k < rows.size(); ++k)
        if (rows[k].solver == solver && rows[k].error.empty()) times.push_back(rows[k].total_time_s);
      if (times.empty()) continue;
      const double lo = *std::min_element(times.begin(), times.end()), med = median(times);
      for (std::size_t k = first; k < rows.size(); ++k)
        if (rows[k].solver == solver && rows[k].error.empty()) {
          rows[k].total_time_min_s = lo;
          rows[k].total_time_median_s = med;
        }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// export

Json export_json(const StoredTrain& train) {
  const bool is_op = std::holds_alternative<TTOperator>(train);
  std::vector<Index> rows, cols;
  std::vector<Core> cores;
  if (is_op) {
    const auto& op = std::get<TTOperator>(train);
    rows = op.row_dims();
    cols = op.col_dims();
    for (Index k = 0; k < op.order(); ++k) cores.push_back(op.core(k));
  } else {
    const auto& t = std::get<TensorTrain>(train);
    rows = t.mode_dims();
    cols.assign(rows.size(), 1);
    for (Index k = 0; k < t.order(); ++k) cores.push_back(t.core(k));
  }
  Json jc = Json::array();
  std::vector<Index> ranks;
  for (std::size_t k = 0; k < cores.size(); ++k) {
    const Core& c = cores[k];
    const Index nr = rows[k], nc = cols[k];
    if (k > 0) ranks.push_back(c.left);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(c.size()));
    // same order as the container payload: (left, row, col, right) row-major
    for (Index a = 0; a < c.left; ++a)
      for (Index i = 0; i < nr; ++i)
        for (Index j = 0; j < nc; ++j)
          for (Index b = 0; b < c.right; ++b) values.push_back(c(a, i + nr * j, b));
    jc.push_back({{"index", k}, {"left", c.left}, {"rows", nr}, {"cols", nc}, {"right", c.right}, {"values", values}});
  }
  Json j{{"schema", "qttfem.qtt1_dump"},
         {"schema_version", kSchemaVersion},
         {"kind", is_op ? "operator" : "vector"},
         {"row_dims", rows}};
  if (is_op) j["col_dims"] = cols;
  j["ranks"] = ranks;
  j["cores"] = jc;
  return j;
}

std::string export_dense(const StoredTrain& train) {
  std::string out;
  if (std::holds_alternative<TensorTrain>(train)) {
    for (double v : tt_to_dense(std::get<TensorTrain>(train))) out += num(v) + "\n";
    return out;
  }
  const Matrix m = tt_op_to_dense(std::get<TTOperator>(train));
  out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out += num(m(r, c)) + "\n";
  return out;
}

}  // namespace qttfem::bench
