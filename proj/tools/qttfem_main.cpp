#include "bench.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace qttfem;
using namespace qttfem::bench;

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kCapacity = 3, kConfig = 4 };

struct Options {
  RunConfig run;
  std::string domain, bc, force, quadrature = "gauss", solver = "tt", format, out;
  // validate / bench / export
  int d_min = 4;
  int repeats = 1;
  std::string fault = "none";
  std::string in, matrix;
};

void add_problem_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--d", o.run.d, "grid exponent (2^d x 2^d nodes)");
  cmd->add_option("--preset", o.run.preset, "problem preset (beam)");
  cmd->add_option("--domain", o.domain, "corners x0,y0:x1,y1:x2,y2:x3,y3 (counterclockwise)");
  cmd->add_option("--youngs", o.run.material.youngs_modulus, "Young's modulus [Pa]");
  cmd->add_option("--poisson", o.run.material.poisson_ratio, "Poisson ratio");
  cmd->add_option("--density", o.run.material.density, "density [kg/m^3]");
  cmd->add_option("--gravity", o.run.gravity, "gravitational acceleration [m/s^2]");
  cmd->add_option("--force", o.force, "body force fx,fy [N/m^3] (overrides gravity)");
  cmd->add_option("--bc", o.bc, "boundary conditions, e.g. left=dirichlet,right=neumann");
  cmd->add_option("--quadrature", o.quadrature, "gauss | midpoint");
  cmd->add_option("--classical-max-d", o.run.classical_max_d, "capacity of the classical solver");
  cmd->add_option("--seed", o.run.seed, "random seed (cross interpolation, solver start)");
  cmd->add_option("--out", o.out, "output file (default stdout)");
  cmd->add_option("--format", o.format, "json | csv");
}

void add_solver_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--solver", o.solver, "tt | classical | both");
  cmd->add_option("--tol", o.run.tol, "relative residual target of the tensor solver");
  cmd->add_option("--max-rank", o.run.max_rank, "rank cap of the solution train");
}

/// Applies the string-valued flags to the run config.
void resolve(Options& o) {
  if (!o.domain.empty()) o.run.domain = parse_domain(o.domain);
  if (!o.bc.empty()) o.run.bcs = parse_bcs(o.bc);
  if (!o.force.empty()) o.run.force = parse_force(o.force);
  if (o.quadrature == "gauss") o.run.quadrature = QuadratureKind::gauss2x2;
  else if (o.quadrature == "midpoint") o.run.quadrature = QuadratureKind::midpoint;
  else throw FieldError("quadrature", "expected gauss or midpoint");
  if (o.solver == "tt") o.run.solver = SolverChoice::tt;
  else if (o.solver == "classical") o.run.solver = SolverChoice::classical;
  else if (o.solver == "both") o.run.solver = SolverChoice::both;
  else throw FieldError("solver", "expected tt, classical or both");
  o.run.validate();
}

OutputFormat output_format(const Options& o, OutputFormat fallback) {
  if (o.format.empty()) return fallback;
  if (o.format == "json") return OutputFormat::json;
  if (o.format == "csv") return OutputFormat::csv;
  throw FieldError("format", "expected json or csv");
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw FieldError("out", "cannot open " + o.out + " for writing");
  f << text;
  if (!f) throw FieldError("out", "write to " + o.out + " failed");
}

void diagnose(const char* kind, const std::string& message, const std::string& field = "") {
  Json j{{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Quantized tensor-train finite element solver for 2D plane-stress elasticity"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "assemble and solve one problem, print metrics");
  add_problem_flags(solve, o);
  add_solver_flags(solve, o);
  solve->add_option("--save-u", o.run.save_u, "write the tensor solution as a QTT1 container");
  solve->add_option("--load-u", o.run.load_u, "start the tensor solver from a QTT1 container");

  auto* validate = app.add_subcommand("validate", "oracle-equivalence suite up to --d");
  o.run.d = 8;
  add_problem_flags(validate, o);
  add_solver_flags(validate, o);
  validate->add_option("--inject-fault", o.fault, "none | bc (negative control)");

  auto* bench = app.add_subcommand("bench", "scaling campaign over --d-min..--d");
  add_problem_flags(bench, o);
  add_solver_flags(bench, o);
  bench->add_option("--d-min", o.d_min, "first grid exponent");
  bench->add_option("--repeats", o.repeats, "repetitions per point");

  auto* exp = app.add_subcommand("export", "dump a QTT1 container or write a Matrix Market system");
  add_problem_flags(exp, o);
  exp->add_option("--in", o.in, "QTT1 container to convert");
  exp->add_option("--matrix", o.matrix, "stiffness | stiffness-raw | mass of the classical system");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    diagnose("config", e.what());
    return kConfig;
  }

  try {
    if (*solve) {
      resolve(o);
      const SolveOutcome out = cmd_solve(o.run);
      emit(o, output_format(o, OutputFormat::json) == OutputFormat::json ? solve_json(o.run, out).dump(2) + "\n"
                                                                         : to_csv(out.runs));
      return kOk;
    }
    if (*validate) {
      if (validate->count("--d") == 0) o.run.d = 5;
      resolve(o);
      Fault fault = Fault::none;
      if (o.fault == "bc") fault = Fault::bc;
      else if (o.fault != "none") throw FieldError("inject-fault", "expected none or bc");
      const auto checks = cmd_validate(o.run, o.run.d, fault);
      emit(o, output_format(o, OutputFormat::json) == OutputFormat::json ? checks_json(checks).dump(2) + "\n"
                                                                         : checks_csv(checks));
      std::string failed;
      for (const auto& c : checks)
        if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name + " (d=" + std::to_string(c.d) + ", " + c.domain + ")";
      if (!failed.empty()) {
        diagnose("validation", "failed checks: " + failed);
        return kValidation;
      }
      return kOk;
    }
    if (*bench) {
      resolve(o);
      const auto rows = cmd_bench(o.run, o.d_min, o.run.d, o.repeats);
      if (output_format(o, OutputFormat::csv) == OutputFormat::csv) {
        emit(o, to_csv(rows));
      } else {
        Json runs = Json::array();
        for (const auto& r : rows) runs.push_back(r.to_json());
        emit(o, Json{{"schema", "qttfem.metrics"},
                     {"schema_version", kSchemaVersion},
                     {"command", "bench"},
                     {"config", o.run.to_json()},
                     {"runs", runs},
                     {"comparison", nullptr}}
                        .dump(2) +
                    "\n");
      }
      return kOk;
    }
    if (*exp) {
      if (!o.in.empty() && !o.matrix.empty()) throw FieldError("in", "use either --in or --matrix");
      if (!o.matrix.empty()) {
        if (exp->count("--d") == 0) o.run.d = 3;
        resolve(o);
        if (o.out.empty()) throw FieldError("out", "--matrix needs --out");
        ClassicalConfig cc;
        cc.max_d = o.run.classical_max_d;
        const SparseSystem s = classical_assemble(o.run.problem(), cc);
        if (o.matrix == "stiffness") write_matrix_market(o.out, s.stiffness);
        else if (o.matrix == "stiffness-raw") write_matrix_market(o.out, s.stiffness_raw);
        else if (o.matrix == "mass") write_matrix_market(o.out, s.mass);
        else throw FieldError("matrix", "expected stiffness, stiffness-raw or mass");
        return kOk;
      }
      if (o.in.empty()) throw FieldError("in", "--in or --matrix is required");
      StoredTrain t;
      try {
        t = load_container(o.in);
      } catch (const FormatError& e) {
        throw FieldError("in", e.what());
      }
      if (o.format.empty() || o.format == "json") emit(o, export_json(t).dump(2) + "\n");
      else if (o.format == "dense") emit(o, export_dense(t));
      else throw FieldError("format", "export supports json or dense");
      return kOk;
    }
  } catch (const FieldError& e) {
    diagnose("config", e.what(), e.field());
    return kConfig;
  } catch (const ConfigError& e) {
    diagnose("config", e.what());
    return kConfig;
  } catch (const CapacityError& e) {
    diagnose("capacity", e.what());
    return kCapacity;
  } catch (const std::exception& e) {
    diagnose("failure", e.what());
    return kFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
