#include "bench.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

namespace qttfem::bench {
namespace {

RunConfig small(int d, SolverChoice solver = SolverChoice::tt) {
  RunConfig c;
  c.d = d;
  c.solver = solver;
  return c;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  // minimal RFC 4180 reader for the tests
  std::vector<std::vector<std::string>> rows(1, std::vector<std::string>(1));
  bool quoted = false;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char c = text[k];
    if (quoted) {
      if (c == '"' && k + 1 < text.size() && text[k + 1] == '"') {
        rows.back().back() += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        rows.back().back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      rows.back().emplace_back();
    } else if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') {
      ++k;
      rows.emplace_back(1);
    } else {
      rows.back().back() += c;
    }
  }
  if (rows.back().size() == 1 && rows.back()[0].empty()) rows.pop_back();
  return rows;
}

MetricsReport without_timings(MetricsReport r) {
  r.assembly_time_s = r.solve_time_s = r.total_time_s = 0.0;
  r.total_time_min_s.reset();
  r.total_time_median_s.reset();
  return r;
}

TEST(Parse, DomainBoundaryAndForce) {
  const QuadDomain q = parse_domain("0,0:2,0:1.6,1:0.4,1");
  EXPECT_EQ(q.corners[2].x, 1.6);
  EXPECT_EQ(q.corners[3].y, 1.0);
  EXPECT_THROW(parse_domain("0,0:1,0:1,1"), FieldError);
  EXPECT_THROW(parse_domain("0,0:1,0:1,x:0,1"), FieldError);
  const BoundarySpec b = parse_bcs("left=dirichlet,bottom=dirichlet");
  EXPECT_TRUE(b.is_dirichlet(BoundarySide::left));
  EXPECT_TRUE(b.is_dirichlet(BoundarySide::bottom));
  EXPECT_FALSE(b.is_dirichlet(BoundarySide::right));
  EXPECT_THROW(parse_bcs("middle=dirichlet"), FieldError);
  EXPECT_THROW(parse_bcs("left=glued"), FieldError);
  const auto f = parse_force("1.5,-2e3");
  EXPECT_EQ(f[0], 1.5);
  EXPECT_EQ(f[1], -2000.0);
  EXPECT_THROW(parse_force("1"), FieldError);
}

TEST(Config, ValidationNamesTheField) {
  auto field_of = [](const RunConfig& c) {
    try {
      c.validate();
    } catch (const FieldError& e) {
      return e.field();
    }
    return std::string();
  };
  RunConfig c;
  EXPECT_EQ(field_of(c), "");
  c.material.poisson_ratio = 0.5;
  EXPECT_EQ(field_of(c), "poisson");
  c = RunConfig{};
  c.tol = 0.0;
  EXPECT_EQ(field_of(c), "tol");
  c = RunConfig{};
  c.domain.corners[2] = Point2{0.1, 0.1};
  EXPECT_EQ(field_of(c), "domain");
  c = RunConfig{};
  c.bcs = parse_bcs("right=neumann");
  EXPECT_EQ(field_of(c), "bc");
  c = RunConfig{};
  c.preset = "plate";
  EXPECT_EQ(field_of(c), "preset");
}

TEST(Config, BeamAnalyticDeflection) {
  const RunConfig c = small(8);
  ASSERT_TRUE(c.analytic_deflection().has_value());
  EXPECT_NEAR(*c.analytic_deflection(), 0.0935, 5e-5);
  RunConfig f = c;
  f.force = std::array<double, 2>{0.0, -1.0};
  EXPECT_FALSE(f.analytic_deflection().has_value());
  RunConfig t = c;
  t.domain = QuadDomain::trapezoid(2.0, 1.2, 1.0);
  EXPECT_FALSE(t.analytic_deflection().has_value());
  EXPECT_NEAR(c.problem().force_y, -2700.0 * 9.81, 1e-9);
}

TEST(Csv, EscapingFollowsRfc4180) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
  MetricsReport r;
  r.solver = "tt";
  r.error = "bad, \"quoted\"\r\nthing";
  const auto rows = parse_csv(to_csv({r, r}));
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& row : rows) EXPECT_EQ(row.size(), csv_columns().size());
  EXPECT_EQ(rows[1].back(), r.error);
}

TEST(Solve, BothSolversAgreeAtD3) {
  const SolveOutcome out = cmd_solve(small(3, SolverChoice::both));
  ASSERT_EQ(out.runs.size(), 2u);
  ASSERT_TRUE(out.cross_solver_rel_l2.has_value());
  EXPECT_LE(*out.cross_solver_rel_l2, 1e-6);
  EXPECT_EQ(out.runs[0].solver, "tt");
  EXPECT_EQ(out.runs[1].solver, "classical");
  EXPECT_EQ(out.runs[0].config_hash, out.runs[1].config_hash);
  EXPECT_NEAR(*out.runs[0].max_displacement_m / *out.runs[1].max_displacement_m, 1.0, 1e-6);
  for (const auto& r : out.runs) {
    EXPECT_EQ(r.dof, 128u);
    EXPECT_DOUBLE_EQ(r.total_time_s, r.assembly_time_s + r.solve_time_s);
    EXPECT_EQ(r.dense_vector_bytes, 1024.0);
  }
  EXPECT_TRUE(out.runs[0].tt_bytes_u.has_value());
  EXPECT_TRUE(out.runs[1].classical_nnz.has_value());
}

TEST(Solve, ZeroForceGivesZeroObservables) {
  RunConfig c = small(3, SolverChoice::both);
  c.force = std::array<double, 2>{0.0, 0.0};
  const SolveOutcome out = cmd_solve(c);
  for (const auto& r : out.runs) {
    EXPECT_EQ(*r.max_displacement_m, 0.0);
    EXPECT_EQ(*r.strain_energy_j, 0.0);
  }
}

TEST(Solve, DeterministicApartFromTimings) {
  const RunConfig c = small(4);
  const auto a = without_timings(cmd_solve(c).runs[0]).to_json();
  const auto b = without_timings(cmd_solve(c).runs[0]).to_json();
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Solve, CapacityCheckedBeforeWork) {
  RunConfig c = small(5, SolverChoice::classical);
  c.classical_max_d = 4;
  EXPECT_THROW(cmd_solve(c), CapacityError);
}

TEST(Solve, SaveAndWarmStart) {
  const auto dir = std::filesystem::temp_directory_path() / "qttfem_test_bench";
  std::filesystem::create_directories(dir);
  RunConfig c = small(3);
  c.save_u = (dir / "u.qtt").string();
  const TtRun first = run_tt(c);
  RunConfig warm = small(3);
  warm.load_u = c.save_u;
  const TtRun second = run_tt(warm);
  EXPECT_LE(*second.report.sweeps, *first.report.sweeps);
  EXPECT_LE(relative_l2(second.u, Eigen::Map<const Vector>(tt_to_dense(first.u).data(), 128)), 1e-8);
  RunConfig wrong = small(4);
  wrong.load_u = c.save_u;
  EXPECT_THROW(run_tt(wrong), FieldError);
  std::filesystem::remove_all(dir);
}

TEST(Validate, PassesAndCatchesCorruptedBoundary) {
  const auto ok = cmd_validate(small(3), 3);
  for (const auto& c : ok) EXPECT_TRUE(c.passed) << c.name << " d=" << c.d << " " << c.domain << " " << c.measured;
  const auto bad = cmd_validate(small(2), 2, Fault::bc);
  bool assembly_failed = false;
  for (const auto& c : bad) assembly_failed = assembly_failed || (c.name == "assembly.A" && !c.passed);
  EXPECT_TRUE(assembly_failed);
  EXPECT_FALSE(checks_json(bad)["passed"].get<bool>());
  EXPECT_THROW(cmd_validate(small(3), 12), CapacityError);
}

TEST(Bench, RowsPerRepeatAndCapacityCutoff) {
  RunConfig c = small(4, SolverChoice::both);
  c.classical_max_d = 3;
  const auto rows = cmd_bench(c, 2, 4, 2);
  int tt = 0, cl = 0;
  for (const auto& r : rows) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    (r.solver == "tt" ? tt : cl)++;
    if (r.solver == "classical") {
      EXPECT_LE(r.d, 3);
    }
    ASSERT_TRUE(r.total_time_min_s.has_value());
    EXPECT_LE(*r.total_time_min_s, *r.total_time_median_s);
  }
  EXPECT_EQ(tt, 6);
  EXPECT_EQ(cl, 4);
  const auto csv = parse_csv(to_csv(rows));
  EXPECT_EQ(csv.size(), rows.size() + 1);
}

TEST(Bench, FailuresAreRecordedInRow) {
  RunConfig c = small(3);
  c.load_u = "/nonexistent/u.qtt";
  const auto rows = cmd_bench(c, 3, 3, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].error.empty());
}

TEST(Export, DenseMatchesTrainAndJsonListsCores) {
  const TtRun run = run_tt(small(3));
  const std::string dense = export_dense(run.u);
  std::istringstream in(dense);
  const auto ref = tt_to_dense(run.u);
  double v = 0.0;
  std::size_t k = 0;
  while (in >> v) {
    ASSERT_LT(k, ref.size());
    EXPECT_EQ(v, ref[k++]);
  }
  EXPECT_EQ(k, ref.size());

  const std::vector<Index> dims{2, 4, 4};
  const Json j = export_json(TensorTrain::ones(dims));
  EXPECT_EQ(j["kind"], "vector");
  ASSERT_EQ(j["cores"].size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(j["cores"][c]["rows"], dims[c]);
    EXPECT_EQ(j["cores"][c]["left"], 1);
    for (const auto& x : j["cores"][c]["values"]) EXPECT_EQ(x.get<double>(), 1.0);
  }
  const Json op = export_json(TTOperator::identity(dims));
  EXPECT_EQ(op["kind"], "operator");
  EXPECT_EQ(op["cores"][1]["values"].size(), 16u);
}

TEST(Export, SaveLoadRoundTripIsBitwise) {
  const TtRun run = run_tt(small(3));
  const auto bytes = encode_container(run.u);
  const StoredTrain back = decode_container(bytes);
  EXPECT_EQ(encode_container(std::get<TensorTrain>(back)), bytes);
  const auto op_bytes = encode_container(run.system.a);
  EXPECT_EQ(encode_container(std::get<TTOperator>(decode_container(op_bytes))), op_bytes);
}

}  // namespace
}  // namespace qttfem::bench
