// Acceptance driver: one PASS/FAIL line per criterion, tolerances fixed here.
// Exit 0 when every gated criterion passes, 1 otherwise.

#include "bench.hpp"

#include "CLI11.hpp"

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace qttfem;
using namespace qttfem::bench;

namespace {

using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kAssemblyTol = 1e-9;
constexpr double kAssemblySeconds = 30.0;
constexpr double kSolutionTol = 1e-6;
constexpr double kSolutionSeconds = 120.0;
constexpr double kAnalyticTol = 0.05;
constexpr double kEnergyTol = 1e-6;
constexpr double kCurvatureTol = 0.10;
constexpr Index kTrapezoidRankSlack = 2;
constexpr double kTtRatioMax = 3.0;
constexpr double kClassicalRatioMin = 3.5;
constexpr double kMemoryLimitBytes = 1e9;
constexpr double kLargeResidualTol = 1e-8;
constexpr double kPropertySeconds = 300.0;
constexpr double kAlgebraTol = 1e-12;
constexpr double kRigidTol = 1e-9;
constexpr Index kMeshRankBound = 2;
constexpr Index kJacobianRankBound = 3;
constexpr double kReciprocalTol = 1e-10;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Verdict {
  int id = 0;
  std::string title;
  bool passed = true;
  std::vector<std::string> lines;

  Verdict(int id_, std::string title_) : id(id_), title(std::move(title_)) {}
  void check(bool ok, const std::string& what) {
    passed = passed && ok;
    lines.push_back(std::string(ok ? "  ok   " : "  FAIL ") + what);
  }
  void note(const std::string& what) { lines.push_back("  info " + what); }
};

void progress(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

double rel_max(const Matrix& a, const Matrix& b) {
  const double s = b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / (s > 0.0 ? s : 1.0);
}

RunConfig beam(int d) {
  RunConfig c;
  c.d = d;
  return c;
}

/// Metrics of TT runs and classical runs, computed once and shared.
struct Runs {
  std::map<int, MetricsReport> tt, classical;

  const MetricsReport& tt_at(int d) {
    auto it = tt.find(d);
    if (it != tt.end()) return it->second;
    progress("tt solve d=" + std::to_string(d));
    return tt[d] = run_tt(beam(d)).report;
  }
  const MetricsReport& classical_at(int d) {
    auto it = classical.find(d);
    if (it != classical.end()) return it->second;
    progress("classical solve d=" + std::to_string(d));
    return classical[d] = run_classical(beam(d)).report;
  }
};

Verdict criterion1() {
  Verdict v{1, "assembly oracle equivalence (A, M, f; d 2,3; square, trapezoid)"};
  const auto t0 = Clock::now();
  const std::pair<const char*, QuadDomain> domains[] = {{"square", QuadDomain::unit_square()},
                                                        {"trapezoid", QuadDomain::trapezoid(2.0, 1.2, 1.0)}};
  for (const auto& [name, dom] : domains)
    for (int d : {2, 3}) {
      RunConfig c = beam(d);
      c.domain = dom;
      const AssembledSystem tt = assemble_system(c.problem(), c.assembly());
      const SparseSystem cl = classical_assemble(c.problem());
      const auto f = tt_to_dense(tt.f);
      const Matrix fv = Eigen::Map<const Vector>(f.data(), static_cast<Index>(f.size()));
      const double ea = rel_max(tt_op_to_dense(tt.a), Matrix(cl.stiffness));
      const double em = rel_max(tt_op_to_dense(tt.mass), Matrix(cl.mass));
      const double ef = rel_max(fv, Matrix(cl.rhs));
      const std::string where = std::string(name) + " d=" + std::to_string(d);
      v.check(ea <= kAssemblyTol, where + " A " + fmt("%.2e", ea));
      v.check(em <= kAssemblyTol, where + " M " + fmt("%.2e", em));
      v.check(ef <= kAssemblyTol, where + " f " + fmt("%.2e", ef));
    }
  const double s = since(t0);
  v.check(s < kAssemblySeconds, "runtime " + fmt("%.1f s", s));
  return v;
}

/// Criteria 2 and 4 share the d <= 5 runs.
std::pair<Verdict, Verdict> criteria2and4() {
  Verdict v2{2, "solution oracle equivalence (beam, d 2..5)"};
  Verdict v4{4, "strain energy agreement (d 3..5)"};
  const auto t0 = Clock::now();
  for (int d = 2; d <= 5; ++d) {
    progress("oracle solve d=" + std::to_string(d));
    const TtRun tt = run_tt(beam(d));
    const ClassicalRun cl = run_classical(beam(d));
    const double l2 = relative_l2(tt.u, cl.u);
    v2.check(l2 <= kSolutionTol, "d=" + std::to_string(d) + " rel L2 " + fmt("%.2e", l2));
    if (d >= 3) {
      const double e = *tt.report.strain_energy_j, r = *cl.report.strain_energy_j;
      const double rel = std::abs(e - r) / std::abs(r);
      v4.check(rel <= kEnergyTol, "d=" + std::to_string(d) + " energy " + fmt("%.6f J", e) + " vs " +
                                      fmt("%.6f J", r) + " rel " + fmt("%.2e", rel));
    }
  }
  const double s = since(t0);
  v2.check(s < kSolutionSeconds, "runtime " + fmt("%.1f s", s));
  return {v2, v4};
}

Verdict criterion3(Runs& runs) {
  Verdict v{3, "analytic tip deflection (d=8 within 5%, monotone over d 4..8)"};
  const double analytic = *beam(8).analytic_deflection();
  v.note("analytic " + fmt("%.7f m", analytic));
  double prev = INFINITY;
  bool monotone = true;
  for (int d = 4; d <= 8; ++d) {
    const MetricsReport& r = runs.tt_at(d);
    const double err = *r.relative_error_vs_analytic;
    v.note("d=" + std::to_string(d) + " tip " + fmt("%.7f m", *r.max_displacement_m) + " rel error " + fmt("%.4f", err));
    monotone = monotone && err < prev;
    prev = err;
    if (d == 8) v.check(err <= kAnalyticTol, "d=8 rel error " + fmt("%.4f", err) + " <= 0.05");
  }
  v.check(monotone, "error strictly decreasing over d 4..8");
  return v;
}

/// Relative curvature of a least-squares quadratic fit: c2 (range)^2 / mean.
/// Positive means faster than linear growth.
double relative_curvature(const std::vector<double>& x, const std::vector<double>& y) {
  const Index n = static_cast<Index>(x.size());
  double xm = 0.0, ym = 0.0;
  for (Index k = 0; k < n; ++k) xm += x[k] / n, ym += y[k] / n;
  Matrix a(n, 3);
  Vector b(n);
  for (Index k = 0; k < n; ++k) {
    const double t = x[k] - xm;
    a(k, 0) = 1.0, a(k, 1) = t, a(k, 2) = t * t;
    b(k) = y[k];
  }
  const Vector c = a.colPivHouseholderQr().solve(b);
  const double range = x.back() - x.front();
  return c(2) * range * range / ym;
}

Verdict criterion5(Runs& runs) {
  Verdict v{5, "logarithmic memory (TT bytes of A, f, u linear in d over 6..12)"};
  std::vector<double> ds, ba, bf, bu;
  for (int d = 6; d <= 12; ++d) {
    const MetricsReport& r = runs.tt_at(d);
    ds.push_back(d);
    ba.push_back(static_cast<double>(*r.tt_bytes_a));
    bf.push_back(static_cast<double>(*r.tt_bytes_f));
    bu.push_back(static_cast<double>(*r.tt_bytes_u));
    v.note("d=" + std::to_string(d) + " bytes A " + std::to_string(*r.tt_bytes_a) + " f " +
           std::to_string(*r.tt_bytes_f) + " u " + std::to_string(*r.tt_bytes_u) + " dense vector " +
           fmt("%.0f", r.dense_vector_bytes));
  }
  const std::pair<const char*, const std::vector<double>*> series[] = {{"A", &ba}, {"f", &bf}, {"u", &bu}};
  for (const auto& [name, y] : series) {
    // "At most linear": only upward curvature counts; saturating ranks bend the curve down.
    const double c = relative_curvature(ds, *y);
    v.check(c <= kCurvatureTol, std::string(name) + " relative curvature " + fmt("%+.3f", c) +
                                    (c < -kCurvatureTol ? " (sublinear)" : ""));
  }
  bool dense4 = true;
  for (int d = 7; d <= 12; ++d)
    dense4 = dense4 && runs.tt_at(d).dense_vector_bytes == 4.0 * runs.tt_at(d - 1).dense_vector_bytes;
  v.check(dense4, "dense-equivalent bytes grow x4 per level");
  return v;
}

Verdict criterion6(Runs& runs) {
  Verdict v{6, "stiffness rank stability (d=6 vs d=12)"};
  auto max_of = [](const std::vector<Index>& r) { return r.empty() ? Index{0} : *std::max_element(r.begin(), r.end()); };
  const Index r6 = max_of(runs.tt_at(6).rank_a), r12 = max_of(runs.tt_at(12).rank_a);
  v.check(r6 == r12, "rectangle max rank " + std::to_string(r6) + " / " + std::to_string(r12));
  Index t[2] = {0, 0};
  for (int k = 0; k < 2; ++k) {
    RunConfig c = beam(k == 0 ? 6 : 12);
    c.domain = QuadDomain::trapezoid(2.0, 1.2, 1.0);
    progress("trapezoid stiffness d=" + std::to_string(c.d));
    t[k] = assemble_stiffness(c.problem(), c.assembly()).a.max_rank();
  }
  v.check(t[1] <= t[0] + kTrapezoidRankSlack && t[0] <= t[1] + kTrapezoidRankSlack,
          "trapezoid max rank " + std::to_string(t[0]) + " / " + std::to_string(t[1]));
  return v;
}

struct LargeRun {
  bool ok = false;
  std::string error;
  Json report;
  double peak_rss_bytes = 0.0;
};

/// Runs a TT solve in a child process so its peak resident set is its own.
LargeRun large_run(int d) {
  LargeRun out;
  int fds[2];
  if (pipe(fds) != 0) {
    out.error = "pipe failed";
    return out;
  }
  std::cout.flush();
  const pid_t pid = fork();
  if (pid < 0) {
    out.error = "fork failed";
    return out;
  }
  if (pid == 0) {
    close(fds[0]);
    std::string text;
    try {
      const MetricsReport r = run_tt(beam(d)).report;
      text = Json{{"tt_bytes", static_cast<double>(*r.tt_bytes_a + *r.tt_bytes_m + *r.tt_bytes_f + *r.tt_bytes_u)},
                  {"final_residual", *r.final_residual},
                  {"total_time_s", r.total_time_s},
                  {"max_displacement_m", *r.max_displacement_m},
                  {"relative_error_vs_analytic", r.relative_error_vs_analytic.value_or(NAN)},
                  {"sweeps", *r.sweeps},
                  {"stop_reason", r.stop_reason}}
                 .dump();
    } catch (const std::exception& e) {
      text = Json{{"exception", e.what()}}.dump();
    }
    std::size_t off = 0;
    while (off < text.size()) {
      const ssize_t w = write(fds[1], text.data() + off, text.size() - off);
      if (w <= 0) break;
      off += static_cast<std::size_t>(w);
    }
    close(fds[1]);
    _exit(0);
  }
  close(fds[1]);
  std::string text;
  char buf[4096];
  ssize_t n;
  while ((n = read(fds[0], buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
  close(fds[0]);
  int status = 0;
  rusage ru{};
  wait4(pid, &status, 0, &ru);
  out.peak_rss_bytes = static_cast<double>(ru.ru_maxrss) * 1024.0;
  if (WIFSIGNALED(status)) {
    out.error = "killed by signal " + std::to_string(WTERMSIG(status));
    return out;
  }
  try {
    out.report = Json::parse(text);
  } catch (const std::exception&) {
    out.error = "no report from child";
    return out;
  }
  if (out.report.contains("exception")) {
    out.error = out.report["exception"].get<std::string>();
    return out;
  }
  out.ok = true;
  return out;
}

double tt_bytes(const Json& r) { return r["tt_bytes"].get<double>(); }

std::pair<Verdict, Verdict> criteria7and8(Runs& runs, bool stretch) {
  Verdict v8{8, "large-d capability (d=13: TT memory < 1 GB, residual <= 1e-8)"};
  progress("tt solve d=13 (child process)");
  const LargeRun r13 = large_run(13);
  double t13 = NAN;
  if (!r13.ok) {
    v8.check(false, "d=13 solve: " + r13.error);
  } else {
    const double bytes = tt_bytes(r13.report);
    const double res = r13.report["final_residual"].get<double>();
    t13 = r13.report["total_time_s"].get<double>();
    v8.check(bytes < kMemoryLimitBytes, "d=13 TT bytes (A, M, f, u) " + fmt("%.0f", bytes));
    v8.check(res <= kLargeResidualTol, "d=13 true relative residual " + fmt("%.3e", res));
    v8.note("d=13 peak RSS of the solve process " + fmt("%.0f MB", r13.peak_rss_bytes / 1e6) + ", total " +
            fmt("%.1f s", t13) + ", tip " + fmt("%.7f m", r13.report["max_displacement_m"].get<double>()) +
            " (rel error " + fmt("%.4f", r13.report["relative_error_vs_analytic"].get<double>()) + "), " +
            std::to_string(r13.report["sweeps"].get<int>()) + " sweeps, stop " +
            r13.report["stop_reason"].get<std::string>());
  }
  if (stretch) {
    progress("tt solve d=15 (child process)");
    const LargeRun r15 = large_run(15);
    if (!r15.ok) {
      v8.note("d=15 stretch: " + r15.error + ", peak RSS " + fmt("%.0f MB", r15.peak_rss_bytes / 1e6));
    } else {
      v8.note("d=15 stretch: TT bytes " + fmt("%.0f", tt_bytes(r15.report)) + ", residual " +
              fmt("%.3e", r15.report["final_residual"].get<double>()) + ", total " +
              fmt("%.1f s", r15.report["total_time_s"].get<double>()) + ", tip " +
              fmt("%.7f m", r15.report["max_displacement_m"].get<double>()) + ", peak RSS " +
              fmt("%.0f MB", r15.peak_rss_bytes / 1e6));
    }
  } else {
    v8.note("d=15 stretch not attempted (pass --stretch)");
  }

  Verdict v7{7, "time scaling (TT ratio <= 3 for d 8..12, classical ratio >= 3.5, crossover exists)"};
  for (int d = 8; d <= 12; ++d) {
    const double a = runs.tt_at(d).total_time_s;
    const double b = d + 1 <= 12 ? runs.tt_at(d + 1).total_time_s : t13;
    const double ratio = b / a;
    v7.check(std::isfinite(ratio) && ratio <= kTtRatioMax,
             "tt t(" + std::to_string(d + 1) + ")/t(" + std::to_string(d) + ") = " + fmt("%.2f", ratio) + " (" +
                 fmt("%.1f s", a) + " -> " + fmt("%.1f s", b) + ")");
  }
  const int cmax = beam(8).classical_max_d;
  for (int d = 6; d < cmax; ++d) {
    const double a = runs.classical_at(d).total_time_s, b = runs.classical_at(d + 1).total_time_s;
    v7.check(b / a >= kClassicalRatioMin, "classical t(" + std::to_string(d + 1) + ")/t(" + std::to_string(d) +
                                              ") = " + fmt("%.2f", b / a) + " (" + fmt("%.2f s", a) + " -> " +
                                              fmt("%.2f s", b) + ")");
  }
  int crossover = 0;
  for (int d = 6; d <= cmax && crossover == 0; ++d)
    if (runs.tt_at(d).total_time_s < runs.classical_at(d).total_time_s) crossover = d;
  for (int d = 6; d <= cmax; ++d)
    v7.note("d=" + std::to_string(d) + " dof " + std::to_string(runs.tt_at(d).dof) + " tt " +
            fmt("%.2f s", runs.tt_at(d).total_time_s) + " classical " + fmt("%.2f s", runs.classical_at(d).total_time_s));
  v7.check(crossover != 0, crossover != 0 ? "crossover at d=" + std::to_string(crossover) + " (" +
                                                std::to_string(runs.tt_at(crossover).dof) + " dof)"
                                          : "no crossover for d <= " + std::to_string(cmax) +
                                                " (classical capacity)");
  return {v7, v8};
}

double rel_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) num += (a[k] - b[k]) * (a[k] - b[k]), den += b[k] * b[k];
  return std::sqrt(num / (den > 0.0 ? den : 1.0));
}

Verdict criterion9() {
  Verdict v{9, "property suites"};
  const auto t0 = Clock::now();

  {  // TT algebra against dense
    std::mt19937_64 rng(7);
    const std::vector<Index> dims{2, 4, 4, 4};
    const std::vector<Index> ra{3, 2, 3}, rb{2, 4, 2};
    const TensorTrain a = TensorTrain::random(dims, ra, rng), b = TensorTrain::random(dims, rb, rng);
    const auto da = tt_to_dense(a), db = tt_to_dense(b);
    const std::size_t n = da.size();
    std::vector<double> sum(n), had(n), sc(n);
    double dot = 0.0, tot = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sum[k] = da[k] + db[k], had[k] = da[k] * db[k], sc[k] = -2.5 * da[k];
      dot += da[k] * db[k], tot += da[k];
    }
    double err = 0.0;
    err = std::max(err, rel_vec(tt_to_dense(tt_add(a, b)), sum));
    err = std::max(err, rel_vec(tt_to_dense(tt_hadamard(a, b)), had));
    err = std::max(err, rel_vec(tt_to_dense(tt_scale(a, -2.5)), sc));
    err = std::max(err, rel_vec(tt_to_dense(tt_round(tt_add(a, b), TruncationPolicy::exact())), sum));
    err = std::max(err, std::abs(tt_dot(a, b) - dot) / std::abs(dot));
    err = std::max(err, std::abs(tt_sum(a) - tot) / std::abs(tot));
    double nrm = 0.0;
    for (double x : da) nrm += x * x;
    err = std::max(err, std::abs(tt_norm(a) - std::sqrt(nrm)) / std::sqrt(nrm));
    Matrix m = Matrix::Random(static_cast<Index>(n), static_cast<Index>(n));
    const TTOperator op = tt_op_from_dense(m, dims, dims, TruncationPolicy::exact());
    const Vector y = m * Eigen::Map<const Vector>(da.data(), static_cast<Index>(n));
    err = std::max(err, rel_vec(tt_to_dense(tt_apply(op, a, TruncationPolicy::exact())),
                                std::vector<double>(y.data(), y.data() + y.size())));
    v.check(err <= kAlgebraTol, "TT algebra (add, scale, hadamard, dot, norm, sum, round, apply) vs dense " +
                                    fmt("%.2e", err));
  }

  const QuadDomain trap = QuadDomain::trapezoid(2.0, 1.2, 1.0);
  {  // three-point affine reconstruction of the Jacobian, and the TT field
    const int d = 4;
    const std::uint64_t n = 1u << d;
    const auto rule = QuadratureRule::gauss2x2();
    const JacobianField field = build_jacobian_field(trap, d, rule, CrossConfig{});
    double err_affine = 0.0, err_tt = 0.0, err_inv = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const auto& pt = rule.points[q];
      const Eigen::Matrix2d j00 = affine_jacobian(trap, d, 0, 0, pt.xi, pt.eta);
      const Eigen::Matrix2d j10 = affine_jacobian(trap, d, 1, 0, pt.xi, pt.eta);
      const Eigen::Matrix2d j01 = affine_jacobian(trap, d, 0, 1, pt.xi, pt.eta);
      for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < n; ++j) {
          const Eigen::Matrix2d ref = affine_jacobian(trap, d, i, j, pt.xi, pt.eta);
          const Eigen::Matrix2d rec = j00 + double(i) * (j10 - j00) + double(j) * (j01 - j00);
          err_affine = std::max(err_affine, (ref - rec).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
          const auto idx = interleave(i, j, d);
          const double vals[4] = {ref(0, 0), ref(0, 1), ref(1, 0), ref(1, 1)};
          for (int e = 0; e < 4; ++e)
            err_tt = std::max(err_tt, std::abs(tt_entry(field.jac[q][e], idx) - vals[e]) / ref.cwiseAbs().maxCoeff());
          const double det = ref.determinant();
          err_tt = std::max(err_tt, std::abs(tt_entry(field.det[q], idx) - det) / std::abs(det));
          err_inv = std::max(err_inv, std::abs(tt_entry(field.inv_det[q], idx) * det - 1.0));
        }
    }
    v.check(err_affine <= kAlgebraTol, "three-point Jacobian reconstruction, d=4 trapezoid " + fmt("%.2e", err_affine));
    v.check(err_tt <= kAlgebraTol, "TT Jacobian and det J vs affine formula " + fmt("%.2e", err_tt));
    v.check(err_inv <= kReciprocalTol, "TT-cross 1/det J vs exhaustive, d=4 " + fmt("%.2e", err_inv));
  }

  {  // rigid-body null space of the raw stiffness
    const int d = 5;
    Problem p = Problem::beam(d);
    p.domain = trap;
    const auto sys = assemble_stiffness(p, AssemblyConfig{});
    const std::uint64_t n = 1u << d;
    const std::size_t half = n * n;
    std::vector<std::vector<double>> modes(3, std::vector<double>(2 * half, 0.0));
    for (std::uint64_t i = 0; i < n; ++i)
      for (std::uint64_t j = 0; j < n; ++j) {
        const Point2 x = grid_point(p.domain, d, i, j);
        const auto k = node_linear_index(i, j, d);
        modes[0][k] = 1.0;
        modes[1][k + half] = 1.0;
        modes[2][k] = -x.y;
        modes[2][k + half] = x.x;
      }
    const double anorm = tt_op_norm(sys.a_raw);
    double worst = 0.0;
    for (const auto& m : modes) {
      const TensorTrain r = tt_from_dense(m, dof_dims(d), {1e-15, kUnboundedRank});
      worst = std::max(worst, tt_norm(tt_apply(sys.a_raw, r, TruncationPolicy::exact())) / (anorm * tt_norm(r)));
    }
    v.check(worst <= kRigidTol, "rigid-body modes in the raw stiffness null space " + fmt("%.2e", worst));
  }

  {  // rank bounds
    const int d = 8;
    auto rounded = [](const TensorTrain& t) { return tt_round(t, TruncationPolicy::exact()).max_rank(); };
    const Index rx = rounded(build_meshgrid_X(d)), ry = rounded(build_meshgrid_Y(d));
    v.check(rx <= kMeshRankBound && ry <= kMeshRankBound,
            "mesh-grid X, Y ranks " + std::to_string(rx) + ", " + std::to_string(ry));
    Index rs = 0;
    for (Axis ax : {Axis::i, Axis::j})
      for (int off : {0, 1}) rs = std::max(rs, build_shift_operator(ax, off, d).max_rank());
    v.check(rs <= kMeshRankBound, "shift operator rank " + std::to_string(rs));
    const Index rm = rounded(build_element_mask(d));
    v.check(rm <= kMeshRankBound, "element mask rank " + std::to_string(rm));
    const JacobianField field = build_jacobian_field(trap, d, QuadratureRule::gauss2x2(), CrossConfig{});
    Index rj = 0, rd = 0;
    for (std::size_t q = 0; q < field.det.size(); ++q) {
      for (const auto& t : field.jac[q]) rj = std::max(rj, rounded(t));
      rd = std::max(rd, rounded(field.det[q]));
    }
    v.check(rj <= kJacobianRankBound && rd <= kJacobianRankBound,
            "Jacobian, det J ranks (d=8 trapezoid) " + std::to_string(rj) + ", " + std::to_string(rd));
  }

  {  // AMEn residual certificate
    const int d = 3;
    const TtRun run = run_tt(beam(d));
    const Matrix a = tt_op_to_dense(run.system.a);
    const auto u = tt_to_dense(run.u), f = tt_to_dense(run.system.f);
    const Eigen::Map<const Vector> uv(u.data(), static_cast<Index>(u.size())), fv(f.data(), static_cast<Index>(f.size()));
    const double dense = (a * uv - fv).norm() / fv.norm();
    const double reported = *run.report.final_residual;
    // Two evaluations of A u - f can only agree up to rounding in the product.
    const double floor = 16.0 * std::numeric_limits<double>::epsilon() * (a.cwiseAbs() * uv.cwiseAbs()).norm() / fv.norm();
    v.check(std::abs(dense - reported) <= 1e-6 * dense + floor,
            "AMEn residual certificate (beam d=3): reported " + fmt("%.6e", reported) + " recomputed " +
                fmt("%.6e", dense) + " evaluation floor " + fmt("%.1e", floor));
  }

  const double s = since(t0);
  v.check(s < kPropertySeconds, "runtime " + fmt("%.1f s", s));
  return v;
}

void print(const Verdict& v, std::ostream& os) {
  os << "criterion " << v.id << ": " << (v.passed ? "PASS" : "FAIL") << "  " << v.title << "\n";
  for (const auto& l : v.lines) os << l << "\n";
  os.flush();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9; prints PASS/FAIL per criterion"};
  std::vector<int> only;
  bool stretch = false;
  std::string report_path;
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 9));
  app.add_flag("--stretch", stretch, "also attempt the d=15 solve (reported, not gated)");
  app.add_option("--report", report_path, "also write the verdicts as JSON");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> want = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9} : std::set<int>(only.begin(), only.end());

  std::vector<Verdict> verdicts;
  auto record = [&](Verdict v) {
    print(v, std::cout);
    verdicts.push_back(std::move(v));
  };
  Runs runs;
  try {
    if (want.count(9)) record(criterion9());
    if (want.count(1)) record(criterion1());
    if (want.count(2) || want.count(4)) {
      auto [v2, v4] = criteria2and4();
      if (want.count(2)) record(v2);
      if (want.count(4)) record(v4);
    }
    if (want.count(3)) record(criterion3(runs));
    if (want.count(5)) record(criterion5(runs));
    if (want.count(6)) record(criterion6(runs));
    if (want.count(7) || want.count(8)) {
      auto [v7, v8] = criteria7and8(runs, stretch);
      if (want.count(7)) record(v7);
      if (want.count(8)) record(v8);
    }
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << "\n";
    return 1;
  }

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  int failed = 0;
  std::cout << "\nsummary\n";
  for (const auto& v : verdicts) {
    std::cout << "  " << v.id << " " << (v.passed ? "PASS" : "FAIL") << "  " << v.title << "\n";
    failed += v.passed ? 0 : 1;
  }
  std::cout << verdicts.size() - failed << " of " << verdicts.size() << " criteria passed\n";

  if (!report_path.empty()) {
    Json j = Json::array();
    for (const auto& v : verdicts) j.push_back({{"criterion", v.id}, {"title", v.title}, {"passed", v.passed}, {"lines", v.lines}});
    std::ofstream(report_path) << j.dump(2) << "\n";
  }
  return failed == 0 ? 0 : 1;
}
