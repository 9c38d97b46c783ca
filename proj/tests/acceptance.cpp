// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "flagopt/harness.hpp"

using namespace flagopt;
using namespace flagopt::harness;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

bool monotone_increasing(const std::vector<IterationRecord>& records) {
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].f < records[i - 1].f) return false;
  return true;
}

void principal_convergence() {
  ExperimentConfig cfg;
  cfg.sig = FlagSignature({3, 7, 12}, 60);
  cfg.seed = 1;
  cfg.trials = 10;
  cfg.solver_config.max_iters = 200;
  const auto start = std::chrono::steady_clock::now();
  const auto rep = run_trajectory(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  int ok = 0, max_iters = 0;
  double worst_gap = 0;
  for (const auto& t : rep.trials) {
    const double gap = std::abs(t.solve.value - *t.f_star) / std::abs(*t.f_star);
    worst_gap = std::max(worst_gap, gap);
    max_iters = std::max(max_iters, t.solve.iterations);
    if (gap <= 1e-6 && t.solve.iterations <= 200) ++ok;
  }
  report(1, ok == 10 && seconds <= 30.0,
         format("SD Flag(3,7,12;60): %d/10 with gap <= 1e-6 in <= 200 iterations; worst gap %.2e, max iterations %d, "
                "%.2f s total",
                ok, worst_gap, max_iters, seconds));
}

void sweeps() {
  const auto amb = run_sweep(Problem::principal, ambient_sweep({3, 9, 21}, {30, 60, 100}), 10, 2);
  bool pass = true;
  std::string detail = "Flag(3,9,21;k) mean distance";
  for (const auto& r : amb.rows) {
    pass = pass && r.mean_distance <= 1e-2;
    detail += format(" k=%d %.2e (eigenvector flag %.2e);", r.sig.ambient(), r.mean_distance,
                     r.mean_distance_eigenvector_flag);
  }
  report(2, pass, detail);

  const auto dep = run_sweep(Problem::principal, depth_sweep({1, 5, 10}, 60), 10, 3);
  pass = true;
  detail = "Flag(2,...,2d;60) mean distance";
  for (const auto& r : dep.rows) {
    pass = pass && r.mean_distance <= 5e-3;
    detail += format(" d=%d %.2e;", r.sig.depth(), r.mean_distance);
  }
  report(3, pass, detail);

  pass = true;
  detail = "median elapsed ms";
  for (std::size_t i = 0; i < amb.rows.size(); ++i) {
    if (i > 0) pass = pass && amb.rows[i].median_elapsed_ms > amb.rows[i - 1].median_elapsed_ms;
    detail += format(" k=%d %.1f;", amb.rows[i].sig.ambient(), amb.rows[i].median_elapsed_ms);
  }
  report(4, pass, detail);
}

void eigenflag() {
  ExperimentConfig cfg;
  cfg.problem = Problem::eigenflag;
  cfg.sig = FlagSignature({3, 7, 12}, 60);
  cfg.seed = 4;
  cfg.trials = 10;
  cfg.solver_config.grad_tol = 1e-4;
  cfg.solver_config.max_iters = 1000;
  const auto rep = run_trajectory(cfg);
  int ok = 0, max_iters = 0;
  double worst_grad = 0;
  for (const auto& t : rep.trials) {
    worst_grad = std::max(worst_grad, t.solve.grad_norm);
    max_iters = std::max(max_iters, t.solve.iterations);
    if (monotone_increasing(t.solve.trajectory) && t.solve.grad_norm <= 1e-4) ++ok;
  }

  const FlagSignature small({1, 2}, 3);
  const Eigen::MatrixXd M = Eigen::Vector3d(3, 2, 1).asDiagonal();
  const auto f = eigenflag_objective(M, small);
  SolverConfig sc = default_solver_config();
  sc.maximize = true;
  int hits = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = steepest_descent(f, random_point(small, trial_seed(5, s)), sc);
    if (std::abs(r.value - 13.0) <= 1e-6) ++hits;
  }
  report(5, ok == 10 && hits >= 18,
         format("eigenflag Flag(3,7,12;60): %d/10 monotone with grad <= 1e-4 (worst %.2e, max iterations %d); "
                "Flag(1,2;3) diag(3,2,1): %d/20 reach 13",
                ok, worst_grad, max_iters, hits));
}

void properties() {
  const auto rep = run_property_suite(1, 100);
  int failed = 0;
  std::string names;
  for (const auto& r : rep.results)
    if (!r.passed) {
      ++failed;
      names += " " + r.name;
    }
  report(6, rep.all_passed(),
         format("%zu invariants x 100 instances, %d failed%s", rep.results.size(), failed, names.c_str()));
}

void cg_versus_sd() {
  ExperimentConfig cfg;
  cfg.sig = FlagSignature({3, 7, 12}, 60);
  cfg.seed = 6;
  cfg.solver_config = SolverConfig{};
  int wins = 0;
  std::string counts;
  for (int t = 0; t < 10; ++t) {
    cfg.solver = Method::steepest_descent;
    const auto sd = run_trial(cfg, t);
    cfg.solver = Method::conjugate_gradient;
    const auto cg = run_trial(cfg, t);
    if (cg.solve.iterations <= sd.solve.iterations) ++wins;
    counts += format(" %d/%d", cg.solve.iterations, sd.solve.iterations);
  }
  report(7, wins >= 7, format("CG <= SD iterations in %d/10 paired runs (cg/sd:%s)", wins, counts.c_str()));
}

}  // namespace

int main() {
  try {
    principal_convergence();
    sweeps();
    eigenflag();
    properties();
    cg_versus_sd();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s\n", failures == 0 ? "all criteria pass" : "some criteria fail");
  return failures == 0 ? 0 : 1;
}
