#include "flagopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace flagopt::harness {

const char* to_string(Problem p) { return p == Problem::principal ? "principal" : "eigenflag"; }
const char* to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

Problem parse_problem(const std::string& s) {
  if (s == "principal") return Problem::principal;
  if (s == "eigenflag") return Problem::eigenflag;
  throw std::invalid_argument("unknown problem: " + s);
}

Method parse_method(const std::string& s) {
  if (s == "sd") return Method::steepest_descent;
  if (s == "cg") return Method::conjugate_gradient;
  if (s == "newton") return Method::newton;
  throw std::invalid_argument("unknown solver: " + s);
}

LineSearch parse_line_search(const std::string& s) {
  if (s == "armijo") return LineSearch::armijo;
  if (s == "golden") return LineSearch::golden_exact;
  throw std::invalid_argument("unknown line search: " + s);
}

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw std::invalid_argument("unknown format: " + s);
}

InitialStep parse_initial_step(const std::string& s) {
  if (s == "doubling") return InitialStep::doubling;
  if (s == "bb") return InitialStep::barzilai_borwein;
  throw std::invalid_argument("unknown initial step rule: " + s);
}

SolverConfig default_solver_config() {
  SolverConfig cfg;
  cfg.initial_step = InitialStep::barzilai_borwein;
  return cfg;
}

void ExperimentConfig::validate() const {
  sig.validate();
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  solver_config.validate();
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  std::uint64_t z = master + (trial + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) A(i, j) = normal(rng);
  return 0.5 * (A + A.transpose());
}

StiefelPointd nearest_optimal_flag(const StiefelPointd& Y, const Eigen::MatrixXd& top_eigenvectors) {
  const Eigen::MatrixXd& U = top_eigenvectors;
  return StiefelPointd::trusted(Y.signature(), orthonormalize(Eigen::MatrixXd(U * (U.transpose() * Y.matrix()))));
}

namespace {

ObjectiveFunctiond make_objective(Problem problem, const Eigen::MatrixXd& M, const FlagSignature& sig) {
  return problem == Problem::principal ? principal_flag_objective(M, sig) : eigenflag_objective(M, sig);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, int trial) {
  const std::uint64_t seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(trial));
  const Eigen::MatrixXd M = random_symmetric(cfg.sig.ambient(), seed);
  const auto f = make_objective(cfg.problem, M, cfg.sig);
  const auto p0 = random_point(cfg.sig, trial_seed(seed, 0));
  SolverConfig sc = cfg.solver_config;
  sc.maximize = true;
  TrialResult out{.trial = trial,
                  .seed = seed,
                  .solve = solve(cfg.solver, f, p0, sc),
                  .f_star = {},
                  .distance = {},
                  .distance_eigenvector_flag = {}};
  out.elapsed_ms = out.solve.trajectory.back().elapsed_ms;
  if (cfg.problem == Problem::principal) {
    const auto truth = true_principal_flag(M, cfg.sig);
    out.f_star = truth.value;
    out.unique = truth.unique;
    const double norm = std::sqrt(static_cast<double>(cfg.sig.depth()));
    const auto ref = nearest_optimal_flag(out.solve.point, truth.eigenvectors.leftCols(cfg.sig.top()));
    out.distance = projector_distance(out.solve.point, ref) / norm;
    out.distance_eigenvector_flag = projector_distance(out.solve.point, truth.point) / norm;
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const TrialResult& r) {
  os << "iter,f,grad_norm,step,elapsed_ms";
  if (r.f_star) os << ",f_star,gap";
  os << '\n';
  for (const auto& rec : r.solve.trajectory) {
    os << rec.iter << ',' << fmt(rec.f) << ',' << fmt(rec.grad_norm) << ',' << fmt(rec.step) << ','
       << fmt(rec.elapsed_ms);
    if (r.f_star) os << ',' << fmt(*r.f_star) << ',' << fmt(std::abs(rec.f - *r.f_star));
    os << '\n';
  }
}

void write_trajectory_json(std::ostream& os, const ExperimentConfig& cfg, const TrialResult& r) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& rec : r.solve.trajectory) {
    nlohmann::json row = {{"iter", rec.iter},
                          {"f", rec.f},
                          {"grad_norm", rec.grad_norm},
                          {"step", rec.step},
                          {"elapsed_ms", rec.elapsed_ms}};
    if (r.f_star) {
      row["f_star"] = *r.f_star;
      row["gap"] = std::abs(rec.f - *r.f_star);
    }
    records.push_back(std::move(row));
  }
  nlohmann::json doc = {{"problem", to_string(cfg.problem)},
                        {"signature", cfg.sig.to_string()},
                        {"solver", to_string(cfg.solver)},
                        {"trial", r.trial},
                        {"seed", r.seed},
                        {"termination", to_string(r.solve.termination)},
                        {"records", std::move(records)}};
  os << doc.dump(2) << '\n';
}

std::string trajectory_path(const std::string& base, int trial, int trials) {
  if (trials <= 1) return base;
  const auto slash = base.find_last_of('/');
  const auto dot = base.find_last_of('.');
  const std::string suffix = "_trial" + std::to_string(trial);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return base + suffix;
  return base.substr(0, dot) + suffix + base.substr(dot);
}

TrajectoryReport run_trajectory(const ExperimentConfig& cfg) {
  cfg.validate();
  TrajectoryReport report{cfg, {}};
  for (int t = 0; t < cfg.trials; ++t) {
    report.trials.push_back(run_trial(cfg, t));
    if (cfg.out_path.empty()) continue;
    const std::string path = trajectory_path(cfg.out_path, t, cfg.trials);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    if (cfg.format == OutputFormat::csv)
      write_trajectory_csv(os, report.trials.back());
    else
      write_trajectory_json(os, cfg, report.trials.back());
    if (!os) throw std::runtime_error("write failed: " + path);
  }
  return report;
}

std::vector<FlagSignature> ambient_sweep(const std::vector<int>& dims, const std::vector<int>& ambients) {
  std::vector<FlagSignature> out;
  for (int k : ambients) out.emplace_back(dims, k);
  return out;
}

std::vector<FlagSignature> depth_sweep(const std::vector<int>& depths, int ambient) {
  std::vector<FlagSignature> out;
  for (int d : depths) {
    std::vector<int> dims;
    for (int i = 1; i <= d; ++i) dims.push_back(2 * i);
    out.emplace_back(dims, ambient);
  }
  return out;
}

SweepReport run_sweep(Problem problem, const std::vector<FlagSignature>& sigs, int trials, std::uint64_t seed,
                      Method solver, const SolverConfig& solver_config) {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  SweepReport report{problem, solver, {}};
  for (std::size_t row = 0; row < sigs.size(); ++row) {
    ExperimentConfig cfg;
    cfg.problem = problem;
    cfg.sig = sigs[row];
    cfg.seed = trial_seed(seed, 1000000 + row);
    cfg.trials = trials;
    cfg.solver = solver;
    cfg.solver_config = solver_config;
    cfg.validate();
    SweepRow r;
    r.sig = sigs[row];
    r.trials = trials;
    std::vector<double> dist, dist_lit, gaps, elapsed, iters;
    for (int t = 0; t < trials; ++t) {
      const auto tr = run_trial(cfg, t);
      elapsed.push_back(tr.elapsed_ms);
      iters.push_back(tr.solve.iterations);
      r.terminations[to_string(tr.solve.termination)]++;
      if (tr.distance) dist.push_back(*tr.distance);
      if (tr.distance_eigenvector_flag) dist_lit.push_back(*tr.distance_eigenvector_flag);
      if (tr.f_star) gaps.push_back(std::abs(tr.solve.value - *tr.f_star) / std::abs(*tr.f_star));
      if (!tr.unique) ++r.non_unique;
    }
    r.mean_distance = mean(dist);
    r.mean_distance_eigenvector_flag = mean(dist_lit);
    r.mean_relative_gap = mean(gaps);
    r.mean_elapsed_ms = mean(elapsed);
    r.median_elapsed_ms = median(elapsed);
    r.mean_iterations = mean(iters);
    report.rows.push_back(std::move(r));
  }
  return report;
}

void write_sweep_csv(std::ostream& os, const SweepReport& report) {
  os << "signature,dimension,trials,mean_distance,mean_distance_eigenvector_flag,mean_relative_gap,"
        "mean_elapsed_ms,median_elapsed_ms,mean_iterations,non_unique,grad_tol,step_tol,max_iters,stalled\n";
  for (const auto& r : report.rows) {
    auto count = [&](const char* key) {
      const auto it = r.terminations.find(key);
      return it == r.terminations.end() ? 0 : it->second;
    };
    os << '"' << r.sig.to_string() << '"' << ',' << dimension(r.sig) << ',' << r.trials << ',' << fmt(r.mean_distance)
       << ',' << fmt(r.mean_distance_eigenvector_flag) << ',' << fmt(r.mean_relative_gap) << ','
       << fmt(r.mean_elapsed_ms) << ',' << fmt(r.median_elapsed_ms) << ',' << fmt(r.mean_iterations) << ','
       << r.non_unique << ',' << count("grad_tol") << ',' << count("step_tol") << ',' << count("max_iters") << ','
       << count("stalled") << '\n';
  }
}

void write_sweep_json(std::ostream& os, const SweepReport& report) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"signature", r.sig.to_string()},
                    {"dimension", dimension(r.sig)},
                    {"trials", r.trials},
                    {"mean_distance", num(r.mean_distance)},
                    {"mean_distance_eigenvector_flag", num(r.mean_distance_eigenvector_flag)},
                    {"mean_relative_gap", num(r.mean_relative_gap)},
                    {"mean_elapsed_ms", r.mean_elapsed_ms},
                    {"median_elapsed_ms", r.median_elapsed_ms},
                    {"mean_iterations", r.mean_iterations},
                    {"non_unique", r.non_unique},
                    {"terminations", r.terminations}});
  }
  nlohmann::json doc = {{"problem", to_string(report.problem)}, {"solver", to_string(report.solver)}, {"rows", rows}};
  os << doc.dump(2) << '\n';
}

bool PropertyReport::all_passed() const {
  return std::all_of(results.begin(), results.end(), [](const PropertyResult& r) { return r.passed; });
}

void write_property_report(std::ostream& os, const PropertyReport& report) {
  for (const auto& r : report.results) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4s %-48s max %.3e  tol %.1e  (%d cases)\n", r.passed ? "ok" : "FAIL",
                  r.name.c_str(), r.max_residual, r.tolerance, r.instances);
    os << buf;
  }
  os << (report.all_passed() ? "all invariants hold\n" : "invariant failures\n");
}

}  // namespace flagopt::harness
