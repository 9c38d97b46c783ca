// flagopt: benchmark, sweep and self-check driver for Riemannian optimization on flag manifolds.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flagopt/harness.hpp"

namespace {

using namespace flagopt;
using namespace flagopt::harness;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<int> parse_ints(const std::string& text, char sep) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw UsageError("not an integer: '" + item + "'");
    }
    if (used != item.size()) throw UsageError("not an integer: '" + item + "'");
    out.push_back(value);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::vector<int> parse_range(const std::string& text, bool with_step) {
  const auto parts = parse_ints(text, ':');
  if (parts.size() != (with_step ? 3u : 2u))
    throw UsageError(with_step ? "range must be start:stop:step" : "range must be start:stop");
  const int step = with_step ? parts[2] : 1;
  if (step < 1 || parts[1] < parts[0]) throw UsageError("range must be increasing with a positive step");
  std::vector<int> out;
  for (int v = parts[0]; v <= parts[1]; v += step) out.push_back(v);
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Common {
  std::string problem = "principal";
  std::string solver = "sd";
  std::string line_search = "armijo";
  std::string initial_step = "bb";
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 1;
  int trials = 10;
  int max_iters = 1000;
  double grad_tol = 1e-6;

  void add_to(CLI::App& app) {
    app.add_option("--problem", problem, "principal | eigenflag")->check(CLI::IsMember({"principal", "eigenflag"}));
    app.add_option("--solver", solver, "sd | cg | newton")->check(CLI::IsMember({"sd", "cg", "newton"}));
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--trials", trials, "Seeded instances")->check(CLI::PositiveNumber);
    app.add_option("--max-iters", max_iters, "Iteration budget")->check(CLI::PositiveNumber);
    app.add_option("--grad-tol", grad_tol, "Gradient-norm tolerance")->check(CLI::PositiveNumber);
    app.add_option("--line-search", line_search, "armijo | golden")->check(CLI::IsMember({"armijo", "golden"}));
    app.add_option("--initial-step", initial_step, "Armijo first trial step: bb | doubling")
        ->check(CLI::IsMember({"bb", "doubling"}));
    app.add_option("--out", out, "Output path (stdout if omitted)");
    app.add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  }

  SolverConfig solver_config() const {
    SolverConfig cfg = default_solver_config();
    cfg.max_iters = max_iters;
    cfg.grad_tol = grad_tol;
    cfg.line_search = parse_line_search(line_search);
    cfg.initial_step = parse_initial_step(initial_step);
    cfg.validate();
    return cfg;
  }
};

int run_bench(const Common& c, const std::string& sig_text, int n) {
  ExperimentConfig cfg;
  cfg.problem = parse_problem(c.problem);
  try {
    cfg.sig = FlagSignature(parse_ints(sig_text, ','), n);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.seed = c.seed;
  cfg.trials = c.trials;
  cfg.solver = parse_method(c.solver);
  cfg.solver_config = c.solver_config();
  cfg.out_path = c.out;
  cfg.format = parse_format(c.format);
  const auto report = run_trajectory(cfg);

  std::cout << "trial,seed,termination,iterations,f,grad_norm,f_star,gap,distance,elapsed_ms\n";
  for (const auto& t : report.trials) {
    std::cout << t.trial << ',' << t.seed << ',' << to_string(t.solve.termination) << ',' << t.solve.iterations << ','
              << fmt(t.solve.value) << ',' << fmt(t.solve.grad_norm) << ',';
    if (t.f_star)
      std::cout << fmt(*t.f_star) << ',' << fmt(std::abs(t.solve.value - *t.f_star)) << ',' << fmt(*t.distance);
    else
      std::cout << ",,";
    std::cout << ',' << fmt(t.elapsed_ms) << '\n';
  }
  return kOk;
}

int run_sweep_cmd(const Common& c, const std::string& sig_text, int n, const std::string& ambient,
                  const std::string& depth) {
  if (ambient.empty() == depth.empty()) throw UsageError("give exactly one of --sweep-ambient or --sweep-depth");
  std::vector<FlagSignature> sigs;
  try {
    if (!ambient.empty())
      sigs = ambient_sweep(parse_ints(sig_text, ','), parse_range(ambient, true));
    else
      sigs = depth_sweep(parse_range(depth, false), n);
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto report = run_sweep(parse_problem(c.problem), sigs, c.trials, c.seed, parse_method(c.solver), c.solver_config());
  std::ofstream file;
  if (!c.out.empty()) {
    file.open(c.out);
    if (!file) throw std::runtime_error("cannot open " + c.out);
  }
  std::ostream& os = c.out.empty() ? std::cout : file;
  if (parse_format(c.format) == OutputFormat::csv)
    write_sweep_csv(os, report);
  else
    write_sweep_json(os, report);
  if (!os) throw std::runtime_error("write failed");
  return kOk;
}

int run_check(std::uint64_t seed, int instances) {
  const auto report = run_property_suite(seed, instances);
  write_property_report(std::cout, report);
  return report.all_passed() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian optimization on real flag manifolds"};
  app.require_subcommand(1);

  Common bench_opts, sweep_opts;
  std::string bench_sig = "3,7,12", sweep_sig = "3,9,21";
  int bench_n = 60, sweep_n = 60;
  std::string sweep_ambient, sweep_depth;
  std::uint64_t check_seed = 1;
  int check_instances = 100;

  auto* bench = app.add_subcommand("bench", "Convergence trajectories on seeded random instances");
  bench_opts.add_to(*bench);
  bench->add_option("--sig", bench_sig, "Flag dimensions n_1,...,n_d");
  bench->add_option("--n", bench_n, "Ambient dimension");

  auto* sweep = app.add_subcommand("sweep", "Accuracy and timing over a family of signatures");
  sweep_opts.add_to(*sweep);
  sweep->add_option("--sig", sweep_sig, "Flag dimensions for --sweep-ambient");
  sweep->add_option("--n", sweep_n, "Ambient dimension for --sweep-depth");
  sweep->add_option("--sweep-ambient", sweep_ambient, "start:stop:step over the ambient dimension");
  sweep->add_option("--sweep-depth", sweep_depth, "start:stop over d in Flag(2,4,...,2d; n)");

  auto* check = app.add_subcommand("check", "Randomized invariant checks");
  check->add_option("--seed", check_seed, "Seed");
  check->add_option("--instances", check_instances, "Instances per invariant")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*bench) return run_bench(bench_opts, bench_sig, bench_n);
    if (*sweep) return run_sweep_cmd(sweep_opts, sweep_sig, sweep_n, sweep_ambient, sweep_depth);
    return run_check(check_seed, check_instances);
  } catch (const UsageError& e) {
    std::cerr << "flagopt: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "flagopt: " << e.what() << '\n';
    return kFailure;
  }
}
