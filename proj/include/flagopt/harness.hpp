#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flagopt/flagopt.hpp"

namespace flagopt::harness {

enum class Problem { principal, eigenflag };
enum class OutputFormat { csv, json };

const char* to_string(Problem p);
const char* to_string(OutputFormat f);
Problem parse_problem(const std::string& s);
Method parse_method(const std::string& s);
LineSearch parse_line_search(const std::string& s);
OutputFormat parse_format(const std::string& s);
InitialStep parse_initial_step(const std::string& s);

/// Library defaults with Barzilai-Borwein initial steps, the benchmark setting.
SolverConfig default_solver_config();

struct ExperimentConfig {
  Problem problem = Problem::principal;
  FlagSignature sig{{3, 7, 12}, 60};
  std::uint64_t seed = 1;
  int trials = 1;
  Method solver = Method::steepest_descent;
  /// `maximize` is set by the harness; both problems are maximizations.
  SolverConfig solver_config = default_solver_config();
  /// Empty: no file output.
  std::string out_path;
  OutputFormat format = OutputFormat::csv;

  void validate() const;
};

/// Child seed for one trial: splitmix64 finalizer applied to seed + (trial + 1) * golden-ratio increment.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial);

/// (A + A^T) / 2 with A an n x n standard normal matrix.
Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed);

/// Flag nearest to Y among the maximizers of tr(Y^T M Y): the leading n_d columns
/// of Y projected onto the top-n_d eigenspace of M, then re-orthonormalized.
StiefelPointd nearest_optimal_flag(const StiefelPointd& Y, const Eigen::MatrixXd& top_eigenvectors);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  SolveResult<double> solve;
  /// Principal problems only.
  std::optional<double> f_star;
  /// Cumulative-projector distance / sqrt(d) to the nearest optimal flag.
  std::optional<double> distance;
  /// Same, to the eigenvector flag itself.
  std::optional<double> distance_eigenvector_flag;
  bool unique = true;
  double elapsed_ms = 0;
};

/// Runs one seeded trial: M from the child seed, start from random_point.
TrialResult run_trial(const ExperimentConfig& cfg, int trial);

struct TrajectoryReport {
  ExperimentConfig config;
  std::vector<TrialResult> trials;
};

/// Runs cfg.trials trials; with an output path, writes one trajectory file per
/// trial (suffix `_trialK` before the extension when trials > 1).
TrajectoryReport run_trajectory(const ExperimentConfig& cfg);

void write_trajectory_csv(std::ostream& os, const TrialResult& r);
void write_trajectory_json(std::ostream& os, const ExperimentConfig& cfg, const TrialResult& r);
std::string trajectory_path(const std::string& base, int trial, int trials);

struct SweepRow {
  FlagSignature sig;
  int trials = 0;
  /// NaN for problems without a known optimum.
  double mean_distance = 0;
  double mean_distance_eigenvector_flag = 0;
  double mean_relative_gap = 0;
  double mean_elapsed_ms = 0;
  double median_elapsed_ms = 0;
  double mean_iterations = 0;
  int non_unique = 0;
  std::map<std::string, int> terminations;
};

struct SweepReport {
  Problem problem = Problem::principal;
  Method solver = Method::steepest_descent;
  std::vector<SweepRow> rows;
};

/// Flag(dims; k) for each ambient k.
std::vector<FlagSignature> ambient_sweep(const std::vector<int>& dims, const std::vector<int>& ambients);
/// Flag(2, 4, ..., 2d; n) for each depth d.
std::vector<FlagSignature> depth_sweep(const std::vector<int>& depths, int ambient);

/// Each configuration runs `trials` trials with master seed derived from (seed, row index).
SweepReport run_sweep(Problem problem, const std::vector<FlagSignature>& sigs, int trials, std::uint64_t seed,
                      Method solver = Method::steepest_descent,
                      const SolverConfig& solver_config = default_solver_config());

void write_sweep_csv(std::ostream& os, const SweepReport& report);
void write_sweep_json(std::ostream& os, const SweepReport& report);

struct PropertyResult {
  std::string name;
  double max_residual = 0;
  double tolerance = 0;
  int instances = 0;
  bool passed = false;
};

struct PropertyReport {
  std::vector<PropertyResult> results;
  bool all_passed() const;
};

/// Randomized check of the library invariants (n <= 60, `instances` cases each).
PropertyReport run_property_suite(std::uint64_t seed, int instances = 100);

void write_property_report(std::ostream& os, const PropertyReport& report);

}  // namespace flagopt::harness
