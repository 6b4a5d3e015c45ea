#pragma once

// Seed sweeps, CSV output and the bound tables behind the command line tool.
//
// results.csv, one row per phase per (algorithm, seed):
//   seed             master seed of the run
//   algorithm        mflq_v1 | mflq_v2 | mflq_v3 | lspi | rlsvi | model_based | oracle
//   phase_index      1-based
//   steps_elapsed    global steps simulated when the phase ended
//   phase_avg_cost   mean per-step cost inside the phase
//   true_lambda      average cost of the policy played in the phase; inf if unstable
//   cumulative_cost  sum of costs up to steps_elapsed
//   cumulative_regret  cumulative_cost minus the optimal controller's cost on its
//                    own noise stream over the same number of steps (can fall)
//   stable           1 when the run never diverged and every policy it produced,
//                    the final one included, was stable; same on every row of a run
//
// summary.csv, one row per algorithm:
//   algorithm, T, runs, stability_fraction, median_final_lambda, optimal_lambda,
//   median_cumulative_regret, regret_slope
// regret_slope is the log-log least squares slope of the per-phase median
// cumulative regret against steps_elapsed (positive medians only; empty when
// fewer than two points qualify).
//
// sweep.csv, one row per (T, algorithm):
//   T, algorithm, runs, stability_fraction, median_cumulative_regret, regret_slope
// where regret_slope is fitted across the T grid and repeated on each row.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mflq/config.hpp"

namespace mflq {

struct ResultRow {
  std::uint64_t seed = 0;
  std::string algorithm;
  Index phase_index = 0;
  std::int64_t steps_elapsed = 0;
  double phase_avg_cost = 0.0;
  double true_lambda = 0.0;
  double cumulative_cost = 0.0;
  double cumulative_regret = 0.0;
  bool stable = false;
};

struct Summary {
  std::string algorithm;
  Index horizon = 0;
  Index runs = 0;
  double stability_fraction = 0.0;
  double median_final_lambda = 0.0;
  double optimal_lambda = 0.0;
  double median_cumulative_regret = 0.0;
  std::optional<double> regret_slope;
};

struct RunOutput {
  RunRecord record;
  std::vector<ResultRow> rows;
  double total_regret = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;        ///< algorithm order of the config, then seed order
  std::vector<Summary> summaries;     ///< one per algorithm
  std::vector<RunOutput> runs;        ///< same order as rows
};

struct HarnessOptions {
  unsigned jobs = 0;              ///< 0 means hardware concurrency
  std::uint64_t seed_offset = 0;  ///< added to every configured seed
};

/// One learner run exactly as the harness performs it.
RunRecord run_algorithm(const ExperimentConfig& cfg, Algorithm algorithm, std::uint64_t seed);

/// Per-phase rows of a run, regret measured against `reference_costs`.
std::vector<ResultRow> result_rows(const RunRecord& run, const std::vector<double>& reference_costs);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const HarnessOptions& options = {});

/// Least squares slope of log y on log x; empty with < 2 usable points
/// (x and y must be positive).
std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

struct SweepPoint {
  Index horizon = 0;
  std::string algorithm;
  Index runs = 0;
  double stability_fraction = 0.0;
  double median_cumulative_regret = 0.0;
  std::optional<double> regret_slope;
};

/// run_experiment per T (ascending, else DomainError); slopes across the grid.
std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, const std::vector<Index>& horizons,
                              const HarnessOptions& options = {});

/// Shortest round-trip decimal form; "inf", "-inf" or "nan" otherwise.
std::string format_double(double value);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<Summary>& summaries);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

/// Writes results.csv and summary.csv under `dir` (created if needed).
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result);

enum class BoundsPolicy { kInitial, kOptimal };

struct BoundsTable {
  double spectral_radius = 0.0;
  double rate = 0.0;
  double delta = 0.0;
  Index horizon = 0;
  double beta_bar = 0.0;
  std::vector<std::pair<Index, double>> beta;  ///< (k, beta_k)
  Index block_length = 0;
  double partial_sum_bound = 0.0;
  double c1 = 0.0;
  double c_h = 0.0;
  double state_bound = 0.0;
  double action_bound = 0.0;
};

/// Bound constants for the closed loop of the chosen policy on cfg.system.
/// n in the partial-sum bound is T; the exponential rate is -log(alpha).
BoundsTable compute_bounds(const ExperimentConfig& cfg, BoundsPolicy policy, double alpha,
                           double delta);

void write_bounds_text(std::ostream& out, const BoundsTable& table);
void write_bounds_csv(std::ostream& out, const BoundsTable& table);

}  // namespace mflq
