#pragma once

// Phase-scheduled policy iteration with Follow-the-Leader averaging of the
// estimated Q matrices, plus the bookkeeping shared by the baselines.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mflq/estimation.hpp"
#include "mflq/lq_env.hpp"

namespace mflq {

enum class Variant { kV1, kV2, kV3 };

std::string to_string(Variant v);

struct PhaseSchedule {
  Variant variant = Variant::kV2;
  Index horizon = 0;
  double xi = 0.0;
  Index phases = 0;
  Index eval_steps = 0;          ///< T_v
  Index exploration_period = 0;  ///< T_s
  /// Exploratory tuples gathered per phase (v2, v3) or once up front (v1).
  Index tuples = 0;

  Index collection_steps() const { return tuples * exploration_period; }
  /// Steps the schedule will simulate; never exceeds the horizon.
  Index total_steps() const;
};

inline constexpr Index kDefaultExplorationPeriod = 10;
inline constexpr Index kMinHorizon = 64;

/// Floors every exponent formula, keeps each count >= 1 and trims the
/// exploration budget so the schedule fits in T steps.
PhaseSchedule make_schedule(Index horizon, double xi, Variant variant,
                            Index v1_exploration_period = kDefaultExplorationPeriod);

enum class EstimateSource {
  kSampled,  ///< LSTD estimates from data (the algorithm proper)
  kOracle,   ///< exact G of the executed policy (estimation disabled)
};

struct RunOptions {
  EstimateSource source = EstimateSource::kSampled;
  bool unknown_noise = false;  ///< use the empirical-average-cost H estimator
  Index burn_in = kDefaultBurnIn;
  SimulatorOptions simulator;
};

struct PhaseRecord {
  std::int64_t start_step = 0;  ///< first global step of the phase
  std::int64_t end_step = 0;    ///< one past the last step
  LinearPolicy policy;          ///< policy executed in the phase
  MatrixXd h_hat;
  MatrixXd g_hat;
  std::optional<PolicyValue> truth;  ///< diagnostics only; never read by learners
  bool stable = false;
  double max_state_norm = 0.0;
  double max_action_norm = 0.0;
  bool update_rejected = false;  ///< model-based, rlsvi: kept the previous policy
  MatrixXd a_hat;  ///< model-based: least-squares dynamics after the phase
  MatrixXd b_hat;
};

struct RunRecord {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<double> per_step_costs;
  std::vector<PhaseRecord> phases;
  LinearPolicy final_policy;  ///< output of the last update
  std::optional<PolicyValue> final_truth;
  std::optional<std::int64_t> diverged_at;
  /// Running FTL mean after each phase (MFLQ only).
  std::vector<MatrixXd> averaged_g;

  bool diverged() const { return diverged_at.has_value(); }
  /// True when no rollout diverged and every policy produced was stable.
  bool stable() const;
  double final_lambda() const;  ///< +inf when the final policy is unstable
};

/// Truth for a policy if it is stable, empty otherwise.
std::optional<PolicyValue> try_policy_value(const LqSystem& sys, const LinearPolicy& policy);

/// The MFLQ run: per phase, evaluate pi_i for T_v steps, estimate H, gather
/// exploratory data (fresh in v2/v3, once up front in v1), estimate G, and
/// move to the greedy policy of the running mean of all G estimates.
RunRecord run_mflq(const LqSystem& sys, const LinearPolicy& initial,
                   const PhaseSchedule& schedule, const MatrixXd& action_cov,
                   std::uint64_t seed, const RunOptions& options = {});

struct RegretTerms {
  double alpha = 0.0;  ///< sum_t (c_t - lambda_{pi_t})
  double beta = 0.0;   ///< sum_t (lambda_{pi_t} - lambda_ref)
  double gamma = 0.0;  ///< sum_t (lambda_ref - c_t^ref)
  double total = 0.0;  ///< sum_t c_t - sum_t c_t^ref
  std::vector<double> reference_costs;
};

/// Costs of running `reference` for `length` steps from x = 0 on a stream
/// independent of the learner's.
std::vector<double> reference_costs(const LqSystem& sys, const LinearPolicy& reference,
                                    Index length, std::uint64_t seed);

RegretTerms regret_decomposition(const RunRecord& record, const LinearPolicy& reference,
                                 const LqSystem& sys);

struct PhaseDiagnostics {
  Index phase = 0;
  double estimation_error = 0.0;  ///< ||G_hat_i - G_i||_F, NaN when G_i undefined
  double threshold = 0.0;         ///< 1 / (12 C1 (sqrt n + C_K sqrt d)^2 S)
  bool within_threshold = false;
  double value_norm = 0.0;  ///< ||H_i||
  bool value_bounded = false;  ///< ||H_i|| <= 3 C1
  bool stable = false;
  double max_state_norm = 0.0;
  double max_action_norm = 0.0;
};

struct StabilityReport {
  double c1 = 0.0;   ///< ||H_1||
  double c_k = 0.0;  ///< 2 (3 C1 ||B|| ||A|| + 1)
  double c_h = 0.0;  ///< 3 C1
  double state_bound = 0.0;   ///< C_X
  double action_bound = 0.0;  ///< C_A
  double max_state_norm = 0.0;
  double max_action_norm = 0.0;
  std::vector<PhaseDiagnostics> phases;

  bool all_within_threshold() const;
  bool all_value_bounded() const;
};

StabilityReport stability_diagnostics(const RunRecord& record, const LqSystem& sys,
                                      Index phase_count, Index horizon, double delta2 = 0.05);

namespace detail {

/// What a policy-update rule sees at the end of a phase.
struct PhaseContext {
  const LqSystem& sys;
  Index phase;  ///< 1-based
  const Trajectory& evaluation;
  const TransitionDataset& dataset;
  const Trajectory& collection;
  PhaseRecord& record;
};

using PolicyUpdate = std::function<LinearPolicy(PhaseContext&)>;

/// Shared phase loop for MFLQ, LSPI and the certainty-equivalence baseline.
RunRecord run_phased(const std::string& name, const LqSystem& sys,
                     const LinearPolicy& initial, const PhaseSchedule& schedule,
                     const MatrixXd& action_cov, std::uint64_t seed,
                     const RunOptions& options, const PolicyUpdate& update);

/// H_hat and G_hat for the phase, sampled or exact per options.source.
void estimate_phase(PhaseContext& ctx, const RunOptions& options);

}  // namespace detail

}  // namespace mflq
