#include "mflq/mflq.hpp"

#include <cmath>
#include <limits>

#include "mflq/theory.hpp"

namespace mflq {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kV1: return "v1";
    case Variant::kV2: return "v2";
    case Variant::kV3: return "v3";
  }
  return "?";
}

namespace {

/// floor(scale * T^p), robust to pow() landing a hair below an integer.
Index floor_power(Index horizon, double exponent, double scale = 1.0) {
  const double value = scale * std::exp(exponent * std::log(static_cast<double>(horizon)));
  return static_cast<Index>(std::floor(value * (1.0 + 1e-12) + 1e-9));
}

}  // namespace

Index PhaseSchedule::total_steps() const {
  if (variant == Variant::kV1) return phases * eval_steps + collection_steps();
  return phases * (eval_steps + collection_steps());
}

PhaseSchedule make_schedule(Index horizon, double xi, Variant variant,
                            Index v1_exploration_period) {
  if (horizon < kMinHorizon) {
    throw InfeasibleScheduleError("make_schedule: horizon must be at least " +
                                  std::to_string(kMinHorizon));
  }
  if (!(xi >= 0.0 && xi < 0.25)) throw DomainError("make_schedule: xi must lie in [0, 1/4)");
  PhaseSchedule s;
  s.variant = variant;
  s.horizon = horizon;
  s.xi = xi;
  if (variant == Variant::kV1) {
    if (v1_exploration_period < 1) throw DomainError("make_schedule: T_s must be >= 1");
    s.phases = std::max<Index>(1, floor_power(horizon, 1.0 / 3.0 - xi) - 1);
    s.eval_steps = floor_power(horizon, 2.0 / 3.0 + xi);
    s.exploration_period = v1_exploration_period;
    const Index room = horizon - s.phases * s.eval_steps;
    s.tuples = std::min(floor_power(horizon, 2.0 / 3.0 + xi),
                        room > 0 ? room / s.exploration_period : 0);
  } else {
    s.phases = floor_power(horizon, 0.25);
    s.exploration_period = std::max<Index>(1, floor_power(horizon, 0.25 - xi));
    s.eval_steps = floor_power(horizon, 0.75, 0.5);
    const Index per_phase = s.phases > 0 ? horizon / s.phases : 0;
    const Index room = per_phase - s.eval_steps;
    s.tuples = std::min(floor_power(horizon, 0.5 + xi, 0.5),
                        room > 0 ? room / s.exploration_period : 0);
  }
  if (s.phases < 1 || s.eval_steps < 1 || s.tuples < 1) {
    throw InfeasibleScheduleError("make_schedule: horizon " + std::to_string(horizon) +
                                  " leaves an empty phase or dataset");
  }
  return s;
}

bool RunRecord::stable() const {
  if (diverged()) return false;
  for (const auto& p : phases) {
    if (!p.stable) return false;
  }
  return final_truth.has_value();
}

double RunRecord::final_lambda() const {
  return final_truth ? final_truth->lambda : std::numeric_limits<double>::infinity();
}

std::optional<PolicyValue> try_policy_value(const LqSystem& sys, const LinearPolicy& policy) {
  if (!policy.is_stable(sys)) return std::nullopt;
  try {
    return policy_value(sys, policy);
  } catch (const InstabilityError&) {
    return std::nullopt;
  }
}

namespace detail {

namespace {

void absorb(RunRecord& run, PhaseRecord& phase, const Trajectory& traj) {
  for (const auto& tr : traj.steps) {
    run.per_step_costs.push_back(tr.cost);
    phase.max_state_norm = std::max({phase.max_state_norm, tr.x.norm(), tr.x_next.norm()});
    phase.max_action_norm = std::max(phase.max_action_norm, tr.a.norm());
  }
  if (traj.diverged()) run.diverged_at = traj.diverged_at;
}

}  // namespace

RunRecord run_phased(const std::string& name, const LqSystem& sys,
                     const LinearPolicy& initial, const PhaseSchedule& schedule,
                     const MatrixXd& action_cov, std::uint64_t seed,
                     const RunOptions& options, const PolicyUpdate& update) {
  if (!initial.is_stable(sys)) {
    throw InstabilityError(name + ": the initial policy must be stable");
  }
  RunRecord run;
  run.algorithm = name;
  run.seed = seed;
  run.per_step_costs.reserve(static_cast<std::size_t>(schedule.total_steps()));

  Simulator sim(sys, seed, options.simulator);
  sim.reset(VectorXd::Zero(sys.state_dim()));
  LinearPolicy policy = initial;

  const bool reuse_dataset = schedule.variant == Variant::kV1;
  DataCollection upfront;
  const Trajectory empty;

  for (Index i = 1; i <= schedule.phases; ++i) {
    PhaseRecord phase;
    phase.start_step = sim.time();
    phase.policy = policy;
    phase.truth = try_policy_value(sys, policy);
    phase.stable = phase.truth.has_value();

    if (reuse_dataset && i == 1) {
      upfront = collect_data(sim, policy, schedule.collection_steps(),
                             schedule.exploration_period, action_cov);
      absorb(run, phase, upfront.trajectory);
      if (run.diverged()) {
        phase.end_step = sim.time();
        run.phases.push_back(std::move(phase));
        break;
      }
    }

    const Trajectory evaluation = rollout(sim, policy, schedule.eval_steps);
    absorb(run, phase, evaluation);
    if (run.diverged()) {
      phase.end_step = sim.time();
      run.phases.push_back(std::move(phase));
      break;
    }

    DataCollection fresh;
    if (!reuse_dataset) {
      fresh = collect_data(sim, policy, schedule.collection_steps(), schedule.exploration_period,
                           action_cov, schedule.variant == Variant::kV3);
      absorb(run, phase, fresh.trajectory);
      if (run.diverged()) {
        phase.end_step = sim.time();
        run.phases.push_back(std::move(phase));
        break;
      }
    }

    const TransitionDataset& dataset = reuse_dataset ? upfront.data : fresh.data;
    const Trajectory& collection =
        reuse_dataset ? (i == 1 ? upfront.trajectory : empty) : fresh.trajectory;
    PhaseContext ctx{sys, i, evaluation, dataset, collection, phase};
    LinearPolicy next = update(ctx);
    phase.end_step = sim.time();
    run.phases.push_back(std::move(phase));
    policy = std::move(next);
  }
  run.final_policy = policy;
  if (!run.diverged()) run.final_truth = try_policy_value(sys, policy);
  return run;
}

void estimate_phase(PhaseContext& ctx, const RunOptions& options) {
  if (options.source == EstimateSource::kOracle) {
    if (!ctx.record.truth) {
      throw InstabilityError("oracle estimates require a stable phase policy");
    }
    ctx.record.h_hat = ctx.record.truth->H.H;
    ctx.record.g_hat = ctx.record.truth->G.G;
    return;
  }
  const EstimationReport h =
      options.unknown_noise ? estimate_h_unknown_w(ctx.evaluation, ctx.sys, options.burn_in)
                            : estimate_h(ctx.evaluation, ctx.sys, options.burn_in);
  ctx.record.h_hat = h.estimate;
  ctx.record.g_hat = estimate_g(ctx.dataset, h.estimate, ctx.sys).estimate;
}

}  // namespace detail

RunRecord run_mflq(const LqSystem& sys, const LinearPolicy& initial,
                   const PhaseSchedule& schedule, const MatrixXd& action_cov,
                   std::uint64_t seed, const RunOptions& options) {
  std::vector<MatrixXd> means;
  MatrixXd mean;
  const MatrixXd floor = sys.cost_floor();
  auto update = [&](detail::PhaseContext& ctx) {
    detail::estimate_phase(ctx, options);
    const MatrixXd& g_hat = ctx.record.g_hat;
    if (ctx.phase == 1) {
      mean = g_hat;
    } else {
      mean += (g_hat - mean) / static_cast<double>(ctx.phase);
    }
    means.push_back(mean);
    return greedy_policy(QMatrix{psd_project(mean, floor), sys.state_dim()});
  };
  RunRecord run = detail::run_phased("mflq_" + to_string(schedule.variant), sys, initial,
                                     schedule, action_cov, seed, options, update);
  run.averaged_g = std::move(means);
  return run;
}

std::vector<double> reference_costs(const LqSystem& sys, const LinearPolicy& reference,
                                    Index length, std::uint64_t seed) {
  std::vector<double> costs;
  if (length <= 0) return costs;
  Rng key = Rng::keyed(seed, Stream::kReference);
  Simulator sim(sys, key.next_u64());
  sim.reset(VectorXd::Zero(sys.state_dim()));
  costs.reserve(static_cast<std::size_t>(length));
  for (Index t = 0; t < length; ++t) {
    costs.push_back(sim.advance(reference.action(sim.state())).cost);
  }
  return costs;
}

RegretTerms regret_decomposition(const RunRecord& record, const LinearPolicy& reference,
                                 const LqSystem& sys) {
  const PolicyValue ref_value = policy_value(sys, reference);
  const double lambda_ref = ref_value.lambda;
  RegretTerms out;
  const Index length = static_cast<Index>(record.per_step_costs.size());
  out.reference_costs = reference_costs(sys, reference, length, record.seed);

  bool all_known = true;
  double learner = 0.0;
  for (const auto& phase : record.phases) {
    const double lambda_phase =
        phase.truth ? phase.truth->lambda : std::numeric_limits<double>::infinity();
    all_known = all_known && phase.truth.has_value();
    for (std::int64_t t = phase.start_step; t < phase.end_step && t < length; ++t) {
      const double c = record.per_step_costs[static_cast<std::size_t>(t)];
      learner += c;
      out.alpha += c - lambda_phase;
      out.beta += lambda_phase - lambda_ref;
    }
  }
  double ref_total = 0.0;
  for (double c : out.reference_costs) {
    ref_total += c;
    out.gamma += lambda_ref - c;
  }
  out.total = learner - ref_total;
  if (!all_known) out.alpha = std::numeric_limits<double>::quiet_NaN();
  return out;
}

bool StabilityReport::all_within_threshold() const {
  for (const auto& p : phases)
    if (!p.within_threshold) return false;
  return true;
}

bool StabilityReport::all_value_bounded() const {
  for (const auto& p : phases)
    if (!p.value_bounded) return false;
  return true;
}

StabilityReport stability_diagnostics(const RunRecord& record, const LqSystem& sys,
                                      Index phase_count, Index horizon, double delta2) {
  if (record.phases.empty() || !record.phases.front().truth) {
    throw InstabilityError("stability_diagnostics: first phase policy must be stable");
  }
  const double n = static_cast<double>(sys.state_dim());
  const double d = static_cast<double>(sys.action_dim());
  StabilityReport report;
  report.c1 = operator_norm(record.phases.front().truth->H.H);
  report.c_k = 2.0 * (3.0 * report.c1 * operator_norm(sys.B) * operator_norm(sys.A) + 1.0);
  report.c_h = 3.0 * report.c1;
  const double spread = std::sqrt(n) + report.c_k * std::sqrt(d);
  const double threshold =
      1.0 / (12.0 * report.c1 * spread * spread * static_cast<double>(phase_count));
  const auto bounds = theory::state_bounds(report.c_h, sys.state_dim(), horizon, delta2);
  report.state_bound = bounds.state;
  report.action_bound = bounds.action;

  Index index = 0;
  for (const auto& phase : record.phases) {
    PhaseDiagnostics diag;
    diag.phase = ++index;
    diag.threshold = threshold;
    diag.stable = phase.stable;
    diag.max_state_norm = phase.max_state_norm;
    diag.max_action_norm = phase.max_action_norm;
    if (phase.truth) {
      diag.estimation_error =
          phase.g_hat.size() > 0 ? (phase.g_hat - phase.truth->G.G).norm()
                                 : std::numeric_limits<double>::quiet_NaN();
      diag.value_norm = operator_norm(phase.truth->H.H);
      diag.value_bounded = diag.value_norm <= report.c_h;
    } else {
      diag.estimation_error = std::numeric_limits<double>::quiet_NaN();
      diag.value_norm = std::numeric_limits<double>::infinity();
    }
    diag.within_threshold = diag.estimation_error <= threshold;
    report.max_state_norm = std::max(report.max_state_norm, phase.max_state_norm);
    report.max_action_norm = std::max(report.max_action_norm, phase.max_action_norm);
    report.phases.push_back(diag);
  }
  return report;
}

}  // namespace mflq
