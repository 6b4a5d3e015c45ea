#include "mflq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "mflq/baselines.hpp"
#include "mflq/theory.hpp"

namespace mflq {

namespace {

RunOptions run_options(const ExperimentConfig& cfg) {
  RunOptions opts;
  opts.source = cfg.estimates;
  opts.unknown_noise = cfg.unknown_noise;
  opts.burn_in = cfg.burn_in;
  return opts;
}

PhaseSchedule schedule_for(const ExperimentConfig& cfg, Variant v) {
  return make_schedule(cfg.horizon, cfg.xi, v, cfg.exploration_period);
}

RunRecord run_with(const ExperimentConfig& cfg, Algorithm algorithm, std::uint64_t seed,
                   const LinearPolicy& initial) {
  const RunOptions opts = run_options(cfg);
  const LqSystem& sys = cfg.system;
  switch (algorithm) {
    case Algorithm::kMflqV1:
      return run_mflq(sys, initial, schedule_for(cfg, Variant::kV1), cfg.action_cov, seed, opts);
    case Algorithm::kMflqV2:
      return run_mflq(sys, initial, schedule_for(cfg, Variant::kV2), cfg.action_cov, seed, opts);
    case Algorithm::kMflqV3:
      return run_mflq(sys, initial, schedule_for(cfg, Variant::kV3), cfg.action_cov, seed, opts);
    case Algorithm::kLspi:
      return run_lspi(sys, initial, schedule_for(cfg, Variant::kV3), cfg.action_cov, seed, opts);
    case Algorithm::kRlsvi:
      return run_rlsvi(sys, initial, cfg.horizon, seed);
    case Algorithm::kModelBased:
      return run_model_based(sys, initial, schedule_for(cfg, Variant::kV2), cfg.action_cov, seed,
                             opts);
    case Algorithm::kOracle:
      return run_oracle(sys, schedule_for(cfg, Variant::kV2), seed);
  }
  throw DomainError("run_algorithm: unknown algorithm");
}

std::optional<double> optional_median_slope(const std::vector<ResultRow>& rows) {
  std::map<Index, std::pair<std::vector<double>, std::vector<double>>> by_phase;
  for (const auto& r : rows) {
    auto& [steps, regret] = by_phase[r.phase_index];
    steps.push_back(static_cast<double>(r.steps_elapsed));
    regret.push_back(r.cumulative_regret);
  }
  std::vector<double> xs, ys;
  for (auto& [phase, cols] : by_phase) {
    xs.push_back(median(cols.first));
    ys.push_back(median(cols.second));
  }
  return loglog_slope(xs, ys);
}

void write_optional(std::ostream& out, const std::optional<double>& v) {
  if (v) out << format_double(*v);
}

}  // namespace

RunRecord run_algorithm(const ExperimentConfig& cfg, Algorithm algorithm, std::uint64_t seed) {
  return run_with(cfg, algorithm, seed, initial_policy(cfg.system, cfg.initial_policy_scale));
}

std::vector<ResultRow> result_rows(const RunRecord& run,
                                   const std::vector<double>& reference_costs) {
  std::vector<ResultRow> rows;
  const bool stable = run.stable();
  double cost = 0.0;
  double reference = 0.0;
  std::size_t t = 0;
  Index index = 0;
  for (const auto& phase : run.phases) {
    ResultRow row;
    row.seed = run.seed;
    row.algorithm = run.algorithm;
    row.phase_index = ++index;
    row.steps_elapsed = phase.end_step;
    double phase_cost = 0.0;
    const auto end = std::min<std::size_t>(static_cast<std::size_t>(phase.end_step),
                                           run.per_step_costs.size());
    const std::size_t begin = t;
    for (; t < end; ++t) {
      phase_cost += run.per_step_costs[t];
      if (t < reference_costs.size()) reference += reference_costs[t];
    }
    cost += phase_cost;
    row.phase_avg_cost =
        end > begin ? phase_cost / static_cast<double>(end - begin)
                    : std::numeric_limits<double>::quiet_NaN();
    row.true_lambda =
        phase.truth ? phase.truth->lambda : std::numeric_limits<double>::infinity();
    row.cumulative_cost = cost;
    row.cumulative_regret = cost - reference;
    row.stable = stable;
    rows.push_back(std::move(row));
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  if (values.size() % 2 == 1) return values[m];
  const double lo = values[m - 1];
  const double hi = values[m];
  if (std::isinf(lo) || std::isinf(hi)) return lo == hi ? lo : (std::isinf(hi) ? hi : lo);
  return 0.5 * (lo + hi);
}

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return std::nullopt;
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx <= 0.0) return std::nullopt;
  return sxy / sxx;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const HarnessOptions& options) {
  const LinearPolicy initial = initial_policy(cfg.system, cfg.initial_policy_scale);
  const OptimalController best = optimal_controller(cfg.system);

  struct Job {
    Algorithm algorithm;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Algorithm a : cfg.algorithms) {
    for (std::uint64_t s : cfg.seeds) jobs.push_back({a, s + options.seed_offset});
  }

  std::vector<RunOutput> outputs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        RunOutput& out = outputs[i];
        out.record = run_with(cfg, jobs[i].algorithm, jobs[i].seed, initial);
        const auto ref = reference_costs(cfg.system, best.policy,
                                         static_cast<Index>(out.record.per_step_costs.size()),
                                         jobs[i].seed);
        out.rows = result_rows(out.record, ref);
        out.total_regret = out.rows.empty() ? 0.0 : out.rows.back().cumulative_regret;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = options.jobs > 0 ? options.jobs : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  std::size_t cursor = 0;
  for (Algorithm a : cfg.algorithms) {
    Summary s;
    s.algorithm = to_string(a);
    s.horizon = cfg.horizon;
    s.optimal_lambda = best.lambda;
    std::vector<double> finals, regrets;
    std::vector<ResultRow> rows;
    Index stable = 0;
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k, ++cursor) {
      RunOutput& out = outputs[cursor];
      ++s.runs;
      if (out.record.stable()) ++stable;
      finals.push_back(out.record.final_lambda());
      regrets.push_back(out.total_regret);
      rows.insert(rows.end(), out.rows.begin(), out.rows.end());
    }
    s.stability_fraction = static_cast<double>(stable) / static_cast<double>(s.runs);
    s.median_final_lambda = median(finals);
    s.median_cumulative_regret = median(regrets);
    s.regret_slope = optional_median_slope(rows);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    result.summaries.push_back(std::move(s));
  }
  result.runs = std::move(outputs);
  return result;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, const std::vector<Index>& horizons,
                              const HarnessOptions& options) {
  if (horizons.empty()) throw DomainError("sweep: empty T grid");
  for (std::size_t i = 1; i < horizons.size(); ++i) {
    if (horizons[i] <= horizons[i - 1]) throw DomainError("sweep: T grid must be ascending");
  }
  std::vector<SweepPoint> points;
  for (Index T : horizons) {
    ExperimentConfig local = cfg;
    local.horizon = T;
    const ExperimentResult r = run_experiment(local, options);
    for (const auto& s : r.summaries) {
      SweepPoint p;
      p.horizon = T;
      p.algorithm = s.algorithm;
      p.runs = s.runs;
      p.stability_fraction = s.stability_fraction;
      p.median_cumulative_regret = s.median_cumulative_regret;
      points.push_back(std::move(p));
    }
  }
  for (Algorithm a : cfg.algorithms) {
    const std::string name = to_string(a);
    std::vector<double> xs, ys;
    for (const auto& p : points) {
      if (p.algorithm != name) continue;
      xs.push_back(static_cast<double>(p.horizon));
      ys.push_back(p.median_cumulative_regret);
    }
    const auto slope = loglog_slope(xs, ys);
    for (auto& p : points) {
      if (p.algorithm == name) p.regret_slope = slope;
    }
  }
  return points;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "seed,algorithm,phase_index,steps_elapsed,phase_avg_cost,true_lambda,"
         "cumulative_cost,cumulative_regret,stable\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.algorithm << ',' << r.phase_index << ',' << r.steps_elapsed << ','
        << format_double(r.phase_avg_cost) << ',' << format_double(r.true_lambda) << ','
        << format_double(r.cumulative_cost) << ',' << format_double(r.cumulative_regret) << ','
        << (r.stable ? 1 : 0) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<Summary>& summaries) {
  out << "algorithm,T,runs,stability_fraction,median_final_lambda,optimal_lambda,"
         "median_cumulative_regret,regret_slope\n";
  for (const auto& s : summaries) {
    out << s.algorithm << ',' << s.horizon << ',' << s.runs << ','
        << format_double(s.stability_fraction) << ',' << format_double(s.median_final_lambda)
        << ',' << format_double(s.optimal_lambda) << ','
        << format_double(s.median_cumulative_regret) << ',';
    write_optional(out, s.regret_slope);
    out << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "T,algorithm,runs,stability_fraction,median_cumulative_regret,regret_slope\n";
  for (const auto& p : points) {
    out << p.horizon << ',' << p.algorithm << ',' << p.runs << ','
        << format_double(p.stability_fraction) << ','
        << format_double(p.median_cumulative_regret) << ',';
    write_optional(out, p.regret_slope);
    out << '\n';
  }
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  std::ofstream results(dir / "results.csv", std::ios::binary);
  std::ofstream summary(dir / "summary.csv", std::ios::binary);
  if (!results || !summary) throw Error("cannot write into " + dir.string());
  write_results_csv(results, result.rows);
  write_summary_csv(summary, result.summaries);
  if (!results || !summary) throw Error("write failed in " + dir.string());
}

BoundsTable compute_bounds(const ExperimentConfig& cfg, BoundsPolicy policy, double alpha,
                           double delta) {
  const LqSystem& sys = cfg.system;
  const LinearPolicy pi = policy == BoundsPolicy::kOptimal
                              ? optimal_controller(sys).policy
                              : initial_policy(sys, cfg.initial_policy_scale);
  const MatrixXd gamma = pi.closed_loop(sys);
  BoundsTable t;
  t.spectral_radius = spectral_radius(gamma);
  t.rate = alpha;
  t.delta = delta;
  t.horizon = cfg.horizon;
  const theory::MixingBoundSpec spec{gamma, alpha, sys.state_dim()};
  t.beta_bar = theory::beta_bar(spec);
  for (Index k : {0, 1, 2, 5, 10, 20, 50, 100}) {
    t.beta.emplace_back(k, theory::beta_mixing_bound(spec, k));
  }
  const auto ps = theory::partial_sum_bound(cfg.horizon, -std::log(alpha), t.beta_bar, delta);
  t.block_length = ps.block_length;
  t.partial_sum_bound = ps.bound;
  t.c1 = operator_norm(policy_value(sys, pi).H.H);
  t.c_h = 3.0 * t.c1;
  const auto sb = theory::state_bounds(t.c_h, sys.state_dim(), cfg.horizon, delta);
  t.state_bound = sb.state;
  t.action_bound = sb.action;
  return t;
}

void write_bounds_text(std::ostream& out, const BoundsTable& t) {
  out << "closed-loop spectral radius  " << format_double(t.spectral_radius) << '\n'
      << "alpha                        " << format_double(t.rate) << '\n'
      << "delta                        " << format_double(t.delta) << '\n'
      << "T                            " << t.horizon << '\n'
      << "beta_bar                     " << format_double(t.beta_bar) << '\n';
  for (const auto& [k, b] : t.beta) {
    out << "beta_" << k << std::string(k < 10 ? 24 : (k < 100 ? 23 : 22), ' ')
        << format_double(b) << '\n';
  }
  out << "block length b               " << t.block_length << '\n'
      << "partial-sum bound            " << format_double(t.partial_sum_bound) << '\n'
      << "C1 = ||H||                   " << format_double(t.c1) << '\n'
      << "C_H                          " << format_double(t.c_h) << '\n'
      << "C_X                          " << format_double(t.state_bound) << '\n'
      << "C_A                          " << format_double(t.action_bound) << '\n';
}

void write_bounds_csv(std::ostream& out, const BoundsTable& t) {
  out << "quantity,value\n"
      << "spectral_radius," << format_double(t.spectral_radius) << '\n'
      << "alpha," << format_double(t.rate) << '\n'
      << "delta," << format_double(t.delta) << '\n'
      << "T," << t.horizon << '\n'
      << "beta_bar," << format_double(t.beta_bar) << '\n';
  for (const auto& [k, b] : t.beta) out << "beta_" << k << ',' << format_double(b) << '\n';
  out << "block_length," << t.block_length << '\n'
      << "partial_sum_bound," << format_double(t.partial_sum_bound) << '\n'
      << "c1," << format_double(t.c1) << '\n'
      << "c_h," << format_double(t.c_h) << '\n'
      << "c_x," << format_double(t.state_bound) << '\n'
      << "c_a," << format_double(t.action_bound) << '\n';
}

}  // namespace mflq
