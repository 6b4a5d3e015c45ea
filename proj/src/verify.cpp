#include "mflq/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mflq/baselines.hpp"
#include "mflq/config.hpp"
#include "mflq/experiment.hpp"
#include "mflq/theory.hpp"

namespace mflq {

namespace {

using namespace theory;

MatrixXd random_symmetric(Index k, Rng& rng) {
  MatrixXd m(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) m(i, j) = rng.normal();
  return symmetrize(m);
}

/// Gaussian matrix rescaled to a spectral radius drawn from [0.1, 0.9].
MatrixXd random_stable(Index k, Rng& rng) {
  MatrixXd m(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) m(i, j) = rng.normal();
  const double rho = spectral_radius(m);
  const double target = 0.1 + 0.8 * rng.uniform();
  return rho > 0.0 ? MatrixXd(m * (target / rho)) : m;
}

VectorXd random_unit_symmetric(Index k, Rng& rng) {
  MatrixXd v = random_symmetric(k, rng);
  v /= v.norm();
  return sym_vec(v);
}

CheckResult check(const char* suite, std::string name, double statistic, std::string relation,
                  double bound) {
  CheckResult r;
  r.suite = suite;
  r.name = std::move(name);
  r.statistic = statistic;
  r.bound = bound;
  r.relation = relation;
  if (relation == "<=") {
    r.pass = statistic <= bound;
  } else if (relation == ">=") {
    r.pass = statistic >= bound;
  } else {
    r.pass = false;
  }
  return r;
}

void moments(std::vector<CheckResult>& out, std::uint64_t seed) {
  Rng rng = Rng::keyed(seed, Stream::kMonteCarlo, 1);
  for (int i = 0; i < 10; ++i) {
    const Index k = 2 + i % 3;
    const MatrixXd f = random_symmetric(k, rng);
    const MatrixXd fp = random_symmetric(k, rng);
    const double exact = gaussian_fourth_moment(f, fp);
    const auto mc = gaussian_fourth_moment_mc(f, fp, 1'000'000, rng);
    out.push_back(check("moments", "fourth_moment_" + std::to_string(i) + " |mc-exact|/se",
                        std::abs(mc.mean - exact) / mc.standard_error, "<=", 3.0));
  }
  const double id = gaussian_fourth_moment(MatrixXd::Identity(4, 4), MatrixXd::Identity(4, 4));
  out.push_back(check("moments", "identity_k4 |value-24|", std::abs(id - 24.0), "<=", 1e-12));
}

void small_ball(std::vector<CheckResult>& out, std::uint64_t seed) {
  Rng rng = Rng::keyed(seed, Stream::kMonteCarlo, 2);
  double smallest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const Index k = 1 + i % 4;
    const MatrixXd gamma = random_stable(k, rng);
    const MatrixXd sigma = solve_lyapunov(gamma, MatrixXd::Identity(k, k));
    smallest = std::min(smallest,
                        small_ball_second_moment(sigma, gamma, random_unit_symmetric(k, rng)));
  }
  out.push_back(check("small-ball", "min second moment over 1000 draws", smallest, ">=", 2.0));
  for (int i = 0; i < 10; ++i) {
    const Index k = 2 + i % 2;
    const MatrixXd gamma = random_stable(k, rng);
    const MatrixXd sigma = solve_lyapunov(gamma, MatrixXd::Identity(k, k));
    const VectorXd v = random_unit_symmetric(k, rng);
    const double exact = small_ball_second_moment(sigma, gamma, v);
    const auto mc = small_ball_second_moment_mc(sigma, gamma, v, 1'000'000, rng);
    out.push_back(check("small-ball", "second_moment_" + std::to_string(i) + " |mc-exact|/se",
                        std::abs(mc.mean - exact) / mc.standard_error, "<=", 3.0));
  }
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    const Index k = 1 + i % 3;
    const MatrixXd gamma = random_stable(k, rng);
    const MatrixXd sigma = solve_lyapunov(gamma, MatrixXd::Identity(k, k));
    const auto p = small_ball_probability(sigma, gamma, random_unit_symmetric(k, rng), 100'000, rng);
    worst = std::min(worst, p.mean + 3.0 * p.standard_error);
  }
  out.push_back(
      check("small-ball", "min P(|f_v|>=1) + 3se over 50 draws", worst, ">=", kSmallBallFloor));
}

void mixing(std::vector<CheckResult>& out, std::uint64_t seed) {
  Rng rng = Rng::keyed(seed, Stream::kMonteCarlo, 3);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Index k = 1 + i % 4;
    const MatrixXd gamma = random_stable(k, rng);
    const double rho = spectral_radius(gamma);
    const double alpha = rho + (1.0 - rho) * (0.1 + 0.8 * rng.uniform());
    const MixingBoundSpec spec{gamma, alpha, k};
    for (Index lag = 0; lag < 10; ++lag) {
      const double ratio = beta_mixing_bound(spec, lag + 1) / beta_mixing_bound(spec, lag);
      worst = std::max(worst, std::abs(ratio - alpha) / alpha);
    }
  }
  out.push_back(check("mixing", "max |beta_{k+1}/beta_k - alpha|/alpha", worst, "<=", 1e-12));
  const double alpha = 0.75;
  const double zero = beta_mixing_bound({MatrixXd::Zero(2, 2), alpha, 2}, 3);
  const double expected = 0.5 * std::pow(alpha, 3) * std::sqrt(2.0 / (1.0 - alpha * alpha));
  out.push_back(check("mixing", "Gamma=0 closed form rel. error",
                      std::abs(zero - expected) / expected, "<=", 1e-9));
}

void blocks(std::vector<CheckResult>& out, std::uint64_t seed) {
  const double delta = 0.05;
  const Index trials = 2000;
  const auto result = verify_block_bound(
      MatrixXd::Constant(1, 1, 0.5), 0.75,
      [](const VectorXd& x) { return std::clamp(x(0), -1.0, 1.0); }, 10'000, delta, trials, seed);
  const double limit = 4.0 * delta + 3.0 * std::sqrt(4.0 * delta * (1.0 - 4.0 * delta) /
                                                     static_cast<double>(trials));
  out.push_back(check("blocks", "AR(1) gamma=0.5 violation rate", result.violation_rate, "<=",
                      limit));
  const auto part = block_partition(10'000, 37);
  Index covered = part.residual.size();
  for (const auto& r : part.heads) covered += r.size();
  for (const auto& r : part.tails) covered += r.size();
  out.push_back(check("blocks", "partition |n - covered|",
                      std::abs(static_cast<double>(covered - 10'000)), "<=", 0.0));
}

void gram(std::vector<CheckResult>& out, std::uint64_t seed) {
  MatrixXd gamma(2, 2);
  gamma << 0.6, 0.2, -0.1, 0.5;
  const Index tau = 100'000;
  std::vector<VectorXd> features;
  features.reserve(static_cast<std::size_t>(tau));
  const MatrixXd root = psd_sqrt(solve_lyapunov(gamma, MatrixXd::Identity(2, 2)));
  Rng rng = Rng::keyed(seed, Stream::kMonteCarlo, 5);
  VectorXd x = root * rng.normals(2);
  for (Index t = 0; t < tau; ++t) {
    const VectorXd next = gamma * x + rng.normals(2);
    features.push_back(symmetric_coordinates(outer_vec(next) - outer_vec(x)));
    x = next;
  }
  const auto floor = gram_floor_check(features, 1.0, kSmallBallFloor);
  out.push_back(check("gram", "lambda_min of feature-difference Gram", floor.lambda_min, ">=",
                      floor.floor));
}

void state_bound_suite(std::vector<CheckResult>& out, std::uint64_t seed) {
  const LqSystem sys = builtin_system("dean2017").system;
  const LinearPolicy initial = initial_policy(sys);
  const Index horizon = 50'000;  // the benchmark trajectory length
  const PhaseSchedule schedule = make_schedule(horizon, 0.0, Variant::kV2);
  const MatrixXd cov = MatrixXd::Identity(sys.action_dim(), sys.action_dim());
  const Index runs = 100;
  Index exceed = 0, healthy = 0, bounded = 0;
  double c_x = 0.0;
  for (Index r = 0; r < runs; ++r) {
    const RunRecord rec = run_mflq(sys, initial, schedule, cov, seed + static_cast<std::uint64_t>(r));
    const auto diag = stability_diagnostics(rec, sys, schedule.phases, horizon, 0.05);
    c_x = diag.state_bound;
    if (diag.max_state_norm > diag.state_bound) ++exceed;
    for (const auto& p : diag.phases) {
      if (!p.stable) continue;
      ++healthy;
      if (p.value_bounded) ++bounded;
    }
  }
  const double frac = static_cast<double>(exceed) / static_cast<double>(runs);
  out.push_back(check("state-bounds", "fraction of runs with max|x| > C_X=" + format_double(c_x),
                      frac, "<=", 0.05 + 3.0 * binomial_se(0.05, runs)));
  out.push_back(check("state-bounds", "fraction of stable phases with ||H_i|| <= 3||H_1||",
                      healthy > 0 ? static_cast<double>(bounded) / static_cast<double>(healthy)
                                  : 0.0,
                      ">=", 0.95));
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names = {"moments", "small-ball", "mixing",
                                                 "blocks",  "gram",       "state-bounds"};
  return names;
}

std::vector<CheckResult> run_verify(std::string_view suite, const VerifyOptions& options) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  bool matched = all;
  auto want = [&](std::string_view name) {
    if (all || suite == name) {
      matched = true;
      return true;
    }
    return false;
  };
  if (want("moments")) moments(out, options.seed);
  if (want("small-ball")) small_ball(out, options.seed);
  if (want("mixing")) mixing(out, options.seed);
  if (want("blocks")) blocks(out, options.seed);
  if (want("gram")) gram(out, options.seed);
  if (want("state-bounds")) state_bound_suite(out, options.seed);
  if (!matched) throw DomainError("unknown verify suite '" + std::string(suite) + "'");
  if (options.inject_failure) {
    for (auto& c : out) c.pass = !c.pass;
  }
  return out;
}

void print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) {
    out << (c.pass ? "PASS " : "FAIL ") << c.suite << ": " << c.name << "  "
        << format_double(c.statistic) << ' ' << c.relation << ' ' << format_double(c.bound)
        << '\n';
  }
}

}  // namespace mflq
