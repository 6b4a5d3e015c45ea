// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--out DIR] [criterion ...]
//
// With no criteria listed all ten run. CSVs land in DIR (default
// ./acceptance_out). Exit status is 1 when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mflq/baselines.hpp"
#include "mflq/config.hpp"
#include "mflq/estimation.hpp"
#include "mflq/experiment.hpp"
#include "mflq/linalg.hpp"
#include "mflq/lq_env.hpp"
#include "mflq/mflq.hpp"
#include "mflq/random.hpp"
#include "mflq/theory.hpp"

namespace fs = std::filesystem;
using namespace mflq;

namespace {

constexpr std::uint64_t kSeed = 20180101;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MatrixXd Gaussian(Index rows, Index cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

MatrixXd Stable(Index n, Rng& rng, double radius) {
  const MatrixXd m = Gaussian(n, n, rng);
  return m * (radius / spectral_radius(m));
}

MatrixXd Psd(Index n, Rng& rng) {
  const MatrixXd m = Gaussian(n, n, rng);
  return m * m.transpose() / static_cast<double>(n);
}

MatrixXd Symmetric(Index n, Rng& rng) {
  const MatrixXd m = Gaussian(n, n, rng);
  return (m + m.transpose()) / 2;
}

MatrixXd Sqrt(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

LqSystem TwoState() {
  LqSystem s;
  s.A = (MatrixXd(2, 2) << 0.9, 0.2, -0.1, 0.8).finished();
  s.B = (MatrixXd(2, 1) << 0.0, 1.0).finished();
  s.M = MatrixXd::Identity(2, 2);
  s.N = MatrixXd::Identity(1, 1);
  s.W = (MatrixXd(2, 2) << 1.0, 0.2, 0.2, 0.5).finished();
  return s;
}

LqSystem Scalar() {
  return {MatrixXd::Constant(1, 1, 1.2), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
          MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)};
}

/// Least squares slope of log y on log x, computed here rather than in the library.
double Slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / static_cast<double>(n);
    my += std::log(y[i]) / static_cast<double>(n);
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------

Outcome Criterion1(const fs::path&) {
  Rng rng(kSeed + 1);
  double worst_residual = 0, worst_series = 0, worst_greedy = 0;
  for (int k = 0; k < 100; ++k) {
    const Index n = 1 + k % 8;
    const MatrixXd g = Stable(n, rng, 0.1 + 0.8 * rng.uniform());
    const MatrixXd q = Symmetric(n, rng);
    const MatrixXd x = solve_lyapunov(g, q);
    worst_residual = std::max(worst_residual, (x - g * x * g.transpose() - q).cwiseAbs().maxCoeff());
    MatrixXd series = MatrixXd::Zero(n, n), power = MatrixXd::Identity(n, n);
    for (int s = 0; s < 200; ++s) {
      series += power * q * power.transpose();
      power = g * power;
    }
    worst_series = std::max(worst_series, (series - x).cwiseAbs().maxCoeff());

    const Index d = 1 + k % 3;
    LqSystem sys{g, Gaussian(n, d, rng), Psd(n, rng) + 0.1 * MatrixXd::Identity(n, n),
                 Psd(d, rng) + 0.1 * MatrixXd::Identity(d, d), MatrixXd::Identity(n, n)};
    const auto best = optimal_controller(sys);
    const LinearPolicy greedy = greedy_policy(q_matrix_of(sys, best.policy));
    worst_greedy = std::max(worst_greedy, (greedy.K - best.policy.K).cwiseAbs().maxCoeff());
  }
  return {worst_residual <= 1e-10 && worst_series <= 1e-8 && worst_greedy <= 1e-6,
          "max residual " + fmt(worst_residual) + " (<= 1e-10), max series gap " +
              fmt(worst_series) + " (<= 1e-8), max greedy gap " + fmt(worst_greedy) +
              " (<= 1e-6)"};
}

Outcome Criterion2(const fs::path&) {
  Rng rng(kSeed + 2);
  double worst_residual = 0, worst_lambda = 0;
  for (int p = 0; p < 20; ++p) {
    const Index n = 1 + p % 4;
    const Index d = 1 + p % 2;
    LqSystem sys{Stable(n, rng, 0.7), Gaussian(n, d, rng),
                 Psd(n, rng) + 0.1 * MatrixXd::Identity(n, n),
                 Psd(d, rng) + 0.1 * MatrixXd::Identity(d, d),
                 Psd(n, rng) + 0.1 * MatrixXd::Identity(n, n)};
    LinearPolicy pi{0.2 * Gaussian(d, n, rng)};
    while (spectral_radius(MatrixXd(pi.closed_loop(sys))) >= 0.9) pi.K *= 0.5;
    const auto value = policy_value(sys, pi);
    std::vector<VectorXd> states;
    for (int i = 0; i < 1000; ++i) states.push_back(rng.normals(n));
    worst_residual =
        std::max(worst_residual, bellman_residual(sys, pi, value.H.H, value.lambda, states));

    std::vector<double> errors;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Trajectory t = rollout(sys, pi, 1'000'000, VectorXd::Zero(n), kSeed + 100 * p + seed);
      double sum = 0;
      for (const auto& tr : t.steps) sum += tr.cost;
      errors.push_back(std::abs(sum / 1e6 - value.lambda) / value.lambda);
    }
    worst_lambda = std::max(worst_lambda, Median(errors));
  }
  return {worst_residual <= 1e-8 && worst_lambda <= 0.02,
          "max Bellman residual " + fmt(worst_residual) + " (<= 1e-8), worst median lambda gap " +
              fmt(100 * worst_lambda) + "% (<= 2%)"};
}

Outcome Criterion3(const fs::path&) {
  const LqSystem s = TwoState();
  const LinearPolicy pi{(MatrixXd(1, 2) << 0.1, 0.4).finished()};
  const auto truth = policy_value(s, pi);
  auto h_error = [&](Index tau) {
    std::vector<double> e;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Trajectory t = rollout(s, pi, tau + kDefaultBurnIn, VectorXd::Zero(2), kSeed + seed);
      e.push_back((estimate_h(t, s).estimate - truth.H.H).norm() / truth.H.H.norm());
    }
    return Median(e);
  };
  // H is estimated from 10 x tuples on-policy steps, then G from `tuples`
  // exploratory tuples spaced 10 steps apart.
  auto g_error = [&](Index tuples) {
    std::vector<double> e;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Simulator sim(s, kSeed + 1000 + seed);
      sim.reset(VectorXd::Zero(2));
      const Trajectory eval = rollout(sim, pi, 10 * tuples + kDefaultBurnIn);
      const MatrixXd h = estimate_h(eval, s).estimate;
      const auto data = collect_data(sim, pi, 10 * tuples, 10, MatrixXd::Identity(1, 1));
      e.push_back((estimate_g(data.data, h, s).estimate - truth.G.G).norm() / truth.G.G.norm());
    }
    return Median(e);
  };
  const double h_long = h_error(100'000);
  const double h_ratio = h_error(Index{1} << 12) / h_error(Index{1} << 16);
  const double g_main = g_error(10'000);
  const double g_ratio = g_error(Index{1} << 10) / g_error(Index{1} << 14);
  const bool pass = h_long <= 0.05 && h_ratio >= 2 && h_ratio <= 8 && g_main <= 0.1 &&
                    g_ratio >= 2 && g_ratio <= 8;
  return {pass, "H err@1e5 " + fmt(h_long) + " (<= 0.05), H ratio 2^12/2^16 " + fmt(h_ratio) +
                    " in [2, 8]; G err@1e4 tuples " + fmt(g_main) +
                    " (<= 0.1), G ratio 2^10/2^14 tuples " + fmt(g_ratio) + " in [2, 8]"};
}

Outcome Criterion4(const fs::path&) {
  const LqSystem s = builtin_system("dean2017").system;
  const auto best = optimal_controller(s);
  const LinearPolicy k1 = initial_policy(s);
  const MatrixXd cov = MatrixXd::Identity(3, 3);
  std::string detail;
  bool pass = true;
  for (Variant v : {Variant::kV2, Variant::kV3}) {
    const auto sched = make_schedule(200'000, 0.0, v);
    std::vector<double> ratios;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      ratios.push_back(run_mflq(s, k1, sched, cov, kSeed + seed).final_lambda() / best.lambda);
    }
    const double m = Median(ratios);
    pass = pass && m <= 1.10;
    detail += to_string(v) + " median lambda/lambda* " + fmt(m) + " (<= 1.10); ";
  }

  const LqSystem scalar = Scalar();
  const double k_star = optimal_controller(scalar).policy.K(0, 0);
  PhaseSchedule sched;
  sched.phases = 10;
  sched.eval_steps = 200;
  sched.exploration_period = 2;
  sched.tuples = 10;
  sched.horizon = sched.total_steps();
  RunOptions oracle;
  oracle.source = EstimateSource::kOracle;
  auto best_gap = [&](const RunRecord& r) {
    double gap = std::abs(r.final_policy.K(0, 0) - k_star);
    for (const auto& p : r.phases) gap = std::min(gap, std::abs(p.policy.K(0, 0) - k_star));
    return gap;
  };
  const double mflq_gap =
      best_gap(run_mflq(scalar, initial_policy(scalar), sched, MatrixXd::Ones(1, 1), kSeed, oracle));
  const double lspi_gap =
      best_gap(run_lspi(scalar, initial_policy(scalar), sched, MatrixXd::Ones(1, 1), kSeed, oracle));
  pass = pass && mflq_gap <= 1e-4;
  detail += "oracle-mode MFLQ |K - K*| within 10 phases " + fmt(mflq_gap) +
            " (<= 1e-4); for reference unaveraged policy iteration reaches " + fmt(lspi_gap);
  return {pass, detail};
}

ExperimentConfig DeanConfig(const std::string& algorithms, Index T, int seeds) {
  return parse_config(R"({"system": "dean2017", "algorithm": )" + algorithms + R"(, "T": )" +
                      std::to_string(T) + R"(, "seeds": {"start": 0, "count": )" +
                      std::to_string(seeds) + "}}");
}

const std::vector<Index> kSweepGrid{Index{1} << 14, Index{1} << 15, Index{1} << 16,
                                    Index{1} << 17};

std::vector<SweepPoint> Criterion5Sweep() {
  return sweep(DeanConfig(R"("mflq_v2")", kSweepGrid.front(), 20), kSweepGrid);
}

Outcome Criterion5(const fs::path& out) {
  const auto points = Criterion5Sweep();
  fs::create_directories(out / "c5");
  std::ofstream csv(out / "c5" / "sweep.csv", std::ios::binary);
  write_sweep_csv(csv, points);
  std::vector<double> x, y;
  std::string medians;
  for (const auto& p : points) {
    x.push_back(static_cast<double>(p.horizon));
    y.push_back(p.median_cumulative_regret);
    medians += fmt(p.median_cumulative_regret) + " ";
  }
  if (*std::min_element(y.begin(), y.end()) <= 0) {
    return {false, "non-positive median regret, slope undefined: " + medians};
  }
  const double slope = Slope(x, y);
  return {slope < 0.95, "median regret " + medians + "slope " + fmt(slope) + " (< 0.95)"};
}

constexpr Index kStabilityHorizon = Index{1} << 15;

ExperimentResult Criterion6Run(const fs::path& dir) {
  const auto cfg =
      DeanConfig(R"(["mflq_v1", "mflq_v3", "lspi", "model_based"])", kStabilityHorizon, 50);
  auto result = run_experiment(cfg);
  write_experiment(dir, result);
  return result;
}

Outcome Criterion6(const fs::path& out) {
  const auto r = Criterion6Run(out / "c6");
  auto fraction = [&](const std::string& name) {
    for (const auto& s : r.summaries)
      if (s.algorithm == name) return s.stability_fraction;
    return -1.0;
  };
  const double v1 = fraction("mflq_v1"), v3 = fraction("mflq_v3"), lspi = fraction("lspi"),
               mb = fraction("model_based");
  return {v3 >= lspi - 0.1 && mb >= v1 - 0.1,
          "T=" + std::to_string(kStabilityHorizon) + ", 50 seeds: v3 " + fmt(v3) + " vs lspi " +
              fmt(lspi) + " - 0.1; model_based " + fmt(mb) + " vs v1 " + fmt(v1) + " - 0.1"};
}

struct Mc {
  double mean = 0, se = 0;
};

Mc MonteCarlo(Index samples, const std::function<double()>& draw) {
  double s1 = 0, s2 = 0;
  for (Index i = 0; i < samples; ++i) {
    const double v = draw();
    s1 += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(samples);
  const double mean = s1 / n;
  return {mean, std::sqrt(std::max(s2 / n - mean * mean, 0.0) / n)};
}

Outcome Criterion7(const fs::path&) {
  Rng rng(kSeed + 7);
  int fourth_ok = 0, second_ok = 0, floor_ok = 0, prob_ok = 0;
  double worst_z4 = 0, worst_z2 = 0, min_second = 1e300, worst_prob_margin = 1e300;
  auto unit_v = [&](Index n) {
    const MatrixXd v = Symmetric(n, rng);
    return VectorXd(sym_vec(MatrixXd(v / v.norm())));
  };
  // f_v = x'^T V x' - x^T V x with x = Sigma^{1/2} g and x' = Gamma x + g'.
  auto f_v = [](const MatrixXd& root, const MatrixXd& gamma, const MatrixXd& v, Rng& r) {
    const VectorXd x = root * r.normals(root.rows());
    const VectorXd xp = gamma * x + r.normals(root.rows());
    return xp.dot(v * xp) - x.dot(v * x);
  };
  for (int k = 0; k < 10; ++k) {
    const Index n = 1 + k % 3;
    const MatrixXd f = Symmetric(n, rng), fp = Symmetric(n, rng);
    const Mc m4 = MonteCarlo(1'000'000, [&] {
      const VectorXd g = rng.normals(n);
      return g.dot(f * g) * g.dot(fp * g);
    });
    const double z4 = std::abs(m4.mean - theory::gaussian_fourth_moment(f, fp)) / m4.se;
    worst_z4 = std::max(worst_z4, z4);
    fourth_ok += z4 <= 3;

    const MatrixXd sigma = Psd(n, rng), gamma = Stable(n, rng, 0.8);
    const VectorXd v = unit_v(n);
    const MatrixXd root = Sqrt(sigma), vm = sym_mat(v);
    const Mc m2 = MonteCarlo(1'000'000, [&] {
      const double fv = f_v(root, gamma, vm, rng);
      return fv * fv;
    });
    const double z2 = std::abs(m2.mean - theory::small_ball_second_moment(sigma, gamma, v)) / m2.se;
    worst_z2 = std::max(worst_z2, z2);
    second_ok += z2 <= 3;
  }
  for (int k = 0; k < 1000; ++k) {
    const Index n = 1 + k % 4;
    const double value =
        theory::small_ball_second_moment(Psd(n, rng), Stable(n, rng, 0.95), unit_v(n));
    min_second = std::min(min_second, value);
    floor_ok += value >= 2.0 - 1e-12;
  }
  for (int k = 0; k < 50; ++k) {
    const Index n = 1 + k % 3;
    const MatrixXd sigma = Psd(n, rng), gamma = Stable(n, rng, 0.8);
    const VectorXd v = unit_v(n);
    const MatrixXd root = Sqrt(sigma), vm = sym_mat(v);
    const Index samples = 100'000;
    const Mc p = MonteCarlo(samples, [&] { return std::abs(f_v(root, gamma, vm, rng)) >= 1 ? 1.0 : 0.0; });
    const double se = std::sqrt(p.mean * (1 - p.mean) / static_cast<double>(samples));
    const double margin = p.mean - (theory::kSmallBallFloor - 3 * se);
    worst_prob_margin = std::min(worst_prob_margin, margin);
    prob_ok += margin >= 0;
  }
  return {fourth_ok == 10 && second_ok == 10 && floor_ok == 1000 && prob_ok == 50,
          "fourth moment " + std::to_string(fourth_ok) + "/10 within 3 SE (max z " +
              fmt(worst_z4) + "), small-ball 2nd moment " + std::to_string(second_ok) +
              "/10 (max z " + fmt(worst_z2) + "), >= 2 on " + std::to_string(floor_ok) +
              "/1000 (min " + fmt(min_second) + "), P(|f|>=1) floor " + std::to_string(prob_ok) +
              "/50 (min margin " + fmt(worst_prob_margin) + ")"};
}

Outcome Criterion8(const fs::path&) {
  Rng rng(kSeed + 8);
  double worst_ratio = 0;
  for (int k = 0; k < 20; ++k) {
    const Index n = 1 + k % 4;
    const MatrixXd g = Stable(n, rng, 0.3 + 0.6 * rng.uniform());
    const double alpha = 0.5 * (1.0 + spectral_radius(g));
    const theory::MixingBoundSpec spec{g, alpha, n};
    for (Index lag = 0; lag < 20; ++lag) {
      const double ratio =
          theory::beta_mixing_bound(spec, lag + 1) / theory::beta_mixing_bound(spec, lag);
      worst_ratio = std::max(worst_ratio, std::abs(ratio - alpha) / alpha);
    }
  }
  const double delta = 0.05;
  const Index trials = 2000;
  const auto check = theory::verify_block_bound(
      MatrixXd::Constant(1, 1, 0.5), 0.75,
      [](const VectorXd& x) { return std::clamp(x(0), -1.0, 1.0); }, 10'000, delta, trials,
      kSeed + 80);
  const double limit = 4 * delta + 3 * theory::binomial_se(4 * delta, trials);
  return {worst_ratio <= 1e-12 && check.violation_rate <= limit,
          "max relative ratio error " + fmt(worst_ratio) + " (<= 1e-12), violation rate " +
              fmt(check.violation_rate) + " (<= " + fmt(limit) + ", bound " + fmt(check.bound) +
              ")"};
}

Outcome Criterion9(const fs::path&) {
  const LqSystem s = builtin_system("dean2017").system;
  const Index T = 50'000;
  const auto sched = make_schedule(T, 0.0, Variant::kV2);
  const LinearPolicy k1 = initial_policy(s);
  int exceed = 0, runs = 100, healthy = 0, bounded = 0;
  double c_x = 0;
  for (int r = 0; r < runs; ++r) {
    const RunRecord rec = run_mflq(s, k1, sched, MatrixXd::Identity(3, 3), kSeed + r);
    const auto report = stability_diagnostics(rec, s, sched.phases, T, 0.05);
    c_x = report.state_bound;
    exceed += report.max_state_norm > report.state_bound;
    for (const auto& p : report.phases) {
      if (!p.stable) continue;
      ++healthy;
      bounded += p.value_norm <= 3 * report.c1;
    }
  }
  const double frac = static_cast<double>(exceed) / runs;
  const double limit = 0.05 + 3 * theory::binomial_se(0.05, runs);
  const double bounded_frac = static_cast<double>(bounded) / std::max(healthy, 1);
  return {frac <= limit && bounded_frac >= 0.95,
          "runs exceeding C_X=" + fmt(c_x) + ": " + fmt(frac) + " (<= " + fmt(limit) +
              "), phases with ||H_i|| <= 3||H_1||: " + fmt(bounded_frac) + " of " +
              std::to_string(healthy) + " (>= 0.95)"};
}

Outcome Criterion10(const fs::path& out) {
  const fs::path a = out / "c10a", b = out / "c10b";
  Criterion6Run(a);
  Criterion6Run(b);
  bool same = true;
  for (const char* f : {"results.csv", "summary.csv"}) {
    const std::string x = ReadFile(a / f), y = ReadFile(b / f);
    same = same && !x.empty() && x == y;
  }
  std::ostringstream s1, s2;
  write_sweep_csv(s1, Criterion5Sweep());
  write_sweep_csv(s2, Criterion5Sweep());
  same = same && s1.str() == s2.str();
  return {same, same ? "experiment and sweep CSVs byte-identical across reruns"
                     : "CSV bytes differ between reruns"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance_out";
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else {
      selected.push_back(std::stoi(arg));
    }
  }
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  struct Entry {
    std::function<Outcome(const fs::path&)> run;
    double budget_seconds;
  };
  const std::vector<Entry> criteria{
      {Criterion1, 10},   {Criterion2, 120},  {Criterion3, 300}, {Criterion4, 600},
      {Criterion5, 1800}, {Criterion6, 900},  {Criterion7, 300}, {Criterion8, 300},
      {Criterion9, 600},  {Criterion10, 1800},
  };

  fs::create_directories(out);
  int failures = 0;
  for (int c : selected) {
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << c << "\n";
      return 2;
    }
    const auto& entry = criteria[static_cast<std::size_t>(c - 1)];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.run(out);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < entry.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d: %s  %s; %.1f s (< %.0f s)\n", c, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, entry.budget_seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
