// mflq: run learners, sweep horizons, check the theory suites, print bounds.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mflq/config.hpp"
#include "mflq/errors.hpp"
#include "mflq/experiment.hpp"
#include "mflq/verify.hpp"

namespace {

std::filesystem::path output_dir(const std::string& flag, const mflq::ExperimentConfig& cfg) {
  return flag.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free LQ control: experiments, sweeps and bound checks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed_offset = 0;
  unsigned jobs = 0;
  std::string out_dir;
  app.add_option("--seed-offset", seed_offset, "Added to every configured seed");
  app.add_option("--jobs", jobs, "Worker threads (0 = all cores)");
  app.add_option("--out", out_dir, "Output directory (overrides the config)");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run every configured algorithm and seed");
  run->add_option("config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);

  std::vector<std::int64_t> grid;
  auto* sweep = app.add_subcommand("sweep", "Repeat the experiment over a T grid");
  sweep->add_option("config", config_path, "Experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--T", grid, "Ascending horizons")->required()->delimiter(',');

  std::string suite;
  bool inject = false;
  auto* verify = app.add_subcommand("verify", "Monte Carlo checks of the theory module");
  verify->add_option("suite", suite, "moments | small-ball | mixing | blocks | gram | "
                                     "state-bounds | all")
      ->required();
  verify->add_flag("--inject-failure", inject, "Flip every verdict");

  double alpha = 0.0;
  double delta = 0.0;
  std::string policy = "initial";
  auto* bounds = app.add_subcommand("bounds", "Mixing and boundedness constants");
  bounds->add_option("config", config_path, "Experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  bounds->add_option("--alpha", alpha, "Geometric mixing rate in (rho, 1)")->required();
  bounds->add_option("--delta", delta, "Failure probability")->required();
  bounds->add_option("--policy", policy, "initial | optimal")
      ->check(CLI::IsMember({"initial", "optimal"}));

  CLI11_PARSE(app, argc, argv);

  const mflq::HarnessOptions harness{jobs, seed_offset};
  try {
    if (*run) {
      const auto cfg = mflq::load_config(config_path);
      const auto result = mflq::run_experiment(cfg, harness);
      const auto dir = output_dir(out_dir, cfg);
      mflq::write_experiment(dir, result);
      mflq::write_summary_csv(std::cout, result.summaries);
      return 0;
    }
    if (*sweep) {
      const auto cfg = mflq::load_config(config_path);
      std::vector<mflq::Index> horizons(grid.begin(), grid.end());
      const auto points = mflq::sweep(cfg, horizons, harness);
      const auto dir = output_dir(out_dir, cfg);
      std::filesystem::create_directories(dir);
      std::ofstream file(dir / "sweep.csv", std::ios::binary);
      if (!file) throw mflq::Error("cannot write " + (dir / "sweep.csv").string());
      mflq::write_sweep_csv(file, points);
      mflq::write_sweep_csv(std::cout, points);
      return 0;
    }
    if (*verify) {
      mflq::VerifyOptions opts;
      opts.seed += seed_offset;
      opts.inject_failure = inject;
      const auto checks = mflq::run_verify(suite, opts);
      mflq::print_checks(std::cout, checks);
      bool ok = true;
      for (const auto& c : checks) ok = ok && c.pass;
      return ok ? 0 : 1;
    }
    if (*bounds) {
      const auto cfg = mflq::load_config(config_path);
      const auto table = mflq::compute_bounds(
          cfg, policy == "optimal" ? mflq::BoundsPolicy::kOptimal : mflq::BoundsPolicy::kInitial,
          alpha, delta);
      mflq::write_bounds_text(std::cout, table);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream file(std::filesystem::path(out_dir) / "bounds.csv", std::ios::binary);
        mflq::write_bounds_csv(file, table);
      }
      return 0;
    }
  } catch (const mflq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
