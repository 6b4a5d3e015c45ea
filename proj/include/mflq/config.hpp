#pragma once

// Experiment configuration: JSON (comments allowed) with matrices as row lists.
//
//   {
//     "system": "dean2017",          // or {"A": [[..]], "B": [[..]], ...}
//     "algorithm": ["mflq_v2", "lspi"],
//     "T": 50000,
//     "xi": 0.0,
//     "T_s": 10,                      // v1 exploration period
//     "seeds": {"start": 0, "count": 100},
//     "sigma_a": 1.0,                 // scalar times I, or a matrix
//     "initial_policy_scale": 200,
//     "output": "results"
//   }

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mflq/lq_env.hpp"
#include "mflq/mflq.hpp"

namespace mflq {

enum class Algorithm { kMflqV1, kMflqV2, kMflqV3, kLspi, kRlsvi, kModelBased, kOracle };

std::string to_string(Algorithm a);
/// Throws ConfigError (field "algorithm") on an unknown name.
Algorithm parse_algorithm(std::string_view name);
const std::vector<Algorithm>& all_algorithms();

struct ExperimentConfig {
  std::string system_name = "inline";
  LqSystem system;
  std::vector<Algorithm> algorithms;
  Index horizon = 0;
  double xi = 0.0;
  Index exploration_period = kDefaultExplorationPeriod;
  std::vector<std::uint64_t> seeds;
  MatrixXd action_cov;
  double initial_policy_scale = 200.0;
  EstimateSource estimates = EstimateSource::kSampled;
  bool unknown_noise = false;
  Index burn_in = kDefaultBurnIn;
  std::string output = "results";
};

/// Names accepted for "system".
std::vector<std::string> builtin_system_names();

struct BuiltinSystem {
  LqSystem system;
  double sigma_a = 1.0;  ///< default exploration covariance is sigma_a * I
};

/// Throws ConfigError (field "system") for an unknown name.
BuiltinSystem builtin_system(std::string_view name);

/// Parses and validates. `origin` only labels error messages.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace mflq
