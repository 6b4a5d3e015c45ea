#pragma once

// Fixed-seed Monte Carlo suites over the theory module, driven by `mflq verify`.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mflq {

struct CheckResult {
  std::string suite;
  std::string name;
  double statistic = 0.0;
  double bound = 0.0;
  std::string relation;  ///< how statistic is compared with bound, e.g. "<="
  bool pass = false;
};

struct VerifyOptions {
  std::uint64_t seed = 20180101;
  bool inject_failure = false;  ///< flips every verdict, to exercise the reporting path
};

/// moments, small-ball, mixing, blocks, gram, state-bounds.
const std::vector<std::string>& verify_suites();

/// Runs one suite or "all". Throws DomainError for an unknown name.
std::vector<CheckResult> run_verify(std::string_view suite, const VerifyOptions& options = {});

void print_checks(std::ostream& out, const std::vector<CheckResult>& checks);

}  // namespace mflq
