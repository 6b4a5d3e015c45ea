#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

namespace mflq {

/// Independent random streams derived from one master seed. Keeping process
/// noise and exploration on separate streams keyed by the step index means two
/// algorithms run with the same seed see identical noise and differ only
/// through their actions.
enum class Stream : std::uint64_t {
  kProcessNoise = 1,
  kExploration = 2,
  kReference = 3,
  kPosterior = 4,
  kMonteCarlo = 5,
  kPolicyDraw = 6,
};

/// xoshiro256** seeded through splitmix64. Normals come from the Box-Muller
/// transform of 53-bit uniforms, so sequences are reproducible bit for bit on
/// a given platform (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Generator for a (seed, stream, index) key. Cheap enough to build per step.
  static Rng keyed(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  Eigen::VectorXd normals(Eigen::Index count);

 private:
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace mflq
