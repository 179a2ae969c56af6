#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace langsup {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;

// Named sub-seed: splitmix64(global ^ fnv1a64(stage)). Changing the seed of
// one stage never perturbs another.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) noexcept;

/// Portable deterministic generator.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard.
/// The std:: distributions are not (their algorithms are implementation
/// defined), so uniform integers use rejection sampling and normals use
/// Box-Muller on the raw 64-bit stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace langsup
