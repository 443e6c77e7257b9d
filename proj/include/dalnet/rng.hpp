#pragma once

#include <cstdint>
#include <random>

namespace dalnet {

/// Seedable 64-bit generator. Uniform and Gaussian draws are derived from the
/// raw mt19937_64 stream (whose output sequence is fixed by the standard), so a
/// seed reproduces the same values on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Seed for an independent stream keyed by (seed, stream).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace dalnet
