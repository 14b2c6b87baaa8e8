#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace bellkit {

/// Seed value carried through every report so runs can be replayed.
struct RngSeed {
  std::uint64_t value = 0;
};

/// SplitMix64 finaliser. Used to derive independent child seeds
/// (per session, per Monte Carlo block) from a master seed.
std::uint64_t mix64(std::uint64_t z);

/// Child seed for stream `index` of `seed`. Distinct indices give
/// statistically unrelated streams.
RngSeed derive_seed(RngSeed seed, std::uint64_t index);

/// Deterministic generator used throughout the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard, so a seed reproduces the same draws on any conforming
/// platform. Conversions to doubles and bits are done here rather than
/// through <random> distributions, which are implementation-defined.
/// State can be saved to and restored from a string.
class Rng {
 public:
  explicit Rng(RngSeed seed);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) built from the top 53 bits of one draw.
  double uniform();

  /// One fair bit (top bit of one draw).
  int bit() { return static_cast<int>(engine_() >> 63); }

  std::string save() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace bellkit
