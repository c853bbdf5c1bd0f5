#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "arm3d/core.hpp"

namespace arm3d {

/// Seeded generator with platform-stable distributions.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not. Everything drawn here is derived from raw engine
/// output with fixed arithmetic so a seed reproduces bit-identically on any
/// conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  Scalar uniform() { return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53; }
  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller. Consumes two uniforms per call.
  Scalar normal();
  Scalar normal(Scalar mean, Scalar stddev) { return mean + stddev * normal(); }

  bool bernoulli(Scalar p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);
std::uint64_t derive_seed(std::uint64_t base, std::string_view salt);
/// FNV-1a over bytes.
std::uint64_t hash_string(std::string_view text);

}  // namespace arm3d
