#pragma once

#include <cstdint>
#include <random>

// Deterministic random draws.  The engine is std::mt19937_64, whose output
// sequence is fully specified by the standard, and every transformation to
// a target distribution is implemented here rather than through
// std::*_distribution (whose algorithms are implementation defined).  Two
// builds on different toolchains therefore produce bit-identical streams,
// which the experiment logs rely on.

namespace ggtde {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_open() { return 1.0 - uniform(); }

  // Integer uniform on [0, n) by rejection; unbiased for any n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller; generates draws in pairs and caches
  // the second one.
  double normal();

  // Gamma(shape, 1) via Marsaglia-Tsang squeeze; boosts shape < 1 with
  // the standard power-of-uniform identity.
  double gamma_draw(double shape);

  // A decorrelated child stream, for components that must not perturb
  // each other's draw sequences (env noise vs. replay sampling etc.).
  Rng split(std::uint64_t stream) const;

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// SplitMix64 finalizer; good avalanche behavior for seed derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace ggtde
