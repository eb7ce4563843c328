#pragma once

#include <cstdint>
#include <random>

namespace splinemsm {

// Deterministic random source.  A (seed, stream) pair fully determines the
// sequence on every platform: the two words are mixed through splitmix64 into
// a single mt19937_64 seed, and variates are produced by inverse-CDF
// transforms of 53-bit uniforms, so no distribution code from <random> (whose
// algorithms vary across standard libraries) is involved.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(mix(seed, stream)) {}

  // Uniform on the open interval (0,1); safe to feed into inverse CDFs.
  double uniform() {
    const std::uint64_t bits = engine_() >> 11;  // top 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  // Standard normal via the inverse CDF.
  double normal();

  std::uint64_t raw() { return engine_(); }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
  }

  std::mt19937_64 engine_;
};

}  // namespace splinemsm
