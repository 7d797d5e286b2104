#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bifamp {

// Stream identifiers for seed derivation. Every consumer of randomness
// draws from its own substream so that, e.g., toggling the completion mask
// does not change the generated F0, X0.
enum class Stream : std::uint64_t {
  factor = 1,
  signal = 2,
  channel_noise = 3,
  mask = 4,
  row_variances = 5,
  calibration_noise = 6,
  amp_init = 7,
  schedule = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream));
}

// mt19937_64 has a fully specified bit stream; the distributions below are
// written out explicitly so draws are reproducible across standard
// libraries as well.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream) : engine_(derive_seed(seed, stream)) {}

  // uniform in [0, 1)
  double uniform() {
    return (engine_() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; caches the second draw
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t bits() { return engine_(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection to avoid modulo bias
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bifamp
