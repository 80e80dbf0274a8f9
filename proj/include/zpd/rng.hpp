#pragma once
// Portable seeded randomness used everywhere a seed appears in a file format
// or manifest. The generator is SplitMix64 (Vigna, public domain), fixed here
// so that splits, candidate pools, and schedules are reproducible from the
// recorded seed across implementations:
//
//   state += 0x9E3779B97F4A7C15
//   z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   output = z ^ (z >> 31)
//
// Derived primitives (all specified, none delegated to the standard library):
//   * next_double():  (next() >> 11) * 2^-53, uniform in [0, 1)
//   * next_below(n):  unbiased via rejection on the top multiple of n
//   * shuffle():      Fisher-Yates from the back, j = next_below(i + 1)
//   * next_normal():  Box-Muller on (u1, u2], cached spare
//   * derive_seed():  stream splitting for per-stage / per-config seeds

#include <cmath>
#include <cstdint>
#include <vector>

namespace zpd {

class SplitMix64 {
public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t next_below(uint64_t n) {
    const uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      const uint64_t x = next();
      if (x >= threshold) return x % n;
    }
  }

  // Standard normal via Box-Muller; u1 is forced into (0, 1].
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Deterministic sub-seed for stream `stream` of a master seed.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  return g.next();
}

}  // namespace zpd
