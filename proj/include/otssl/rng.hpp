#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "otssl/errors.hpp"

namespace otssl {

// splitmix64 finalizer (Vigna). Used both as a bit mixer for seed
// derivation and as the canonical 64-bit hash combiner of the project.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream-splitting rule: every independent random stream is seeded by
// folding a key sequence into the parent seed, one splitmix64 round per
// key. derive(seed, k) == derive(seed, k') only if k == k', and streams
// derived from distinct key tuples are unrelated for practical purposes.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(seed ^ splitmix64(key));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2) {
  return derive_seed(derive_seed(seed, k1), k2);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2,
                                 std::uint64_t k3) {
  return derive_seed(derive_seed(seed, k1, k2), k3);
}

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is fully pinned by the C++ standard; the distributions below are
// implemented here (not via <random> adaptors, which are implementation
// defined) so that identical seeds give identical draws on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia-style unbiased bounded draw in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw config_error("Rng::next_below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; one spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates with the bounded draw above; std::shuffle is not
  // reproducible across standard library implementations.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace otssl
