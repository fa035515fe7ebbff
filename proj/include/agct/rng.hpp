#pragma once

#include <cstdint>
#include <random>

namespace agct {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of replication `rep` in a study seeded with `base`.
inline std::uint64_t replication_seed(std::uint64_t base, std::uint64_t rep) { return splitmix64(base ^ rep); }

/// mt19937_64 with a portable uniform draw (std distributions differ across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

  /// Index drawn from the probability row p (inverse CDF).
  template <typename Row>
  std::size_t categorical(const Row& p) {
    const double u = uniform();
    double acc = 0.0;
    const std::size_t k = p.size();
    for (std::size_t a = 0; a + 1 < k; ++a) {
      acc += p[a];
      if (u < acc) return a;
    }
    return k - 1;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace agct
