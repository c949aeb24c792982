#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace vecfl {

// Stable master-seed fan-out: component index -> substream seed.
// The mixing function is fixed forever so published configs stay
// reproducible: x = master + (index + 1) * golden gamma, then the
// splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t x = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

// Named substream indices for mix_seed. Frozen: appending is fine,
// renumbering is not.
namespace seed_stream {
inline constexpr std::uint64_t kScenario = 0;
inline constexpr std::uint64_t kRegistry = 1;
inline constexpr std::uint64_t kDataPool = 2;
inline constexpr std::uint64_t kDataVehicle = 3;
inline constexpr std::uint64_t kDataTest = 4;
inline constexpr std::uint64_t kRounds = 5;
inline constexpr std::uint64_t kSelection = 6;
inline constexpr std::uint64_t kNoise = 7;
inline constexpr std::uint64_t kDetection = 8;
inline constexpr std::uint64_t kDistill = 9;
inline constexpr std::uint64_t kPredictor = 10;
inline constexpr std::uint64_t kInstances = 11;
}  // namespace seed_stream

// Deterministic random source. The engine is std::mt19937_64 (bit-exact
// across platforms by the standard); all distributions are implemented
// here because the std:: distribution algorithms are not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; two uniforms per draw, no cached spare.
  double normal(double mean, double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * M_PI * u2);
  }

  // Knuth product method; normal approximation for large rates.
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda > 60.0) {
      const double v = std::round(normal(lambda, std::sqrt(lambda)));
      return v < 0.0 ? 0 : static_cast<int>(v);
    }
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // Unbiased integer in [0, n) by rejection.
  std::size_t index_below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("index_below: n must be > 0");
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= bound);
    return static_cast<std::size_t>(x % n);
  }

  // Index drawn with probability weights[i] / sum(weights).
  std::size_t weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("weighted_index: negative weight");
      total += w;
    }
    if (total <= 0.0) {
      throw std::invalid_argument("weighted_index: weights sum to zero");
    }
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vecfl
