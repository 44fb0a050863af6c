#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fusionbiopsy {

/// Names a random stream as a derivation path below a root seed, e.g.
/// root -> ("fold", 2) -> ("robust", 50) -> ("rep", 3). Distinct paths give
/// independent streams, so parallel tasks never share generator state.
struct SeedPath {
  std::uint64_t root_seed = 0;
  std::vector<std::pair<std::string, std::int64_t>> steps;

  SeedPath child(std::string label, std::int64_t index = 0) const {
    SeedPath p = *this;
    p.steps.emplace_back(std::move(label), index);
    return p;
  }

  bool operator==(const SeedPath&) const = default;
};

/// 64-bit key for a path; pure function of (root_seed, steps).
std::uint64_t derive_seed(const SeedPath& path);

/// Deterministic stream. Distribution helpers are implemented here rather
/// than via <random> distributions, whose output is library-specific.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller, one value per call).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

RandomStream derive_rng(const SeedPath& path);

}  // namespace fusionbiopsy
