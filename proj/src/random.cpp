#include "fusionbiopsy/random.hpp"

#include <cmath>
#include <numbers>

namespace fusionbiopsy {
namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(const SeedPath& path) {
  std::uint64_t h = splitmix64(path.root_seed);
  for (const auto& [label, index] : path.steps) {
    // Length prefix keeps ("ab",1) and ("a",...) sequences unambiguous.
    h = splitmix64(h ^ label.size());
    for (unsigned char ch : label) h = splitmix64(h ^ ch);
    h = splitmix64(h ^ static_cast<std::uint64_t>(index));
  }
  return h;
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  // Rejection sampling on the top of the range.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double RandomStream::normal() {
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RandomStream derive_rng(const SeedPath& path) { return RandomStream(derive_seed(path)); }

}  // namespace fusionbiopsy
