#include <cstdlib>
#include <string>
#include <string_view>

#include "fusionbiopsy/error.hpp"
#include "kernels_internal.hpp"

namespace fusionbiopsy::simd {

const KernelTable* avx2_kernels() {
#if defined(FUSIONBIOPSY_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(FUSIONBIOPSY_HAVE_NEON)
  return &detail::neon_table();  // mandatory on AArch64
#else
  return nullptr;
#endif
}

namespace {

void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::LengthMismatch, "vector lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (auto* k = avx2_kernels()) out.push_back(k);
  if (auto* k = neon_kernels()) out.push_back(k);
  return out;
}

const KernelTable& active_kernels() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    if (const char* env = std::getenv("FUSIONBIOPSY_SIMD"); env && std::string_view(env) == "scalar") {
      return scalar_kernels();
    }
    if (auto* k = avx2_kernels()) return *k;
    if (auto* k = neon_kernels()) return *k;
    return scalar_kernels();
  }();
  return chosen;
}

double dot(std::span<const double> x, std::span<const double> y) {
  require_same(x.size(), y.size());
  return active_kernels().dot(x.data(), y.data(), x.size());
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y) {
  require_same(x.size(), y.size());
  return active_kernels().sum_sq_diff(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size());
  active_kernels().axpy(a, x.data(), y.data(), x.size());
}

void mul(std::span<const double> x, std::span<const double> y, std::span<double> out) {
  require_same(x.size(), y.size());
  require_same(x.size(), out.size());
  active_kernels().mul(x.data(), y.data(), out.data(), x.size());
}

}  // namespace fusionbiopsy::simd
