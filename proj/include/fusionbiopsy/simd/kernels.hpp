#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

// Double-precision inner loops shared by the image-quality, pooling and
// scorer code. Every variant accumulates reductions in four interleaved lanes
// (element i goes to lane i % 4 for the largest multiple-of-4 prefix),
// combines them as (l0 + l1) + (l2 + l3), then adds the tail in order. With
// contraction disabled this makes the scalar reference and the vector
// variants bit-identical, so results never depend on the host CPU.

namespace fusionbiopsy::simd {

struct KernelTable {
  std::string_view name;
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_sq_diff)(const double* x, const double* y, std::size_t n);
  /// y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// out[i] = x[i] * y[i]
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when not compiled in or not supported by this CPU.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Every variant usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

/// Best available variant, chosen once. FUSIONBIOPSY_SIMD=scalar forces the
/// reference kernels.
const KernelTable& active_kernels();

inline double sum(std::span<const double> x) { return active_kernels().sum(x.data(), x.size()); }
double dot(std::span<const double> x, std::span<const double> y);
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void mul(std::span<const double> x, std::span<const double> y, std::span<double> out);

}  // namespace fusionbiopsy::simd
