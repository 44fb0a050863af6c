#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "fusionbiopsy/core.hpp"
#include "fusionbiopsy/random.hpp"

namespace fusionbiopsy::generators {

enum class GeneratorKind { Identity, LinearPerImage, External };

/// View-specific synthetic-CESM generator.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Identity;
  View view = View::CC;
  /// Global affine map for LinearPerImage when no paired target is available.
  double gain = 1.0;
  double offset = 0.0;
  /// External: pattern with {root}, {patient_id}, {laterality}, {view}; a
  /// ".pgm|png" suffix means "try .pgm, then .png".
  std::string path_pattern;
  std::filesystem::path root;
  /// Additive Gaussian degradation applied after generation (0 disables).
  double noise_sigma = 0.0;
};

struct GenerationContext {
  RecordKey record;
  /// Paired real CESM, when one exists, for per-image LinearPerImage fits.
  const GrayImage* paired_target = nullptr;
  /// Noise stream for this (record, view); required when noise_sigma > 0.
  std::optional<SeedPath> noise_seed;
};

/// Least-squares (gain, offset) minimizing |gain*x + offset - y|^2.
/// A constant x yields gain 0, offset mean(y).
std::pair<double, double> fit_affine(std::span<const double> x, std::span<const double> y);

/// Pooled fit over many pairs; used to set a LinearPerImage generator's global map.
std::pair<double, double> fit_affine_pooled(std::span<const std::pair<const GrayImage*, const GrayImage*>> pairs);

std::filesystem::path external_path(const GeneratorSpec& spec, const RecordKey& record, std::string_view ext);

/// Produces X^_{C,v} from X_{F,v}: same shape, clipped to [0,1].
GrayImage generate(const GeneratorSpec& gen, const GrayImage& ffdm, const GenerationContext& ctx);

/// Quality of a synthetic image against its real target.
struct GenQuality {
  double mse = 0.0;
  /// 10 log10(max(target)^2 / mse); +inf when mse == 0 (psnr_infinite set).
  double psnr = 0.0;
  bool psnr_infinite = false;
  double ssim = 0.0;
};

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double b1 = 0.01 * 0.01;
  double b2 = 0.03 * 0.03;
};

double mse(const GrayImage& a, const GrayImage& b);
/// Mean SSIM over all valid window centers (windows fully inside the image),
/// Gaussian-weighted local statistics.
double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& params = {});
std::vector<double> gaussian_window(std::size_t size, double sigma);

/// Throws ShapeMismatch, or UndefinedMax when max(target) == 0 and mse > 0.
GenQuality eval_generation(const GrayImage& synth, const GrayImage& target);

}  // namespace fusionbiopsy::generators
