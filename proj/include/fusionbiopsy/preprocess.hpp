#pragma once

#include <cstddef>

#include "fusionbiopsy/core.hpp"
#include "fusionbiopsy/random.hpp"

namespace fusionbiopsy::preprocess {

struct PreprocessConfig {
  std::size_t target_size = 256;
  double stretch_lo_percentile = 1.0;
  double stretch_hi_percentile = 99.0;
  /// Width of the border band used to estimate background, as a fraction of min(w, h).
  double border_frac = 0.02;

  /// Throws InvalidConfig when out of range.
  void validate() const;
};

struct AugmentConfig {
  double shift_frac = 0.10;
  double zoom_frac = 0.10;
  double rot_deg = 15.0;

  void validate() const;
};

/// Which side receives the odd pixel when padding columns. Row padding
/// always puts it at the bottom.
enum class PadExtra { Trailing, Leading };

/// Mean intensity over the border band of width ceil(border_frac * min(w, h)), at least 1.
double background_value(const GrayImage& img, double border_frac);

/// Pads to a square of side max(w, h) with the background value, content
/// centered along the padded axis.
GrayImage pad_square(const GrayImage& img, const PreprocessConfig& cfg,
                     PadExtra extra = PadExtra::Trailing);

/// Linear percentile stretch: the lo-percentile maps to 0 and the
/// hi-percentile to the input's maximum, clipping outside. Percentiles use
/// linear interpolation between order statistics. Degenerate spreads return
/// the input unchanged.
GrayImage contrast_stretch(const GrayImage& img, const PreprocessConfig& cfg);

/// Divides by the maximum (all-zero stays zero) and sets the normalized flag.
/// Already-normalized input is returned as is.
GrayImage normalize_unit(const GrayImage& img);

/// Bilinear resize of a square image, half-pixel centers, edge clamped.
GrayImage resize_bilinear(const GrayImage& img, std::size_t side);

GrayImage flip_horizontal(const GrayImage& img);
/// Mirrors Left images so every breast faces the same way; Right passes through.
GrayImage flip_to_right(const GrayImage& img, Laterality lat);

/// pad_square -> contrast_stretch -> normalize_unit -> resize_bilinear -> flip_to_right.
GrayImage preprocess(const GrayImage& img, Laterality lat, const PreprocessConfig& cfg);

/// One concrete geometric transform, parameters in output-pixel units.
struct AffineParams {
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;  // pixels
  double zoom = 1.0;
  double rotation_deg = 0.0;
};

/// Inverse-maps every output pixel about the image center and samples
/// bilinearly; samples falling outside the frame take `fill`.
GrayImage apply_affine(const GrayImage& img, const AffineParams& params, double fill);

/// Draws shift (per axis), zoom and rotation uniformly within the configured
/// ranges, in that order, from `rng`.
AffineParams draw_augmentation(const AugmentConfig& cfg, std::size_t side, RandomStream& rng);

/// Random augmentation with background-filled borders.
GrayImage augment(const GrayImage& img, const AugmentConfig& cfg, RandomStream& rng);

}  // namespace fusionbiopsy::preprocess
