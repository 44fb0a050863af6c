#include "fusionbiopsy/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace fusionbiopsy::preprocess {

void PreprocessConfig::validate() const {
  if (!(stretch_lo_percentile >= 0.0 && stretch_lo_percentile < stretch_hi_percentile &&
        stretch_hi_percentile <= 100.0)) {
    throw Error(ErrorCode::InvalidConfig, "preprocess: need 0 <= lo < hi <= 100 percentiles");
  }
  if (target_size < 8) throw Error(ErrorCode::InvalidConfig, "preprocess: target_size must be >= 8");
  if (!(border_frac > 0.0 && border_frac <= 0.25)) {
    throw Error(ErrorCode::InvalidConfig, "preprocess: border_frac must be in (0, 0.25]");
  }
}

void AugmentConfig::validate() const {
  if (!(shift_frac >= 0.0 && zoom_frac >= 0.0 && rot_deg >= 0.0) || zoom_frac >= 1.0) {
    throw Error(ErrorCode::InvalidConfig, "augment: ranges must be non-negative (zoom_frac < 1)");
  }
}

double background_value(const GrayImage& img, double border_frac) {
  const std::size_t w = img.width(), h = img.height();
  std::size_t band = static_cast<std::size_t>(std::ceil(border_frac * static_cast<double>(std::min(w, h))));
  band = std::clamp<std::size_t>(band, 1, std::min(w, h));
  // Columns are summed in mirrored pairs so a horizontally flipped image
  // yields the bit-identical value.
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < h; ++r) {
    const bool edge_row = r < band || r + band >= h;
    double row_total = 0.0;
    for (std::size_t c = 0; c < (w + 1) / 2; ++c) {
      const std::size_t m = w - 1 - c;
      if (!(edge_row || c < band)) continue;  // c < band iff m is in the right band
      if (m == c) {
        row_total += img.at(r, c);
        count += 1;
      } else {
        row_total += img.at(r, c) + img.at(r, m);
        count += 2;
      }
    }
    total += row_total;
  }
  return total / static_cast<double>(count);
}

GrayImage pad_square(const GrayImage& img, const PreprocessConfig& cfg, PadExtra extra) {
  const std::size_t w = img.width(), h = img.height();
  if (w == h) return img;
  const std::size_t side = std::max(w, h);
  const std::size_t slack = side - std::min(w, h);
  // Rows always take the odd pixel at the bottom; only columns honor `extra`.
  const std::size_t off_c = w < h ? (extra == PadExtra::Trailing ? slack / 2 : slack - slack / 2) : 0;
  const std::size_t off_r = h < w ? slack / 2 : 0;

  GrayImage out(side, side, background_value(img, cfg.border_frac), img.normalized());
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(img.row(r).begin(), w, out.pixels().begin() + (r + off_r) * side + off_c);
  }
  return out;
}

namespace {

double percentile(const std::vector<double>& sorted, double pct) {
  const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

GrayImage contrast_stretch(const GrayImage& img, const PreprocessConfig& cfg) {
  std::vector<double> sorted(img.pixels().begin(), img.pixels().end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = percentile(sorted, cfg.stretch_lo_percentile);
  const double hi = percentile(sorted, cfg.stretch_hi_percentile);
  const double top = sorted.back();
  if (!(hi > lo) || !(top > 0.0)) return img;

  const double scale = top / (hi - lo);
  std::vector<double> out(img.pixels().begin(), img.pixels().end());
  for (double& v : out) v = std::clamp((v - lo) * scale, 0.0, top);
  return GrayImage(img.width(), img.height(), std::move(out), false);
}

GrayImage normalize_unit(const GrayImage& img) {
  if (img.normalized()) return img;
  if (img.min() < 0.0) throw Error(ErrorCode::InvalidImage, "normalize_unit: negative intensities");
  const double top = img.max();
  std::vector<double> out(img.pixels().begin(), img.pixels().end());
  if (top > 0.0) {
    for (double& v : out) v = std::min(v / top, 1.0);
  }
  return GrayImage(img.width(), img.height(), std::move(out), true);
}

namespace {

/// Bilinear sample at continuous (x, y) in pixel-center coordinates, clamped to the frame.
double sample_clamped(const GrayImage& img, double x, double y) {
  const double maxx = static_cast<double>(img.width() - 1);
  const double maxy = static_cast<double>(img.height() - 1);
  x = std::clamp(x, 0.0, maxx);
  y = std::clamp(y, 0.0, maxy);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
  const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

}  // namespace

namespace {

struct Tap {
  std::size_t i0, i1;
  double w0, w1;
};

/// Half-pixel-centered taps for resampling `in` samples to `out` samples.
/// The table is mirror-symmetric by construction (tap out-1-k is the mirror
/// of tap k), which makes resizing commute exactly with flips.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double last = static_cast<double>(in - 1);
  std::vector<Tap> taps(out);
  for (std::size_t k = 0; k < (out + 1) / 2; ++k) {
    double x = (static_cast<double>(k) + 0.5) * scale - 0.5;
    if (2 * k + 1 == out) x = last / 2.0;  // exact center
    x = std::clamp(x, 0.0, last);
    const auto i0 = static_cast<std::size_t>(std::floor(x));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double f = x - static_cast<double>(i0);
    taps[k] = {i0, i1, 1.0 - f, f};
    taps[out - 1 - k] = {in - 1 - i1, in - 1 - i0, f, 1.0 - f};
  }
  if (out % 2 == 1) {
    // The center tap must equal its own mirror; restore the direct form.
    const std::size_t k = out / 2;
    const double x = last / 2.0;
    const auto i0 = static_cast<std::size_t>(std::floor(x));
    const double f = x - static_cast<double>(i0);
    taps[k] = {i0, std::min(i0 + 1, in - 1), 1.0 - f, f};
  }
  return taps;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& img, std::size_t side) {
  if (!img.square()) throw Error(ErrorCode::NotSquare, "resize_bilinear: input must be square");
  if (side == 0) throw Error(ErrorCode::InvalidImage, "resize_bilinear: zero target side");
  if (side == img.width()) return img;

  const std::vector<Tap> taps = bilinear_taps(img.width(), side);
  const double lo = img.min(), hi = img.max();
  std::vector<double> out(side * side);
  for (std::size_t r = 0; r < side; ++r) {
    const Tap& ty = taps[r];
    for (std::size_t c = 0; c < side; ++c) {
      const Tap& tx = taps[c];
      const double top = img.at(ty.i0, tx.i0) * tx.w0 + img.at(ty.i0, tx.i1) * tx.w1;
      const double bottom = img.at(ty.i1, tx.i0) * tx.w0 + img.at(ty.i1, tx.i1) * tx.w1;
      // Convex weights can still round a hair outside [lo, hi].
      out[r * side + c] = std::clamp(top * ty.w0 + bottom * ty.w1, lo, hi);
    }
  }
  return GrayImage(side, side, std::move(out), img.normalized());
}

GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out = img;
  for (std::size_t r = 0; r < img.height(); ++r) {
    auto row = out.pixels().subspan(r * img.width(), img.width());
    std::reverse(row.begin(), row.end());
  }
  return out;
}

GrayImage flip_to_right(const GrayImage& img, Laterality lat) {
  return lat == Laterality::Left ? flip_horizontal(img) : img;
}

GrayImage preprocess(const GrayImage& img, Laterality lat, const PreprocessConfig& cfg) {
  cfg.validate();
  // Left images get the odd padding pixel on the leading side so that the
  // final flip lands it where a Right image has it.
  const PadExtra extra = lat == Laterality::Left ? PadExtra::Leading : PadExtra::Trailing;
  GrayImage out = pad_square(img, cfg, extra);
  out = contrast_stretch(out, cfg);
  out = normalize_unit(out);
  out = resize_bilinear(out, cfg.target_size);
  return flip_to_right(out, lat);
}

GrayImage apply_affine(const GrayImage& img, const AffineParams& params, double fill) {
  const std::size_t w = img.width(), h = img.height();
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double inv_zoom = 1.0 / params.zoom;
  const double maxx = static_cast<double>(w - 1), maxy = static_cast<double>(h - 1);
  constexpr double kEdgeTol = 1e-9;

  std::vector<double> out(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      // Output = R(theta) * zoom * (source - center) + center + shift; invert it.
      const double ux = (static_cast<double>(c) - cx - params.shift_x) * inv_zoom;
      const double uy = (static_cast<double>(r) - cy - params.shift_y) * inv_zoom;
      const double sx = cos_t * ux + sin_t * uy + cx;
      const double sy = -sin_t * ux + cos_t * uy + cy;
      double v = fill;
      if (sx >= -kEdgeTol && sx <= maxx + kEdgeTol && sy >= -kEdgeTol && sy <= maxy + kEdgeTol) {
        v = sample_clamped(img, sx, sy);
      }
      out[r * w + c] = v;
    }
  }
  if (img.normalized()) {
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  }
  return GrayImage(w, h, std::move(out), img.normalized());
}

AffineParams draw_augmentation(const AugmentConfig& cfg, std::size_t side, RandomStream& rng) {
  const double extent = static_cast<double>(side);
  AffineParams p;
  p.shift_x = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * extent;
  p.shift_y = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * extent;
  p.zoom = 1.0 + rng.uniform(-cfg.zoom_frac, cfg.zoom_frac);
  p.rotation_deg = rng.uniform(-cfg.rot_deg, cfg.rot_deg);
  return p;
}

GrayImage augment(const GrayImage& img, const AugmentConfig& cfg, RandomStream& rng) {
  cfg.validate();
  const AffineParams params = draw_augmentation(cfg, std::max(img.width(), img.height()), rng);
  const double fill = background_value(img, PreprocessConfig{}.border_frac);
  return apply_affine(img, params, fill);
}

}  // namespace fusionbiopsy::preprocess
