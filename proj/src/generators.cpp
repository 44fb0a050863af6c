#include "fusionbiopsy/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fusionbiopsy/raster.hpp"
#include "fusionbiopsy/simd/kernels.hpp"

namespace fusionbiopsy::generators {

std::pair<double, double> fit_affine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw Error(ErrorCode::ShapeMismatch, "fit_affine: size mismatch");
  const double n = static_cast<double>(x.size());
  const double mx = simd::sum(x) / n;
  const double my = simd::sum(y) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return {0.0, my};
  const double gain = sxy / sxx;
  return {gain, my - gain * mx};
}

std::pair<double, double> fit_affine_pooled(std::span<const std::pair<const GrayImage*, const GrayImage*>> pairs) {
  std::vector<double> xs, ys;
  for (const auto& [x, y] : pairs) {
    if (x->width() != y->width() || x->height() != y->height()) {
      throw Error(ErrorCode::ShapeMismatch, "fit_affine_pooled: pair shapes differ");
    }
    xs.insert(xs.end(), x->pixels().begin(), x->pixels().end());
    ys.insert(ys.end(), y->pixels().begin(), y->pixels().end());
  }
  if (xs.empty()) return {1.0, 0.0};
  return fit_affine(xs, ys);
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

GrayImage load_external(const GeneratorSpec& gen, const GrayImage& ffdm, const RecordKey& record) {
  std::vector<std::filesystem::path> candidates;
  const std::string& pat = gen.path_pattern;
  if (pat.ends_with(".pgm|png")) {
    candidates.push_back(external_path(gen, record, ".pgm"));
    candidates.push_back(external_path(gen, record, ".png"));
  } else {
    candidates.push_back(external_path(gen, record, ""));
  }
  for (const auto& path : candidates) {
    if (!std::filesystem::exists(path)) continue;
    Raster raster = read_raster(path);
    if (raster.image.width() != ffdm.width() || raster.image.height() != ffdm.height()) {
      throw Error(ErrorCode::ShapeMismatch, "external synthetic image " + path.string() + " has shape " +
                                                std::to_string(raster.image.width()) + "x" +
                                                std::to_string(raster.image.height()));
    }
    std::vector<double> px(raster.image.pixels().begin(), raster.image.pixels().end());
    const double scale = 1.0 / static_cast<double>(raster.maxval);
    for (double& v : px) v *= scale;
    return GrayImage(ffdm.width(), ffdm.height(), std::move(px));
  }
  throw Error(ErrorCode::MissingExternalImage, "no synthetic image for " + to_string(record) + " view " +
                                                   std::string(to_string(gen.view)) + " (tried " +
                                                   candidates.front().string() + ")");
}

}  // namespace

std::filesystem::path external_path(const GeneratorSpec& spec, const RecordKey& record, std::string_view ext) {
  std::string p = spec.path_pattern.empty() ? "{root}/{patient_id}_{laterality}_{view}.pgm|png"
                                            : spec.path_pattern;
  if (p.ends_with(".pgm|png")) p.resize(p.size() - std::string_view(".pgm|png").size());
  replace_all(p, "{root}", spec.root.string());
  replace_all(p, "{patient_id}", record.patient_id);
  replace_all(p, "{laterality}", to_string(record.laterality));
  replace_all(p, "{view}", to_string(spec.view));
  return std::filesystem::path(p + std::string(ext));
}

GrayImage generate(const GeneratorSpec& gen, const GrayImage& ffdm, const GenerationContext& ctx) {
  std::vector<double> out;
  switch (gen.kind) {
    case GeneratorKind::Identity:
      out.assign(ffdm.pixels().begin(), ffdm.pixels().end());
      break;
    case GeneratorKind::LinearPerImage: {
      auto [gain, offset] = std::pair{gen.gain, gen.offset};
      if (ctx.paired_target) {
        if (ctx.paired_target->width() != ffdm.width() || ctx.paired_target->height() != ffdm.height()) {
          throw Error(ErrorCode::ShapeMismatch, "paired target shape differs from input");
        }
        std::tie(gain, offset) = fit_affine(ffdm.pixels(), ctx.paired_target->pixels());
      }
      out.assign(ffdm.pixels().begin(), ffdm.pixels().end());
      for (double& v : out) v = gain * v + offset;
      break;
    }
    case GeneratorKind::External: {
      GrayImage loaded = load_external(gen, ffdm, ctx.record);
      out.assign(loaded.pixels().begin(), loaded.pixels().end());
      break;
    }
  }
  if (gen.noise_sigma > 0.0) {
    if (!ctx.noise_seed) throw Error(ErrorCode::Internal, "generator noise requested without a seed");
    RandomStream rng = derive_rng(*ctx.noise_seed);
    for (double& v : out) v += gen.noise_sigma * rng.normal();
  }
  for (double& v : out) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return GrayImage(ffdm.width(), ffdm.height(), std::move(out), true);
}

// ---------------------------------------------------------------------------
// Quality metrics

namespace {

void require_same_shape(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::ShapeMismatch, "images differ in shape");
  }
}

/// Separable 'valid' filtering: out is (h-k+1) x (w-k+1).
std::vector<double> filter_valid(std::span<const double> img, std::size_t w, std::size_t h,
                                 std::span<const double> kernel) {
  const std::size_t k = kernel.size();
  const std::size_t ow = w - k + 1, oh = h - k + 1;
  std::vector<double> horiz(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    std::span<double> dst(horiz.data() + r * ow, ow);
    for (std::size_t t = 0; t < k; ++t) simd::axpy(kernel[t], img.subspan(r * w + t, ow), dst);
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r) {
    std::span<double> dst(out.data() + r * ow, ow);
    for (std::size_t t = 0; t < k; ++t) {
      simd::axpy(kernel[t], std::span<const double>(horiz.data() + (r + t) * ow, ow), dst);
    }
  }
  return out;
}

}  // namespace

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

double mse(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b);
  return simd::sum_sq_diff(a.pixels(), b.pixels()) / static_cast<double>(a.pixels().size());
}

double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& params) {
  require_same_shape(a, b);
  const std::size_t w = a.width(), h = a.height(), k = params.window;
  if (w < k || h < k) {
    throw Error(ErrorCode::ShapeMismatch, "SSIM needs images of at least " + std::to_string(k) + " pixels per side");
  }
  const std::vector<double> kernel = gaussian_window(k, params.sigma);
  const std::size_t n = w * h;
  std::vector<double> aa(n), bb(n), ab(n);
  simd::mul(a.pixels(), a.pixels(), aa);
  simd::mul(b.pixels(), b.pixels(), bb);
  simd::mul(a.pixels(), b.pixels(), ab);

  const auto mu_a = filter_valid(a.pixels(), w, h, kernel);
  const auto mu_b = filter_valid(b.pixels(), w, h, kernel);
  const auto e_aa = filter_valid(aa, w, h, kernel);
  const auto e_bb = filter_valid(bb, w, h, kernel);
  const auto e_ab = filter_valid(ab, w, h, kernel);

  std::vector<double> map(mu_a.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    map[i] = ((2.0 * ma * mb + params.b1) * (2.0 * cov + params.b2)) /
             ((ma * ma + mb * mb + params.b1) * (va + vb + params.b2));
  }
  return simd::sum(map) / static_cast<double>(map.size());
}

GenQuality eval_generation(const GrayImage& synth, const GrayImage& target) {
  require_same_shape(synth, target);
  GenQuality q;
  q.mse = mse(target, synth);
  const double peak = target.max();
  if (q.mse == 0.0) {
    q.psnr = std::numeric_limits<double>::infinity();
    q.psnr_infinite = true;
  } else if (peak == 0.0) {
    throw Error(ErrorCode::UndefinedMax, "PSNR undefined: target maximum is 0");
  } else {
    q.psnr = 10.0 * std::log10(peak * peak / q.mse);
  }
  q.ssim = ssim(target, synth);
  return q;
}

}  // namespace fusionbiopsy::generators
