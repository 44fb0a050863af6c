#include <gtest/gtest.h>

#include <cmath>

#include "fusionbiopsy/generators.hpp"
#include "fusionbiopsy/raster.hpp"
#include "test_util.hpp"

using namespace fusionbiopsy;
using namespace fusionbiopsy::generators;

namespace {

// Windowed SSIM evaluated directly at every fully-contained window, with a
// 2-D Gaussian built from scratch and centered second moments.
double ssim_oracle(const GrayImage& x, const GrayImage& y) {
  const int k = 11, half = 5;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  std::vector<double> g(k * k);
  double total = 0.0;
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v) {
      const double du = u - half, dv = v - half;
      g[u * k + v] = std::exp(-(du * du + dv * dv) / (2 * sigma * sigma));
      total += g[u * k + v];
    }
  for (double& w : g) w /= total;

  const int W = static_cast<int>(x.width()), H = static_cast<int>(x.height());
  double acc = 0.0;
  int count = 0;
  for (int r = half; r < H - half; ++r)
    for (int c = half; c < W - half; ++c) {
      double mx = 0, my = 0;
      for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v) {
          mx += g[u * k + v] * x.at(r - half + u, c - half + v);
          my += g[u * k + v] * y.at(r - half + u, c - half + v);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v) {
          const double dx = x.at(r - half + u, c - half + v) - mx;
          const double dy = y.at(r - half + u, c - half + v) - my;
          vx += g[u * k + v] * dx * dx;
          vy += g[u * k + v] * dy * dy;
          cxy += g[u * k + v] * dx * dy;
        }
      acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return acc / count;
}

GenerationContext ctx_for(const std::string& id) { return {{id, Laterality::Right}, nullptr, std::nullopt}; }

}  // namespace

TEST(Quality, IdentityPair) {
  RandomStream rng(1);
  for (int i = 0; i < 10; ++i) {
    const GrayImage img = testutil::random_image(20, 20, rng);
    const GenQuality q = eval_generation(img, img);
    EXPECT_EQ(q.mse, 0.0);
    EXPECT_TRUE(q.psnr_infinite);
    EXPECT_TRUE(std::isinf(q.psnr));
    EXPECT_NEAR(q.ssim, 1.0, 1e-12);
  }
}

TEST(Quality, ConstantPairPsnr20) {
  const GenQuality q = eval_generation(GrayImage(16, 16, 0.9, true), GrayImage(16, 16, 1.0, true));
  EXPECT_NEAR(q.mse, 0.01, 1e-15);
  EXPECT_NEAR(q.psnr, 20.0, 1e-12);
  EXPECT_FALSE(q.psnr_infinite);
}

TEST(Quality, UndefinedMaxAndShape) {
  try {
    eval_generation(GrayImage(12, 12, 0.5, true), GrayImage(12, 12, 0.0, true));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UndefinedMax);
  }
  EXPECT_THROW(eval_generation(GrayImage(12, 12, 0.5, true), GrayImage(13, 12, 0.5, true)), Error);
  EXPECT_THROW(ssim(GrayImage(8, 8, 0.5, true), GrayImage(8, 8, 0.5, true)), Error);
}

TEST(Quality, SsimMatchesDirectOracle) {
  RandomStream rng(2);
  for (int i = 0; i < 10; ++i) {
    const GrayImage a = testutil::random_image(32, 32, rng);
    const GrayImage b = testutil::random_image(32, 32, rng);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-9);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-15);
  }
}

TEST(Quality, MseProperties) {
  RandomStream rng(3);
  const GrayImage a = testutil::random_image(16, 16, rng);
  const GrayImage b = testutil::random_image(16, 16, rng);
  EXPECT_EQ(mse(a, b), mse(b, a));
  EXPECT_LE(mse(a, b), 1.0);
  const GrayImage target(16, 16, 0.8, true);
  double prev = std::numeric_limits<double>::infinity();
  for (double v : {0.7, 0.72, 0.75, 0.79}) {
    const double p = eval_generation(GrayImage(16, 16, v, true), target).psnr;
    EXPECT_GT(p, prev == std::numeric_limits<double>::infinity() ? -1e300 : prev);
    prev = p;
  }
}

TEST(GaussianWindow, NormalizedAndSymmetric) {
  const auto w = gaussian_window(11, 1.5);
  double s = 0;
  for (double v : w) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(w[i], w[10 - i]);
}

TEST(Generate, IdentityAndUnitAffine) {
  RandomStream rng(4);
  const GrayImage img = testutil::random_image(16, 16, rng);
  EXPECT_EQ(generate({GeneratorKind::Identity, View::CC}, img, ctx_for("p1")), img);
  GeneratorSpec lin{GeneratorKind::LinearPerImage, View::CC, 1.0, 0.0};
  EXPECT_EQ(generate(lin, img, ctx_for("p1")), img);
}

TEST(Generate, FittedLinearRecoversHalfScale) {
  RandomStream rng(5);
  const GrayImage x = testutil::random_image(16, 16, rng);
  std::vector<double> half(x.pixels().begin(), x.pixels().end());
  for (double& v : half) v *= 0.5;
  const GrayImage target(16, 16, half, true);
  GenerationContext ctx = ctx_for("p1");
  ctx.paired_target = &target;
  const GrayImage out = generate({GeneratorKind::LinearPerImage, View::MLO, 3.0, 0.2}, x, ctx);
  EXPECT_NEAR(mse(out, target), 0.0, 1e-20);
  const auto [g, o] = fit_affine(x.pixels(), target.pixels());
  EXPECT_NEAR(g, 0.5, 1e-12);
  EXPECT_NEAR(o, 0.0, 1e-12);
}

TEST(Generate, FitAffineConstantInput) {
  const std::vector<double> x(5, 2.0), y{1, 2, 3, 4, 5};
  const auto [g, o] = fit_affine(x, y);
  EXPECT_EQ(g, 0.0);
  EXPECT_EQ(o, 3.0);
}

TEST(Generate, PooledFitAcrossPairs) {
  const GrayImage a(2, 1, std::vector<double>{0.0, 0.5}, true), ta(2, 1, std::vector<double>{0.1, 0.35}, true);
  const GrayImage b(2, 1, std::vector<double>{1.0, 0.25}, true), tb(2, 1, std::vector<double>{0.6, 0.225}, true);
  const std::vector<std::pair<const GrayImage*, const GrayImage*>> pairs{{&a, &ta}, {&b, &tb}};
  const auto [g, o] = fit_affine_pooled(pairs);
  EXPECT_NEAR(g, 0.5, 1e-12);
  EXPECT_NEAR(o, 0.1, 1e-12);
}

TEST(Generate, OutputClippedAndNoiseDeterministic) {
  RandomStream rng(6);
  const GrayImage img = testutil::random_image(16, 16, rng);
  GeneratorSpec lin{GeneratorKind::LinearPerImage, View::CC, 3.0, -0.5};
  const GrayImage out = generate(lin, img, ctx_for("p1"));
  EXPECT_GE(out.min(), 0.0);
  EXPECT_LE(out.max(), 1.0);

  GeneratorSpec noisy{GeneratorKind::Identity, View::CC};
  noisy.noise_sigma = 0.1;
  GenerationContext ctx = ctx_for("p1");
  EXPECT_THROW(generate(noisy, img, ctx), Error);
  ctx.noise_seed = SeedPath{1, {}}.child("synth");
  const GrayImage n1 = generate(noisy, img, ctx);
  EXPECT_EQ(n1, generate(noisy, img, ctx));
  EXPECT_NE(n1, img);
  EXPECT_GE(n1.min(), 0.0);
  EXPECT_LE(n1.max(), 1.0);
}

TEST(Generate, ExternalLoadsPgmThenPng) {
  testutil::TempDir dir("external");
  GeneratorSpec ext{GeneratorKind::External, View::MLO};
  ext.path_pattern = "{root}/{patient_id}_{laterality}_{view}.pgm|png";
  ext.root = dir.path();
  EXPECT_EQ(external_path(ext, {"p3", Laterality::Left}, ".png"), dir.path() / "p3_L_MLO.png");

  const GrayImage ffdm(4, 4, 0.0, true);
  std::vector<double> px(16);
  for (int i = 0; i < 16; ++i) px[i] = i * 17;
  write_png(dir / "p3_L_MLO.png", GrayImage(4, 4, px), 8);
  const GrayImage out = generate(ext, ffdm, {{"p3", Laterality::Left}, nullptr, std::nullopt});
  EXPECT_EQ(out.at(3, 3), 1.0);
  EXPECT_EQ(out.at(0, 1), 17.0 / 255.0);

  try {
    generate(ext, ffdm, {{"p4", Laterality::Left}, nullptr, std::nullopt});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingExternalImage);
  }
  write_pgm(dir / "p5_R_MLO.pgm", GrayImage(3, 3, 0.0), 255);
  try {
    generate(ext, ffdm, {{"p5", Laterality::Right}, nullptr, std::nullopt});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}
