#include <gtest/gtest.h>

#include <cmath>

#include "fusionbiopsy/preprocess.hpp"
#include "test_util.hpp"

using namespace fusionbiopsy;
using namespace fusionbiopsy::preprocess;

namespace {

GrayImage checkerboard(std::size_t side) {
  std::vector<double> px(side * side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) px[r * side + c] = static_cast<double>((r + c) % 2);
  return GrayImage(side, side, px, true);
}

bool in_unit_range(const GrayImage& img) {
  for (double v : img.pixels())
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

}  // namespace

TEST(PadSquare, SquareInputUnchanged) {
  RandomStream rng(1);
  const GrayImage img = testutil::random_image(4, 4, rng, 0, 255, false);
  EXPECT_EQ(pad_square(img, {}), img);
}

TEST(PadSquare, ZeroBorderFillsWithZero) {
  const GrayImage img(2, 4, 0.0);
  const GrayImage out = pad_square(img, {});
  ASSERT_EQ(out.width(), 4u);
  ASSERT_EQ(out.height(), 4u);
  for (double v : out.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(PadSquare, ConstantImageStaysConstant) {
  const GrayImage out = pad_square(GrayImage(3, 5, 7.0), {});
  ASSERT_EQ(out.width(), 5u);
  for (double v : out.pixels()) EXPECT_EQ(v, 7.0);
}

TEST(PadSquare, ContentCenteredAndExtraSideSelectable) {
  // 2 wide x 3 tall with a bright interior; padded to 3x3, one extra column.
  const GrayImage img(2, 3, std::vector<double>{0, 0, 5, 6, 0, 0});
  const GrayImage trailing = pad_square(img, {}, PadExtra::Trailing);
  EXPECT_EQ(trailing.at(1, 0), 5.0);
  EXPECT_EQ(trailing.at(1, 1), 6.0);
  const GrayImage leading = pad_square(img, {}, PadExtra::Leading);
  EXPECT_EQ(leading.at(1, 1), 5.0);
  EXPECT_EQ(leading.at(1, 2), 6.0);
  // Mirror relation between the two placements.
  EXPECT_EQ(flip_horizontal(pad_square(flip_horizontal(img), {}, PadExtra::Leading)), trailing);
}

TEST(ContrastStretch, ExamplesAndDegenerateCases) {
  PreprocessConfig full;
  full.stretch_lo_percentile = 0.0;
  full.stretch_hi_percentile = 100.0;
  const GrayImage out = contrast_stretch(GrayImage(3, 1, std::vector<double>{10, 20, 30}), full);
  EXPECT_EQ(out, GrayImage(3, 1, std::vector<double>{0, 15, 30}));

  const GrayImage flat(4, 2, 3.25);
  EXPECT_EQ(contrast_stretch(flat, {}), flat);

  std::vector<double> ramp(256);
  for (int i = 0; i < 256; ++i) ramp[i] = i;
  const GrayImage r(16, 16, ramp);
  EXPECT_EQ(contrast_stretch(r, full), r);
}

TEST(ContrastStretch, MonotoneWhereNotClipped) {
  RandomStream rng(4);
  const GrayImage img = testutil::random_image(20, 20, rng, 0, 1000, false);
  const GrayImage out = contrast_stretch(img, {});
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (std::size_t j = 0; j < img.size(); j += 7) {
      if (img.pixels()[i] < img.pixels()[j]) {
        EXPECT_LE(out.pixels()[i], out.pixels()[j]);
      }
    }
  }
}

TEST(NormalizeUnit, Examples) {
  const GrayImage out = normalize_unit(GrayImage(3, 1, std::vector<double>{0, 128, 255}));
  EXPECT_TRUE(out.normalized());
  EXPECT_EQ(out.pixels()[1], 128.0 / 255.0);
  EXPECT_EQ(out.pixels()[2], 1.0);
  const GrayImage zero = normalize_unit(GrayImage(2, 2, 0.0));
  EXPECT_TRUE(zero.normalized());
  EXPECT_EQ(zero.max(), 0.0);
  EXPECT_EQ(normalize_unit(out), out);
}

TEST(Resize, IdentityConstantAndCheckerboard) {
  RandomStream rng(2);
  const GrayImage img = testutil::random_image(32, 32, rng, 0, 1, true);
  EXPECT_EQ(resize_bilinear(img, 32), img);
  const GrayImage c = resize_bilinear(GrayImage(2, 2, 0.3, true), 7);
  for (double v : c.pixels()) EXPECT_EQ(v, 0.3);
  const GrayImage cb = resize_bilinear(checkerboard(4), 2);
  for (double v : cb.pixels()) EXPECT_EQ(v, 0.5);
  EXPECT_THROW(resize_bilinear(GrayImage(2, 3, 0.0), 4), Error);
}

TEST(Resize, StaysWithinInputRange) {
  RandomStream rng(8);
  for (std::size_t side : {5u, 9u, 13u}) {
    const GrayImage img = testutil::random_image(side, side, rng, 0.2, 0.7, true);
    for (std::size_t out_side : {3u, 8u, 21u}) {
      const GrayImage out = resize_bilinear(img, out_side);
      EXPECT_GE(out.min(), img.min());
      EXPECT_LE(out.max(), img.max());
    }
  }
}

TEST(Flip, LeftReversesRightPasses) {
  const GrayImage img(3, 1, std::vector<double>{1, 2, 3});
  EXPECT_EQ(flip_to_right(img, Laterality::Right), img);
  EXPECT_EQ(flip_to_right(img, Laterality::Left), GrayImage(3, 1, std::vector<double>{3, 2, 1}));
  EXPECT_EQ(flip_to_right(flip_to_right(img, Laterality::Left), Laterality::Left), img);
}

TEST(Preprocess, ShapeRangeAndLateralitySymmetry) {
  RandomStream rng(12);
  const PreprocessConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t w = 20 + rng.below(60), h = 20 + rng.below(60);
    const GrayImage raw = testutil::random_image(w, h, rng, 0, 4095, false);
    const GrayImage right = preprocess::preprocess(raw, Laterality::Right, cfg);
    EXPECT_EQ(right.width(), 256u);
    EXPECT_EQ(right.height(), 256u);
    EXPECT_TRUE(right.normalized());
    EXPECT_TRUE(in_unit_range(right));
    const GrayImage left = preprocess::preprocess(flip_horizontal(raw), Laterality::Left, cfg);
    EXPECT_EQ(left, right);
  }
}

TEST(Preprocess, ConstantImageStaysConstant) {
  const GrayImage out = preprocess::preprocess(GrayImage(3, 5, 7.0), Laterality::Left, {});
  ASSERT_EQ(out.width(), 256u);
  const double v0 = out.pixels().front();
  for (double v : out.pixels()) EXPECT_EQ(v, v0);
}

TEST(Preprocess, ConfigValidation) {
  PreprocessConfig bad;
  bad.stretch_lo_percentile = 60;
  bad.stretch_hi_percentile = 40;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.target_size = 4;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.border_frac = 0.5;
  EXPECT_THROW(bad.validate(), Error);
  AugmentConfig aug;
  aug.rot_deg = -1;
  EXPECT_THROW(aug.validate(), Error);
}

TEST(Augment, NullConfigIsIdentityAndDeterministic) {
  RandomStream rng(3);
  const GrayImage img = testutil::random_image(24, 24, rng, 0, 1, true);
  AugmentConfig none{0.0, 0.0, 0.0};
  RandomStream a(5);
  EXPECT_EQ(augment(img, none, a), img);

  RandomStream r1 = derive_rng(SeedPath{9, {}}.child("aug"));
  RandomStream r2 = derive_rng(SeedPath{9, {}}.child("aug"));
  const AugmentConfig cfg;
  const GrayImage o1 = augment(img, cfg, r1);
  EXPECT_EQ(o1, augment(img, cfg, r2));
  EXPECT_EQ(o1.width(), 24u);
  EXPECT_TRUE(in_unit_range(o1));
}

TEST(Augment, DrawsWithinConfiguredRanges) {
  RandomStream rng(21);
  const AugmentConfig cfg;
  for (int i = 0; i < 200; ++i) {
    const AffineParams p = draw_augmentation(cfg, 100, rng);
    EXPECT_LE(std::abs(p.shift_x), 10.0);
    EXPECT_LE(std::abs(p.shift_y), 10.0);
    EXPECT_LE(std::abs(p.zoom - 1.0), 0.1);
    EXPECT_LE(std::abs(p.rotation_deg), 15.0);
  }
}

TEST(Augment, RotationSymmetryOnRadialFixture) {
  // Radially symmetric about the center: rotating by +r and -r must agree.
  const std::size_t n = 33;
  std::vector<double> px(n * n);
  const double c = (n - 1) / 2.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t q = 0; q < n; ++q) {
      const double d2 = (r - c) * (r - c) + (q - c) * (q - c);
      px[r * n + q] = std::exp(-d2 / 60.0);
    }
  const GrayImage img(n, n, px, true);
  for (double deg : {5.0, 11.0, 15.0}) {
    const GrayImage plus = apply_affine(img, {0, 0, 1.0, deg}, 0.0);
    const GrayImage minus = apply_affine(img, {0, 0, 1.0, -deg}, 0.0);
    // Inside the inscribed disk no sample leaves the frame.
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t q = 0; q < n; ++q) {
        if ((r - c) * (r - c) + (q - c) * (q - c) > (c - 1) * (c - 1)) continue;
        EXPECT_NEAR(plus.at(r, q), minus.at(r, q), 2e-3);
      }
  }
}

TEST(Augment, MirrorRelation) {
  // Flipping, then transforming with mirrored parameters, equals transforming
  // then flipping.
  RandomStream rng(31);
  const GrayImage img = testutil::random_image(21, 21, rng, 0, 1, true);
  const AffineParams p{2.5, -1.5, 1.07, 9.0};
  const AffineParams mirrored{-2.5, -1.5, 1.07, -9.0};
  const GrayImage a = flip_horizontal(apply_affine(img, p, 0.25));
  const GrayImage b = apply_affine(flip_horizontal(img), mirrored, 0.25);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.pixels()[i], b.pixels()[i], 1e-12);
}
