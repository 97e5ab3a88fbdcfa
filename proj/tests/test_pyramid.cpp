// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "asd/error.hpp"
#include "asd/pyramid.hpp"
#include "support.hpp"

namespace asd {
namespace {

using namespace pyramid;

TEST(Resize, UnitScaleIsIdentity) {
  const ImageTensor img = testing::random_image(7, 5, 3, 1);
  EXPECT_EQ(resize(img, 1.0), img);
}

TEST(Resize, ConstantStaysConstant) {
  const ImageTensor img(9, 6, 2, 0.4);
  for (double s : {0.5, 0.7, 1.3, 2.0}) {
    const ImageTensor out = resize(img, s);
    for (double v : out.values()) EXPECT_NEAR(v, 0.4, 1e-15);
  }
}

TEST(Resize, MatchesScalarReference) {
  const ImageTensor small = testing::random_image(4, 4, 3, 2);
  const ImageTensor half = resize(small, 0.5);
  ASSERT_EQ(half.height(), 2u);
  ASSERT_EQ(half.width(), 2u);
  const ImageTensor ref = testing::resize_oracle(small, 2, 2);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(half.values()[i], ref.values()[i], 1e-14);

  const ImageTensor img = testing::random_image(11, 8, 2, 3);
  for (double s : {0.5, 0.75, 1.5, 2.0}) {
    const ImageTensor out = resize(img, s);
    const ImageTensor oracle = testing::resize_oracle(img, scaled_extent(11, s), scaled_extent(8, s));
    ASSERT_TRUE(out.same_shape(oracle));
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.values()[i], oracle.values()[i], 1e-14);
  }
}

TEST(Resize, NeverOvershootsInputRange) {
  const ImageTensor img = testing::random_image(10, 10, 1, 4);
  const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
  for (double s : {0.3, 0.5, 2.0, 3.7}) {
    const ImageTensor out = resize(img, s);
    for (double v : out.values()) {
      EXPECT_GE(v, *lo - 1e-15);
      EXPECT_LE(v, *hi + 1e-15);
    }
  }
}

TEST(Resize, ZeroExtentRejected) {
  EXPECT_THROW(resize(ImageTensor(2, 2, 1), 0.1), ContractError);
  EXPECT_THROW(resize(ImageTensor(2, 2, 1), 0.0), ContractError);
}

TEST(ReflectIndex, MirrorsWithoutRepeatingEdge) {
  EXPECT_EQ(reflect_index(-1, 5), 1u);
  EXPECT_EQ(reflect_index(-2, 5), 2u);
  EXPECT_EQ(reflect_index(5, 5), 3u);
  EXPECT_EQ(reflect_index(6, 5), 2u);
  EXPECT_EQ(reflect_index(3, 5), 3u);
  EXPECT_EQ(reflect_index(-7, 3), 1u);
  EXPECT_EQ(reflect_index(-4, 1), 0u);
}

TEST(Patch, ConstantImageGivesConstantPatch) {
  const ImageTensor img(8, 8, 3, 0.25);
  const Patch p = extract_patch(img, 0, 7, 1.0, 5);
  for (double v : p.values()) EXPECT_EQ(v, 0.25);
}

TEST(Patch, InteriorUnitScaleEqualsPlainCrop) {
  const ImageTensor img = testing::random_image(12, 12, 2, 5);
  const Patch p = extract_patch(img, 6, 5, 1.0, 5);
  for (std::size_t u = 0; u < 5; ++u) {
    for (std::size_t v = 0; v < 5; ++v) {
      for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(p(u, v, c), img(4 + u, 3 + v, c));
    }
  }
}

TEST(Patch, CornerUsesReflectionPadding) {
  const ImageTensor img = testing::random_image(20, 20, 1, 6);
  const Patch p = extract_patch(img, 0, 0, 1.0, 15);
  for (std::size_t u = 0; u < 15; ++u) {
    for (std::size_t v = 0; v < 15; ++v) {
      const std::size_t y = static_cast<std::size_t>(std::abs(static_cast<int>(u) - 7));
      const std::size_t x = static_cast<std::size_t>(std::abs(static_cast<int>(v) - 7));
      EXPECT_EQ(p(u, v, 0), img(y, x, 0));
    }
  }
}

TEST(Patch, ScaledCentreMapping) {
  const ImageTensor img = testing::random_image(8, 8, 1, 7);
  const ImageTensor up = resize(img, 2.0);
  const Patch p = extract_patch(up, 3, 2, 2.0, 5);
  EXPECT_EQ(p(2, 2, 0), up(6, 4, 0));
}

TEST(Stack, PaperScaleSetShapes) {
  const ImageTensor img = testing::random_image(32, 32, 3, 8);
  const PatchStack s = pyramid_patches(img, 10, 20, ScaleSet{{0.5, 1.0, 2.0}, 15});
  ASSERT_EQ(s.patches.size(), 3u);
  for (const Patch& p : s.patches) {
    EXPECT_EQ(p.height(), 15u);
    EXPECT_EQ(p.width(), 15u);
    EXPECT_EQ(p.channels(), 3u);
  }
}

TEST(Stack, SingleScaleIsPlainCrop) {
  const ImageTensor img = testing::random_image(10, 10, 1, 9);
  const PatchStack s = pyramid_patches(img, 5, 5, ScaleSet{{1.0}, 3});
  ASSERT_EQ(s.patches.size(), 1u);
  EXPECT_EQ(s.patches[0], extract_patch(img, 5, 5, 1.0, 3));
  EXPECT_EQ(s.patches[0](0, 0, 0), img(4, 4, 0));
}

TEST(Stack, InvalidScaleSetsRejected) {
  EXPECT_THROW(validate(ScaleSet{{}, 15}), ContractError);
  EXPECT_THROW(validate(ScaleSet{{1.0, -0.5}, 15}), ContractError);
  EXPECT_THROW(validate(ScaleSet{{1.0}, 14}), ContractError);
}

TEST(Pyramid, GatherMatchesPerPixelExtraction) {
  const ImageTensor img = testing::random_image(9, 7, 2, 10);
  const ScaleSet set{{0.5, 1.0, 2.0}, 5};
  const Pyramid pyr(img, set);
  const std::size_t patch = 5 * 5 * 2;
  std::vector<double> buf(img.pixels() * patch);
  for (std::size_t k = 0; k < set.size(); ++k) {
    pyr.gather(k, 0, img.pixels(), buf.data());
    for (std::size_t p = 0; p < img.pixels(); ++p) {
      const PatchStack s = pyramid_patches(img, p / 7, p % 7, set);
      for (std::size_t v = 0; v < patch; ++v) ASSERT_EQ(buf[p * patch + v], s.patches[k].values()[v]);
    }
  }
}

}  // namespace
}  // namespace asd
