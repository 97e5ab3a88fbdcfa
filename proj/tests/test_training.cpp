// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <limits>

#include "asd/error.hpp"
#include "asd/training.hpp"
#include "gradcheck.hpp"
#include "support.hpp"
#include "tiny.hpp"

namespace asd {
namespace {

using namespace training;

DescriptorCube cube(std::size_t h, std::size_t w, std::size_t l, std::vector<double> v) {
  return DescriptorCube(h, w, l, std::move(v));
}

NormalMask all_true(std::size_t h, std::size_t w) { return NormalMask(h, w, std::vector<std::uint8_t>(h * w, 1)); }

TEST(Compact, AllAtCentreGivesRadiusSquared) {
  const HypersphereState s{{0.5, -0.5}, 1.5, 10.0};
  EXPECT_DOUBLE_EQ(loss_compact(cube(2, 2, 2, {0.5, -0.5, 0.5, -0.5, 0.5, -0.5, 0.5, -0.5}), s, all_true(2, 2)), 2.25);
}

TEST(Compact, SingleOutsideDescriptor) {
  const HypersphereState s{{0.0, 0.0, 0.0}, 1.0, 10.0};
  EXPECT_DOUBLE_EQ(loss_compact(cube(1, 1, 3, {3.0, 0.0, 0.0}), s, all_true(1, 1)), 1.0 + 10.0 * (9.0 - 1.0));
}

TEST(Compact, InsideSphereHasZeroGradient) {
  const HypersphereState s{{0.0, 0.0}, 2.0, 10.0};
  DescriptorCube g;
  EXPECT_DOUBLE_EQ(loss_compact(cube(1, 2, 2, {0.5, 0.5, -1.0, 1.0}), s, all_true(1, 2), &g), 4.0);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Compact, MaskedPixelsIgnoredAndMeanOverNormalPixels) {
  const HypersphereState s{{0.0}, 1.0, 10.0};
  const NormalMask mask(1, 3, std::vector<std::uint8_t>{1, 0, 1});
  // Pixel 1 is far away but masked; pixel 2 contributes 4 - 1 = 3 over n = 2.
  EXPECT_DOUBLE_EQ(loss_compact(cube(1, 3, 1, {0.0, 100.0, 2.0}), s, mask), 1.0 + 10.0 * 3.0 / 2.0);
  EXPECT_THROW(loss_compact(cube(1, 3, 1, {0, 0, 0}), s, NormalMask(1, 3)), ContractError);
  EXPECT_THROW(loss_compact(cube(1, 3, 2, {0, 0, 0, 0, 0, 0}), s, mask), ContractError);
}

TEST(Diverse, CollapseGivesInverseEpsilon) {
  const DescriptorCube d = cube(2, 1, 2, {0.3, 0.1, -0.2, 0.4});
  EXPECT_DOUBLE_EQ(loss_diverse(d, d, all_true(2, 1)), 1.0 / kDiverseEpsilon);
}

TEST(Diverse, UnitSquaredDistanceEverywhere) {
  const DescriptorCube a = cube(1, 2, 2, {0.0, 0.0, 1.0, 1.0});
  const DescriptorCube b = cube(1, 2, 2, {1.0, 0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(loss_diverse(a, b, all_true(1, 2)), 1.0 / (1.0 + 1e-6));
}

TEST(Diverse, DoublingDifferencesQuartersLoss) {
  const DescriptorCube a = cube(1, 2, 1, {0.0, 0.0});
  const DescriptorCube b = cube(1, 2, 1, {0.5, -0.7});
  const DescriptorCube b2 = cube(1, 2, 1, {1.0, -1.4});
  EXPECT_NEAR(loss_diverse(a, b, all_true(1, 2)) / loss_diverse(a, b2, all_true(1, 2)), 4.0, 1e-4);
}

TEST(Diverse, GradientsAreOpposite) {
  const DescriptorCube a = cube(1, 2, 1, {0.1, 0.2});
  const DescriptorCube b = cube(1, 2, 1, {0.5, -0.7});
  DescriptorCube ga, gb;
  loss_diverse(a, b, all_true(1, 2), &ga, &gb);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(ga.values()[i], -gb.values()[i]);
  EXPECT_GT(ga.values()[0], 0.0);  // moving a towards b increases the loss
}

TEST(Reconstruct, Examples) {
  const ImageTensor x = testing::random_image(3, 3, 3, 1);
  const ReconGrid same(3, 3, 3, std::vector<double>(x.values().begin(), x.values().end()));
  EXPECT_EQ(loss_reconstruct(x, same, all_true(3, 3)), 0.0);

  ReconGrid shifted = same;
  for (double& v : shifted.values()) v += 0.1;
  EXPECT_NEAR(loss_reconstruct(x, shifted, all_true(3, 3)), 0.03, 1e-15);
}

TEST(Reconstruct, MatchesScalarLoop) {
  const ImageTensor x = testing::random_image(4, 5, 3, 2);
  const ImageTensor r = testing::random_image(4, 5, 3, 3);
  const ReconGrid xr(4, 5, 3, std::vector<double>(r.values().begin(), r.values().end()));
  NormalMask mask = all_true(4, 5);
  mask[3] = mask[7] = 0;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      if (!mask(i, j)) continue;
      ++n;
      for (std::size_t b = 0; b < 3; ++b) sum += (xr(i, j, b) - x(i, j, b)) * (xr(i, j, b) - x(i, j, b));
    }
  }
  EXPECT_EQ(loss_reconstruct(x, xr, mask), sum / static_cast<double>(n));
}

TEST(Total, RespectsFlags) {
  EXPECT_EQ(loss_total(1, 2, 3, LossFlags{}), 6.0);
  EXPECT_EQ(loss_total(1, 2, 3, LossFlags{false, false, true}), 3.0);
  EXPECT_EQ(loss_total(1, 2, 3, LossFlags{true, false, false}), 1.0);
}

TEST(Flags, ParseAndFormat) {
  EXPECT_EQ(LossFlags::parse("l1,l3"), (LossFlags{true, false, true}));
  EXPECT_EQ(LossFlags::parse("l2").to_string(), "l2");
  EXPECT_EQ(LossFlags{}.to_string(), "l1,l2,l3");
  EXPECT_THROW(LossFlags::parse("l4"), ContractError);
  EXPECT_THROW(LossFlags::parse(""), ContractError);
}

TEST(Sphere, CentreAndRadiusExamples) {
  const std::vector<double> same{0.2, 0.4, 0.2, 0.4, 0.2, 0.4};
  const HypersphereState a = update_center_radius(same, 2, 10.0);
  EXPECT_EQ(a.center, (std::vector<double>{0.2, 0.4}));
  EXPECT_EQ(a.radius, 0.0);

  const HypersphereState b = update_center_radius(std::vector<double>{-1.0, 1.0}, 1, 10.0);
  EXPECT_EQ(b.center[0], 0.0);
  EXPECT_EQ(b.radius, 1.0);
  EXPECT_THROW(update_center_radius(std::vector<double>{1.0, 2.0, 3.0}, 2, 10.0), ContractError);
}

TEST(Sphere, RadiusIsMaximumDistance) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> rows(3000);
  for (double& v : rows) v = n(gen);
  const HypersphereState s = update_center_radius(rows, 3, 10.0);
  double best = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) d2 += (rows[i * 3 + k] - s.center[k]) * (rows[i * 3 + k] - s.center[k]);
    EXPECT_LE(std::sqrt(d2), s.radius + 1e-12);
    best = std::max(best, std::sqrt(d2));
  }
  EXPECT_NEAR(best, s.radius, 1e-12);
}

TEST(Optimizer, FirstAdamStepMovesByLearningRate) {
  Adam adam(3, 0.01);
  std::vector<double> p{1.0, 2.0, 3.0};
  const std::vector<double> g{0.5, -2.0, 0.0};
  adam.step(p, g);
  EXPECT_EQ(adam.steps(), 1u);
  EXPECT_NEAR(p[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], 2.0 + 0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(p[2], 3.0);
}

TEST(Optimizer, MinimizesQuadratic) {
  Adam adam(1, 0.05);
  std::vector<double> p{3.0};
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{2.0 * (p[0] - 1.0)};
    adam.step(p, g);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-3);
}

TEST(Config, DefaultsMatchReference) {
  const TrainConfig c;
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_EQ(c.warmup_epochs, 10u);
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.lambda, 10.0);
  EXPECT_EQ(c.descriptor_length, 5u);
  EXPECT_EQ(c.scales.patch_size, 15u);
  EXPECT_EQ(c.scales.scales, (std::vector<double>{0.5, 1.0, 2.0}));
  EXPECT_EQ(c.radius_init, 3.0);
  EXPECT_EQ(c.losses, LossFlags{});
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, KeyValuesRoundTrip) {
  TrainConfig c = testing::tiny_config(7, 2);
  c.losses = LossFlags{true, false, true};
  c.seed = 99;
  c.augmentation.probability = 0.25;
  TrainConfig back;
  apply_key_values(to_key_values(c), back);
  EXPECT_EQ(to_key_values(back).to_text(), to_key_values(c).to_text());
  EXPECT_EQ(back.epochs, 7u);
  EXPECT_EQ(back.losses, c.losses);
  EXPECT_EQ(back.scales.scales, c.scales.scales);
}

TEST(Config, InvalidValuesRejected) {
  TrainConfig c;
  c.warmup_epochs = c.epochs;
  EXPECT_THROW(validate(c), ContractError);
  c = {};
  c.learning_rate = 0.0;
  EXPECT_THROW(validate(c), ContractError);
  c = {};
  c.batch_size = 4;
  EXPECT_THROW(validate(c), ContractError);
  c = {};
  c.scales.patch_size = 4;
  EXPECT_THROW(validate(c), ContractError);
}

class ObjectiveGradient : public ::testing::TestWithParam<LossFlags> {};

TEST_P(ObjectiveGradient, MatchesFiniteDifferences) {
  const LossFlags flags = GetParam();
  const pyramid::ScaleSet scales{{0.5, 1.0}, 5};
  const encoder::EncoderParams params = encoder::init_params(5, 3, 5, 3, 2);
  TrainingSample sample{testing::random_image(6, 6, 3, 5), all_true(6, 6)};
  sample.mask[4] = 0;
  const ImageTensor augmented = augment::apply_chain(sample.image, augment::default_chain(3));

  // Centre at the descriptor mean with the median distance as radius keeps
  // roughly half the hinge terms active.
  const DescriptorCube d = encoder::describe(sample.image, scales, params);
  std::vector<double> rows;
  append_masked(d, sample.mask, rows);
  HypersphereState sphere = update_center_radius(rows, 3, 10.0);
  std::vector<double> dist;
  for (std::size_t i = 0; i < rows.size() / 3; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += (rows[i * 3 + k] - sphere.center[k]) * (rows[i * 3 + k] - sphere.center[k]);
    dist.push_back(std::sqrt(s));
  }
  // Halfway between two neighbouring distances keeps every pixel off the kink.
  std::sort(dist.begin(), dist.end());
  sphere.radius = 0.5 * (dist[dist.size() / 2] + dist[dist.size() / 2 + 1]);

  auto f = [&](const encoder::EncoderParams& q) {
    return image_objective(sample, &augmented, q, scales, sphere, flags, nullptr).total;
  };
  encoder::EncoderParams grad = params.zeros_like();
  image_objective(sample, &augmented, params, scales, sphere, flags, &grad);
  const auto r = testing::check_gradient(params, f, grad, 40, 7, 1e-5, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-5) << "index " << r.worst_index << " analytic " << r.worst_analytic
                                        << " numeric " << r.worst_numeric;
}

INSTANTIATE_TEST_SUITE_P(Flags, ObjectiveGradient,
                         ::testing::Values(LossFlags{true, false, false}, LossFlags{false, true, false},
                                           LossFlags{false, false, true}, LossFlags{}));

TEST(Objective, PreconditionsEnforced) {
  const pyramid::ScaleSet scales{{1.0}, 5};
  const encoder::EncoderParams params = encoder::init_params(5, 3, 5, 3, 1);
  const TrainingSample sample{testing::random_image(4, 4, 3, 5), all_true(4, 4)};
  EXPECT_THROW(image_objective(sample, nullptr, params, scales, {}, LossFlags{false, true, false}, nullptr),
               ContractError);
  EXPECT_THROW(image_objective(sample, nullptr, params, scales, {}, LossFlags{true, false, false}, nullptr),
               ContractError);
  EXPECT_THROW(image_objective(sample, nullptr, params, scales, {}, LossFlags{false, false, false}, nullptr),
               ContractError);
}

TEST(Train, WarmupScheduleAndHistory) {
  const auto ds = testing::tiny_dataset(3, 8, 1);
  std::vector<ProgressEvent> events;
  TrainCallbacks cb;
  cb.on_image = [&](const ProgressEvent& e) { events.push_back(e); };
  const Checkpoint ck = train(ds, testing::tiny_config(2, 1), cb);
  ASSERT_EQ(ck.history.size(), 2u);
  EXPECT_FALSE(ck.history[0].compact.has_value());
  EXPECT_FALSE(ck.history[0].diverse.has_value());
  EXPECT_TRUE(ck.history[0].reconstruct.has_value());
  EXPECT_TRUE(ck.history[1].compact.has_value());
  EXPECT_TRUE(ck.history[1].diverse.has_value());
  ASSERT_EQ(events.size(), 6u);
  for (const ProgressEvent& e : events) {
    EXPECT_EQ(e.warmup, e.epoch == 0);
    if (e.warmup) EXPECT_FALSE(e.negative_pass);
  }
  ASSERT_TRUE(ck.gaussian.has_value());
  EXPECT_EQ(ck.gaussian->dim(), 3u);
  EXPECT_EQ(ck.sphere.center.size(), 3u);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto ds = testing::tiny_dataset(2, 8, 2);
  const TrainConfig c = testing::tiny_config(3, 1);
  const Checkpoint a = train(ds, c), b = train(ds, c);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].compact, b.history[e].compact);
    EXPECT_EQ(a.history[e].diverse, b.history[e].diverse);
    EXPECT_EQ(a.history[e].reconstruct, b.history[e].reconstruct);
    EXPECT_EQ(a.history[e].radius, b.history[e].radius);
  }
  TrainConfig other = c;
  other.seed = 1;
  EXPECT_NE(train(ds, other).params, a.params);
}

TEST(Train, RejectsBadDatasets) {
  const TrainConfig c = testing::tiny_config(2, 1);
  EXPECT_THROW(train({}, c), ContractError);
  auto ds = testing::tiny_dataset(1, 8, 3);
  ds[0].image.values()[5] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train(ds, c), ContractError);
  ds = testing::tiny_dataset(1, 8, 3);
  ds[0].mask = NormalMask(8, 8);
  EXPECT_THROW(train(ds, c), ContractError);
}

TEST(Train, DivergenceIsNumericalError) {
  const auto ds = testing::tiny_dataset(2, 8, 4);
  TrainConfig c = testing::tiny_config(3, 0);
  c.losses = LossFlags{true, false, false};
  c.lambda = 1e300;
  c.learning_rate = 1e300;
  c.radius_init = 0.0;
  EXPECT_THROW(train(ds, c), NumericalError);
}

}  // namespace
}  // namespace asd
