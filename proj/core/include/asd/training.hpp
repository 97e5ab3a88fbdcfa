// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asd/augment.hpp"
#include "asd/encoder.hpp"
#include "asd/grid.hpp"
#include "asd/kv_config.hpp"
#include "asd/pyramid.hpp"
#include "asd/scoring.hpp"

namespace asd::training {

/// Centre and radius are buffers refreshed from the training descriptors
/// once per epoch; they never receive gradients.
struct HypersphereState {
  std::vector<double> center;  ///< empty until first computed
  double radius = 3.0;
  double lambda = 10.0;

  bool has_center() const { return !center.empty(); }
};

/// Which of compact (l1), diverse (l2), reconstruction (l3) enter the objective.
struct LossFlags {
  bool compact = true;
  bool diverse = true;
  bool reconstruct = true;

  bool any() const { return compact || diverse || reconstruct; }
  /// e.g. "l1,l3".
  std::string to_string() const;
  static LossFlags parse(std::string_view text);

  friend bool operator==(const LossFlags&, const LossFlags&) = default;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 10;
  double learning_rate = 1e-4;
  std::size_t batch_size = 1;
  double lambda = 10.0;
  std::size_t descriptor_length = 5;
  pyramid::ScaleSet scales{{0.5, 1.0, 2.0}, 15};
  augment::AugmentationChain augmentation = augment::default_chain();
  LossFlags losses;
  std::uint64_t seed = 0;
  double radius_init = 3.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

void validate(const TrainConfig& config);

/// Keys understood by apply_key_values, in echo order.
const std::vector<std::string>& train_keys();
config::KeyValues to_key_values(const TrainConfig& config);
/// Overwrites the fields whose keys are present; other keys are ignored.
void apply_key_values(const config::KeyValues& kv, TrainConfig& config);

/// Per-epoch means over images; absent terms were not computed that epoch.
struct EpochRecord {
  std::optional<double> compact;
  std::optional<double> diverse;
  std::optional<double> reconstruct;
  std::optional<double> total;
  double radius = 0.0;
  double seconds = 0.0;  ///< wall time; not serialized
};

struct Checkpoint {
  encoder::EncoderParams params;
  HypersphereState sphere;
  std::optional<scoring::GaussianModel> gaussian;
  TrainConfig config;
  std::vector<EpochRecord> history;
};

inline constexpr double kDiverseEpsilon = 1e-6;

/// R^2 + lambda * mean_masked(max(|F - C|^2 - R^2, 0)). grad (if given)
/// receives d/dD with C and R held fixed.
double loss_compact(const DescriptorCube& descriptors, const HypersphereState& sphere, const NormalMask& mask,
                    DescriptorCube* grad = nullptr);

/// 1 / (mean_masked |D - Dt|^2 + eps).
double loss_diverse(const DescriptorCube& descriptors, const DescriptorCube& transformed, const NormalMask& mask,
                    DescriptorCube* grad = nullptr, DescriptorCube* grad_transformed = nullptr);

/// mean_masked |x - x'|^2 over band vectors.
double loss_reconstruct(const ImageTensor& image, const ReconGrid& recon, const NormalMask& mask,
                        ReconGrid* grad = nullptr);

/// Unweighted sum of the enabled terms.
double loss_total(double compact, double diverse, double reconstruct, const LossFlags& flags);

/// C = mean of the descriptors, R = max |F - C|; lambda carried over.
/// rows is row-major n x dim with n >= 1.
HypersphereState update_center_radius(std::span<const double> rows, std::size_t dim, double lambda);

/// Masked descriptors of one cube appended as rows.
void append_masked(const DescriptorCube& descriptors, const NormalMask& mask, std::vector<double>& rows);

class Adam {
 public:
  Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t steps_ = 0;
};

struct TrainingSample {
  ImageTensor image;
  NormalMask mask;
};

struct LossTerms {
  std::optional<double> compact;
  std::optional<double> diverse;
  std::optional<double> reconstruct;
  double total = 0.0;
};

/// Losses selected by `active` for one image and, when grad is given, their
/// gradient w.r.t. every parameter (accumulated). `augmented` is required
/// iff active.diverse; a centre is required iff active.compact.
LossTerms image_objective(const TrainingSample& sample, const ImageTensor* augmented,
                          const encoder::EncoderParams& params, const pyramid::ScaleSet& scales,
                          const HypersphereState& sphere, const LossFlags& active, encoder::EncoderParams* grad);

struct ProgressEvent {
  std::size_t epoch = 0;
  std::size_t image = 0;
  bool warmup = false;
  bool negative_pass = false;
  LossTerms terms;
};

/// Hooks for logging or cancellation; throwing from a hook aborts training.
struct TrainCallbacks {
  std::function<void(const ProgressEvent&)> on_image;
  std::function<void(std::size_t epoch, const EpochRecord&)> on_epoch;
};

/// Full optimization loop (batch size 1, Adam), then fits the Gaussian over
/// all masked training descriptors.
Checkpoint train(std::span<const TrainingSample> dataset, const TrainConfig& config,
                 const TrainCallbacks& callbacks = {});

/// Masked descriptors of every sample under params, row-major.
std::vector<double> collect_descriptors(std::span<const TrainingSample> dataset, const encoder::EncoderParams& params,
                                        const pyramid::ScaleSet& scales);

}  // namespace asd::training
