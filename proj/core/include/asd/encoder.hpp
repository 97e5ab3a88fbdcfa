// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asd/grid.hpp"
#include "asd/pyramid.hpp"

/// Descriptor extractor: m per-scale patch encoders whose outputs are
/// concatenated into a shared trunk, followed by two per-pixel affine heads
/// (descriptor and reconstruction).
///
/// Per-scale encoder, for a P x P x B patch:
///   conv3x3(B->16) tanh maxpool2 conv3x3(16->32) tanh maxpool2
///   conv3x3(32->64) tanh global-avg-pool affine(64->L)
/// Convolutions are stride 1 with reflection padding inside the patch.
namespace asd::encoder {

inline constexpr std::array<std::size_t, 3> kConvChannels{16, 32, 64};

/// Shape hyperparameters: bands B, patch side P, descriptor length L, scales m.
struct Architecture {
  std::size_t bands = 3;
  std::size_t patch_size = 15;
  std::size_t length = 5;
  std::size_t scales = 3;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

void validate(const Architecture& arch);

struct TensorSlot {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Offsets of one scale's tensors inside the flat parameter vector.
struct ScaleLayout {
  std::size_t begin = 0, size = 0;
  std::array<std::size_t, 3> conv_weight{}, conv_bias{};
  std::size_t fc_weight = 0, fc_bias = 0;
};

/// All trainable values in one flat vector plus named views into it.
///
/// Layout: scale blocks 0..m-1 (conv1..3 weight/bias, fc weight/bias), then
/// descriptor head weight/bias, then reconstruction head weight/bias.
/// Conv weights are [out][ky][kx][in]; affine weights are [out][in].
class EncoderParams {
 public:
  static constexpr std::uint32_t kVersion = 1;

  EncoderParams() = default;
  /// Zero-filled parameters for arch.
  explicit EncoderParams(const Architecture& arch);

  const Architecture& arch() const { return arch_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  const std::vector<TensorSlot>& slots() const { return slots_; }
  const TensorSlot& slot(std::string_view name) const;
  std::span<double> tensor(std::string_view name);
  std::span<const double> tensor(std::string_view name) const;

  const ScaleLayout& scale_layout(std::size_t k) const { return scale_layouts_[k]; }
  std::size_t descriptor_weight_offset() const { return desc_w_; }
  std::size_t descriptor_bias_offset() const { return desc_b_; }
  std::size_t recon_weight_offset() const { return recon_w_; }
  std::size_t recon_bias_offset() const { return recon_b_; }

  /// Same layout, all zeros (gradient accumulator).
  EncoderParams zeros_like() const { return EncoderParams(arch_); }

  friend bool operator==(const EncoderParams& a, const EncoderParams& b) {
    return a.arch_ == b.arch_ && a.values_ == b.values_;
  }

 private:
  Architecture arch_{};
  std::vector<TensorSlot> slots_;
  std::vector<ScaleLayout> scale_layouts_;
  std::size_t desc_w_ = 0, desc_b_ = 0, recon_w_ = 0, recon_b_ = 0;
  std::vector<double> values_;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
EncoderParams init_params(std::uint64_t seed, std::size_t bands, std::size_t patch_size, std::size_t length,
                          std::size_t scales);

/// Descriptor of length m*L for one patch stack, segments in scale order.
std::vector<double> encode_stack(const pyramid::PatchStack& stack, const EncoderParams& params);

/// Accumulates d(objective)/d(params) into grad given d(objective)/d(encode_stack output).
void encode_stack_backward(const pyramid::PatchStack& stack, const EncoderParams& params,
                           std::span<const double> d_out, EncoderParams& grad);

/// Per-pixel affine map m*L -> L.
DescriptorCube descriptor_head(const ConcatCube& concat, const EncoderParams& params);

/// Per-pixel affine map m*L -> B, unclamped.
ReconGrid reconstruction_head(const ConcatCube& concat, const EncoderParams& params);

/// Backward through both heads. Either upstream gradient may be null.
/// Accumulates head parameter gradients into grad and returns d/d(concat).
ConcatCube heads_backward(const ConcatCube& concat, const DescriptorCube* d_descriptors, const ReconGrid* d_recon,
                          const EncoderParams& params, EncoderParams& grad);

/// Runs the m encoders over every pixel's pyramid stack.
ConcatCube trunk(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params);

/// Accumulates encoder parameter gradients given d/d(trunk output).
/// Recomputes activations chunk by chunk instead of caching them.
void trunk_backward(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params,
                    const ConcatCube& d_concat, EncoderParams& grad);

struct ForwardResult {
  DescriptorCube descriptors;
  ConcatCube concat;
  ReconGrid recon;
};

/// Trunk once, then both heads on the same concat cube.
ForwardResult forward_image(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params);

/// Descriptor cube only (reconstruction head skipped).
DescriptorCube describe(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params);

/// Backward through forward_image for the given upstream gradients (either may be null).
void backward_image(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params,
                    const ConcatCube& concat, const DescriptorCube* d_descriptors, const ReconGrid* d_recon,
                    EncoderParams& grad);

/// Checks that scales/bands agree with params.arch().
void check_compatible(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params);

}  // namespace asd::encoder
