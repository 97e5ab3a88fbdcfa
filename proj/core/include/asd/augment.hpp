// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asd/grid.hpp"

/// Photometric and channel-level augmentations used to synthesize negative
/// images. Every op maps [0,1] grids to [0,1] grids of the same shape and is
/// deterministic given its input, parameters and seed.
namespace asd::augment {

/// out = clamp(img + N(0, sigma^2)).
ImageTensor gauss_noise(const ImageTensor& img, double sigma, std::uint64_t seed);

/// Reorders bands: out band k = img band permutation[k].
ImageTensor permute_channels(const ImageTensor& img, std::span<const std::size_t> permutation);

/// Seeded uniform permutation of bands; an identity draw is redrawn once.
ImageTensor channel_shuffle(const ImageTensor& img, std::uint64_t seed);

/// out = clamp(img + delta).
ImageTensor adjust_brightness(const ImageTensor& img, double delta);
ImageTensor random_brightness(const ImageTensor& img, double lo, double hi, std::uint64_t seed);

/// out = clamp(mean + factor * (img - mean)), mean over all elements.
ImageTensor adjust_contrast(const ImageTensor& img, double factor);
ImageTensor random_contrast(const ImageTensor& img, double lo, double hi, std::uint64_t seed);

/// out = img where img < threshold, else 1 - img.
ImageTensor solarize(const ImageTensor& img, double threshold);

enum class OpKind { kGaussNoise, kChannelShuffle, kBrightness, kContrast, kSolarize };

std::string_view to_string(OpKind kind);
OpKind parse_op_kind(std::string_view name);

/// One chain step. `lo`/`hi` is the parameter range: sigma for noise,
/// delta for brightness, factor for contrast, threshold for solarize
/// (drawn uniformly when lo < hi). Channel shuffle ignores it.
struct OpSpec {
  OpKind kind;
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentationChain {
  std::vector<OpSpec> ops;
  std::uint64_t seed = 0;
  /// Per-op application probability. At 1.0 every op runs; below 1.0 ops
  /// are gated independently and one op is forced when none is selected.
  double probability = 1.0;
};

/// GaussNoise [0.02,0.08], ChannelShuffle, Brightness [-0.2,0.2],
/// Contrast [0.8,1.2], Solarize 0.5; each applied with probability 0.5.
AugmentationChain default_chain(std::uint64_t seed = 0);

/// Throws ContractError for empty chains, bad ranges, or channel shuffle on
/// single-band images (bands == 0 skips the band check).
void validate(const AugmentationChain& chain, std::size_t bands = 0);

/// Applies the ops in listed order; op k draws from derive_seed(chain.seed, k).
ImageTensor apply_chain(const ImageTensor& img, const AugmentationChain& chain);

/// Seed for the chain applied to image `image_index` in epoch `epoch`.
std::uint64_t chain_seed(std::uint64_t base_seed, std::uint64_t epoch, std::uint64_t image_index);

}  // namespace asd::augment
