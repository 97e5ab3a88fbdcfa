// SPDX-License-Identifier: Apache-2.0
#include "asd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asd/error.hpp"
#include "asd/rng.hpp"

namespace asd::augment {

namespace {

constexpr std::uint64_t kGateSalt = 0x6761746573ULL;

template <class Fn>
ImageTensor map_values(const ImageTensor& img, Fn&& fn) {
  ImageTensor out = img;
  for (double& v : out.values()) v = std::clamp(fn(v), 0.0, 1.0);
  return out;
}

void check_range(double lo, double hi, const char* what) {
  if (!(lo <= hi)) throw ContractError(std::string(what) + ": inverted range");
}

}  // namespace

ImageTensor gauss_noise(const ImageTensor& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ContractError("gauss_noise: sigma must be >= 0");
  if (sigma == 0.0) return img;
  Rng rng(seed);
  return map_values(img, [&](double v) { return v + sigma * rng.normal(); });
}

ImageTensor permute_channels(const ImageTensor& img, std::span<const std::size_t> permutation) {
  const std::size_t bands = img.channels();
  if (permutation.size() != bands) throw ContractError("permute_channels: permutation size != band count");
  std::vector<bool> seen(bands, false);
  for (std::size_t k : permutation) {
    if (k >= bands || seen[k]) throw ContractError("permute_channels: not a permutation");
    seen[k] = true;
  }
  ImageTensor out(img.height(), img.width(), bands);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const auto src = img.pixel(p);
    auto dst = out.pixel(p);
    for (std::size_t k = 0; k < bands; ++k) dst[k] = src[permutation[k]];
  }
  return out;
}

ImageTensor channel_shuffle(const ImageTensor& img, std::uint64_t seed) {
  const std::size_t bands = img.channels();
  if (bands < 2) throw ContractError("channel_shuffle: needs at least 2 bands");
  Rng rng(seed);
  std::vector<std::size_t> perm(bands);
  auto draw = [&] {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = bands - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(k + 1)]);
  };
  draw();
  if (std::is_sorted(perm.begin(), perm.end())) draw();
  return permute_channels(img, perm);
}

ImageTensor adjust_brightness(const ImageTensor& img, double delta) {
  return map_values(img, [delta](double v) { return v + delta; });
}

ImageTensor random_brightness(const ImageTensor& img, double lo, double hi, std::uint64_t seed) {
  check_range(lo, hi, "random_brightness");
  if (lo < -1.0 || hi > 1.0) throw ContractError("random_brightness: range must lie within [-1, 1]");
  Rng rng(seed);
  return adjust_brightness(img, rng.uniform(lo, hi));
}

ImageTensor adjust_contrast(const ImageTensor& img, double factor) {
  const auto values = img.values();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return map_values(img, [=](double v) { return mean + factor * (v - mean); });
}

ImageTensor random_contrast(const ImageTensor& img, double lo, double hi, std::uint64_t seed) {
  check_range(lo, hi, "random_contrast");
  if (lo < 0.0) throw ContractError("random_contrast: factors must be >= 0");
  Rng rng(seed);
  return adjust_contrast(img, rng.uniform(lo, hi));
}

ImageTensor solarize(const ImageTensor& img, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractError("solarize: threshold must be in [0, 1]");
  return map_values(img, [threshold](double v) { return v < threshold ? v : 1.0 - v; });
}

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kGaussNoise: return "gauss_noise";
    case OpKind::kChannelShuffle: return "channel_shuffle";
    case OpKind::kBrightness: return "brightness";
    case OpKind::kContrast: return "contrast";
    case OpKind::kSolarize: return "solarize";
  }
  return "?";
}

OpKind parse_op_kind(std::string_view name) {
  for (OpKind k : {OpKind::kGaussNoise, OpKind::kChannelShuffle, OpKind::kBrightness, OpKind::kContrast,
                   OpKind::kSolarize}) {
    if (to_string(k) == name) return k;
  }
  throw ContractError("unknown augmentation op '" + std::string(name) + "'");
}

AugmentationChain default_chain(std::uint64_t seed) {
  return AugmentationChain{
      {
          {OpKind::kGaussNoise, 0.02, 0.08},
          {OpKind::kChannelShuffle, 0.0, 0.0},
          {OpKind::kBrightness, -0.2, 0.2},
          {OpKind::kContrast, 0.8, 1.2},
          {OpKind::kSolarize, 0.5, 0.5},
      },
      seed,
      0.5,
  };
}

void validate(const AugmentationChain& chain, std::size_t bands) {
  if (chain.ops.empty()) throw ContractError("augmentation chain must contain at least one op");
  if (!(chain.probability > 0.0 && chain.probability <= 1.0)) {
    throw ContractError("augmentation probability must be in (0, 1]");
  }
  for (const OpSpec& op : chain.ops) {
    const std::string name(to_string(op.kind));
    check_range(op.lo, op.hi, name.c_str());
    switch (op.kind) {
      case OpKind::kGaussNoise:
        if (op.lo < 0.0) throw ContractError("gauss_noise: sigma must be >= 0");
        break;
      case OpKind::kChannelShuffle:
        if (bands == 1) throw ContractError("channel_shuffle: needs at least 2 bands");
        break;
      case OpKind::kBrightness:
        if (op.lo < -1.0 || op.hi > 1.0) throw ContractError("brightness: range must lie within [-1, 1]");
        break;
      case OpKind::kContrast:
        if (op.lo < 0.0) throw ContractError("contrast: factors must be >= 0");
        break;
      case OpKind::kSolarize:
        if (op.lo < 0.0 || op.hi > 1.0) throw ContractError("solarize: threshold must be in [0, 1]");
        break;
    }
  }
}

ImageTensor apply_chain(const ImageTensor& img, const AugmentationChain& chain) {
  validate(chain, img.channels());
  const std::size_t n = chain.ops.size();

  std::vector<bool> active(n, true);
  if (chain.probability < 1.0) {
    Rng gate(derive_seed({chain.seed, kGateSalt}));
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      active[k] = gate.uniform() < chain.probability;
      any = any || active[k];
    }
    if (!any) active[gate.below(n)] = true;
  }

  ImageTensor out = img;
  for (std::size_t k = 0; k < n; ++k) {
    if (!active[k]) continue;
    const OpSpec& op = chain.ops[k];
    const std::uint64_t seed = derive_seed({chain.seed, k});
    Rng param(derive_seed({seed, 1}));
    const double value = op.lo == op.hi ? op.lo : param.uniform(op.lo, op.hi);
    switch (op.kind) {
      case OpKind::kGaussNoise: out = gauss_noise(out, value, seed); break;
      case OpKind::kChannelShuffle: out = channel_shuffle(out, seed); break;
      case OpKind::kBrightness: out = adjust_brightness(out, value); break;
      case OpKind::kContrast: out = adjust_contrast(out, value); break;
      case OpKind::kSolarize: out = solarize(out, value); break;
    }
  }
  return out;
}

std::uint64_t chain_seed(std::uint64_t base_seed, std::uint64_t epoch, std::uint64_t image_index) {
  return derive_seed({base_seed, epoch, image_index});
}

}  // namespace asd::augment
