// SPDX-License-Identifier: Apache-2.0
#include "asd/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asd/error.hpp"

namespace asd::pyramid {

void validate(const ScaleSet& set) {
  if (set.scales.empty()) throw ContractError("scale set must contain at least one scale");
  for (double s : set.scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ContractError("scales must be positive and finite");
  }
  if (set.patch_size % 2 == 0) throw ContractError("patch size must be odd");
}

std::size_t scaled_extent(std::size_t extent, double scale) {
  if (!(scale > 0.0)) throw ContractError("resize: scale must be positive");
  const long out = std::lround(static_cast<double>(extent) * scale);
  if (out < 1) {
    throw ContractError("resize: extent " + std::to_string(extent) + " at scale " + std::to_string(scale) +
                        " collapses to zero");
  }
  return static_cast<std::size_t>(out);
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  std::vector<Tap> t(out);
  for (std::size_t d = 0; d < out; ++d) {
    const double src = std::clamp((static_cast<double>(d) + 0.5) * ratio - 0.5, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    t[d] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return t;
}

std::size_t scaled_center(std::size_t i, double scale, std::size_t extent) {
  const long c = std::lround(static_cast<double>(i) * scale);
  return std::min(static_cast<std::size_t>(std::max(c, 0L)), extent - 1);
}

}  // namespace

ImageTensor resize(const ImageTensor& img, double scale) {
  const std::size_t oh = scaled_extent(img.height(), scale);
  const std::size_t ow = scaled_extent(img.width(), scale);
  if (oh == img.height() && ow == img.width()) return img;
  const auto ty = taps(img.height(), oh);
  const auto tx = taps(img.width(), ow);
  const std::size_t bands = img.channels();
  ImageTensor out(oh, ow, bands);
  for (std::size_t y = 0; y < oh; ++y) {
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < ow; ++x) {
      const Tap& b = tx[x];
      for (std::size_t c = 0; c < bands; ++c) {
        const double top = img(a.lo, b.lo, c) + b.frac * (img(a.lo, b.hi, c) - img(a.lo, b.lo, c));
        const double bottom = img(a.hi, b.lo, c) + b.frac * (img(a.hi, b.hi, c) - img(a.hi, b.lo, c));
        out(y, x, c) = top + a.frac * (bottom - top);
      }
    }
  }
  return out;
}

Patch extract_patch(const ImageTensor& scaled, std::size_t i, std::size_t j, double scale, std::size_t patch_size) {
  const std::size_t ci = scaled_center(i, scale, scaled.height());
  const std::size_t cj = scaled_center(j, scale, scaled.width());
  const long half = static_cast<long>(patch_size / 2);
  const std::size_t bands = scaled.channels();
  Patch patch(patch_size, patch_size, bands);
  for (std::size_t u = 0; u < patch_size; ++u) {
    const std::size_t y = reflect_index(static_cast<long>(ci) + static_cast<long>(u) - half, scaled.height());
    for (std::size_t v = 0; v < patch_size; ++v) {
      const std::size_t x = reflect_index(static_cast<long>(cj) + static_cast<long>(v) - half, scaled.width());
      for (std::size_t c = 0; c < bands; ++c) patch(u, v, c) = scaled(y, x, c);
    }
  }
  return patch;
}

PatchStack pyramid_patches(const ImageTensor& img, std::size_t i, std::size_t j, const ScaleSet& set) {
  validate(set);
  if (i >= img.height() || j >= img.width()) throw ContractError("pyramid_patches: centre out of bounds");
  PatchStack stack;
  for (double s : set.scales) stack.patches.push_back(extract_patch(resize(img, s), i, j, s, set.patch_size));
  return stack;
}

Pyramid::Pyramid(const ImageTensor& img, const ScaleSet& set)
    : height_(img.height()), width_(img.width()), bands_(img.channels()), patch_size_(set.patch_size),
      scales_(set.scales) {
  validate(set);
  levels_.reserve(set.scales.size());
  for (double s : set.scales) levels_.push_back(resize(img, s));
}

void Pyramid::gather(std::size_t k, std::size_t first, std::size_t count, double* out) const {
  const ImageTensor& lvl = levels_[k];
  const double scale = scales_[k];
  const long half = static_cast<long>(patch_size_ / 2);
  const std::size_t row = bands_;
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t p = first + n;
    const std::size_t ci = scaled_center(p / width_, scale, lvl.height());
    const std::size_t cj = scaled_center(p % width_, scale, lvl.width());
    for (std::size_t u = 0; u < patch_size_; ++u) {
      const std::size_t y = reflect_index(static_cast<long>(ci) + static_cast<long>(u) - half, lvl.height());
      for (std::size_t v = 0; v < patch_size_; ++v) {
        const std::size_t x = reflect_index(static_cast<long>(cj) + static_cast<long>(v) - half, lvl.width());
        const double* src = lvl.data() + (y * lvl.width() + x) * row;
        std::copy(src, src + row, out);
        out += row;
      }
    }
  }
}

}  // namespace asd::pyramid
