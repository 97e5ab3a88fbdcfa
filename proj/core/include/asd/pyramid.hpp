// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "asd/grid.hpp"

namespace asd::pyramid {

/// Resize factors applied to the whole image plus the patch side.
struct ScaleSet {
  std::vector<double> scales{0.5, 1.0, 2.0};
  std::size_t patch_size = 15;

  std::size_t size() const { return scales.size(); }
};

/// Throws ContractError unless there is at least one positive scale and the patch side is odd.
void validate(const ScaleSet& set);

struct PatchTag {};
/// P x P x B window cut from one pyramid level.
using Patch = Grid<PatchTag>;

/// One patch per scale, in scale order.
struct PatchStack {
  std::vector<Patch> patches;
};

/// round(extent * scale); throws if that is zero.
std::size_t scaled_extent(std::size_t extent, double scale);

/// Mirror index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<long>(n) ? i : period - i);
}

/// Bilinear resize with half-pixel-aligned sampling.
ImageTensor resize(const ImageTensor& img, double scale);

/// Window of side P centred on the scaled position of original pixel (i, j);
/// samples outside the scaled image are reflected back in.
Patch extract_patch(const ImageTensor& scaled, std::size_t i, std::size_t j, double scale, std::size_t patch_size);

/// Patch stack for pixel (i, j) of img.
PatchStack pyramid_patches(const ImageTensor& img, std::size_t i, std::size_t j, const ScaleSet& set);

/// The resized levels of one image, reused for every pixel.
class Pyramid {
 public:
  Pyramid(const ImageTensor& img, const ScaleSet& set);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t bands() const { return bands_; }
  std::size_t levels() const { return levels_.size(); }
  std::size_t patch_size() const { return patch_size_; }
  const ImageTensor& level(std::size_t k) const { return levels_[k]; }

  /// Writes the level-k patches for flat pixels [first, first + count) into
  /// out, laid out [pixel][row][col][band]; identical to extract_patch.
  void gather(std::size_t k, std::size_t first, std::size_t count, double* out) const;

 private:
  std::size_t height_, width_, bands_, patch_size_;
  std::vector<double> scales_;
  std::vector<ImageTensor> levels_;
};

}  // namespace asd::pyramid
