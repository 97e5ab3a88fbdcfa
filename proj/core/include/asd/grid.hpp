// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asd/error.hpp"

namespace asd {

/// H x W x C grid of reals, row-major with channels innermost.
///
/// The tag parameter keeps images, descriptor cubes and the concatenated
/// trunk output apart at the type level while sharing storage code.
template <class Tag>
class Grid {
 public:
  Grid() = default;

  Grid(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        values_(height * width * channels, fill) {}

  Grid(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> values)
      : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
    if (values_.size() != height * width * channels) {
      throw ContractError("grid: value count " + std::to_string(values_.size()) +
                          " does not match shape " + std::to_string(height) + "x" +
                          std::to_string(width) + "x" + std::to_string(channels));
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * width_ + j) * channels_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * width_ + j) * channels_ + k];
  }

  /// Channel vector of the pixel with flat (row-major) index p.
  std::span<double> pixel(std::size_t p) { return {values_.data() + p * channels_, channels_}; }
  std::span<const double> pixel(std::size_t p) const {
    return {values_.data() + p * channels_, channels_};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// H x W grid of scalars.
template <class T, class Tag>
class Plane {
 public:
  Plane() = default;
  Plane(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), values_(height * width, fill) {}
  Plane(std::size_t height, std::size_t width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height * width) {
      throw ContractError("plane: value count does not match " + std::to_string(height) + "x" +
                          std::to_string(width));
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  T& operator()(std::size_t i, std::size_t j) { return values_[i * width_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return values_[i * width_ + j]; }
  T& operator[](std::size_t p) { return values_[p]; }
  const T& operator[](std::size_t p) const { return values_[p]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  template <class U, class OtherTag>
  bool same_shape(const Plane<U, OtherTag>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> values_;
};

struct ImageTag {};
struct DescriptorTag {};
struct ConcatTag {};
struct ReconTag {};
struct LabelTag {};
struct MaskTag {};
struct DegreeTag {};

/// Input image X, values in [0, 1].
using ImageTensor = Grid<ImageTag>;
/// Per-pixel descriptors, H x W x L.
using DescriptorCube = Grid<DescriptorTag>;
/// Concatenated per-scale descriptors, H x W x (m*L).
using ConcatCube = Grid<ConcatTag>;
/// Raw (unclamped) reconstruction head output, H x W x B.
using ReconGrid = Grid<ReconTag>;

using LabelMap = Plane<std::int32_t, LabelTag>;
/// 1 where the pixel belongs to the normal class.
using NormalMask = Plane<std::uint8_t, MaskTag>;
using ScorePlane = Plane<double, DegreeTag>;

/// Throws ContractError unless every value is finite and in [0, 1].
void validate_image(const ImageTensor& img);

/// Number of true entries.
std::size_t count_true(const NormalMask& mask);

}  // namespace asd
