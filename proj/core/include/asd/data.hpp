// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "asd/grid.hpp"

namespace asd::data {

struct LabeledImage {
  ImageTensor image;
  LabelMap labels;
};

/// Loads an 8/16-bit PNG and scales samples by the bit-depth maximum.
ImageTensor load_image(const std::filesystem::path& path);

/// Loads a single-channel (gray or palette-indexed) PNG as class ids.
LabelMap load_label_map(const std::filesystem::path& path);

/// Loads an image and its label map and checks that their rasters agree.
LabeledImage load_labeled_image(const std::filesystem::path& image_path,
                                const std::filesystem::path& label_path);

/// Quantizes to the given bit depth (8 or 16) and writes a PNG.
void save_image(const std::filesystem::path& path, const ImageTensor& img, int bit_depth = 8);
void save_label_map(const std::filesystem::path& path, const LabelMap& labels);

/// True exactly where labels == normal_class. Throws if the class is absent.
NormalMask make_normal_mask(const LabelMap& labels, std::int32_t normal_class);

/// Procedural desk-scale dataset description.
struct SyntheticSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t bands = 3;
  std::uint32_t texture_family = 0;
  std::uint32_t anomaly_count_min = 1;
  std::uint32_t anomaly_count_max = 3;
  std::uint32_t anomaly_radius_min = 3;
  std::uint32_t anomaly_radius_max = 6;
  std::size_t train_count = 40;
  std::size_t test_count = 20;
  std::uint64_t seed = 7;
};

/// Anomaly-pixel fraction targeted for test images when anomalies are requested.
inline constexpr double kTestAnomalyFractionMin = 0.05;
inline constexpr double kTestAnomalyFractionMax = 0.30;

/// Class id written for inserted anomalies (background is 0).
inline constexpr std::int32_t kAnomalyClass = 1;

struct SyntheticDataset {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
};

void validate(const SyntheticSpec& spec);

/// Pure function of spec: training images carry no anomalies; test images
/// get disks/rectangles from a palette disjoint from the normal texture.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Fraction of pixels whose label differs from normal_class.
double anomaly_fraction(const LabelMap& labels, std::int32_t normal_class = 0);

/// One image/label pair in the `images/NAME.png` + `labels/NAME.png` layout.
struct DatasetEntry {
  std::string name;
  std::filesystem::path image_path;
  std::filesystem::path label_path;
};

/// Lists images/*.png sorted by name; every image must have a label twin.
std::vector<DatasetEntry> list_dataset(const std::filesystem::path& dir);

/// Lists images/*.png only (labels not required).
std::vector<DatasetEntry> list_images(const std::filesystem::path& dir);

/// Writes samples as `images/<prefix>NNNN.png` and `labels/<prefix>NNNN.png`.
void write_dataset(const std::filesystem::path& dir, std::span<const LabeledImage> samples,
                   const std::string& prefix = "img_");

}  // namespace asd::data
