// SPDX-License-Identifier: Apache-2.0
#include "asd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "asd/error.hpp"
#include "asd/png_io.hpp"
#include "asd/rng.hpp"

namespace asd {

void validate_image(const ImageTensor& img) {
  if (img.height() < 1 || img.width() < 1 || img.channels() < 1) {
    throw ContractError("image must have H, W, B >= 1 (got " + img.shape_string() + ")");
  }
  for (double v : img.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ContractError("image values must be finite and within [0, 1]");
    }
  }
}

std::size_t count_true(const NormalMask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

}  // namespace asd

namespace asd::data {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("missing file: " + path.string());
}

std::string shape2(std::size_t h, std::size_t w) { return std::to_string(h) + "x" + std::to_string(w); }

}  // namespace

ImageTensor load_image(const fs::path& path) {
  require_file(path);
  const png::Raster raster = png::read(path);
  const double max_value = raster.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> values(raster.samples.size());
  std::transform(raster.samples.begin(), raster.samples.end(), values.begin(),
                 [max_value](std::uint16_t s) { return static_cast<double>(s) / max_value; });
  return ImageTensor(raster.height, raster.width, raster.channels, std::move(values));
}

LabelMap load_label_map(const fs::path& path) {
  require_file(path);
  const png::Raster raster = png::read(path, /*keep_indices=*/true);
  if (raster.channels != 1) {
    throw ContractError("label map " + path.string() + " must be single-channel (got " +
                        std::to_string(raster.channels) + " channels)");
  }
  std::vector<std::int32_t> values(raster.samples.begin(), raster.samples.end());
  return LabelMap(raster.height, raster.width, std::move(values));
}

LabeledImage load_labeled_image(const fs::path& image_path, const fs::path& label_path) {
  require_file(image_path);
  require_file(label_path);
  ImageTensor image = load_image(image_path);
  LabelMap labels = load_label_map(label_path);
  if (labels.height() != image.height() || labels.width() != image.width()) {
    throw ContractError("dimension mismatch: image " + image_path.string() + " is " +
                        shape2(image.height(), image.width()) + " but label " + label_path.string() + " is " +
                        shape2(labels.height(), labels.width()));
  }
  return {std::move(image), std::move(labels)};
}

void save_image(const fs::path& path, const ImageTensor& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ContractError("save_image: bit depth must be 8 or 16");
  validate_image(img);
  const double max_value = bit_depth == 16 ? 65535.0 : 255.0;
  png::Raster raster{img.height(), img.width(), img.channels(), bit_depth, {}};
  raster.samples.resize(img.size());
  std::transform(img.values().begin(), img.values().end(), raster.samples.begin(),
                 [max_value](double v) { return static_cast<std::uint16_t>(std::lround(v * max_value)); });
  png::write(path, raster);
}

void save_label_map(const fs::path& path, const LabelMap& labels) {
  if (labels.size() == 0) throw ContractError("save_label_map: empty label map");
  const auto [lo, hi] = std::minmax_element(labels.values().begin(), labels.values().end());
  if (*lo < 0 || *hi > 65535) throw ContractError("save_label_map: class ids must be in [0, 65535]");
  png::Raster raster{labels.height(), labels.width(), 1, *hi > 255 ? 16 : 8, {}};
  raster.samples.assign(labels.values().begin(), labels.values().end());
  png::write(path, raster);
}

NormalMask make_normal_mask(const LabelMap& labels, std::int32_t normal_class) {
  NormalMask mask(labels.height(), labels.width(), 0);
  std::size_t hits = 0;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] == normal_class) {
      mask[p] = 1;
      ++hits;
    }
  }
  if (hits == 0) throw ContractError("normal class absent: class " + std::to_string(normal_class));
  return mask;
}

// ---------------------------------------------------------------------------
// Synthetic generation

void validate(const SyntheticSpec& spec) {
  if (spec.height < 1 || spec.width < 1 || spec.bands < 1) {
    throw ContractError("synthetic spec: image dimensions and band count must be >= 1");
  }
  if (spec.anomaly_count_min > spec.anomaly_count_max) {
    throw ContractError("synthetic spec: anomaly count range is inverted");
  }
  if (spec.anomaly_count_max > 0) {
    if (spec.anomaly_radius_min < 1) throw ContractError("synthetic spec: zero-size anomalies");
    if (spec.anomaly_radius_min > spec.anomaly_radius_max) {
      throw ContractError("synthetic spec: anomaly radius range is inverted");
    }
    const std::size_t extent = 2 * static_cast<std::size_t>(spec.anomaly_radius_max) + 1;
    if (extent >= std::min(spec.height, spec.width)) {
      throw ContractError("synthetic spec: anomaly diameter " + std::to_string(extent) +
                          " is not smaller than the image " + shape2(spec.height, spec.width));
    }
  }
}

namespace {

enum class Split : std::uint64_t { kTrain = 1, kTest = 2 };

// Box blur with a (2r+1)-wide kernel and mirrored borders.
std::vector<double> box_blur(const std::vector<double>& field, std::size_t h, std::size_t w, int r) {
  auto mirror = [](long i, long n) {
    if (n == 1) return 0L;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  std::vector<double> tmp(field.size()), out(field.size());
  const double norm = 1.0 / (2 * r + 1);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) s += field[i * w + mirror(static_cast<long>(j) + d, static_cast<long>(w))];
      tmp[i * w + j] = s * norm;
    }
  }
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) s += tmp[mirror(static_cast<long>(i) + d, static_cast<long>(h)) * w + j];
      out[i * w + j] = s * norm;
    }
  }
  return out;
}

double normal_base(std::size_t band, std::uint32_t family) {
  return 0.30 + 0.15 * static_cast<double>((band + family) % 3);
}
constexpr double kNormalAmplitude = 0.15;

// Anomaly colours sit at 0.05 / 0.95 per band: outside every normal band range [0.15, 0.75].
double anomaly_colour(std::size_t colour, std::size_t band, std::size_t bands) {
  return band == colour % bands ? 0.95 : 0.05;
}

ImageTensor normal_texture(const SyntheticSpec& spec, Rng& rng) {
  const std::size_t h = spec.height, w = spec.width;
  const double period = rng.uniform(6.0, 12.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  ImageTensor img(h, w, spec.bands);
  std::vector<double> noise(h * w);
  for (std::size_t b = 0; b < spec.bands; ++b) {
    for (double& v : noise) v = rng.uniform();
    const std::vector<double> smooth = box_blur(noise, h, w, 2);
    const double band_phase = phase + static_cast<double>(b) * std::numbers::pi / 3.0;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double wave = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * static_cast<double>(j) / period + band_phase);
        const double v = 0.7 * smooth[i * w + j] + 0.3 * wave;
        img(i, j, b) = std::clamp(normal_base(b, spec.texture_family) + 2.0 * kNormalAmplitude * (v - 0.5), 0.0, 1.0);
      }
    }
  }
  return img;
}

struct Shape {
  bool disk;
  long ci, cj, ri, rj;
  std::size_t colour;

  bool covers(long i, long j) const {
    if (disk) return (i - ci) * (i - ci) + (j - cj) * (j - cj) <= ri * ri;
    return std::abs(i - ci) <= ri && std::abs(j - cj) <= rj;
  }
};

std::vector<Shape> draw_shapes(const SyntheticSpec& spec, Rng& rng) {
  const auto count = rng.between(spec.anomaly_count_min, spec.anomaly_count_max);
  const std::size_t palette = std::max<std::size_t>(spec.bands, 2);
  std::vector<Shape> shapes;
  for (std::int64_t s = 0; s < count; ++s) {
    Shape shape{};
    shape.disk = rng.uniform() < 0.5;
    shape.ri = rng.between(spec.anomaly_radius_min, spec.anomaly_radius_max);
    shape.rj = shape.disk ? shape.ri : rng.between(spec.anomaly_radius_min, shape.ri);
    shape.ci = rng.between(0, static_cast<std::int64_t>(spec.height) - 1);
    shape.cj = rng.between(0, static_cast<std::int64_t>(spec.width) - 1);
    shape.colour = rng.below(palette);
    shapes.push_back(shape);
  }
  return shapes;
}

LabelMap rasterize(const SyntheticSpec& spec, const std::vector<Shape>& shapes, std::vector<long>* owner) {
  LabelMap labels(spec.height, spec.width, 0);
  if (owner) owner->assign(spec.height * spec.width, -1);
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    for (std::size_t i = 0; i < spec.height; ++i) {
      for (std::size_t j = 0; j < spec.width; ++j) {
        if (shapes[s].covers(static_cast<long>(i), static_cast<long>(j))) {
          labels(i, j) = kAnomalyClass;
          if (owner) (*owner)[i * spec.width + j] = static_cast<long>(s);
        }
      }
    }
  }
  return labels;
}

LabeledImage make_sample(const SyntheticSpec& spec, Split split, std::size_t index) {
  Rng rng(derive_seed({spec.seed, static_cast<std::uint64_t>(split), index}));
  ImageTensor img = normal_texture(spec, rng);
  if (split == Split::kTrain || spec.anomaly_count_max == 0) {
    return {std::move(img), LabelMap(spec.height, spec.width, 0)};
  }

  // Redraw placements until the anomaly fraction lands in the target band,
  // keeping the closest attempt if it never does.
  std::vector<Shape> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<Shape> shapes = draw_shapes(spec, rng);
    const double fraction = anomaly_fraction(rasterize(spec, shapes, nullptr));
    const double gap = fraction < kTestAnomalyFractionMin   ? kTestAnomalyFractionMin - fraction
                       : fraction > kTestAnomalyFractionMax ? fraction - kTestAnomalyFractionMax
                                                            : 0.0;
    if (gap < best_gap) {
      best_gap = gap;
      best = std::move(shapes);
    }
    if (gap == 0.0) break;
  }

  std::vector<long> owner;
  LabelMap labels = rasterize(spec, best, &owner);
  for (std::size_t i = 0; i < spec.height; ++i) {
    for (std::size_t j = 0; j < spec.width; ++j) {
      const long s = owner[i * spec.width + j];
      if (s < 0) continue;
      for (std::size_t b = 0; b < spec.bands; ++b) {
        // Keep a faint trace of the texture so anomalies are not perfectly flat.
        const double texture = img(i, j, b) - normal_base(b, spec.texture_family);
        img(i, j, b) = std::clamp(anomaly_colour(best[s].colour, b, spec.bands) + 0.2 * texture, 0.0, 1.0);
      }
    }
  }
  return {std::move(img), std::move(labels)};
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  SyntheticDataset out;
  out.train.reserve(spec.train_count);
  out.test.reserve(spec.test_count);
  for (std::size_t n = 0; n < spec.train_count; ++n) out.train.push_back(make_sample(spec, Split::kTrain, n));
  for (std::size_t n = 0; n < spec.test_count; ++n) out.test.push_back(make_sample(spec, Split::kTest, n));
  return out;
}

double anomaly_fraction(const LabelMap& labels, std::int32_t normal_class) {
  if (labels.size() == 0) return 0.0;
  const auto hits = std::count_if(labels.values().begin(), labels.values().end(),
                                  [normal_class](std::int32_t v) { return v != normal_class; });
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Directory layout

std::vector<DatasetEntry> list_images(const fs::path& dir) {
  const fs::path images = dir / "images";
  if (!fs::is_directory(images)) throw IoError("missing directory: " + images.string());
  std::vector<DatasetEntry> entries;
  for (const auto& item : fs::directory_iterator(images)) {
    if (!item.is_regular_file() || item.path().extension() != ".png") continue;
    const std::string name = item.path().stem().string();
    entries.push_back({name, item.path(), dir / "labels" / (name + ".png")});
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return entries;
}

std::vector<DatasetEntry> list_dataset(const fs::path& dir) {
  std::vector<DatasetEntry> entries = list_images(dir);
  if (!fs::is_directory(dir / "labels")) throw IoError("missing directory: " + (dir / "labels").string());
  for (const auto& e : entries) {
    if (!fs::is_regular_file(e.label_path)) {
      throw IoError("unpaired image " + e.image_path.string() + ": no label " + e.label_path.string());
    }
  }
  return entries;
}

void write_dataset(const fs::path& dir, std::span<const LabeledImage> samples, const std::string& prefix) {
  for (std::size_t n = 0; n < samples.size(); ++n) {
    char index[32];
    std::snprintf(index, sizeof index, "%04zu", n);
    const std::string name = prefix + index + ".png";
    save_image(dir / "images" / name, samples[n].image);
    save_label_map(dir / "labels" / name, samples[n].labels);
  }
}

}  // namespace asd::data
