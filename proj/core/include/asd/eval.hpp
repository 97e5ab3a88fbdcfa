// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace asd::eval {

/// One operating point: predict anomaly where degree >= threshold.
struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
  std::uint64_t false_positives = 0;
  std::uint64_t true_positives = 0;
};

/// Points ordered by decreasing threshold, from (0,0) at +inf to (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

/// Sorts by degree (descending), one point per distinct degree, trapezoidal
/// AUC. labels: 1 = anomaly, 0 = normal; both classes must be present.
RocCurve roc_auc(std::span<const double> degrees, std::span<const std::uint8_t> labels);

/// Point maximizing TPR - FPR; ties go to the higher threshold.
RocPoint select_threshold(const RocCurve& curve);

/// Pixel confusion counts accumulated over any number of images.
struct Confusion {
  std::uint64_t true_positive = 0;
  std::uint64_t false_positive = 0;
  std::uint64_t false_negative = 0;
  std::uint64_t true_negative = 0;

  void add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

  /// IoU of the anomaly class; 1 when neither prediction nor truth has any.
  double iou_anomaly() const;
  double iou_normal() const;
  double miou() const { return 0.5 * (iou_anomaly() + iou_normal()); }
};

/// Two-class mean IoU over a single pair of masks (1 = anomaly).
double miou(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

struct Report {
  double auc = 0.0;
  double miou = 0.0;
  double threshold = 0.0;
  std::uint64_t pixels = 0;
  std::uint64_t anomaly_pixels = 0;
  std::uint64_t normal_pixels = 0;
  std::uint64_t images = 0;
};

/// key = value text: the report fields followed by an echo of the run config.
std::string format_report(const Report& report, const std::string& config_echo = {});
void write_report(const std::filesystem::path& path, const Report& report, const std::string& config_echo = {});

}  // namespace asd::eval
