// SPDX-License-Identifier: Apache-2.0
#include "asd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "asd/error.hpp"
#include "asd/kv_config.hpp"
#include "asd/png_io.hpp"

namespace asd::eval {

RocCurve roc_auc(std::span<const double> degrees, std::span<const std::uint8_t> labels) {
  if (degrees.size() != labels.size()) throw ContractError("roc_auc: degrees and labels differ in length");
  RocCurve curve;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (std::isnan(degrees[i])) throw ContractError("roc_auc: NaN degree");
    (labels[i] ? curve.positives : curve.negatives)++;
  }
  if (curve.positives == 0 || curve.negatives == 0) {
    throw ContractError("roc_auc: both classes must be present (positives=" + std::to_string(curve.positives) +
                        ", negatives=" + std::to_string(curve.negatives) + ")");
  }

  std::vector<std::size_t> order(degrees.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return degrees[a] > degrees[b]; });

  const double pos = static_cast<double>(curve.positives), neg = static_cast<double>(curve.negatives);
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity(), 0, 0});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in units of (1 negative x 1 positive); integral until the final division.
  double doubled_area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = degrees[order[i]];
    const std::uint64_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && degrees[order[i]] == threshold; ++i) (labels[order[i]] ? tp : fp)++;
    doubled_area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    curve.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, threshold, fp, tp});
  }
  curve.auc = doubled_area / (2.0 * pos * neg);
  return curve;
}

RocPoint select_threshold(const RocCurve& curve) {
  if (curve.points.empty()) throw ContractError("select_threshold: empty curve");
  // Compare J = tp/P - fp/N exactly as tp*N - fp*P.
  auto score = [&](const RocPoint& p) {
    return static_cast<long double>(p.true_positives) * static_cast<long double>(curve.negatives) -
           static_cast<long double>(p.false_positives) * static_cast<long double>(curve.positives);
  };
  const RocPoint* best = &curve.points.front();
  for (const RocPoint& p : curve.points) {
    if (score(p) > score(*best)) best = &p;
  }
  return *best;
}

void Confusion::add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw ContractError("miou: prediction and ground truth shapes differ");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++true_positive;
    else if (p) ++false_positive;
    else if (t) ++false_negative;
    else ++true_negative;
  }
}

double Confusion::iou_anomaly() const {
  const std::uint64_t uni = true_positive + false_positive + false_negative;
  return uni == 0 ? 1.0 : static_cast<double>(true_positive) / static_cast<double>(uni);
}

double Confusion::iou_normal() const {
  const std::uint64_t uni = true_negative + false_positive + false_negative;
  return uni == 0 ? 1.0 : static_cast<double>(true_negative) / static_cast<double>(uni);
}

double miou(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  Confusion c;
  c.add(predicted, truth);
  return c.miou();
}

std::string format_report(const Report& report, const std::string& config_echo) {
  std::ostringstream out;
  out << "auc = " << config::format_double(report.auc) << "\n"
      << "miou = " << config::format_double(report.miou) << "\n"
      << "threshold = " << config::format_double(report.threshold) << "\n"
      << "images = " << report.images << "\n"
      << "pixels = " << report.pixels << "\n"
      << "anomaly_pixels = " << report.anomaly_pixels << "\n"
      << "normal_pixels = " << report.normal_pixels << "\n";
  if (!config_echo.empty()) {
    out << "# config\n";
    std::istringstream lines(config_echo);
    for (std::string line; std::getline(lines, line);) out << "config." << line << "\n";
  }
  return out.str();
}

void write_report(const std::filesystem::path& path, const Report& report, const std::string& config_echo) {
  io::write_file_atomic(path, format_report(report, config_echo));
}

}  // namespace asd::eval
