// SPDX-License-Identifier: Apache-2.0
#include "asd/scoring.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "asd/error.hpp"
#include "asd/png_io.hpp"
#include "asd/training.hpp"

namespace asd::scoring {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance, double tau, std::size_t count)
    : mean_(std::move(mean)), covariance_(std::move(covariance)), tau_(tau), count_(count) {
  const Eigen::Index dim = mean_.size();
  if (dim < 1) throw ContractError("gaussian: empty mean");
  if (covariance_.rows() != dim || covariance_.cols() != dim) throw ContractError("gaussian: covariance shape mismatch");
  if (!mean_.allFinite() || !all_finite(covariance_)) throw ContractError("gaussian: non-finite parameters");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ContractError("gaussian: tau must be finite and >= 0");
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ContractError("gaussian: covariance is not symmetric");
  }
  const Eigen::MatrixXd regularized = covariance_ + tau_ * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  if (llt.info() != Eigen::Success) throw ContractError("gaussian: covariance + tau I is not positive definite");
  inverse_ = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
}

GaussianModel GaussianModel::restore(Eigen::VectorXd mean, Eigen::MatrixXd covariance, Eigen::MatrixXd inverse,
                                     double tau, std::size_t count) {
  const Eigen::Index dim = mean.size();
  if (dim < 1 || covariance.rows() != dim || covariance.cols() != dim || inverse.rows() != dim ||
      inverse.cols() != dim) {
    throw ContractError("gaussian: inconsistent stored shapes");
  }
  GaussianModel model;
  model.mean_ = std::move(mean);
  model.covariance_ = std::move(covariance);
  model.inverse_ = std::move(inverse);
  model.tau_ = tau;
  model.count_ = count;
  return model;
}

double default_tau(const Eigen::MatrixXd& covariance) {
  const double tau = 1e-5 * covariance.trace() / static_cast<double>(covariance.rows());
  return std::max(tau, kMinTau);
}

GaussianModel fit_gaussian(std::span<const double> rows, std::size_t dim, std::optional<double> tau) {
  if (dim < 1) throw ContractError("fit_gaussian: dimension must be >= 1");
  if (rows.size() % dim != 0) throw ContractError("fit_gaussian: data size is not a multiple of the dimension");
  const std::size_t n = rows.size() / dim;
  if (n < dim + 1) {
    throw ContractError("fit_gaussian: need at least " + std::to_string(dim + 1) + " descriptors, got " +
                        std::to_string(n));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> x(rows.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  if (!x.allFinite()) throw ContractError("fit_gaussian: non-finite descriptor values");

  // Row-ordered sum: colwise() on a Map rounds differently with buffer alignment.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < x.rows(); ++r) mean += x.row(r).transpose();
  mean /= static_cast<double>(n);
  const RowMat centered = x.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose()).eval();
  const double t = tau.value_or(default_tau(cov));
  return GaussianModel(mean, std::move(cov), t, n);
}

double mahalanobis(std::span<const double> x, const GaussianModel& model) {
  if (x.size() != model.dim()) {
    throw ContractError("mahalanobis: vector length " + std::to_string(x.size()) + " != model dimension " +
                        std::to_string(model.dim()));
  }
  const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) - model.mean();
  const double q = d.dot(model.inverse() * d);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

AnomalyMap normalize(ScorePlane degrees) {
  AnomalyMap map{ScorePlane(degrees.height(), degrees.width(), 0.0), std::move(degrees)};
  const auto values = map.degrees.values();
  if (values.empty()) return map;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (range > 0.0) {
    for (std::size_t p = 0; p < values.size(); ++p) map.scores[p] = (values[p] - *lo) / range;
  }
  return map;
}

AnomalyMap score_descriptors(const DescriptorCube& descriptors, const GaussianModel& model) {
  ScorePlane degrees(descriptors.height(), descriptors.width());
  for (std::size_t p = 0; p < descriptors.pixels(); ++p) degrees[p] = mahalanobis(descriptors.pixel(p), model);
  return normalize(std::move(degrees));
}

AnomalyMap score_image(const ImageTensor& img, const pyramid::ScaleSet& scales, const encoder::EncoderParams& params,
                       const GaussianModel& model) {
  if (model.dim() != params.arch().length) throw ContractError("score_image: Gaussian dimension != descriptor length");
  return score_descriptors(encoder::describe(img, scales, params), model);
}

AnomalyMap score_image(const ImageTensor& img, const training::Checkpoint& checkpoint) {
  if (!checkpoint.gaussian) throw ContractError("score_image: incomplete checkpoint (no fitted Gaussian)");
  return score_image(img, checkpoint.config.scales, checkpoint.params, *checkpoint.gaussian);
}

// ---------------------------------------------------------------------------
// Sidecar

namespace {

constexpr char kMagic[4] = {'A', 'S', 'D', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_sidecar(const ScorePlane& degrees) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(12 + 4 * degrees.size());
  put_u32(out, static_cast<std::uint32_t>(degrees.height()));
  put_u32(out, static_cast<std::uint32_t>(degrees.width()));
  for (double d : degrees.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
  return out;
}

void write_sidecar(const std::filesystem::path& path, const ScorePlane& degrees) {
  io::write_file_atomic(path, encode_sidecar(degrees));
}

SidecarPlane decode_sidecar(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("anomaly map sidecar: bad magic");
  }
  const std::size_t h = get_u32(bytes.data() + 4), w = get_u32(bytes.data() + 8);
  if (bytes.size() != 12 + 4 * h * w) throw IoError("anomaly map sidecar: truncated payload");
  std::vector<float> values(h * w);
  for (std::size_t p = 0; p < h * w; ++p) values[p] = std::bit_cast<float>(get_u32(bytes.data() + 12 + 4 * p));
  return SidecarPlane(h, w, std::move(values));
}

SidecarPlane read_sidecar(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_sidecar(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_score_png(const std::filesystem::path& path, const ScorePlane& scores) {
  png::Raster raster{scores.height(), scores.width(), 1, 8, {}};
  raster.samples.resize(scores.size());
  for (std::size_t p = 0; p < scores.size(); ++p) {
    raster.samples[p] = static_cast<std::uint16_t>(std::lround(std::clamp(scores[p], 0.0, 1.0) * 255.0));
  }
  png::write(path, raster);
}

}  // namespace asd::scoring
