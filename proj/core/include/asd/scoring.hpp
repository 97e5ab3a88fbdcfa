// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "asd/encoder.hpp"
#include "asd/grid.hpp"
#include "asd/pyramid.hpp"

namespace asd::training {
struct Checkpoint;
}

/// Gaussian density over normal descriptors and Mahalanobis anomaly maps.
namespace asd::scoring {

/// Floor for the covariance ridge when the trace vanishes.
inline constexpr double kMinTau = 1e-12;

/// Mean, covariance, and the cached inverse of (covariance + tau I).
class GaussianModel {
 public:
  /// Validates symmetry/finiteness and inverts covariance + tau I via Cholesky.
  GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance, double tau, std::size_t count);

  /// Rebuilds a model from stored values without recomputing the inverse.
  static GaussianModel restore(Eigen::VectorXd mean, Eigen::MatrixXd covariance, Eigen::MatrixXd inverse, double tau,
                               std::size_t count);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }
  double tau() const { return tau_; }
  std::size_t count() const { return count_; }

 private:
  GaussianModel() = default;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd inverse_;
  double tau_ = 0.0;
  std::size_t count_ = 0;
};

/// 1e-5 * trace(cov) / L, floored at kMinTau.
double default_tau(const Eigen::MatrixXd& covariance);

/// Sample mean and unbiased covariance of row-major descriptors (n x dim).
/// Requires n >= dim + 1 and finite inputs. tau defaults to default_tau.
GaussianModel fit_gaussian(std::span<const double> rows, std::size_t dim, std::optional<double> tau = std::nullopt);

/// sqrt((x - mean)^T (cov + tau I)^-1 (x - mean)).
double mahalanobis(std::span<const double> x, const GaussianModel& model);

struct AnomalyMap {
  ScorePlane scores;   ///< per-image min-max normalized, in [0, 1]
  ScorePlane degrees;  ///< raw Mahalanobis distances
};

/// Min-max normalization of degrees; a constant image maps to all zeros.
AnomalyMap normalize(ScorePlane degrees);

/// Mahalanobis degree for every pixel descriptor.
AnomalyMap score_descriptors(const DescriptorCube& descriptors, const GaussianModel& model);

/// Descriptor head only; the reconstruction head is never evaluated.
AnomalyMap score_image(const ImageTensor& img, const pyramid::ScaleSet& scales, const encoder::EncoderParams& params,
                       const GaussianModel& model);

/// Throws ContractError if the checkpoint has no fitted Gaussian.
AnomalyMap score_image(const ImageTensor& img, const training::Checkpoint& checkpoint);

/// Raw sidecar: "ASDM", u32 H, u32 W, H*W little-endian float32 degrees (row-major).
void write_sidecar(const std::filesystem::path& path, const ScorePlane& degrees);
std::vector<std::uint8_t> encode_sidecar(const ScorePlane& degrees);

struct SidecarTag {};
using SidecarPlane = Plane<float, SidecarTag>;
SidecarPlane read_sidecar(const std::filesystem::path& path);
SidecarPlane decode_sidecar(std::span<const std::uint8_t> bytes);

/// 8-bit grayscale PNG of round(255 * score).
void write_score_png(const std::filesystem::path& path, const ScorePlane& scores);

}  // namespace asd::scoring
