// SPDX-License-Identifier: Apache-2.0
// Test helpers and reference implementations. The oracles here are written
// independently of core/ (plain loops, no shared code paths) so that
// agreement between the two is meaningful.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "asd/grid.hpp"

namespace asd::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "asd") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline ImageTensor random_image(std::size_t h, std::size_t w, std::size_t b, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageTensor img(h, w, b);
  for (double& v : img.values()) v = u(gen);
  return img;
}

inline std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::vector<std::uint8_t> out(std::filesystem::file_size(p));
  FILE* f = std::fopen(p.c_str(), "rb");
  if (f) {
    const std::size_t got = std::fread(out.data(), 1, out.size(), f);
    std::fclose(f);
    out.resize(got);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracles

/// Bilinear resize, half-pixel centres, edge clamp, written as a direct
/// per-output-sample loop.
inline ImageTensor resize_oracle(const ImageTensor& img, std::size_t out_h, std::size_t out_w) {
  const std::size_t h = img.height(), w = img.width(), b = img.channels();
  ImageTensor out(out_h, out_w, b);
  for (std::size_t i = 0; i < out_h; ++i) {
    for (std::size_t j = 0; j < out_w; ++j) {
      double sy = (static_cast<double>(i) + 0.5) * static_cast<double>(h) / static_cast<double>(out_h) - 0.5;
      double sx = (static_cast<double>(j) + 0.5) * static_cast<double>(w) / static_cast<double>(out_w) - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      const auto y0 = static_cast<std::size_t>(std::floor(sy));
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
      for (std::size_t k = 0; k < b; ++k) {
        const double top = img(y0, x0, k) * (1 - fx) + img(y0, x1, k) * fx;
        const double bottom = img(y1, x0, k) * (1 - fx) + img(y1, x1, k) * fx;
        out(i, j, k) = top * (1 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

/// Probability that a random positive outranks a random negative, ties
/// counted one half. O(n^2).
inline double mann_whitney_auc(const std::vector<double>& degrees, const std::vector<std::uint8_t>& labels) {
  double wins = 0.0;
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (!labels[i]) continue;
    ++pos;
    for (std::size_t j = 0; j < degrees.size(); ++j) {
      if (labels[j]) continue;
      if (degrees[i] > degrees[j]) wins += 1.0;
      else if (degrees[i] == degrees[j]) wins += 0.5;
    }
  }
  for (std::uint8_t l : labels) neg += l ? 0 : 1;
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Youden-optimal threshold by trying every observed degree and +inf and
/// predicting positive where degree >= threshold. Ties keep the higher
/// threshold. J is compared as tp*N - fp*P to stay in exact integers.
inline double youden_oracle(const std::vector<double>& degrees, const std::vector<std::uint8_t>& labels) {
  std::vector<double> candidates(degrees);
  candidates.push_back(std::numeric_limits<double>::infinity());
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::int64_t P = 0, N = 0;
  for (std::uint8_t l : labels) (l ? P : N) += 1;
  double best_t = candidates.front();
  std::int64_t best_j = std::numeric_limits<std::int64_t>::min();
  for (double t : candidates) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      if (degrees[i] >= t) (labels[i] ? tp : fp) += 1;
    }
    const std::int64_t j = tp * N - fp * P;
    if (j > best_j) {
      best_j = j;
      best_t = t;
    }
  }
  return best_t;
}

/// sqrt(d^T A^-1 d) with A = cov + tau I, via Gaussian elimination with
/// partial pivoting on the augmented system.
inline double mahalanobis_oracle(const std::vector<double>& x, const std::vector<double>& mean,
                                 const std::vector<std::vector<double>>& cov, double tau) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1));
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = x[i] - mean[i];
    for (std::size_t j = 0; j < n; ++j) a[i][j] = cov[i][j] + (i == j ? tau : 0.0);
    a[i][n] = d[i];
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> y(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = a[i][n];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * y[k];
    y[i] = s / a[i][i];
  }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) q += d[i] * y[i];
  return std::sqrt(std::max(q, 0.0));
}

/// Random SPD matrix A A^T / n + 0.1 I with a spread of eigenvalues.
inline std::vector<std::vector<double>> random_spd(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> a(n, std::vector<double>(n)), s(n, std::vector<double>(n, 0.0));
  for (auto& row : a) {
    for (double& v : row) v = g(gen);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) s[i][j] += a[i][k] * a[j][k];
      s[i][j] /= static_cast<double>(n);
    }
    s[i][i] += 0.1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) s[j][i] = s[i][j];
  }
  return s;
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace asd::testing
