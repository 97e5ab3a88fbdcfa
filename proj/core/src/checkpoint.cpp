// SPDX-License-Identifier: Apache-2.0
#include "asd/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "asd/error.hpp"
#include "asd/png_io.hpp"

namespace asd::training {

namespace {

constexpr char kMagic[4] = {'A', 'S', 'D', 'C'};
constexpr std::size_t kHistoryColumns = 5;  // compact, diverse, reconstruct, total, radius

struct Array {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void array(const std::string& name, const Array& a) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name.data(), name.size());
    u32(static_cast<std::uint32_t>(a.shape.size()));
    for (std::uint64_t d : a.shape) u64(d);
    for (double v : a.values) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw IoError("checkpoint: truncated data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(in_[pos_ + b]) << (8 * b);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Array array() {
    Array a;
    const std::uint32_t rank = u32();
    if (rank > 8) throw IoError("checkpoint: implausible array rank");
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.shape.push_back(u64());
      count *= a.shape.back();
    }
    if (count > (in_.size() - pos_) / 8) throw IoError("checkpoint: array larger than file");
    a.values.resize(count);
    for (double& v : a.values) v = f64();
    return a;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

double opt(const std::optional<double>& v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); }
std::optional<double> opt(double v) { return std::isnan(v) ? std::nullopt : std::optional<double>(v); }

Eigen::MatrixXd to_matrix(const Array& a, std::size_t dim) {
  if (a.shape.size() != 2 || a.shape[0] != dim || a.shape[1] != dim) throw IoError("checkpoint: bad matrix shape");
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = a.values[i * dim + j];
  }
  return m;
}

Array from_matrix(const Eigen::MatrixXd& m) {
  Array a{{static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.values.push_back(m(i, j));
  }
  return a;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const encoder::Architecture& arch = ckpt.params.arch();
  config::KeyValues header;
  header.set("format_version", std::to_string(kCheckpointFormatVersion));
  header.set("encoder_version", std::to_string(encoder::EncoderParams::kVersion));
  header.set("bands", std::to_string(arch.bands));
  const config::KeyValues echo = to_key_values(ckpt.config);
  for (const auto& [k, v] : echo.entries()) header.set(k, v);
  const std::string text = header.to_text();

  std::vector<std::pair<std::string, Array>> arrays;
  for (const encoder::TensorSlot& s : ckpt.params.slots()) {
    const auto values = ckpt.params.values().subspan(s.offset, s.size);
    arrays.push_back({s.name, {{s.shape.begin(), s.shape.end()}, {values.begin(), values.end()}}});
  }
  arrays.push_back({"sphere.center", {{ckpt.sphere.center.size()}, ckpt.sphere.center}});
  arrays.push_back({"sphere.radius", {{1}, {ckpt.sphere.radius}}});
  arrays.push_back({"sphere.lambda", {{1}, {ckpt.sphere.lambda}}});
  if (ckpt.gaussian) {
    const scoring::GaussianModel& g = *ckpt.gaussian;
    arrays.push_back({"gaussian.mean", {{g.dim()}, {g.mean().data(), g.mean().data() + g.dim()}}});
    arrays.push_back({"gaussian.covariance", from_matrix(g.covariance())});
    arrays.push_back({"gaussian.inverse", from_matrix(g.inverse())});
    arrays.push_back({"gaussian.tau", {{1}, {g.tau()}}});
    arrays.push_back({"gaussian.count", {{1}, {static_cast<double>(g.count())}}});
  }
  Array history{{ckpt.history.size(), kHistoryColumns}, {}};
  for (const EpochRecord& r : ckpt.history) {
    for (double v : {opt(r.compact), opt(r.diverse), opt(r.reconstruct), opt(r.total), r.radius}) {
      history.values.push_back(v);
    }
  }
  arrays.push_back({"history", std::move(history)});

  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointFormatVersion);
  w.u64(text.size());
  w.bytes(text.data(), text.size());
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, a] : arrays) w.array(name, a);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError("checkpoint: bad magic");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointFormatVersion) {
    throw IoError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint64_t header_len = r.u64();
  if (header_len > bytes.size()) throw IoError("checkpoint: truncated header");
  const config::KeyValues header = config::KeyValues::parse(r.text(header_len));

  Checkpoint ckpt;
  apply_key_values(header, ckpt.config);
  const auto bands = header.get("bands");
  if (!bands) throw IoError("checkpoint: header lacks 'bands'");
  if (header.get("encoder_version") != std::to_string(encoder::EncoderParams::kVersion)) {
    throw IoError("checkpoint: unsupported encoder version");
  }
  ckpt.params = encoder::EncoderParams(encoder::Architecture{config::parse_uint(*bands, "bands"),
                                                             ckpt.config.scales.patch_size,
                                                             ckpt.config.descriptor_length, ckpt.config.scales.size()});

  std::map<std::string, Array> arrays;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text(r.u32());
    arrays[std::move(name)] = r.array();
  }
  if (!r.done()) throw IoError("checkpoint: trailing bytes");

  auto take = [&](const std::string& name) -> Array& {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw IoError("checkpoint: missing array '" + name + "'");
    return it->second;
  };

  for (const encoder::TensorSlot& s : ckpt.params.slots()) {
    const Array& a = take(s.name);
    if (!std::equal(a.shape.begin(), a.shape.end(), s.shape.begin(), s.shape.end())) {
      throw IoError("checkpoint: array '" + s.name + "' has the wrong shape");
    }
    std::copy(a.values.begin(), a.values.end(), ckpt.params.values().begin() + static_cast<std::ptrdiff_t>(s.offset));
  }
  ckpt.sphere.center = take("sphere.center").values;
  ckpt.sphere.radius = take("sphere.radius").values.at(0);
  ckpt.sphere.lambda = take("sphere.lambda").values.at(0);

  if (arrays.contains("gaussian.mean")) {
    const Array& mean = take("gaussian.mean");
    const std::size_t dim = mean.values.size();
    ckpt.gaussian = scoring::GaussianModel::restore(
        Eigen::Map<const Eigen::VectorXd>(mean.values.data(), static_cast<Eigen::Index>(dim)),
        to_matrix(take("gaussian.covariance"), dim), to_matrix(take("gaussian.inverse"), dim),
        take("gaussian.tau").values.at(0), static_cast<std::size_t>(take("gaussian.count").values.at(0)));
  }

  const Array& history = take("history");
  if (history.shape.size() != 2 || history.shape[1] != kHistoryColumns) throw IoError("checkpoint: bad history shape");
  for (std::size_t e = 0; e < history.shape[0]; ++e) {
    const double* row = history.values.data() + e * kHistoryColumns;
    ckpt.history.push_back({opt(row[0]), opt(row[1]), opt(row[2]), opt(row[3]), row[4], 0.0});
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  io::write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("missing checkpoint: " + path.string());
  const auto bytes = io::read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace asd::training
