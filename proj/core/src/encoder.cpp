// SPDX-License-Identifier: Apache-2.0
#include "asd/encoder.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <thread>

#include "asd/error.hpp"
#include "asd/parallel.hpp"
#include "asd/rng.hpp"
#include "fast_tanh.hpp"

namespace asd::encoder {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstRowVecMap = Eigen::Map<const Eigen::RowVectorXd>;

/// Pixels per work item. Fixed so chunking (and hence floating-point
/// summation order) never depends on the machine's thread count.
constexpr std::size_t kChunk = 64;

/// out[c] += sum over rows of m(r, c), always adding rows in order. Eigen's
/// colwise().sum() on a Map peels by address, so its rounding would depend on
/// where the allocator put the buffer.
void add_column_sums(const double* m, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = m + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
  }
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

void validate(const Architecture& arch) {
  if (arch.bands < 1) throw ContractError("encoder: bands must be >= 1");
  if (arch.length < 1) throw ContractError("encoder: descriptor length must be >= 1");
  if (arch.scales < 1) throw ContractError("encoder: at least one scale is required");
  if (arch.patch_size % 2 == 0) throw ContractError("encoder: patch size must be odd");
  if (arch.patch_size < 5) throw ContractError("encoder: patch size must be >= 5 (two 2x pooling stages)");
}

EncoderParams::EncoderParams(const Architecture& arch) : arch_(arch) {
  validate(arch);
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    const std::size_t size = product(shape);
    slots_.push_back({std::move(name), std::move(shape), offset, size});
    offset += size;
    return slots_.back().offset;
  };
  const std::size_t width = arch.scales * arch.length;
  for (std::size_t k = 0; k < arch.scales; ++k) {
    ScaleLayout layout;
    layout.begin = offset;
    std::size_t in = arch.bands;
    for (std::size_t l = 0; l < kConvChannels.size(); ++l) {
      const std::string prefix = "encoder." + std::to_string(k) + ".conv" + std::to_string(l + 1);
      layout.conv_weight[l] = add(prefix + ".weight", {kConvChannels[l], 3, 3, in});
      layout.conv_bias[l] = add(prefix + ".bias", {kConvChannels[l]});
      in = kConvChannels[l];
    }
    const std::string prefix = "encoder." + std::to_string(k) + ".fc";
    layout.fc_weight = add(prefix + ".weight", {arch.length, in});
    layout.fc_bias = add(prefix + ".bias", {arch.length});
    layout.size = offset - layout.begin;
    scale_layouts_.push_back(layout);
  }
  desc_w_ = add("head.descriptor.weight", {arch.length, width});
  desc_b_ = add("head.descriptor.bias", {arch.length});
  recon_w_ = add("head.reconstruction.weight", {arch.bands, width});
  recon_b_ = add("head.reconstruction.bias", {arch.bands});
  values_.assign(offset, 0.0);
}

const TensorSlot& EncoderParams::slot(std::string_view name) const {
  for (const TensorSlot& s : slots_) {
    if (s.name == name) return s;
  }
  throw ContractError("encoder params: no tensor named '" + std::string(name) + "'");
}

std::span<double> EncoderParams::tensor(std::string_view name) {
  const TensorSlot& s = slot(name);
  return std::span(values_).subspan(s.offset, s.size);
}

std::span<const double> EncoderParams::tensor(std::string_view name) const {
  const TensorSlot& s = slot(name);
  return std::span(values_).subspan(s.offset, s.size);
}

EncoderParams init_params(std::uint64_t seed, std::size_t bands, std::size_t patch_size, std::size_t length,
                          std::size_t scales) {
  EncoderParams params(Architecture{bands, patch_size, length, scales});
  Rng rng(seed);
  for (const TensorSlot& s : params.slots()) {
    if (!s.name.ends_with(".weight")) continue;
    const std::size_t fan_in = s.size / s.shape.front();
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : params.values().subspan(s.offset, s.size)) w = rng.uniform(-bound, bound);
  }
  return params;
}

void check_compatible(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params) {
  const Architecture& arch = params.arch();
  if (img.channels() != arch.bands) {
    throw ContractError("encoder: image has " + std::to_string(img.channels()) + " bands, model expects " +
                        std::to_string(arch.bands));
  }
  if (scales.size() != arch.scales || scales.patch_size != arch.patch_size) {
    throw ContractError("encoder: scale set (m=" + std::to_string(scales.size()) +
                        ", P=" + std::to_string(scales.patch_size) + ") does not match model (m=" +
                        std::to_string(arch.scales) + ", P=" + std::to_string(arch.patch_size) + ")");
  }
}

// ---------------------------------------------------------------------------
// One scale's encoder over a batch of patches.

namespace {

struct Workspace {
  std::vector<double> cols, a1, p1, a2, p2, a3, gap;
  std::vector<std::uint32_t> arg1, arg2;
  std::vector<double> d_act, d_pool, d_cols, d_gap;
  std::vector<double> patches, out, d_out, partial;
};

/// Reused across chunks so buffers are not reallocated and zero-filled.
Workspace& thread_workspace() {
  thread_local Workspace ws;
  return ws;
}

/// Source index for y + dy, dy in {-1, 0, 1}, stored at [y * 3 + dy + 1].
std::vector<std::size_t> reflect_table(std::size_t s) {
  std::vector<std::size_t> table(3 * s);
  for (std::size_t y = 0; y < s; ++y) {
    for (long d = -1; d <= 1; ++d) table[3 * y + static_cast<std::size_t>(d + 1)] = pyramid::reflect_index(static_cast<long>(y) + d, s);
  }
  return table;
}

void im2col(const double* in, std::size_t n, std::size_t s, std::size_t c, double* cols) {
  const std::vector<std::size_t> r = reflect_table(s);
  for (std::size_t b = 0; b < n; ++b) {
    const double* base = in + b * s * s * c;
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const double* row = base + r[3 * y + ky] * s * c;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double* src = row + r[3 * x + kx] * c;
            cols = std::copy(src, src + c, cols);
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t n, std::size_t s, std::size_t c, double* out) {
  const std::vector<std::size_t> r = reflect_table(s);
  for (std::size_t b = 0; b < n; ++b) {
    double* base = out + b * s * s * c;
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
          double* row = base + r[3 * y + ky] * s * c;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            double* dst = row + r[3 * x + kx] * c;
            for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += cols[ch];
            cols += c;
          }
        }
      }
    }
  }
}

void maxpool2(const double* in, std::size_t n, std::size_t s, std::size_t c, std::vector<double>& out,
              std::vector<std::uint32_t>& arg) {
  const std::size_t so = s / 2;
  out.resize(n * so * so * c);
  arg.resize(out.size());
  std::size_t o = 0;
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t base = b * s * s * c;
    for (std::size_t y = 0; y < so; ++y) {
      for (std::size_t x = 0; x < so; ++x) {
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = base + ((2 * y) * s + 2 * x) * c + ch;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = base + ((2 * y + dy) * s + 2 * x + dx) * c + ch;
              if (in[idx] > in[best]) best = idx;
            }
          }
          out[o] = in[best];
          arg[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
}

/// out = tanh(im2col(in) * W^T + b), out rows = n*s*s.
void conv_tanh(const double* in, std::size_t n, std::size_t s, std::size_t cin, const double* weight,
               const double* bias, std::size_t cout, std::vector<double>& cols, std::vector<double>& out) {
  const std::size_t rows = n * s * s, k = 9 * cin;
  cols.resize(rows * k);
  out.resize(rows * cout);
  im2col(in, n, s, cin, cols.data());
  MatMap o(out.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cout));
  o.noalias() = ConstMatMap(cols.data(), rows, k) * ConstMatMap(weight, cout, k).transpose();
  o.rowwise() += ConstRowVecMap(bias, cout);
  detail::tanh_inplace(out.data(), out.size());
}

/// Given d/d(tanh output) in d_act, accumulates weight/bias gradients and,
/// when d_in is non-null, writes d/d(layer input) into it (zeroed here).
void conv_tanh_backward(const double* in, std::size_t n, std::size_t s, std::size_t cin, const double* weight,
                        std::size_t cout, const std::vector<double>& act, std::vector<double>& d_act,
                        std::vector<double>& cols, std::vector<double>& d_cols, double* d_weight, double* d_bias,
                        std::vector<double>* d_in) {
  const std::size_t rows = n * s * s, k = 9 * cin;
  for (std::size_t i = 0; i < rows * cout; ++i) d_act[i] *= 1.0 - act[i] * act[i];
  ConstMatMap d_pre(d_act.data(), rows, cout);
  cols.resize(rows * k);
  im2col(in, n, s, cin, cols.data());
  MatMap(d_weight, cout, k).noalias() += d_pre.transpose() * ConstMatMap(cols.data(), rows, k);
  add_column_sums(d_act.data(), rows, cout, d_bias);
  if (d_in) {
    d_cols.resize(rows * k);
    MatMap(d_cols.data(), rows, k).noalias() = d_pre * ConstMatMap(weight, cout, k);
    d_in->assign(n * s * s * cin, 0.0);
    col2im_add(d_cols.data(), n, s, cin, d_in->data());
  }
}

struct ScaleNet {
  const double* block;  // params values + layout.begin
  const ScaleLayout& layout;
  const Architecture& arch;

  const double* at(std::size_t offset) const { return block + (offset - layout.begin); }
  std::size_t s1() const { return arch.patch_size; }
  std::size_t s2() const { return arch.patch_size / 2; }
  std::size_t s3() const { return arch.patch_size / 4; }

  /// patches: n x P x P x B. out: n x L.
  void forward(const double* patches, std::size_t n, Workspace& ws, double* out) const {
    const auto& ch = kConvChannels;
    conv_tanh(patches, n, s1(), arch.bands, at(layout.conv_weight[0]), at(layout.conv_bias[0]), ch[0], ws.cols,
              ws.a1);
    maxpool2(ws.a1.data(), n, s1(), ch[0], ws.p1, ws.arg1);
    conv_tanh(ws.p1.data(), n, s2(), ch[0], at(layout.conv_weight[1]), at(layout.conv_bias[1]), ch[1], ws.cols,
              ws.a2);
    maxpool2(ws.a2.data(), n, s2(), ch[1], ws.p2, ws.arg2);
    conv_tanh(ws.p2.data(), n, s3(), ch[1], at(layout.conv_weight[2]), at(layout.conv_bias[2]), ch[2], ws.cols,
              ws.a3);

    const std::size_t area = s3() * s3();
    ws.gap.assign(n * ch[2], 0.0);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < area; ++p) {
        const double* a = ws.a3.data() + (b * area + p) * ch[2];
        for (std::size_t c = 0; c < ch[2]; ++c) ws.gap[b * ch[2] + c] += a[c];
      }
    }
    for (double& g : ws.gap) g /= static_cast<double>(area);

    MatMap o(out, n, arch.length);
    o.noalias() = ConstMatMap(ws.gap.data(), n, ch[2]) * ConstMatMap(at(layout.fc_weight), arch.length, ch[2]).transpose();
    o.rowwise() += ConstRowVecMap(at(layout.fc_bias), arch.length);
  }

  /// Requires ws to hold this batch's forward state. grad points at this
  /// scale's block in a gradient buffer.
  void backward(const double* patches, std::size_t n, const double* d_out, Workspace& ws, double* grad) const {
    const auto& ch = kConvChannels;
    auto g = [&](std::size_t offset) { return grad + (offset - layout.begin); };
    const std::size_t len = arch.length;

    ConstMatMap d_o(d_out, n, len);
    MatMap(g(layout.fc_weight), len, ch[2]).noalias() += d_o.transpose() * ConstMatMap(ws.gap.data(), n, ch[2]);
    add_column_sums(d_out, n, len, g(layout.fc_bias));
    ws.d_gap.resize(n * ch[2]);
    MatMap(ws.d_gap.data(), n, ch[2]).noalias() = d_o * ConstMatMap(at(layout.fc_weight), len, ch[2]);

    const std::size_t area = s3() * s3();
    ws.d_act.resize(n * area * ch[2]);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < area; ++p) {
        for (std::size_t c = 0; c < ch[2]; ++c) {
          ws.d_act[(b * area + p) * ch[2] + c] = ws.d_gap[b * ch[2] + c] / static_cast<double>(area);
        }
      }
    }

    conv_tanh_backward(ws.p2.data(), n, s3(), ch[1], at(layout.conv_weight[2]), ch[2], ws.a3, ws.d_act, ws.cols,
                       ws.d_cols, g(layout.conv_weight[2]), g(layout.conv_bias[2]), &ws.d_pool);
    unpool(ws.d_pool, ws.arg2, ws.a2.size(), ws.d_act);
    conv_tanh_backward(ws.p1.data(), n, s2(), ch[0], at(layout.conv_weight[1]), ch[1], ws.a2, ws.d_act, ws.cols,
                       ws.d_cols, g(layout.conv_weight[1]), g(layout.conv_bias[1]), &ws.d_pool);
    unpool(ws.d_pool, ws.arg1, ws.a1.size(), ws.d_act);
    conv_tanh_backward(patches, n, s1(), arch.bands, at(layout.conv_weight[0]), ch[0], ws.a1, ws.d_act, ws.cols,
                       ws.d_cols, g(layout.conv_weight[0]), g(layout.conv_bias[0]), nullptr);
  }

  static void unpool(const std::vector<double>& d_pooled, const std::vector<std::uint32_t>& arg, std::size_t in_size,
                     std::vector<double>& d_in) {
    d_in.assign(in_size, 0.0);
    for (std::size_t o = 0; o < d_pooled.size(); ++o) d_in[arg[o]] += d_pooled[o];
  }
};

ScaleNet scale_net(const EncoderParams& params, std::size_t k) {
  const ScaleLayout& layout = params.scale_layout(k);
  return ScaleNet{params.values().data() + layout.begin, layout, params.arch()};
}

std::size_t patch_values(const Architecture& arch) { return arch.patch_size * arch.patch_size * arch.bands; }

std::vector<double> flatten(const pyramid::PatchStack& stack, std::size_t k, const Architecture& arch) {
  if (stack.patches.size() != arch.scales) throw ContractError("encode_stack: stack has wrong number of patches");
  const pyramid::Patch& patch = stack.patches[k];
  if (patch.height() != arch.patch_size || patch.width() != arch.patch_size || patch.channels() != arch.bands) {
    throw ContractError("encode_stack: patch shape " + patch.shape_string() + " does not match model");
  }
  return {patch.values().begin(), patch.values().end()};
}

void check_concat(const ConcatCube& concat, const EncoderParams& params) {
  const Architecture& arch = params.arch();
  if (concat.channels() != arch.scales * arch.length) {
    throw ContractError("head: concat width " + std::to_string(concat.channels()) + " != m*L = " +
                        std::to_string(arch.scales * arch.length));
  }
}

template <class Out>
Out affine_head(const ConcatCube& concat, const EncoderParams& params, std::size_t w_off, std::size_t b_off,
                std::size_t out_width) {
  check_concat(concat, params);
  const std::size_t width = concat.channels(), n = concat.pixels();
  Out out(concat.height(), concat.width(), out_width);
  const double* values = params.values().data();
  MatMap o(out.data(), n, out_width);
  o.noalias() = ConstMatMap(concat.data(), n, width) * ConstMatMap(values + w_off, out_width, width).transpose();
  o.rowwise() += ConstRowVecMap(values + b_off, out_width);
  return out;
}

}  // namespace

std::vector<double> encode_stack(const pyramid::PatchStack& stack, const EncoderParams& params) {
  const Architecture& arch = params.arch();
  std::vector<double> out(arch.scales * arch.length);
  Workspace ws;
  for (std::size_t k = 0; k < arch.scales; ++k) {
    const std::vector<double> patch = flatten(stack, k, arch);
    scale_net(params, k).forward(patch.data(), 1, ws, out.data() + k * arch.length);
  }
  return out;
}

void encode_stack_backward(const pyramid::PatchStack& stack, const EncoderParams& params,
                           std::span<const double> d_out, EncoderParams& grad) {
  const Architecture& arch = params.arch();
  if (d_out.size() != arch.scales * arch.length) throw ContractError("encode_stack_backward: gradient size mismatch");
  if (!(grad.arch() == arch)) throw ContractError("encode_stack_backward: gradient layout mismatch");
  Workspace ws;
  std::vector<double> scratch(arch.length);
  for (std::size_t k = 0; k < arch.scales; ++k) {
    const std::vector<double> patch = flatten(stack, k, arch);
    const ScaleNet net = scale_net(params, k);
    net.forward(patch.data(), 1, ws, scratch.data());
    net.backward(patch.data(), 1, d_out.data() + k * arch.length, ws,
                 grad.values().data() + params.scale_layout(k).begin);
  }
}

DescriptorCube descriptor_head(const ConcatCube& concat, const EncoderParams& params) {
  return affine_head<DescriptorCube>(concat, params, params.descriptor_weight_offset(),
                                     params.descriptor_bias_offset(), params.arch().length);
}

ReconGrid reconstruction_head(const ConcatCube& concat, const EncoderParams& params) {
  return affine_head<ReconGrid>(concat, params, params.recon_weight_offset(), params.recon_bias_offset(),
                                params.arch().bands);
}

ConcatCube heads_backward(const ConcatCube& concat, const DescriptorCube* d_descriptors, const ReconGrid* d_recon,
                          const EncoderParams& params, EncoderParams& grad) {
  check_concat(concat, params);
  const Architecture& arch = params.arch();
  const std::size_t width = concat.channels(), n = concat.pixels();
  ConcatCube d_concat(concat.height(), concat.width(), width);
  MatMap d_c(d_concat.data(), n, width);
  ConstMatMap c(concat.data(), n, width);
  const double* values = params.values().data();
  double* g = grad.values().data();

  auto head = [&](const double* d_out, std::size_t out_width, std::size_t w_off, std::size_t b_off) {
    ConstMatMap d(d_out, n, out_width);
    MatMap(g + w_off, out_width, width).noalias() += d.transpose() * c;
    add_column_sums(d_out, n, out_width, g + b_off);
    d_c.noalias() += d * ConstMatMap(values + w_off, out_width, width);
  };
  if (d_descriptors) {
    if (d_descriptors->pixels() != n || d_descriptors->channels() != arch.length) {
      throw ContractError("heads_backward: descriptor gradient shape mismatch");
    }
    head(d_descriptors->data(), arch.length, params.descriptor_weight_offset(), params.descriptor_bias_offset());
  }
  if (d_recon) {
    if (d_recon->pixels() != n || d_recon->channels() != arch.bands) {
      throw ContractError("heads_backward: reconstruction gradient shape mismatch");
    }
    head(d_recon->data(), arch.bands, params.recon_weight_offset(), params.recon_bias_offset());
  }
  return d_concat;
}

ConcatCube trunk(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params) {
  check_compatible(img, scales, params);
  const Architecture& arch = params.arch();
  const pyramid::Pyramid pyr(img, scales);
  const std::size_t n_pixels = img.pixels(), width = arch.scales * arch.length;
  const std::size_t chunks = (n_pixels + kChunk - 1) / kChunk;
  ConcatCube concat(img.height(), img.width(), width);

  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t first = c * kChunk, count = std::min(kChunk, n_pixels - first);
    Workspace& ws = thread_workspace();
    ws.patches.resize(count * patch_values(arch));
    ws.out.resize(count * arch.length);
    const std::vector<double>& out = ws.out;
    for (std::size_t k = 0; k < arch.scales; ++k) {
      pyr.gather(k, first, count, ws.patches.data());
      scale_net(params, k).forward(ws.patches.data(), count, ws, ws.out.data());
      for (std::size_t n = 0; n < count; ++n) {
        std::copy_n(out.data() + n * arch.length, arch.length, concat.pixel(first + n).data() + k * arch.length);
      }
    }
  });
  return concat;
}

void trunk_backward(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params,
                    const ConcatCube& d_concat, EncoderParams& grad) {
  check_compatible(img, scales, params);
  const Architecture& arch = params.arch();
  if (!(grad.arch() == arch)) throw ContractError("trunk_backward: gradient layout mismatch");
  if (d_concat.pixels() != img.pixels() || d_concat.channels() != arch.scales * arch.length) {
    throw ContractError("trunk_backward: upstream gradient shape mismatch");
  }
  const pyramid::Pyramid pyr(img, scales);
  const std::size_t n_pixels = img.pixels();
  const std::size_t chunks = (n_pixels + kChunk - 1) / kChunk;
  const std::size_t tasks = chunks * arch.scales;
  const std::size_t wave = std::max(1u, std::thread::hardware_concurrency());

  std::vector<std::vector<double>> partial(std::min(wave, tasks));
  for (std::size_t start = 0; start < tasks; start += wave) {
    const std::size_t in_wave = std::min(wave, tasks - start);
    parallel_for(in_wave, [&](std::size_t w) {
      const std::size_t task = start + w;
      const std::size_t c = task / arch.scales, k = task % arch.scales;
      const std::size_t first = c * kChunk, count = std::min(kChunk, n_pixels - first);
      Workspace& ws = thread_workspace();
      ws.patches.resize(count * patch_values(arch));
      ws.out.resize(count * arch.length);
      ws.d_out.resize(count * arch.length);
      for (std::size_t n = 0; n < count; ++n) {
        std::copy_n(d_concat.pixel(first + n).data() + k * arch.length, arch.length, ws.d_out.data() + n * arch.length);
      }
      pyr.gather(k, first, count, ws.patches.data());
      const ScaleNet net = scale_net(params, k);
      net.forward(ws.patches.data(), count, ws, ws.out.data());
      partial[w].assign(params.scale_layout(k).size, 0.0);
      net.backward(ws.patches.data(), count, ws.d_out.data(), ws, partial[w].data());
    });
    for (std::size_t w = 0; w < in_wave; ++w) {
      const ScaleLayout& layout = params.scale_layout((start + w) % arch.scales);
      double* g = grad.values().data() + layout.begin;
      for (std::size_t i = 0; i < layout.size; ++i) g[i] += partial[w][i];
    }
  }
}

ForwardResult forward_image(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params) {
  ForwardResult result;
  result.concat = trunk(img, scales, params);
  result.descriptors = descriptor_head(result.concat, params);
  result.recon = reconstruction_head(result.concat, params);
  return result;
}

DescriptorCube describe(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params) {
  return descriptor_head(trunk(img, scales, params), params);
}

void backward_image(const ImageTensor& img, const pyramid::ScaleSet& scales, const EncoderParams& params,
                    const ConcatCube& concat, const DescriptorCube* d_descriptors, const ReconGrid* d_recon,
                    EncoderParams& grad) {
  const ConcatCube d_concat = heads_backward(concat, d_descriptors, d_recon, params, grad);
  trunk_backward(img, scales, params, d_concat, grad);
}

}  // namespace asd::encoder
