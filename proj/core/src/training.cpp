// SPDX-License-Identifier: Apache-2.0
#include "asd/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "asd/error.hpp"
#include "asd/rng.hpp"

namespace asd::training {

namespace {

constexpr std::uint64_t kInitSalt = 0x696e6974ULL;
constexpr std::uint64_t kAugmentSalt = 0x61756731ULL;

std::size_t check_mask(const Grid<DescriptorTag>& cube, const NormalMask& mask, const char* what) {
  if (cube.height() != mask.height() || cube.width() != mask.width()) {
    throw ContractError(std::string(what) + ": mask shape does not match the cube");
  }
  const std::size_t n = count_true(mask);
  if (n == 0) throw ContractError(std::string(what) + ": empty normal mask");
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Flags and config

std::string LossFlags::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(compact, "l1");
  add(diverse, "l2");
  add(reconstruct, "l3");
  return out;
}

LossFlags LossFlags::parse(std::string_view text) {
  LossFlags flags{false, false, false};
  for (const std::string& item : config::parse_string_list(text)) {
    if (item == "l1" || item == "compact") flags.compact = true;
    else if (item == "l2" || item == "diverse") flags.diverse = true;
    else if (item == "l3" || item == "reconstruct") flags.reconstruct = true;
    else throw ContractError("unknown loss term '" + item + "' (expected l1, l2, l3)");
  }
  if (!flags.any()) throw ContractError("at least one loss term must be enabled");
  return flags;
}

void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ContractError("train: epochs must be >= 1");
  if (c.warmup_epochs >= c.epochs) throw ContractError("train: warmup_epochs must be < epochs");
  if (!(c.learning_rate > 0.0)) throw ContractError("train: learning_rate must be > 0");
  if (c.batch_size != 1) throw ContractError("train: only batch_size = 1 is supported");
  if (!(c.lambda > 0.0)) throw ContractError("train: lambda must be > 0");
  if (c.descriptor_length < 1) throw ContractError("train: descriptor_length must be >= 1");
  if (!(c.radius_init >= 0.0)) throw ContractError("train: radius_init must be >= 0");
  if (!c.losses.any()) throw ContractError("train: at least one loss term must be enabled");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    throw ContractError("train: Adam betas must be in [0, 1)");
  }
  if (!(c.adam_epsilon > 0.0)) throw ContractError("train: adam_epsilon must be > 0");
  pyramid::validate(c.scales);
  encoder::validate(encoder::Architecture{1, c.scales.patch_size, c.descriptor_length, c.scales.size()});
  if (c.losses.diverse) augment::validate(c.augmentation);
}

const std::vector<std::string>& train_keys() {
  static const std::vector<std::string> keys{
      "epochs",           "warmup_epochs",      "learning_rate",   "batch_size",       "lambda",
      "descriptor_length", "patch_size",        "scales",          "radius_init",      "losses",
      "seed",             "augment_ops",        "augment_probability", "gauss_noise_sigma", "brightness_delta",
      "contrast_factor",  "solarize_threshold", "adam_beta1",      "adam_beta2",       "adam_epsilon",
  };
  return keys;
}

namespace {

const char* range_key(augment::OpKind kind) {
  switch (kind) {
    case augment::OpKind::kGaussNoise: return "gauss_noise_sigma";
    case augment::OpKind::kBrightness: return "brightness_delta";
    case augment::OpKind::kContrast: return "contrast_factor";
    case augment::OpKind::kSolarize: return "solarize_threshold";
    case augment::OpKind::kChannelShuffle: return nullptr;
  }
  return nullptr;
}

std::string format_range(double lo, double hi) {
  return lo == hi ? config::format_double(lo) : config::format_double(lo) + "," + config::format_double(hi);
}

}  // namespace

config::KeyValues to_key_values(const TrainConfig& c) {
  config::KeyValues kv;
  kv.set("epochs", std::to_string(c.epochs));
  kv.set("warmup_epochs", std::to_string(c.warmup_epochs));
  kv.set("learning_rate", config::format_double(c.learning_rate));
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("lambda", config::format_double(c.lambda));
  kv.set("descriptor_length", std::to_string(c.descriptor_length));
  kv.set("patch_size", std::to_string(c.scales.patch_size));
  kv.set("scales", config::format_list(c.scales.scales));
  kv.set("radius_init", config::format_double(c.radius_init));
  kv.set("losses", c.losses.to_string());
  kv.set("seed", std::to_string(c.seed));
  std::string ops;
  for (const auto& op : c.augmentation.ops) ops += (ops.empty() ? "" : ",") + std::string(augment::to_string(op.kind));
  kv.set("augment_ops", ops);
  kv.set("augment_probability", config::format_double(c.augmentation.probability));
  std::map<std::string, std::string> ranges;
  for (const auto& op : c.augmentation.ops) {
    if (const char* key = range_key(op.kind)) ranges.emplace(key, format_range(op.lo, op.hi));
  }
  const augment::AugmentationChain defaults = augment::default_chain();
  for (const auto& op : defaults.ops) {
    if (const char* key = range_key(op.kind)) ranges.emplace(key, format_range(op.lo, op.hi));
  }
  for (const char* key : {"gauss_noise_sigma", "brightness_delta", "contrast_factor", "solarize_threshold"}) {
    kv.set(key, ranges.at(key));
  }
  kv.set("adam_beta1", config::format_double(c.adam_beta1));
  kv.set("adam_beta2", config::format_double(c.adam_beta2));
  kv.set("adam_epsilon", config::format_double(c.adam_epsilon));
  return kv;
}

void apply_key_values(const config::KeyValues& kv, TrainConfig& c) {
  auto get = [&](const char* key) { return kv.get(key); };
  if (auto v = get("epochs")) c.epochs = config::parse_uint(*v, "epochs");
  if (auto v = get("warmup_epochs")) c.warmup_epochs = config::parse_uint(*v, "warmup_epochs");
  if (auto v = get("learning_rate")) c.learning_rate = config::parse_double(*v, "learning_rate");
  if (auto v = get("batch_size")) c.batch_size = config::parse_uint(*v, "batch_size");
  if (auto v = get("lambda")) c.lambda = config::parse_double(*v, "lambda");
  if (auto v = get("descriptor_length")) c.descriptor_length = config::parse_uint(*v, "descriptor_length");
  if (auto v = get("patch_size")) c.scales.patch_size = config::parse_uint(*v, "patch_size");
  if (auto v = get("scales")) c.scales.scales = config::parse_double_list(*v, "scales");
  if (auto v = get("radius_init")) c.radius_init = config::parse_double(*v, "radius_init");
  if (auto v = get("losses")) c.losses = LossFlags::parse(*v);
  if (auto v = get("seed")) c.seed = config::parse_uint(*v, "seed");
  if (auto v = get("adam_beta1")) c.adam_beta1 = config::parse_double(*v, "adam_beta1");
  if (auto v = get("adam_beta2")) c.adam_beta2 = config::parse_double(*v, "adam_beta2");
  if (auto v = get("adam_epsilon")) c.adam_epsilon = config::parse_double(*v, "adam_epsilon");
  if (auto v = get("augment_probability")) c.augmentation.probability = config::parse_double(*v, "augment_probability");

  if (auto v = get("augment_ops")) {
    std::vector<augment::OpSpec> ops;
    for (const std::string& name : config::parse_string_list(*v)) ops.push_back({augment::parse_op_kind(name), 0, 0});
    // Fresh ops start from the default ranges.
    for (auto& op : ops) {
      for (const auto& d : augment::default_chain().ops) {
        if (d.kind == op.kind) op = d;
      }
    }
    c.augmentation.ops = std::move(ops);
  }
  for (auto& op : c.augmentation.ops) {
    const char* key = range_key(op.kind);
    if (!key) continue;
    if (auto v = get(key)) {
      const std::vector<double> range = config::parse_double_list(*v, key);
      if (range.size() == 1) {
        op.lo = op.hi = range[0];
      } else if (range.size() == 2) {
        op.lo = range[0];
        op.hi = range[1];
      } else {
        throw ContractError(std::string("config key '") + key + "': expected 'value' or 'lo,hi'");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Losses

double loss_compact(const DescriptorCube& d, const HypersphereState& sphere, const NormalMask& mask,
                    DescriptorCube* grad) {
  const std::size_t n = check_mask(d, mask, "loss_compact");
  if (sphere.center.size() != d.channels()) throw ContractError("loss_compact: centre length != descriptor length");
  const double r2 = sphere.radius * sphere.radius;
  const double scale = sphere.lambda / static_cast<double>(n);
  if (grad) *grad = DescriptorCube(d.height(), d.width(), d.channels());
  double hinge = 0.0;
  for (std::size_t p = 0; p < d.pixels(); ++p) {
    if (!mask[p]) continue;
    const auto f = d.pixel(p);
    double dist2 = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) dist2 += (f[k] - sphere.center[k]) * (f[k] - sphere.center[k]);
    if (dist2 <= r2) continue;
    hinge += dist2 - r2;
    if (grad) {
      auto g = grad->pixel(p);
      for (std::size_t k = 0; k < f.size(); ++k) g[k] = 2.0 * scale * (f[k] - sphere.center[k]);
    }
  }
  return r2 + scale * hinge;
}

double loss_diverse(const DescriptorCube& d, const DescriptorCube& dt, const NormalMask& mask, DescriptorCube* grad,
                    DescriptorCube* grad_t) {
  if (!d.same_shape(dt)) throw ContractError("loss_diverse: D and D^T differ in shape");
  const std::size_t n = check_mask(d, mask, "loss_diverse");
  double sum = 0.0;
  for (std::size_t p = 0; p < d.pixels(); ++p) {
    if (!mask[p]) continue;
    const auto a = d.pixel(p), b = dt.pixel(p);
    for (std::size_t k = 0; k < a.size(); ++k) sum += (a[k] - b[k]) * (a[k] - b[k]);
  }
  const double denom = sum / static_cast<double>(n) + kDiverseEpsilon;
  const double loss = 1.0 / denom;
  if (grad || grad_t) {
    const double coeff = -2.0 / (denom * denom * static_cast<double>(n));
    DescriptorCube g(d.height(), d.width(), d.channels());
    for (std::size_t p = 0; p < d.pixels(); ++p) {
      if (!mask[p]) continue;
      const auto a = d.pixel(p), b = dt.pixel(p);
      auto gp = g.pixel(p);
      for (std::size_t k = 0; k < a.size(); ++k) gp[k] = coeff * (a[k] - b[k]);
    }
    if (grad_t) {
      *grad_t = g;
      for (double& v : grad_t->values()) v = -v;
    }
    if (grad) *grad = std::move(g);
  }
  return loss;
}

double loss_reconstruct(const ImageTensor& x, const ReconGrid& xr, const NormalMask& mask, ReconGrid* grad) {
  if (x.height() != xr.height() || x.width() != xr.width() || x.channels() != xr.channels()) {
    throw ContractError("loss_reconstruct: shape mismatch " + x.shape_string() + " vs " + xr.shape_string());
  }
  if (x.height() != mask.height() || x.width() != mask.width()) {
    throw ContractError("loss_reconstruct: mask shape does not match the image");
  }
  const std::size_t n = count_true(mask);
  if (n == 0) throw ContractError("loss_reconstruct: empty normal mask");
  if (grad) *grad = ReconGrid(xr.height(), xr.width(), xr.channels());
  double sum = 0.0;
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    if (!mask[p]) continue;
    const auto a = x.pixel(p), b = xr.pixel(p);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double diff = b[k] - a[k];
      sum += diff * diff;
      if (grad) grad->pixel(p)[k] = 2.0 * diff / static_cast<double>(n);
    }
  }
  return sum / static_cast<double>(n);
}

double loss_total(double compact, double diverse, double reconstruct, const LossFlags& flags) {
  double total = 0.0;
  if (flags.compact) total += compact;
  if (flags.diverse) total += diverse;
  if (flags.reconstruct) total += reconstruct;
  return total;
}

HypersphereState update_center_radius(std::span<const double> rows, std::size_t dim, double lambda) {
  if (dim == 0 || rows.size() % dim != 0) throw ContractError("update_center_radius: bad descriptor buffer");
  const std::size_t n = rows.size() / dim;
  if (n == 0) throw ContractError("update_center_radius: no descriptors");
  HypersphereState state;
  state.lambda = lambda;
  // Mean taken relative to the first row, so identical rows give it exactly.
  state.center.assign(dim, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) state.center[k] += rows[i * dim + k] - rows[k];
  }
  for (std::size_t k = 0; k < dim; ++k) state.center[k] = rows[k] + state.center[k] / static_cast<double>(n);
  double max2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) d2 += (rows[i * dim + k] - state.center[k]) * (rows[i * dim + k] - state.center[k]);
    max2 = std::max(max2, d2);
  }
  state.radius = std::sqrt(max2);
  return state;
}

void append_masked(const DescriptorCube& descriptors, const NormalMask& mask, std::vector<double>& rows) {
  if (descriptors.height() != mask.height() || descriptors.width() != mask.width()) {
    throw ContractError("append_masked: mask shape does not match the cube");
  }
  for (std::size_t p = 0; p < descriptors.pixels(); ++p) {
    if (!mask[p]) continue;
    const auto f = descriptors.pixel(p);
    rows.insert(rows.end(), f.begin(), f.end());
  }
}

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ContractError("adam: size mismatch");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

// ---------------------------------------------------------------------------
// Objective for one image

LossTerms image_objective(const TrainingSample& sample, const ImageTensor* augmented,
                          const encoder::EncoderParams& params, const pyramid::ScaleSet& scales,
                          const HypersphereState& sphere, const LossFlags& active, encoder::EncoderParams* grad) {
  if (!active.any()) throw ContractError("image_objective: no active loss term");
  if (active.diverse && !augmented) throw ContractError("image_objective: diversity loss needs an augmented image");
  if (active.compact && !sphere.has_center()) throw ContractError("image_objective: compact loss needs a centre");

  const encoder::ForwardResult fwd = encoder::forward_image(sample.image, scales, params);
  LossTerms terms;
  DescriptorCube d_desc(fwd.descriptors.height(), fwd.descriptors.width(), fwd.descriptors.channels());
  bool has_desc_grad = false;

  if (active.compact) {
    DescriptorCube g;
    terms.compact = loss_compact(fwd.descriptors, sphere, sample.mask, grad ? &g : nullptr);
    if (grad) {
      for (std::size_t i = 0; i < g.size(); ++i) d_desc.values()[i] += g.values()[i];
      has_desc_grad = true;
    }
  }

  ConcatCube concat_t;
  DescriptorCube d_desc_t;
  if (active.diverse) {
    concat_t = encoder::trunk(*augmented, scales, params);
    const DescriptorCube desc_t = encoder::descriptor_head(concat_t, params);
    DescriptorCube g;
    terms.diverse = loss_diverse(fwd.descriptors, desc_t, sample.mask, grad ? &g : nullptr, grad ? &d_desc_t : nullptr);
    if (grad) {
      for (std::size_t i = 0; i < g.size(); ++i) d_desc.values()[i] += g.values()[i];
      has_desc_grad = true;
    }
  }

  ReconGrid d_recon;
  if (active.reconstruct) terms.reconstruct = loss_reconstruct(sample.image, fwd.recon, sample.mask, grad ? &d_recon : nullptr);

  terms.total = loss_total(terms.compact.value_or(0.0), terms.diverse.value_or(0.0), terms.reconstruct.value_or(0.0),
                           active);

  if (grad) {
    encoder::backward_image(sample.image, scales, params, fwd.concat, has_desc_grad ? &d_desc : nullptr,
                            active.reconstruct ? &d_recon : nullptr, *grad);
    if (active.diverse) {
      const ConcatCube d_concat_t = encoder::heads_backward(concat_t, &d_desc_t, nullptr, params, *grad);
      encoder::trunk_backward(*augmented, scales, params, d_concat_t, *grad);
    }
  }
  return terms;
}

std::vector<double> collect_descriptors(std::span<const TrainingSample> dataset, const encoder::EncoderParams& params,
                                        const pyramid::ScaleSet& scales) {
  std::vector<double> rows;
  for (const TrainingSample& s : dataset) append_masked(encoder::describe(s.image, scales, params), s.mask, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Loop

namespace {

void check_dataset(std::span<const TrainingSample> dataset) {
  if (dataset.empty()) throw ContractError("train: empty dataset");
  const std::size_t bands = dataset.front().image.channels();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const TrainingSample& s = dataset[i];
    validate_image(s.image);
    if (s.image.channels() != bands) throw ContractError("train: image " + std::to_string(i) + " has a different band count");
    if (s.mask.height() != s.image.height() || s.mask.width() != s.image.width()) {
      throw ContractError("train: mask " + std::to_string(i) + " does not match its image");
    }
    if (count_true(s.mask) == 0) throw ContractError("train: image " + std::to_string(i) + " has an empty normal mask");
  }
}

struct Mean {
  double sum = 0.0;
  std::size_t count = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  std::optional<double> value() const {
    return count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt;
  }
};

bool finite_terms(const LossTerms& t) {
  auto ok = [](const std::optional<double>& v) { return !v || std::isfinite(*v); };
  return ok(t.compact) && ok(t.diverse) && ok(t.reconstruct) && std::isfinite(t.total);
}

}  // namespace

Checkpoint train(std::span<const TrainingSample> dataset, const TrainConfig& config, const TrainCallbacks& callbacks) {
  validate(config);
  check_dataset(dataset);
  const std::size_t bands = dataset.front().image.channels();
  if (config.losses.diverse) augment::validate(config.augmentation, bands);

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.params = encoder::init_params(derive_seed({config.seed, kInitSalt}), bands, config.scales.patch_size,
                                     config.descriptor_length, config.scales.size());
  ckpt.sphere.radius = config.radius_init;
  ckpt.sphere.lambda = config.lambda;
  encoder::EncoderParams& params = ckpt.params;
  Adam adam(params.size(), config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  const std::uint64_t augment_seed = derive_seed({config.seed, kAugmentSalt, config.augmentation.seed});

  if (config.warmup_epochs == 0) {
    const auto rows = collect_descriptors(dataset, params, config.scales);
    ckpt.sphere.center = update_center_radius(rows, config.descriptor_length, config.lambda).center;
  }

  std::vector<double> rows;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const bool warmup = epoch < config.warmup_epochs;
    const LossFlags active = warmup ? LossFlags{false, false, config.losses.reconstruct} : config.losses;
    Mean compact, diverse, reconstruct, total;

    for (std::size_t i = 0; i < dataset.size(); ++i) {
      ProgressEvent event{epoch, i, warmup, active.diverse, {}};
      if (active.any()) {
        ImageTensor augmented;
        if (active.diverse) {
          augment::AugmentationChain chain = config.augmentation;
          chain.seed = augment::chain_seed(augment_seed, epoch, i);
          augmented = augment::apply_chain(dataset[i].image, chain);
        }
        encoder::EncoderParams grad = params.zeros_like();
        event.terms = image_objective(dataset[i], active.diverse ? &augmented : nullptr, params, config.scales,
                                      ckpt.sphere, active, &grad);
        if (!finite_terms(event.terms)) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", image " +
                               std::to_string(i));
        }
        adam.step(params.values(), grad.values());
        compact.add(event.terms.compact);
        diverse.add(event.terms.diverse);
        reconstruct.add(event.terms.reconstruct);
        total.add(event.terms.total);
      }
      if (callbacks.on_image) callbacks.on_image(event);
    }

    if (!warmup) {
      rows = collect_descriptors(dataset, params, config.scales);
      ckpt.sphere = update_center_radius(rows, config.descriptor_length, config.lambda);
    } else if (epoch + 1 == config.warmup_epochs) {
      rows = collect_descriptors(dataset, params, config.scales);
      ckpt.sphere.center = update_center_radius(rows, config.descriptor_length, config.lambda).center;
    }

    EpochRecord record{compact.value(), diverse.value(), reconstruct.value(), total.value(), ckpt.sphere.radius,
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()};
    ckpt.history.push_back(record);
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, record);
  }

  ckpt.gaussian = scoring::fit_gaussian(rows, config.descriptor_length);
  return ckpt;
}

}  // namespace asd::training
