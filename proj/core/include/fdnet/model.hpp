#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "fdnet/filters.hpp"
#include "fdnet/layers.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

enum class SkipVariant { Identity, Projection, FrequencyDual, FrequencyLowOnly, FrequencyHighOnly };
enum class Variant { ResNet, FDResNet };

struct BlockConfig {
  int64_t in_ch = 0, mid_ch = 0, out_ch = 0;
  int64_t stride = 1;
  SkipVariant skip = SkipVariant::Projection;
  std::optional<GaussianSpec> low, high;

  void validate() const {
    if (in_ch < 1 || mid_ch < 1 || out_ch < 1) {
      throw ShapeError("BlockConfig: channel counts must be positive (in_ch=" + std::to_string(in_ch) +
                       ", mid_ch=" + std::to_string(mid_ch) + ", out_ch=" + std::to_string(out_ch) + ")");
    }
    if (stride != 1 && stride != 2) {
      throw ShapeError("BlockConfig.stride must be 1 or 2, got " + std::to_string(stride));
    }
    const bool wants_low = skip == SkipVariant::FrequencyDual || skip == SkipVariant::FrequencyLowOnly;
    const bool wants_high = skip == SkipVariant::FrequencyDual || skip == SkipVariant::FrequencyHighOnly;
    if (skip == SkipVariant::Identity && (in_ch != out_ch || stride != 1)) {
      throw ShapeError("BlockConfig.skip: Identity requires in_ch == out_ch and stride == 1");
    }
    if (wants_low) {
      if (!low) throw ShapeError("BlockConfig.low: missing GaussianSpec for the low-pass skip");
      low->validate();
      if (low->mode != PassMode::LowPass) throw ShapeError("BlockConfig.low: spec mode must be LowPass");
    } else if (low) {
      throw ShapeError("BlockConfig.low: spec present but skip variant has no low-pass path");
    }
    if (wants_high) {
      if (!high) throw ShapeError("BlockConfig.high: missing GaussianSpec for the high-pass skip");
      high->validate();
      if (high->mode != PassMode::HighPass) throw ShapeError("BlockConfig.high: spec mode must be HighPass");
    } else if (high) {
      throw ShapeError("BlockConfig.high: spec present but skip variant has no high-pass path");
    }
  }
};

struct StemConfig {
  int64_t kernel = 3;
  int64_t stride = 1;
  bool max_pool = false;
};

struct ModelConfig {
  Variant variant = Variant::ResNet;
  std::vector<int64_t> stage_block_counts{1, 1, 1, 1};
  std::vector<int64_t> stage_channels{16, 32, 64, 128};
  int64_t bottleneck_ratio = 4;
  int64_t num_classes = 10;
  int64_t in_channels = 3;
  StemConfig stem;
  std::optional<GaussianSpec> low, high;  // applied uniformly to every block

  void validate() const {
    if (stage_block_counts.empty() || stage_block_counts.size() != stage_channels.size()) {
      throw ShapeError("ModelConfig: stage_block_counts and stage_channels must be non-empty equal-length lists");
    }
    for (int64_t b : stage_block_counts) {
      if (b < 1) throw ShapeError("ModelConfig.stage_block_counts: counts must be positive");
    }
    if (bottleneck_ratio < 1) throw ShapeError("ModelConfig.bottleneck_ratio must be positive");
    for (int64_t c : stage_channels) {
      if (c < 1) throw ShapeError("ModelConfig.stage_channels: channels must be positive");
      if (c % bottleneck_ratio != 0) {
        throw ShapeError("ModelConfig.stage_channels: " + std::to_string(c) +
                         " not divisible by bottleneck_ratio " + std::to_string(bottleneck_ratio));
      }
    }
    if (num_classes < 1) throw ShapeError("ModelConfig.num_classes must be positive");
    if (in_channels < 1) throw ShapeError("ModelConfig.in_channels must be positive");
    if (stem.kernel < 1 || stem.kernel % 2 == 0) {
      throw ShapeError("ModelConfig.stem.kernel must be odd and positive");
    }
    if (variant == Variant::FDResNet) {
      if (!low && !high) {
        throw ShapeError("ModelConfig: FDResNet requires at least one GaussianSpec (low and/or high)");
      }
      if (low) {
        low->validate();
        if (low->mode != PassMode::LowPass) throw ShapeError("ModelConfig.low: spec mode must be LowPass");
      }
      if (high) {
        high->validate();
        if (high->mode != PassMode::HighPass) throw ShapeError("ModelConfig.high: spec mode must be HighPass");
      }
    } else if (low || high) {
      throw ShapeError("ModelConfig: GaussianSpecs given but variant is ResNet");
    }
  }

  SkipVariant block_skip_variant() const {
    if (variant == Variant::ResNet) return SkipVariant::Projection;
    if (low && high) return SkipVariant::FrequencyDual;
    if (low) return SkipVariant::FrequencyLowOnly;
    return SkipVariant::FrequencyHighOnly;
  }

  /// Canonical key=value serialization (checkpoint header). Implemented in
  /// config.cpp next to the parser.
  std::string canonical_text() const;
  static ModelConfig from_text(const std::string& text);
};

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

/// Conv1x1 + BN shortcut (the projection S(.)).
template <typename T>
struct ProjectionPath {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;

  static ProjectionPath make(int64_t in_ch, int64_t out_ch, int64_t stride) {
    ProjectionPath p;
    p.conv = Conv2d<T>::make(in_ch, out_ch, 1, stride, 0, /*with_bias=*/false);
    p.bn = BatchNorm2d<T>::make(out_ch);
    return p;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return batchnorm2d(conv2d(x, conv), bn, mode); }
};

/// One filtered skip: Gaussian band split at input resolution, then the
/// strided projection.
template <typename T>
struct FilterSkip {
  GaussianSpec spec;
  std::optional<TrainableSigma<T>> sigma;
  Tensor<T> fixed_kernel;  // cached when sigma is fixed
  ProjectionPath<T> proj;

  static FilterSkip make(const GaussianSpec& spec, int64_t in_ch, int64_t out_ch, int64_t stride) {
    spec.validate();
    FilterSkip s;
    s.spec = spec;
    if (spec.sigma_trainable) {
      s.sigma = TrainableSigma<T>::init(static_cast<T>(spec.sigma));
    } else {
      s.fixed_kernel =
          Tensor<T>::from({spec.kernel_size}, gaussian_kernel_1d<T>(spec.kernel_size, static_cast<T>(spec.sigma)));
    }
    s.proj = ProjectionPath<T>::make(in_ch, out_ch, stride);
    return s;
  }

  /// Kernel weights are recomputed from sigma on every forward pass when
  /// trainable so the gradient reaches the raw parameter.
  Tensor<T> kernel() const {
    if (sigma) return gaussian_kernel_1d(spec.kernel_size, softplus(sigma->raw));
    return fixed_kernel;
  }

  Tensor<T> filtered(const Tensor<T>& x) const {
    auto k = kernel();
    return spec.mode == PassMode::LowPass ? low_pass(x, k) : high_pass(x, k);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return proj.forward(filtered(x), mode); }
};

/// Bottleneck residual block. Main path Conv1x1-BN-ReLU-Conv3x3(stride)-BN-
/// ReLU-Conv1x1-BN; skips per variant; output ReLU(main + sum of skips),
/// summed left to right in the order identity/projection, low, high.
template <typename T>
struct Block {
  BlockConfig cfg;
  Conv2d<T> conv1, conv2, conv3;
  BatchNorm2d<T> bn1, bn2, bn3;
  std::optional<ProjectionPath<T>> proj;
  std::optional<FilterSkip<T>> low_skip, high_skip;

  static Block build(const BlockConfig& cfg) {
    cfg.validate();
    Block b;
    b.cfg = cfg;
    b.conv1 = Conv2d<T>::make(cfg.in_ch, cfg.mid_ch, 1, 1, 0);
    b.bn1 = BatchNorm2d<T>::make(cfg.mid_ch);
    b.conv2 = Conv2d<T>::make(cfg.mid_ch, cfg.mid_ch, 3, cfg.stride, 1);
    b.bn2 = BatchNorm2d<T>::make(cfg.mid_ch);
    b.conv3 = Conv2d<T>::make(cfg.mid_ch, cfg.out_ch, 1, 1, 0);
    b.bn3 = BatchNorm2d<T>::make(cfg.out_ch);
    switch (cfg.skip) {
      case SkipVariant::Identity:
        break;
      case SkipVariant::Projection:
        b.proj = ProjectionPath<T>::make(cfg.in_ch, cfg.out_ch, cfg.stride);
        break;
      case SkipVariant::FrequencyDual:
        b.low_skip = FilterSkip<T>::make(*cfg.low, cfg.in_ch, cfg.out_ch, cfg.stride);
        b.high_skip = FilterSkip<T>::make(*cfg.high, cfg.in_ch, cfg.out_ch, cfg.stride);
        break;
      case SkipVariant::FrequencyLowOnly:
        b.low_skip = FilterSkip<T>::make(*cfg.low, cfg.in_ch, cfg.out_ch, cfg.stride);
        break;
      case SkipVariant::FrequencyHighOnly:
        b.high_skip = FilterSkip<T>::make(*cfg.high, cfg.in_ch, cfg.out_ch, cfg.stride);
        break;
    }
    return b;
  }

  Tensor<T> main_forward(const Tensor<T>& x, Mode mode) {
    auto h = relu(batchnorm2d(conv2d(x, conv1), bn1, mode));
    h = relu(batchnorm2d(conv2d(h, conv2), bn2, mode));
    return batchnorm2d(conv2d(h, conv3), bn3, mode);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    auto out = main_forward(x, mode);
    if (cfg.skip == SkipVariant::Identity) out = add(out, x);
    if (proj) out = add(out, proj->forward(x, mode));
    if (low_skip) out = add(out, low_skip->forward(x, mode));
    if (high_skip) out = add(out, high_skip->forward(x, mode));
    return relu(out);
  }
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

template <typename T>
struct TapResult {
  Tensor<T> logits;
  std::vector<std::pair<std::string, Tensor<T>>> taps;

  const Tensor<T>& activation(const std::string& name) const {
    for (const auto& [n, t] : taps) {
      if (n == name) return t;
    }
    throw std::invalid_argument("no tap named '" + name + "' was recorded");
  }
};

template <typename T>
struct Model {
  ModelConfig cfg;
  Conv2d<T> stem_conv;
  BatchNorm2d<T> stem_bn;
  std::vector<std::vector<Block<T>>> stages;
  Linear<T> fc;

  /// Logits plus the pre-classifier pooled features.
  struct Output {
    Tensor<T> logits;
    Tensor<T> features;  // [N, C_last]
  };

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return forward_full(x, mode).logits; }

  Output forward_full(const Tensor<T>& x, Mode mode) {
    Output out;
    forward_impl(x, mode, nullptr, &out);
    return out;
  }

  TapResult<T> forward_with_taps(const Tensor<T>& x, Mode mode, const std::vector<std::string>& tap_names) {
    TapRecorder rec;
    rec.wanted.insert(tap_names.begin(), tap_names.end());
    Output out;
    forward_impl(x, mode, &rec, &out);
    for (const auto& name : tap_names) {
      bool found = false;
      for (const auto& [n, t] : rec.taps) {
        if (n == name) found = true;
      }
      if (!found) throw std::invalid_argument("unknown tap name '" + name + "'");
    }
    TapResult<T> result;
    result.logits = out.logits;
    result.taps = std::move(rec.taps);
    return result;
  }

  std::vector<std::string> tap_names() const {
    std::vector<std::string> names{"input", "stem.conv", "stem"};
    for (size_t s = 0; s < stages.size(); ++s) {
      for (size_t b = 0; b < stages[s].size(); ++b) {
        names.push_back("stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1));
      }
    }
    names.push_back("features");
    names.push_back("logits");
    return names;
  }

  std::vector<NamedParam<T>> named_parameters() {
    std::vector<NamedParam<T>> out;
    out.push_back({"stem.conv.weight", stem_conv.weight, ParamKind::ConvWeight});
    out.push_back({"stem.bn.gamma", stem_bn.gamma, ParamKind::Gamma});
    out.push_back({"stem.bn.beta", stem_bn.beta, ParamKind::Beta});
    for (size_t s = 0; s < stages.size(); ++s) {
      for (size_t b = 0; b < stages[s].size(); ++b) {
        const std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1) + ".";
        Block<T>& blk = stages[s][b];
        auto push_bn = [&](const std::string& name, BatchNorm2d<T>& bn) {
          out.push_back({prefix + name + ".gamma", bn.gamma, ParamKind::Gamma});
          out.push_back({prefix + name + ".beta", bn.beta, ParamKind::Beta});
        };
        out.push_back({prefix + "conv1.weight", blk.conv1.weight, ParamKind::ConvWeight});
        push_bn("bn1", blk.bn1);
        out.push_back({prefix + "conv2.weight", blk.conv2.weight, ParamKind::ConvWeight});
        push_bn("bn2", blk.bn2);
        out.push_back({prefix + "conv3.weight", blk.conv3.weight, ParamKind::ConvWeight});
        push_bn("bn3", blk.bn3);
        if (blk.proj) {
          out.push_back({prefix + "skip.conv.weight", blk.proj->conv.weight, ParamKind::ConvWeight});
          push_bn("skip.bn", blk.proj->bn);
        }
        auto push_filter = [&](const std::string& name, FilterSkip<T>& fs) {
          if (fs.sigma) out.push_back({prefix + name + ".sigma_raw", fs.sigma->raw, ParamKind::SigmaRaw});
          out.push_back({prefix + name + ".conv.weight", fs.proj.conv.weight, ParamKind::ConvWeight});
          push_bn(name + ".bn", fs.proj.bn);
        };
        if (blk.low_skip) push_filter("skip.low", *blk.low_skip);
        if (blk.high_skip) push_filter("skip.high", *blk.high_skip);
      }
    }
    out.push_back({"fc.weight", fc.weight, ParamKind::LinearWeight});
    out.push_back({"fc.bias", fc.bias, ParamKind::Bias});
    return out;
  }

  /// Non-trainable state (BN running statistics), in the same traversal order.
  std::vector<NamedParam<T>> named_buffers() {
    std::vector<NamedParam<T>> out;
    auto push_bn = [&](const std::string& name, BatchNorm2d<T>& bn) {
      out.push_back({name + ".running_mean", bn.running_mean, ParamKind::Beta});
      out.push_back({name + ".running_var", bn.running_var, ParamKind::Beta});
    };
    push_bn("stem.bn", stem_bn);
    for (size_t s = 0; s < stages.size(); ++s) {
      for (size_t b = 0; b < stages[s].size(); ++b) {
        const std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1) + ".";
        Block<T>& blk = stages[s][b];
        push_bn(prefix + "bn1", blk.bn1);
        push_bn(prefix + "bn2", blk.bn2);
        push_bn(prefix + "bn3", blk.bn3);
        if (blk.proj) push_bn(prefix + "skip.bn", blk.proj->bn);
        if (blk.low_skip) push_bn(prefix + "skip.low.bn", blk.low_skip->proj.bn);
        if (blk.high_skip) push_bn(prefix + "skip.high.bn", blk.high_skip->proj.bn);
      }
    }
    return out;
  }

  int64_t parameter_count() {
    int64_t n = 0;
    for (auto& p : named_parameters()) n += p.tensor.numel();
    return n;
  }

 private:
  struct TapRecorder {
    std::unordered_set<std::string> wanted;
    std::vector<std::pair<std::string, Tensor<T>>> taps;

    void record(const std::string& name, Tensor<T> t) {
      if (wanted.count(name)) {
        taps.emplace_back(name, std::move(t));
      }
    }
  };

  void forward_impl(const Tensor<T>& x, Mode mode, TapRecorder* rec, Output* out) {
    if (x.ndim() != 4 || x.dim(1) != cfg.in_channels) {
      throw ShapeError("model forward: expected [N," + std::to_string(cfg.in_channels) +
                       ",H,W] input, got " + shape_str(x.shape()));
    }
    if (rec) rec->record("input", x);
    auto h = conv2d(x, stem_conv);
    if (rec) rec->record("stem.conv", h);
    h = relu(batchnorm2d(h, stem_bn, mode));
    if (cfg.stem.max_pool) h = max_pool2d(h, 2, 2);
    if (rec) rec->record("stem", h);
    for (size_t s = 0; s < stages.size(); ++s) {
      for (size_t b = 0; b < stages[s].size(); ++b) {
        h = stages[s][b].forward(h, mode);
        if (rec) rec->record("stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1), h);
      }
    }
    auto features = global_avg_pool(h);
    if (rec) rec->record("features", features);
    auto logits = linear(features, fc);
    if (rec) rec->record("logits", logits);
    out->logits = logits;
    out->features = features;
  }
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

template <typename T>
Block<T> build_block(const BlockConfig& cfg) {
  return Block<T>::build(cfg);
}

/// He-normal conv/linear weights, BN gamma 1 / beta 0, zero biases, unit
/// running variance; sigma raws snap to the configured initial sigma. Fully
/// reproducible from the seed.
template <typename T>
void init_parameters(Model<T>& model, uint64_t seed) {
  Rng rng(seed);
  for (auto& p : model.named_parameters()) {
    switch (p.kind) {
      case ParamKind::ConvWeight: {
        const auto& s = p.tensor.shape();
        he_normal_fill(p.tensor, s[1] * s[2] * s[3], rng);
        break;
      }
      case ParamKind::LinearWeight: {
        he_normal_fill(p.tensor, p.tensor.shape()[1], rng);
        break;
      }
      case ParamKind::Gamma:
        for (T& v : p.tensor.values_mut()) v = T(1);
        break;
      case ParamKind::Beta:
      case ParamKind::Bias:
        for (T& v : p.tensor.values_mut()) v = T(0);
        break;
      case ParamKind::SigmaRaw:
        // Snapped at construction from the GaussianSpec; nothing random to draw.
        break;
    }
    p.tensor.zero_grad();
  }
  for (auto& b : model.named_buffers()) {
    const bool is_var = b.name.size() >= 11 && b.name.substr(b.name.size() - 11) == "running_var";
    for (T& v : b.tensor.values_mut()) v = is_var ? T(1) : T(0);
  }
}

template <typename T>
Model<T> build_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  const int64_t stem_pad = (cfg.stem.kernel - 1) / 2;
  m.stem_conv = Conv2d<T>::make(cfg.in_channels, cfg.stage_channels[0], cfg.stem.kernel, cfg.stem.stride,
                                stem_pad);
  m.stem_bn = BatchNorm2d<T>::make(cfg.stage_channels[0]);
  const SkipVariant skip = cfg.block_skip_variant();
  int64_t in_ch = cfg.stage_channels[0];
  for (size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    std::vector<Block<T>> blocks;
    const int64_t out_ch = cfg.stage_channels[s];
    const int64_t mid_ch = out_ch / cfg.bottleneck_ratio;
    for (int64_t b = 0; b < cfg.stage_block_counts[s]; ++b) {
      BlockConfig bc;
      bc.in_ch = b == 0 ? in_ch : out_ch;
      bc.mid_ch = mid_ch;
      bc.out_ch = out_ch;
      bc.stride = (b == 0 && s > 0) ? 2 : 1;
      bc.skip = skip;
      bc.low = cfg.low;
      bc.high = cfg.high;
      blocks.push_back(Block<T>::build(bc));
    }
    m.stages.push_back(std::move(blocks));
    in_ch = out_ch;
  }
  m.fc = Linear<T>::make(cfg.stage_channels.back(), cfg.num_classes);
  init_parameters(m, seed);
  return m;
}

// ---------------------------------------------------------------------------
// Desk-scale presets
// ---------------------------------------------------------------------------

inline ModelConfig resnet_tiny(int64_t num_classes = 10, int64_t in_channels = 3) {
  ModelConfig cfg;
  cfg.variant = Variant::ResNet;
  cfg.stage_block_counts = {1, 1, 1, 1};
  cfg.stage_channels = {16, 32, 64, 128};
  cfg.bottleneck_ratio = 4;
  cfg.num_classes = num_classes;
  cfg.in_channels = in_channels;
  return cfg;
}

inline ModelConfig fdresnet_tiny(int64_t num_classes = 10, int64_t in_channels = 3,
                                 GaussianSpec low = {3, 1.0, false, PassMode::LowPass},
                                 GaussianSpec high = {3, 1.0, false, PassMode::HighPass}) {
  ModelConfig cfg = resnet_tiny(num_classes, in_channels);
  cfg.variant = Variant::FDResNet;
  cfg.low = low;
  cfg.high = high;
  return cfg;
}

inline ModelConfig resnet50(int64_t num_classes, int64_t in_channels = 3) {
  ModelConfig cfg;
  cfg.variant = Variant::ResNet;
  cfg.stage_block_counts = {3, 4, 6, 3};
  cfg.stage_channels = {256, 512, 1024, 2048};
  cfg.bottleneck_ratio = 4;
  cfg.num_classes = num_classes;
  cfg.in_channels = in_channels;
  return cfg;
}

inline ModelConfig fdresnet50(int64_t num_classes, int64_t in_channels = 3,
                              GaussianSpec low = {3, 1.0, false, PassMode::LowPass},
                              GaussianSpec high = {3, 1.0, false, PassMode::HighPass}) {
  ModelConfig cfg = resnet50(num_classes, in_channels);
  cfg.variant = Variant::FDResNet;
  cfg.low = low;
  cfg.high = high;
  return cfg;
}

inline ModelConfig resnet101(int64_t num_classes, int64_t in_channels = 3) {
  ModelConfig cfg = resnet50(num_classes, in_channels);
  cfg.stage_block_counts = {3, 4, 23, 3};
  return cfg;
}

inline ModelConfig fdresnet101(int64_t num_classes, int64_t in_channels = 3,
                               GaussianSpec low = {3, 1.0, false, PassMode::LowPass},
                               GaussianSpec high = {3, 1.0, false, PassMode::HighPass}) {
  ModelConfig cfg = resnet101(num_classes, in_channels);
  cfg.variant = Variant::FDResNet;
  cfg.low = low;
  cfg.high = high;
  return cfg;
}

}  // namespace fdnet
