#pragma once

// The seven U-shaped segmentation architectures, assembled from one generic
// encoder/decoder with pluggable feature blocks and skip-connection attention.

#include <torch/torch.h>

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fauseg/blocks.hpp"
#include "fauseg/errors.hpp"
#include "fauseg/grid.hpp"
#include "fauseg/kv_config.hpp"

namespace fauseg {

enum class Arch { UNet, AttUNet, FAUNet, DenseUNet, AttDenseUNet, R2UNet, AttR2UNet };

inline constexpr std::array<Arch, 7> kAllArchs{Arch::UNet,         Arch::AttUNet, Arch::FAUNet,   Arch::DenseUNet,
                                               Arch::AttDenseUNet, Arch::R2UNet,  Arch::AttR2UNet};

[[nodiscard]] inline std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::UNet: return "unet";
    case Arch::AttUNet: return "att_unet";
    case Arch::FAUNet: return "fau_net";
    case Arch::DenseUNet: return "dense_unet";
    case Arch::AttDenseUNet: return "att_dense_unet";
    case Arch::R2UNet: return "r2unet";
    case Arch::AttR2UNet: return "att_r2unet";
  }
  return "unknown";
}

[[nodiscard]] inline std::string_view arch_display_name(Arch arch) {
  switch (arch) {
    case Arch::UNet: return "U-Net";
    case Arch::AttUNet: return "Attention U-Net";
    case Arch::FAUNet: return "FAU-Net";
    case Arch::DenseUNet: return "Dense U-Net";
    case Arch::AttDenseUNet: return "Attention Dense U-Net";
    case Arch::R2UNet: return "R2U-Net";
    case Arch::AttR2UNet: return "Attention R2U-Net";
  }
  return "unknown";
}

[[nodiscard]] inline Arch parse_arch(std::string_view name) {
  for (const auto arch : kAllArchs) {
    if (arch_name(arch) == name) return arch;
  }
  throw ConfigError("unknown architecture '" + std::string(name) +
                    "' (expected one of unet, att_unet, fau_net, dense_unet, att_dense_unet, r2unet, att_r2unet)");
}

/// Published trainable-parameter counts and the tolerance each build is held to.
struct ReferenceCount {
  int64_t count;
  double relative_tolerance;
};

[[nodiscard]] inline ReferenceCount reference_parameter_count(Arch arch) {
  switch (arch) {
    case Arch::UNet: return {1'940'885, 0.005};
    case Arch::AttUNet: return {1'995'409, 0.03};
    case Arch::FAUNet: return {2'158'505, 0.08};
    case Arch::DenseUNet: return {4'238'389, 0.20};
    case Arch::AttDenseUNet: return {4'271'521, 0.20};
    case Arch::R2UNet: return {6'003'077, 0.20};
    case Arch::AttR2UNet: return {6'036'081, 0.20};
  }
  return {0, 0.0};
}

/// Swin U-Net is not built; its published count is kept for the report table.
inline constexpr int64_t kSwinUNetReferenceCount = 26'598'344;

struct ModelConfig {
  Arch arch = Arch::UNet;
  int in_channels = 1;
  int num_classes = kNumClasses;
  int depth = 4;           // number of 2x2 poolings
  int base_channels = 16;  // doubles per level
  int dense_layers = 4;
  int dense_growth_divisor = 2;  // growth rate k = block out_channels / divisor
  int rrc_steps = 2;

  [[nodiscard]] int width(int level) const { return base_channels << level; }
  [[nodiscard]] int bottleneck_width() const { return width(depth); }
  [[nodiscard]] int spatial_multiple() const { return 1 << depth; }

  void validate() const {
    if (in_channels < 1) throw ConfigError("model config: in_channels must be >= 1");
    if (num_classes < 2) throw ConfigError("model config: num_classes must be >= 2");
    if (depth < 1) throw ConfigError("model config: depth must be >= 1");
    if (base_channels < 1) throw ConfigError("model config: base_channels must be >= 1");
    if (dense_layers < 1 || dense_growth_divisor < 1) throw ConfigError("model config: invalid dense options");
    if (rrc_steps < 1) throw ConfigError("model config: rrc_steps must be >= 1");
  }

  [[nodiscard]] KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    kv.set("arch", std::string(arch_name(arch)));
    kv.set("in_channels", in_channels);
    kv.set("num_classes", num_classes);
    kv.set("depth", depth);
    kv.set("base_channels", base_channels);
    kv.set("dense_layers", dense_layers);
    kv.set("dense_growth_divisor", dense_growth_divisor);
    kv.set("rrc_steps", rrc_steps);
    kv.set("upsample", std::string("transposed_conv"));
    return kv;
  }

  static ModelConfig from_kv(const KeyValueConfig& kv) {
    ModelConfig c;
    if (const auto a = kv.get("arch")) c.arch = parse_arch(*a);
    c.in_channels = kv.get_number_or("in_channels", c.in_channels);
    c.num_classes = kv.get_number_or("num_classes", c.num_classes);
    c.depth = kv.get_number_or("depth", c.depth);
    c.base_channels = kv.get_number_or("base_channels", c.base_channels);
    c.dense_layers = kv.get_number_or("dense_layers", c.dense_layers);
    c.dense_growth_divisor = kv.get_number_or("dense_growth_divisor", c.dense_growth_divisor);
    c.rrc_steps = kv.get_number_or("rrc_steps", c.rrc_steps);
    if (const auto up = kv.get("upsample"); up && *up != "transposed_conv") {
      throw ConfigError("model config: unsupported upsample mode '" + *up + "'");
    }
    c.validate();
    return c;
  }
};

enum class SkipAttention { None, Gate, Pyramid };

/// Which feature block and which skip attention each level uses.
struct ArchLayout {
  BlockKind block = BlockKind::DoubleConv;
  std::vector<SkipAttention> skips;  // index 0 = finest level
};

[[nodiscard]] inline ArchLayout arch_layout(const ModelConfig& config) {
  ArchLayout layout;
  layout.skips.assign(static_cast<std::size_t>(config.depth), SkipAttention::None);
  const auto gate_all = [&] { std::fill(layout.skips.begin(), layout.skips.end(), SkipAttention::Gate); };
  switch (config.arch) {
    case Arch::UNet: break;
    case Arch::AttUNet: gate_all(); break;
    case Arch::FAUNet:
      gate_all();
      layout.skips.front() = SkipAttention::Pyramid;
      break;
    case Arch::DenseUNet: layout.block = BlockKind::Dense; break;
    case Arch::AttDenseUNet:
      layout.block = BlockKind::Dense;
      gate_all();
      break;
    case Arch::R2UNet: layout.block = BlockKind::RRC; break;
    case Arch::AttR2UNet:
      layout.block = BlockKind::RRC;
      gate_all();
      break;
  }
  return layout;
}

[[nodiscard]] inline BlockSpec feature_block_spec(const ModelConfig& config, BlockKind kind, int in, int out,
                                                  std::string name) {
  switch (kind) {
    case BlockKind::Dense:
      return BlockSpec::dense(in, out, std::max(1, out / config.dense_growth_divisor), config.dense_layers,
                              std::move(name));
    case BlockKind::RRC: return BlockSpec::rrc(in, out, config.rrc_steps, std::move(name));
    default: return BlockSpec::double_conv(in, out, std::move(name));
  }
}

/// Kaiming-uniform (fan-in, ReLU gain) weights and zero biases on every
/// convolution and transposed convolution; inside recurrent-residual blocks
/// the same fan-in scheme uses unit (linear) gain.
inline void initialize_weights(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  module.apply([](torch::nn::Module& m) {
    if (auto* conv = m.as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_uniform_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* up = m.as<torch::nn::ConvTranspose2d>()) {
      torch::nn::init::kaiming_uniform_(up->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (up->bias.defined()) up->bias.zero_();
    }
  });
  // Recurrent units feed x + y(j-1) into each conv, so the ReLU gain sqrt(2)
  // compounds to ~1e5 logits after nine blocks; unit gain (same fan-in
  // scheme) keeps R2 models at unit scale.
  module.apply([](torch::nn::Module& m) {
    if (m.as<RecurrentResidualBlock>() == nullptr) return;
    for (auto& child : m.modules(/*include_self=*/false)) {
      if (auto* conv = child->as<torch::nn::Conv2d>()) {
        torch::nn::init::kaiming_uniform_(conv->weight, 0.0, torch::kFanIn, torch::kLinear);
      }
    }
  });
}

class SegmentationNetImpl : public torch::nn::Module {
 public:
  explicit SegmentationNetImpl(ModelConfig config) : config_(config) {
    config_.validate();
    const auto layout = arch_layout(config_);
    const int depth = config_.depth;

    int in = config_.in_channels;
    for (int level = 0; level <= depth; ++level) {
      const auto name = "enc" + std::to_string(level);
      encoders_.push_back(register_block(name, feature_block_spec(config_, layout.block, in, config_.width(level), name)));
      in = config_.width(level);
    }

    gates_.resize(static_cast<std::size_t>(depth), nullptr);
    pyramids_.resize(static_cast<std::size_t>(depth), nullptr);
    upsamplers_.resize(static_cast<std::size_t>(depth), nullptr);
    decoders_.resize(static_cast<std::size_t>(depth));
    for (int level = depth - 1; level >= 0; --level) {
      const auto idx = static_cast<std::size_t>(level);
      const int c = config_.width(level);
      const auto suffix = std::to_string(level);
      switch (layout.skips[idx]) {
        case SkipAttention::Gate:
          gates_[idx] = register_module("gate" + suffix, AttentionGate(BlockSpec::attention_gate(c, c, "gate" + suffix)));
          break;
        case SkipAttention::Pyramid:
          pyramids_[idx] = register_module("fpa" + suffix, FeaturePyramidAttention(BlockSpec::fpa(c, "fpa" + suffix)));
          break;
        case SkipAttention::None: break;
      }
      upsamplers_[idx] = register_module(
          "up" + suffix, torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(2 * c, c, 2).stride(2)));
      decoders_[idx] = register_block("dec" + suffix, feature_block_spec(config_, layout.block, 2 * c, c, "dec" + suffix));
    }
    head_ = register_module("head", detail::conv(config_.width(0), config_.num_classes, 1));
    initialize_weights(*this);
  }

  /// (N, in_channels, H, W) -> logits (N, num_classes, H, W); H and W must be
  /// multiples of 2^depth.
  torch::Tensor forward(const torch::Tensor& x) {
    check_input(x);
    const auto depth = static_cast<std::size_t>(config_.depth);
    std::vector<torch::Tensor> skips;
    skips.reserve(depth);
    auto h = x;
    for (std::size_t level = 0; level <= depth; ++level) {
      if (level > 0) h = torch::max_pool2d(h, 2);
      h = encoders_[level].forward(h);
      if (level < depth) skips.push_back(h);
    }
    for (std::size_t level = depth; level-- > 0;) {
      auto skip = skips[level];
      if (!gates_[level].is_empty()) {
        skip = gates_[level]->forward(skip, h);
      } else if (!pyramids_[level].is_empty()) {
        skip = pyramids_[level]->forward(skip);
      }
      h = decoders_[level].forward(torch::cat({skip, upsamplers_[level]->forward(h)}, 1));
    }
    return head_->forward(h);
  }

  [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }

  [[nodiscard]] int attention_gate_count() const {
    return static_cast<int>(std::count_if(gates_.begin(), gates_.end(), [](const auto& g) { return !g.is_empty(); }));
  }
  [[nodiscard]] int pyramid_count() const {
    return static_cast<int>(
        std::count_if(pyramids_.begin(), pyramids_.end(), [](const auto& p) { return !p.is_empty(); }));
  }

  void check_input(const torch::Tensor& x) const {
    if (x.dim() != 4 || x.size(1) != config_.in_channels) {
      throw ShapeError("model input must be (batch, " + std::to_string(config_.in_channels) + ", H, W)");
    }
    const int m = config_.spatial_multiple();
    if (x.size(2) % m != 0 || x.size(3) % m != 0) {
      throw ShapeError("model input spatial size " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                       " must be divisible by " + std::to_string(m));
    }
  }

 private:
  torch::nn::AnyModule register_block(const std::string& name, const BlockSpec& spec) {
    auto block = make_feature_block(spec);
    register_module(name, block.ptr());
    return block;
  }

  ModelConfig config_;
  std::vector<torch::nn::AnyModule> encoders_;
  std::vector<torch::nn::AnyModule> decoders_;
  std::vector<AttentionGate> gates_;
  std::vector<FeaturePyramidAttention> pyramids_;
  std::vector<torch::nn::ConvTranspose2d> upsamplers_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(SegmentationNet);

[[nodiscard]] inline SegmentationNet build(const ModelConfig& config) { return SegmentationNet(config); }

[[nodiscard]] inline SegmentationNet build(const ModelConfig& config, uint64_t seed) {
  torch::manual_seed(seed);
  return SegmentationNet(config);
}

struct ParamReport {
  std::string arch;
  int64_t total = 0;
  std::vector<std::pair<std::string, int64_t>> layers;  // (module path, count), registration order
};

[[nodiscard]] inline ParamReport count_parameters(const SegmentationNet& model) {
  ParamReport report;
  report.arch = std::string(arch_name(model->config().arch));
  std::map<std::string, std::size_t> index;
  for (const auto& item : model->named_parameters()) {
    if (!item.value().requires_grad()) continue;
    const auto& key = item.key();
    const auto dot = key.rfind('.');
    const auto path = dot == std::string::npos ? key : key.substr(0, dot);
    const auto [it, inserted] = index.try_emplace(path, report.layers.size());
    if (inserted) report.layers.emplace_back(path, 0);
    report.layers[it->second].second += item.value().numel();
    report.total += item.value().numel();
  }
  return report;
}

/// Per-pixel argmax over classes; ties go to the smaller class index.
[[nodiscard]] inline std::vector<LabelMap> logits_to_labels(const torch::Tensor& logits) {
  if (logits.dim() != 4) throw ShapeError("logits must be (batch, classes, H, W)");
  const auto x = logits.detach().to(torch::kCPU, torch::kDouble).contiguous();
  const int64_t n = x.size(0), classes = x.size(1), h = x.size(2), w = x.size(3);
  const auto* data = x.data_ptr<double>();
  std::vector<LabelMap> maps;
  maps.reserve(static_cast<std::size_t>(n));
  const int64_t plane = h * w;
  for (int64_t b = 0; b < n; ++b) {
    LabelMap map(static_cast<int>(h), static_cast<int>(w));
    const double* base = data + b * classes * plane;
    for (int64_t p = 0; p < plane; ++p) {
      int best = 0;
      double best_value = base[p];
      for (int64_t c = 1; c < classes; ++c) {
        const double v = base[c * plane + p];
        if (v > best_value) {
          best_value = v;
          best = static_cast<int>(c);
        }
      }
      map.values[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(best);
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

[[nodiscard]] inline std::vector<LabelMap> predict_labels(SegmentationNet& model, const torch::Tensor& images) {
  model->check_input(images);
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  auto labels = logits_to_labels(model->forward(images));
  model->train(was_training);
  return labels;
}

}  // namespace fauseg
