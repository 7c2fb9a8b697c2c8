#pragma once

// Convolutional building blocks shared by every architecture in the zoo.
// All convolutions carry biases, use same-padding, and there is no
// normalization layer anywhere; ReLU is the only hidden activation.

#include <torch/torch.h>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fauseg/errors.hpp"

namespace fauseg {

enum class BlockKind { DoubleConv, AttentionGate, FPA, Dense, RRC };

[[nodiscard]] inline std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::DoubleConv: return "double_conv";
    case BlockKind::AttentionGate: return "attention_gate";
    case BlockKind::FPA: return "fpa";
    case BlockKind::Dense: return "dense";
    case BlockKind::RRC: return "rrc";
  }
  return "unknown";
}

struct BlockSpec {
  BlockKind kind = BlockKind::DoubleConv;
  int in_channels = 0;
  int out_channels = 0;
  // Kind-specific options; exactly the ones a kind needs must be set.
  std::optional<int> inter_channels;  // attention gate F_int
  std::optional<int> growth_rate;     // dense
  std::optional<int> num_layers;      // dense
  std::optional<int> steps;           // rrc recurrence t
  std::string name;                   // layer path used in error messages

  [[nodiscard]] std::string label() const { return name.empty() ? std::string(to_string(kind)) : name; }

  void validate(BlockKind expected) const {
    const auto fail = [&](const std::string& why) { throw ConfigError(label() + ": " + why); };
    if (kind != expected) {
      fail("block spec of kind " + std::string(to_string(kind)) + " given to " + std::string(to_string(expected)));
    }
    if (in_channels <= 0 || out_channels <= 0) fail("channel counts must be positive");
    const bool gate = kind == BlockKind::AttentionGate;
    const bool dense = kind == BlockKind::Dense;
    const bool rrc = kind == BlockKind::RRC;
    if (inter_channels.has_value() != gate) fail("inter_channels is only valid (and required) for attention gates");
    if (growth_rate.has_value() != dense || num_layers.has_value() != dense) {
      fail("growth_rate and num_layers are only valid (and required) for dense blocks");
    }
    if (steps.has_value() != rrc) fail("steps is only valid (and required) for rrc blocks");
    if (gate && *inter_channels <= 0) fail("inter_channels must be positive");
    if (dense && *growth_rate <= 0) fail("growth rate must be positive, got " + std::to_string(*growth_rate));
    if (dense && *num_layers <= 0) fail("dense layer count must be positive");
    if (rrc && *steps < 1) fail("recurrence steps t must be >= 1, got " + std::to_string(*steps));
    if ((gate || kind == BlockKind::FPA) && in_channels != out_channels) {
      fail("attention blocks preserve the channel count (in != out)");
    }
  }

  static BlockSpec double_conv(int in, int out, std::string name = {}) {
    return {BlockKind::DoubleConv, in, out, {}, {}, {}, {}, std::move(name)};
  }
  static BlockSpec attention_gate(int channels, int inter, std::string name = {}) {
    return {BlockKind::AttentionGate, channels, channels, inter, {}, {}, {}, std::move(name)};
  }
  static BlockSpec fpa(int channels, std::string name = {}) {
    return {BlockKind::FPA, channels, channels, {}, {}, {}, {}, std::move(name)};
  }
  static BlockSpec dense(int in, int out, int growth, int layers = 4, std::string name = {}) {
    return {BlockKind::Dense, in, out, {}, growth, layers, {}, std::move(name)};
  }
  static BlockSpec rrc(int in, int out, int t = 2, std::string name = {}) {
    return {BlockKind::RRC, in, out, {}, {}, {}, t, std::move(name)};
  }
};

namespace detail {

inline torch::nn::Conv2d conv(int in, int out, int kernel, int stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(true));
}

inline void require_rank4(const torch::Tensor& x, const std::string& who) {
  if (x.dim() != 4) {
    throw ShapeError(who + ": expected a (batch, channels, height, width) tensor, got rank " + std::to_string(x.dim()));
  }
}

inline void require_channels(const torch::Tensor& x, int channels, const std::string& who) {
  require_rank4(x, who);
  if (x.size(1) != channels) {
    throw ConfigError(who + ": expected " + std::to_string(channels) + " input channels, got " +
                      std::to_string(x.size(1)));
  }
}

inline torch::Tensor upsample_nearest(const torch::Tensor& x, int64_t height, int64_t width) {
  namespace F = torch::nn::functional;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kNearest));
}

}  // namespace detail

/// conv3x3 -> ReLU -> conv3x3 -> ReLU.
class DoubleConvImpl : public torch::nn::Module {
 public:
  explicit DoubleConvImpl(BlockSpec spec) : spec_(std::move(spec)) {
    spec_.validate(BlockKind::DoubleConv);
    conv1_ = register_module("conv1", detail::conv(spec_.in_channels, spec_.out_channels, 3));
    conv2_ = register_module("conv2", detail::conv(spec_.out_channels, spec_.out_channels, 3));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    detail::require_channels(x, spec_.in_channels, spec_.label());
    return torch::relu(conv2_(torch::relu(conv1_(x))));
  }

  [[nodiscard]] const BlockSpec& spec() const noexcept { return spec_; }

 private:
  BlockSpec spec_;
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(DoubleConv);

/// Additive attention gate on a skip connection.
///
/// The skip feature x (C channels, size S) is projected by a strided 1x1
/// convolution to S/2, added to the 1x1-projected gating signal g (2C channels,
/// size S/2), passed through ReLU, a single-channel 1x1 convolution and a
/// sigmoid. The resulting map is upsampled (nearest) back to S and rescales
/// every channel of x.
class AttentionGateImpl : public torch::nn::Module {
 public:
  explicit AttentionGateImpl(BlockSpec spec) : spec_(std::move(spec)) {
    spec_.validate(BlockKind::AttentionGate);
    const int c = spec_.in_channels;
    const int f = *spec_.inter_channels;
    theta_x_ = register_module("theta_x", detail::conv(c, f, 1, 2));
    theta_g_ = register_module("theta_g", detail::conv(2 * c, f, 1));
    psi_ = register_module("psi", detail::conv(f, 1, 1));
  }

  /// Coefficients in [0,1] with shape (batch, 1, H, W) of x.
  torch::Tensor attention_map(const torch::Tensor& x, const torch::Tensor& g) {
    check(x, g);
    const auto coarse = torch::sigmoid(psi_(torch::relu(theta_x_(x) + theta_g_(g))));
    return detail::upsample_nearest(coarse, x.size(2), x.size(3));
  }

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& g) { return x * attention_map(x, g); }

  [[nodiscard]] const BlockSpec& spec() const noexcept { return spec_; }

 private:
  void check(const torch::Tensor& x, const torch::Tensor& g) const {
    const auto who = spec_.label();
    detail::require_channels(x, spec_.in_channels, who);
    detail::require_channels(g, 2 * spec_.in_channels, who + " (gating signal)");
    if (x.size(0) != g.size(0)) throw ShapeError(who + ": skip and gating batch sizes differ");
    if (x.size(2) != 2 * g.size(2) || x.size(3) != 2 * g.size(3)) {
      throw ShapeError(who + ": skip feature " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                       " and gating signal " + std::to_string(g.size(2)) + "x" + std::to_string(g.size(3)) +
                       " are not in an exact 2:1 spatial ratio");
    }
  }

  BlockSpec spec_;
  torch::nn::Conv2d theta_x_{nullptr}, theta_g_{nullptr}, psi_{nullptr};
};
TORCH_MODULE(AttentionGate);

/// Feature pyramid attention.
///
/// Three strided levels (7x7 -> S/2, 5x5 -> S/4, 3x3 -> S/8), each refined by a
/// second same-kernel convolution. Level outputs are merged from the coarsest
/// upward (nearest x2 upsample + add), the merged map is brought back to S and
/// squashed with a sigmoid, then multiplied with a 1x1 projection of the input.
/// Channel count is preserved throughout.
class FeaturePyramidAttentionImpl : public torch::nn::Module {
 public:
  explicit FeaturePyramidAttentionImpl(BlockSpec spec) : spec_(std::move(spec)) {
    spec_.validate(BlockKind::FPA);
    const int c = spec_.in_channels;
    down7_ = register_module("down7", detail::conv(c, c, 7, 2));
    level7_ = register_module("level7", detail::conv(c, c, 7));
    down5_ = register_module("down5", detail::conv(c, c, 5, 2));
    level5_ = register_module("level5", detail::conv(c, c, 5));
    down3_ = register_module("down3", detail::conv(c, c, 3, 2));
    level3_ = register_module("level3", detail::conv(c, c, 3));
    project_ = register_module("project", detail::conv(c, c, 1));
  }

  /// Pre-sigmoid integrated pyramid map at the input resolution.
  torch::Tensor pyramid_map(const torch::Tensor& x) {
    check(x);
    const auto p1 = torch::relu(down7_(x));
    const auto p2 = torch::relu(down5_(p1));
    const auto p3 = torch::relu(down3_(p2));
    const auto l1 = level7_(p1);
    const auto l2 = level5_(p2);
    const auto l3 = level3_(p3);
    auto merged = detail::upsample_nearest(l3, l2.size(2), l2.size(3)) + l2;
    merged = detail::upsample_nearest(merged, l1.size(2), l1.size(3)) + l1;
    return detail::upsample_nearest(merged, x.size(2), x.size(3));
  }

  torch::Tensor attention_map(const torch::Tensor& x) { return torch::sigmoid(pyramid_map(x)); }

  torch::Tensor forward(const torch::Tensor& x) { return attention_map(x) * project_(x); }

  [[nodiscard]] const BlockSpec& spec() const noexcept { return spec_; }

 private:
  void check(const torch::Tensor& x) const {
    detail::require_channels(x, spec_.in_channels, spec_.label());
    if (x.size(2) % 8 != 0 || x.size(3) % 8 != 0) {
      throw ShapeError(spec_.label() + ": spatial size " + std::to_string(x.size(2)) + "x" +
                       std::to_string(x.size(3)) + " must be divisible by 8 for the three-level pyramid");
    }
  }

  BlockSpec spec_;
  torch::nn::Conv2d down7_{nullptr}, level7_{nullptr}, down5_{nullptr}, level5_{nullptr};
  torch::nn::Conv2d down3_{nullptr}, level3_{nullptr}, project_{nullptr};
};
TORCH_MODULE(FeaturePyramidAttention);

/// Densely connected 3x3 layers followed by a 1x1 transition.
/// Layer i sees in + i*k channels (the block input plus every earlier output).
class DenseBlockImpl : public torch::nn::Module {
 public:
  explicit DenseBlockImpl(BlockSpec spec) : spec_(std::move(spec)) {
    spec_.validate(BlockKind::Dense);
    const int k = *spec_.growth_rate;
    for (int i = 0; i < *spec_.num_layers; ++i) {
      layers_.push_back(register_module("layer" + std::to_string(i), detail::conv(layer_input_channels(i), k, 3)));
    }
    transition_ = register_module(
        "transition", detail::conv(layer_input_channels(*spec_.num_layers), spec_.out_channels, 1));
  }

  [[nodiscard]] int layer_input_channels(int i) const { return spec_.in_channels + i * *spec_.growth_rate; }

  torch::Tensor forward(const torch::Tensor& x) {
    detail::require_channels(x, spec_.in_channels, spec_.label());
    std::vector<torch::Tensor> features{x};
    for (auto& layer : layers_) {
      features.push_back(torch::relu(layer(torch::cat(features, 1))));
    }
    return torch::relu(transition_(torch::cat(features, 1)));
  }

  [[nodiscard]] const BlockSpec& spec() const noexcept { return spec_; }

 private:
  BlockSpec spec_;
  std::vector<torch::nn::Conv2d> layers_;
  torch::nn::Conv2d transition_{nullptr};
};
TORCH_MODULE(DenseBlock);

/// Recurrent convolution unit: y0 = relu(conv0(x)), yj = relu(convj(x + y(j-1)))
/// for j = 1..t. Each application owns its own weights, so t+1 convolutions.
class RecurrentConvUnitImpl : public torch::nn::Module {
 public:
  RecurrentConvUnitImpl(int channels, int steps) : channels_(channels) {
    if (channels <= 0 || steps < 0) throw ConfigError("recurrent unit: invalid channels or steps");
    for (int j = 0; j <= steps; ++j) {
      convs_.push_back(register_module("conv" + std::to_string(j), detail::conv(channels, channels, 3)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    detail::require_channels(x, channels_, "recurrent unit");
    auto y = torch::relu(convs_.front()(x));
    for (std::size_t j = 1; j < convs_.size(); ++j) y = torch::relu(convs_[j](x + y));
    return y;
  }

  [[nodiscard]] std::size_t num_convolutions() const noexcept { return convs_.size(); }

 private:
  int channels_;
  std::vector<torch::nn::Conv2d> convs_;
};
TORCH_MODULE(RecurrentConvUnit);

/// Recurrent residual block: p = conv1x1(x); out = p + unit2(unit1(p)).
class RecurrentResidualBlockImpl : public torch::nn::Module {
 public:
  explicit RecurrentResidualBlockImpl(BlockSpec spec) : spec_(std::move(spec)) {
    spec_.validate(BlockKind::RRC);
    project_ = register_module("project", detail::conv(spec_.in_channels, spec_.out_channels, 1));
    unit1_ = register_module("unit1", RecurrentConvUnit(spec_.out_channels, *spec_.steps));
    unit2_ = register_module("unit2", RecurrentConvUnit(spec_.out_channels, *spec_.steps));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    detail::require_channels(x, spec_.in_channels, spec_.label());
    const auto p = project_(x);
    return p + unit2_(unit1_(p));
  }

  [[nodiscard]] const BlockSpec& spec() const noexcept { return spec_; }

 private:
  BlockSpec spec_;
  torch::nn::Conv2d project_{nullptr};
  RecurrentConvUnit unit1_{nullptr}, unit2_{nullptr};
};
TORCH_MODULE(RecurrentResidualBlock);

/// Builds the feature block for `spec.kind` (double_conv, dense or rrc) behind
/// a type-erased holder so encoders and decoders can be assembled generically.
[[nodiscard]] inline torch::nn::AnyModule make_feature_block(const BlockSpec& spec) {
  switch (spec.kind) {
    case BlockKind::DoubleConv: return torch::nn::AnyModule(DoubleConv(spec));
    case BlockKind::Dense: return torch::nn::AnyModule(DenseBlock(spec));
    case BlockKind::RRC: return torch::nn::AnyModule(RecurrentResidualBlock(spec));
    default: throw ConfigError(spec.label() + ": " + std::string(to_string(spec.kind)) + " is not a feature block");
  }
}

/// Number of trainable scalars in a module.
[[nodiscard]] inline int64_t trainable_parameter_count(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters()) {
    if (p.requires_grad()) total += p.numel();
  }
  return total;
}

}  // namespace fauseg
