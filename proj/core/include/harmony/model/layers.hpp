#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "harmony/tensor.hpp"

namespace harmony {

struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape()) {}
};

// A parameter with its dotted path inside the owning container.
struct ParameterRef {
  std::string name;
  Parameter* param;
};

enum class BackwardMode {
  kInputOnly,         // propagate gradients to the layer input only
  kAccumulateParams,  // also accumulate into Parameter::grad
};

// A differentiable operator. `forward` caches whatever `backward` needs, so a
// layer instance serves one forward/backward pair at a time.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out, BackwardMode mode) = 0;
  // Names are local to the layer; containers prefix them.
  virtual std::vector<ParameterRef> parameters() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

using Rng = std::mt19937_64;

// Per-channel (x - mean) / scale on NCHW input. No parameters.
class Normalize final : public Layer {
 public:
  Normalize(std::vector<double> mean, std::vector<double> scale);
  std::string kind() const override { return "normalize"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Normalize>(*this); }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

// 2-D convolution via im2col + GEMM. Weight layout (out, in*k*k).
class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng);
  std::string kind() const override { return "conv2d"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::vector<ParameterRef> parameters() override { return {{"weight", &weight_}, {"bias", &bias_}}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  Parameter weight_;
  Parameter bias_;
  std::vector<int> in_shape_;
  int out_h_ = 0, out_w_ = 0;
  std::vector<double> cols_;  // N × (in*k*k) × (out_h*out_w)
};

// tanh-approximated GELU. Smooth everywhere, so finite-difference checks do
// not straddle kinks.
class Gelu final : public Layer {
 public:
  std::string kind() const override { return "gelu"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Gelu>(*this); }

 private:
  Tensor input_;
};

// Non-overlapping average pooling with a square window; trailing rows and
// columns that do not fill a window are dropped.
class AvgPool2d final : public Layer {
 public:
  explicit AvgPool2d(int window) : window_(window) {}
  std::string kind() const override { return "avgpool2d"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool2d>(*this); }

 private:
  int window_;
  std::vector<int> in_shape_;
};

// (N, C, H, W) -> (N, C).
class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "global_avgpool"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  std::vector<int> in_shape_;
};

// Affine map on the last axis: (..., in) -> (..., out). Weight layout (out, in).
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng);
  std::string kind() const override { return "linear"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::vector<ParameterRef> parameters() override { return {{"weight", &weight_}, {"bias", &bias_}}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int in_, out_;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

// Layer normalisation over the last axis with learned gain and shift.
class LayerNorm final : public Layer {
 public:
  explicit LayerNorm(int features, double eps = 1e-5);
  std::string kind() const override { return "layernorm"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::vector<ParameterRef> parameters() override { return {{"gain", &gain_}, {"shift", &shift_}}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LayerNorm>(*this); }

 private:
  int features_;
  double eps_;
  Parameter gain_;
  Parameter shift_;
  Tensor normalized_;
  std::vector<double> inv_std_;
};

// (N, D, gh, gw) -> (N, gh*gw, D).
class GridToTokens final : public Layer {
 public:
  std::string kind() const override { return "grid_to_tokens"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GridToTokens>(*this); }

 private:
  std::vector<int> in_shape_;
};

// (N, gh*gw, D) -> (N, D, gh, gw).
class TokensToGrid final : public Layer {
 public:
  TokensToGrid(int grid_h, int grid_w) : gh_(grid_h), gw_(grid_w) {}
  std::string kind() const override { return "tokens_to_grid"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<TokensToGrid>(*this); }

 private:
  int gh_, gw_;
};

// Adds a learned (T, D) table to every sequence in the batch.
class PositionEmbedding final : public Layer {
 public:
  PositionEmbedding(int tokens, int dim, Rng& rng);
  std::string kind() const override { return "position_embedding"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::vector<ParameterRef> parameters() override { return {{"table", &table_}}; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<PositionEmbedding>(*this);
  }

 private:
  Parameter table_;
};

// Multi-head scaled dot-product self-attention on (N, T, D) with a fused QKV
// projection (3D × D) and an output projection (D × D).
class MultiHeadSelfAttention final : public Layer {
 public:
  MultiHeadSelfAttention(int dim, int heads, Rng& rng);
  std::string kind() const override { return "mhsa"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::vector<ParameterRef> parameters() override {
    return {{"qkv_weight", &qkv_w_}, {"qkv_bias", &qkv_b_}, {"out_weight", &out_w_},
            {"out_bias", &out_b_}};
  }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<MultiHeadSelfAttention>(*this);
  }

 private:
  int dim_, heads_;
  Parameter qkv_w_, qkv_b_, out_w_, out_b_;
  Tensor input_;
  Tensor qkv_;       // (N, T, 3D)
  Tensor attn_;      // (N, heads, T, T) softmax weights
  Tensor context_;   // (N, T, D) concatenated head outputs
};

// Ordered chain of layers. Children are named by position ("0", "1", ...).
class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::unique_ptr<Layer> layer);
  std::string kind() const override { return "sequential"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::vector<ParameterRef> parameters() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// y = x + inner(x).
class Residual final : public Layer {
 public:
  explicit Residual(Sequential inner) : inner_(std::move(inner)) {}
  std::string kind() const override { return "residual"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, BackwardMode mode) override;
  std::vector<ParameterRef> parameters() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  Sequential inner_;
};

}  // namespace harmony
