#include <gtest/gtest.h>

#include <random>

#include "harmony/model/layers.hpp"
#include "test_support.hpp"

using namespace harmony;
using harmony::testkit::max_relative_error;
using harmony::testkit::numeric_gradient;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : t.values()) v = n(rng);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Checks d<w, layer(x)>/dx and d<w, layer(x)>/dparams against central
// differences.
void check_layer(Layer& layer, const Tensor& x, double tol = 1e-6) {
  const Tensor y0 = layer.forward(x);
  const Tensor w = random_tensor(y0.shape(), 99);
  for (auto& p : layer.parameters()) p.param->grad.fill(0.0);
  layer.forward(x);
  const Tensor dx = layer.backward(w, BackwardMode::kAccumulateParams);
  ASSERT_EQ(dx.shape(), x.shape());

  auto input_fn = [&](const std::vector<double>& v) { return dot(w, layer.forward(Tensor(x.shape(), v))); };
  const auto num_dx = numeric_gradient(input_fn, x.storage());
  EXPECT_LT(max_relative_error(dx.storage(), num_dx, 1e-4), tol) << layer.kind() << " input gradient";

  for (auto& p : layer.parameters()) {
    Tensor& value = p.param->value;
    const std::vector<double> keep = value.storage();
    auto param_fn = [&](const std::vector<double>& v) {
      value.storage() = v;
      return dot(w, layer.forward(x));
    };
    const auto num = numeric_gradient(param_fn, keep);
    value.storage() = keep;
    EXPECT_LT(max_relative_error(p.param->grad.storage(), num, 1e-4), tol) << layer.kind() << "." << p.name;
  }
}

}  // namespace

TEST(LayerGradients, Normalize) {
  Normalize l({0.5, 0.4}, {0.25, 0.5});
  check_layer(l, random_tensor({2, 2, 3, 3}, 1));
}

TEST(LayerGradients, Conv2dStrideAndPadding) {
  Rng rng(1);
  Conv2d same(2, 3, 3, 1, 1, rng);
  check_layer(same, random_tensor({2, 2, 5, 5}, 2));
  Conv2d strided(2, 2, 3, 2, 1, rng);
  check_layer(strided, random_tensor({1, 2, 6, 6}, 3));
  Conv2d patch(3, 4, 2, 2, 0, rng);
  check_layer(patch, random_tensor({1, 3, 4, 4}, 4));
}

TEST(LayerGradients, GeluPoolingAndLinear) {
  Gelu g;
  check_layer(g, random_tensor({2, 3, 2, 2}, 5));
  AvgPool2d p(2);
  check_layer(p, random_tensor({1, 2, 5, 4}, 6));
  GlobalAvgPool gap;
  check_layer(gap, random_tensor({2, 3, 3, 2}, 7));
  Rng rng(2);
  Linear lin(4, 3, rng);
  check_layer(lin, random_tensor({2, 5, 4}, 8));
}

TEST(LayerGradients, TransformerPieces) {
  Rng rng(3);
  LayerNorm ln(6);
  check_layer(ln, random_tensor({2, 3, 6}, 9));
  GridToTokens tok;
  check_layer(tok, random_tensor({1, 4, 2, 3}, 10));
  TokensToGrid grid(2, 3);
  check_layer(grid, random_tensor({1, 6, 4}, 11));
  PositionEmbedding pos(5, 4, rng);
  check_layer(pos, random_tensor({2, 5, 4}, 12));
  MultiHeadSelfAttention attn(8, 2, rng);
  check_layer(attn, random_tensor({2, 4, 8}, 13, 0.7));
}

TEST(LayerGradients, ResidualSequential) {
  Rng rng(4);
  Sequential inner;
  inner.add(std::make_unique<LayerNorm>(4));
  inner.add(std::make_unique<Linear>(4, 6, rng));
  inner.add(std::make_unique<Gelu>());
  inner.add(std::make_unique<Linear>(6, 4, rng));
  Residual res(std::move(inner));
  check_layer(res, random_tensor({2, 3, 4}, 14));
  const auto params = res.parameters();
  ASSERT_EQ(params.size(), 6u);
  EXPECT_EQ(params[0].name, "0.gain");
  EXPECT_EQ(params[5].name, "3.bias");
}

TEST(Layers, TokenGridRoundTrip) {
  const Tensor x = random_tensor({2, 4, 2, 3}, 15);
  GridToTokens tok;
  TokensToGrid grid(2, 3);
  const Tensor t = tok.forward(x);
  EXPECT_EQ(t.shape(), (std::vector<int>{2, 6, 4}));
  EXPECT_EQ(t[1 * 4 + 2], x.at(0, 2, 0, 1));  // token (0,1), feature 2
  EXPECT_EQ(grid.forward(t), x);
}

TEST(Layers, CloneIsDeep) {
  Rng rng(5);
  Linear a(2, 2, rng);
  auto b = a.clone();
  a.weight().value.fill(0.0);
  const Tensor x({1, 2}, std::vector<double>{1, 1});
  EXPECT_NE(b->forward(x), a.forward(x));
}

TEST(Layers, InputOnlyLeavesParameterGradientsUntouched) {
  Rng rng(6);
  Conv2d c(1, 2, 3, 1, 1, rng);
  for (auto& p : c.parameters()) p.param->grad.fill(0.0);
  const Tensor x = random_tensor({1, 1, 4, 4}, 16);
  const Tensor y = c.forward(x);
  c.backward(random_tensor(y.shape(), 17), BackwardMode::kInputOnly);
  for (auto& p : c.parameters()) {
    for (double g : p.param->grad.values()) EXPECT_EQ(g, 0.0);
  }
}
