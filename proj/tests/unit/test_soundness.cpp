#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "harmony/attribution/soundness.hpp"
#include "harmony/error.hpp"
#include "harmony/model/zoo.hpp"
#include "test_support.hpp"

using namespace harmony;
using testkit::max_relative_error;
using testkit::numeric_gradient;

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Independent evaluation of the objective at input resolution (mask_grid 0):
// composites, model probabilities, entropy or label cross-entropy, sparsity
// and the mean squared difference over horizontal and vertical neighbours.
double objective_oracle(ClassifierAdapter& model, const ImageTensor& x, const std::vector<double>& theta,
                        const std::vector<ImageTensor>& baselines, const SSConfig& c, int label) {
  const int H = x.height(), W = x.width(), C = x.channels();
  std::vector<double> m(theta.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = sigmoid(theta[i]);
  double data_term = 0;
  for (const auto& b : baselines) {
    ImageTensor comp(C, H, W);
    for (int ch = 0; ch < C; ++ch)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const double mm = m[i * W + j];
          comp.at(ch, i, j) = mm * x.at(ch, i, j) + (1 - mm) * b.at(ch, i, j);
        }
    const Tensor p = model.predict_proba(stack_images(std::vector<ImageTensor>{comp}));
    if (c.objective_mode == ObjectiveMode::kEntropy) {
      for (std::size_t k = 0; k < p.size(); ++k) data_term -= p[k] > 0 ? p[k] * std::log(p[k]) : 0.0;
    } else {
      data_term -= std::log(p[label]);
    }
  }
  data_term /= static_cast<double>(baselines.size());
  double mean_m = 0;
  for (double v : m) mean_m += v;
  mean_m /= static_cast<double>(m.size());
  double tv = 0;
  int pairs = 0;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      if (j + 1 < W) tv += std::pow(m[i * W + j] - m[i * W + j + 1], 2), ++pairs;
      if (i + 1 < H) tv += std::pow(m[i * W + j] - m[(i + 1) * W + j], 2), ++pairs;
    }
  return data_term + c.sparsity_weight * mean_m + c.tv_weight * tv / pairs;
}

std::vector<double> random_theta(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d(0.0, 1.5);
  std::vector<double> t(n);
  for (double& v : t) v = d(rng);
  return t;
}

}  // namespace

TEST(Entropy, KnownValues) {
  const std::vector<double> uniform(4, 0.25), onehot{0, 1, 0}, half{0.5, 0.5};
  EXPECT_NEAR(entropy(uniform), std::log(4.0), 1e-15);
  EXPECT_EQ(entropy(onehot), 0.0);
  EXPECT_NEAR(entropy(half), std::log(2.0), 1e-15);
  const std::vector<double> bad{0.5, 0.6}, negative{1.2, -0.2};
  EXPECT_THROW(entropy(bad), ParameterError);
  EXPECT_THROW(entropy(negative), ParameterError);
}

TEST(Composite, BlendsPerPixelAcrossChannels) {
  const Dataset d = testkit::small_shapes(3, 31);
  const ImageTensor& x = d[0].image;
  const std::vector<ImageTensor> bases{d[1].image, d[2].image};
  std::vector<double> mask(x.plane_size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = static_cast<double>(i % 5) / 4.0;
  const auto comps = composite_sample(x, mask, bases);
  ASSERT_EQ(comps.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j)
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 16; ++h)
        for (int w = 0; w < 16; ++w) {
          const double m = mask[h * 16 + w];
          EXPECT_NEAR(comps[j].at(c, h, w), m * x.at(c, h, w) + (1 - m) * bases[j].at(c, h, w), 1e-15);
        }
  EXPECT_EQ(composite_sample(x, std::vector<double>(256, 1.0), bases)[1], x);
  EXPECT_EQ(composite_sample(x, std::vector<double>(256, 0.0), bases)[0], bases[0]);
  EXPECT_THROW(composite_sample(x, std::vector<double>(10, 0.0), bases), ParameterError);
}

TEST(Sampler, NeverReturnsTheImageUnderAttribution) {
  const Dataset d = testkit::small_shapes(3, 32);
  const CompositeSampler s(d, toy_input_spec(3, 16));
  EXPECT_EQ(s.pool_size(), 3u);
  Rng rng(1);
  std::set<std::vector<double>> seen;
  for (int rep = 0; rep < 50; ++rep) {
    for (const auto& img : s.draw(4, d[0].id, rng)) {
      EXPECT_NE(img, d[0].image);
      seen.insert(std::vector<double>(img.values().begin(), img.values().end()));
    }
  }
  EXPECT_EQ(seen.size(), 2u);

  const CompositeSampler f = CompositeSampler::fixed({d[1].image, d[2].image});
  EXPECT_TRUE(f.is_fixed());
  const auto drawn = f.draw(7, d[1].id, rng);
  ASSERT_EQ(drawn.size(), 2u);
  EXPECT_EQ(drawn[0], d[1].image);
}

TEST(Mask, LatticeAndLogits) {
  SSConfig c;
  EXPECT_EQ(mask_lattice(c, 16, 12), std::make_pair(16, 12));
  c.mask_grid = 8;
  EXPECT_EQ(mask_lattice(c, 16, 16), std::make_pair(8, 8));
  const auto flat = mask_from_logits(std::vector<double>(64, 0.0), c, 16, 16);
  ASSERT_EQ(flat.size(), 256u);
  for (double v : flat) EXPECT_NEAR(v, 0.5, 1e-15);
  c.mask_grid = 0;
  const auto theta = random_theta(16, 3);
  const auto m = mask_from_logits(theta, c, 4, 4);
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(m[i], sigmoid(theta[i]), 1e-15);
}

TEST(Objective, ValueMatchesIndependentEvaluation) {
  const Dataset d = testkit::small_shapes(3, 33);
  ClassifierAdapter model = testkit::trained_small_cnn();
  const std::vector<ImageTensor> bases{d[1].image, d[2].image};
  for (ObjectiveMode mode : {ObjectiveMode::kEntropy, ObjectiveMode::kLabelCe}) {
    SSConfig c;
    c.objective_mode = mode;
    c.sparsity_weight = 0.3;
    c.tv_weight = 2.0;
    const auto theta = random_theta(256, 4);
    const double got = ss_objective(model, d[0].image, theta, bases, c, d[0].label).value;
    EXPECT_NEAR(got, objective_oracle(model, d[0].image, theta, bases, c, d[0].label), 1e-10);
  }
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  const Dataset d = testkit::small_shapes(3, 34);
  ClassifierAdapter model = build_toy_cnn(CnnSize::kSmall, toy_input_spec(3, 16), 3, 2);
  const std::vector<ImageTensor> bases{d[1].image, d[2].image};
  for (int grid : {0, 4}) {
    for (ObjectiveMode mode : {ObjectiveMode::kEntropy, ObjectiveMode::kLabelCe}) {
      SSConfig c;
      c.objective_mode = mode;
      c.mask_grid = grid;
      c.sparsity_weight = 0.4;
      c.tv_weight = 1.5;
      const auto [lh, lw] = mask_lattice(c, 16, 16);
      const auto theta = random_theta(static_cast<std::size_t>(lh * lw), 5);
      const auto r = ss_objective(model, d[0].image, theta, bases, c, d[0].label);
      auto f = [&](const std::vector<double>& t) {
        return ss_objective(model, d[0].image, t, bases, c, d[0].label).value;
      };
      EXPECT_LT(max_relative_error(r.gradient, numeric_gradient(f, theta, 1e-5), 1e-6), 1e-5)
          << "grid " << grid << " mode " << to_string(mode);
    }
  }
}

TEST(Optimizer, DecreasesObjectiveAndIsDeterministic) {
  const Dataset pool = testkit::small_shapes(30, 35);
  ClassifierAdapter model = testkit::trained_small_cnn();
  const CompositeSampler sampler(pool, model.input_spec());
  SSConfig c;
  c.objective_mode = ObjectiveMode::kLabelCe;
  c.steps = 30;
  c.step_size = 40;
  c.baselines_per_step = 4;
  c.sparsity_weight = 0.25;
  c.tv_weight = 3;
  c.mask_grid = 8;
  c.seed = 77;
  const SSResult a = optimize_ss_mask(model, pool[0], sampler, c);
  const SSResult b = optimize_ss_mask(model, pool[0], sampler, c);
  EXPECT_LT(a.final_objective, a.initial_objective);
  EXPECT_EQ(a.map.values, b.map.values);
  EXPECT_EQ(a.theta, b.theta);
  a.map.validate();
  EXPECT_EQ(a.map.height, 16);
  EXPECT_EQ(a.map.image_id, pool[0].id);
  EXPECT_EQ(a.map.config_hash, c.hash());
  c.seed = 78;
  EXPECT_NE(optimize_ss_mask(model, pool[0], sampler, c).theta, a.theta);

  // Zero steps of size zero leave theta at logit(mask_init).
  c.step_size = 0;
  c.steps = 1;
  const SSResult still = optimize_ss_mask(model, pool[0], sampler, c);
  for (float v : still.map.values) EXPECT_NEAR(v, 0.5f, 1e-6f);
  EXPECT_DOUBLE_EQ(still.initial_objective, still.final_objective);
}

TEST(Optimizer, NonFiniteObjectiveRaises) {
  const Dataset pool = testkit::small_shapes(6, 36);
  ClassifierAdapter model = build_toy_cnn(CnnSize::kSmall, toy_input_spec(3, 16), 3, 2);
  model.network().parameters().back().param->value[0] = std::nan("");
  SSConfig c;
  c.steps = 3;
  EXPECT_THROW(optimize_ss_mask(model, pool[0], CompositeSampler(pool, model.input_spec()), c),
               OptimizerError);
}

TEST(SSConfigTest, ValidationHashAndJson) {
  SSConfig c;
  EXPECT_NO_THROW(c.validate());
  for (auto mutate : std::vector<void (*)(SSConfig&)>{
           [](SSConfig& s) { s.steps = 0; }, [](SSConfig& s) { s.baselines_per_step = 0; },
           [](SSConfig& s) { s.step_size = -1; }, [](SSConfig& s) { s.tv_weight = -1; },
           [](SSConfig& s) { s.mask_init = 1.0; }, [](SSConfig& s) { s.mask_grid = -2; }}) {
    SSConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), ParameterError);
  }
  SSConfig other = c;
  other.tv_weight = 0.5;
  EXPECT_NE(other.hash(), c.hash());
  EXPECT_EQ(SSConfig(c).hash(), c.hash());
  other.objective_mode = ObjectiveMode::kLabelCe;
  other.seed = 123;
  nlohmann::json j = other;
  EXPECT_EQ(j.get<SSConfig>(), other);
  EXPECT_EQ(parse_objective_mode("label-ce"), ObjectiveMode::kLabelCe);
  EXPECT_THROW(parse_objective_mode("mse"), ParameterError);
}
