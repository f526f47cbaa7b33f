#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "harmony/attribution/grad_cam.hpp"
#include "harmony/error.hpp"
#include "harmony/model/zoo.hpp"
#include "test_support.hpp"

using namespace harmony;

namespace {

LabeledExample random_gray(int side, int label, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageTensor img(1, side, side);
  for (double& v : img.values()) v = u(rng);
  return {img, label, "img-" + std::to_string(seed)};
}

}  // namespace

TEST(GradCam, MatchesIndependentComputation) {
  int nontrivial = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    testkit::CamFixture f = testkit::cam_fixture(8, 3, seed);
    for (int label = 0; label < 3; ++label) {
      const LabeledExample ex = random_gray(8, label, seed * 10 + label);
      const AttributionMap map = grad_cam(f.model, ex, "features");
      const std::vector<double> want = testkit::grad_cam_oracle(f, ex.image, label);
      const std::vector<double> fd = testkit::grad_cam_oracle(f, ex.image, label, true);
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(fd[i], want[i], 1e-6);
      ASSERT_EQ(map.values.size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(map.values[i], want[i], 1e-6);
      nontrivial += *std::max_element(want.begin(), want.end()) > 0;
    }
  }
  // Both the all-zero branch and the normalised branch are exercised.
  EXPECT_GT(nontrivial, 5);
  EXPECT_LT(nontrivial, 36);
}

TEST(GradCam, RangeAndMetadataOnToyModels) {
  const Dataset d = testkit::small_shapes(3, 41);
  ClassifierAdapter cnn = testkit::trained_small_cnn();
  ClassifierAdapter vit = build_toy_vit(toy_input_spec(3, 16), 3, 4, 2, "vit-tiny");
  for (ClassifierAdapter* m : {&cnn, &vit}) {
    const std::string layer = m->default_cam_layer();
    const AttributionMap map = grad_cam(*m, d[0], layer);
    map.validate();
    EXPECT_EQ(map.height, 16);
    EXPECT_EQ(map.width, 16);
    EXPECT_EQ(map.method, AttributionMethod::kGC);
    EXPECT_EQ(map.image_id, d[0].id);
    EXPECT_EQ(map.source_model_id, m->model_id());
    EXPECT_EQ(map.config_hash, grad_cam_config_hash(layer));
    const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
    if (*hi > 0) {
      EXPECT_EQ(*hi, 1.0f);
      EXPECT_EQ(*lo, 0.0f);
    }
  }
  EXPECT_NE(grad_cam_config_hash("block1"), grad_cam_config_hash("block2"));
}

TEST(GradCam, Errors) {
  const Dataset d = testkit::small_shapes(3, 42);
  ClassifierAdapter cnn = build_toy_cnn(CnnSize::kSmall, toy_input_spec(3, 16), 3, 1);
  EXPECT_THROW(grad_cam(cnn, d[0], "head"), ModelError);
  LabeledExample bad = d[0];
  bad.label = 5;
  EXPECT_THROW(grad_cam(cnn, bad, cnn.default_cam_layer()), ParameterError);
}
