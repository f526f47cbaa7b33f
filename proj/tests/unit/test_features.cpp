#include <gtest/gtest.h>

#include <cmath>

#include "harmony/data/image_io.hpp"
#include "harmony/error.hpp"
#include "harmony/features/extract.hpp"
#include "test_support.hpp"

using namespace harmony;

namespace {

AttributionMap checker(int h, int w) {
  AttributionMap m;
  m.height = h;
  m.width = w;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) m.values.push_back(static_cast<float>((i + 2 * j) % 5) / 4.0f);
  m.image_id = "img";
  m.source_model_id = "cnn-small";
  m.method = AttributionMethod::kGC;
  m.config_hash = "h1";
  return m;
}

}  // namespace

TEST(Features, SoftMaskMultipliesEveryChannel) {
  const Dataset d = testkit::small_shapes(3, 51);
  const ImageTensor& x = d[0].image;
  const AttributionMap m = checker(16, 16);
  const FeatureInput f = extract_features(x, m);
  EXPECT_FALSE(f.binarized);
  EXPECT_EQ(f.image_id, "img");
  EXPECT_EQ(f.provenance, (FeatureProvenance{"cnn-small", AttributionMethod::kGC, "h1"}));
  ASSERT_TRUE(f.data.same_shape(x));
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < 16; ++h)
      for (int w = 0; w < 16; ++w) {
        EXPECT_DOUBLE_EQ(f.data.at(c, h, w), static_cast<double>(m.at(h, w)) * x.at(c, h, w));
      }
}

TEST(Features, BinarizedMaskUsesThreshold) {
  const Dataset d = testkit::small_shapes(3, 52);
  const ImageTensor& x = d[1].image;
  const AttributionMap m = checker(16, 16);
  for (double thr : {0.25, 0.3, 0.75}) {
    const FeatureInput f = extract_features(x, m, true, thr);
    EXPECT_TRUE(f.binarized);
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 16; ++h)
        for (int w = 0; w < 16; ++w) {
          const double want = m.at(h, w) >= thr ? x.at(c, h, w) : 0.0;
          EXPECT_EQ(f.data.at(c, h, w), want);
        }
  }
  // Values exactly at the threshold are kept.
  const FeatureInput edge = extract_features(x, AttributionMap::filled(16, 16, 0.5f), true, 0.5);
  EXPECT_EQ(edge.data, x);
}

TEST(Features, IdentityAndZeroMasks) {
  const Dataset d = testkit::small_shapes(3, 53);
  EXPECT_EQ(extract_features(d[2].image, AttributionMap::filled(16, 16, 1.0f)).data, d[2].image);
  const FeatureInput zero = extract_features(d[2].image, AttributionMap::filled(16, 16, 0.0f));
  for (double v : zero.data.values()) EXPECT_EQ(v, 0.0);
}

TEST(Features, ShapeMismatchThrows) {
  const Dataset d = testkit::small_shapes(3, 54);
  EXPECT_THROW(extract_features(d[0].image, checker(8, 16)), ParameterError);
}

TEST(Features, ResizeMap) {
  const AttributionMap m = checker(8, 8);
  const AttributionMap same = resize_map(m, 8, 8);
  EXPECT_EQ(same.values, m.values);
  const AttributionMap up = resize_map(m, 16, 16);
  EXPECT_EQ(up.height, 16);
  EXPECT_EQ(up.image_id, m.image_id);
  EXPECT_EQ(up.config_hash, m.config_hash);
  up.validate();
  const AttributionMap constant = resize_map(AttributionMap::filled(4, 4, 0.6f), 9, 7);
  for (float v : constant.values) EXPECT_NEAR(v, 0.6f, 1e-6f);
}

TEST(Features, PngExport) {
  testkit::TempDir dir;
  const Dataset d = testkit::small_shapes(3, 55);
  const FeatureInput f = extract_features(d[0].image, checker(16, 16));
  export_feature_png(f, dir / "sub" / "f.png");
  const ImageTensor back = read_image(dir / "sub" / "f.png");
  ASSERT_TRUE(back.same_shape(f.data));
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back.values()[i], f.data.values()[i], 0.5 / 255 + 1e-9);
}
