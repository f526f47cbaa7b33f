#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

#include "harmony/attribution/cache.hpp"
#include "harmony/attribution/random_mask.hpp"
#include "harmony/error.hpp"
#include "test_support.hpp"

using namespace harmony;

namespace {

AttributionMap ramp(int h, int w, const std::string& id, float scale = 1.0f) {
  AttributionMap m;
  m.height = h;
  m.width = w;
  for (int i = 0; i < h * w; ++i) m.values.push_back(scale * static_cast<float>(i) / (h * w - 1));
  m.image_id = id;
  m.source_model_id = "cnn-small";
  m.method = AttributionMethod::kSS;
  m.config_hash = "abc123";
  return m;
}

CacheKey key_of(const AttributionMap& m) { return {m.image_id, m.source_model_id, m.method, m.config_hash}; }

}  // namespace

TEST(AttributionMapTest, BasicsAndValidation) {
  const AttributionMap ones = AttributionMap::filled(4, 5, 1.0f);
  EXPECT_EQ(ones.values.size(), 20u);
  EXPECT_DOUBLE_EQ(ones.mean(), 1.0);
  EXPECT_NEAR(ramp(3, 3, "x").mean(), 0.5, 1e-7);
  EXPECT_NO_THROW(ones.validate());
  AttributionMap bad = ones;
  bad.values[3] = 1.5f;
  EXPECT_THROW(bad.validate(), ParameterError);
  bad.values[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(bad.validate(), ParameterError);
  bad = ones;
  bad.values.pop_back();
  EXPECT_THROW(bad.validate(), ParameterError);

  EXPECT_EQ(parse_method("ss"), AttributionMethod::kSS);
  EXPECT_EQ(parse_method("GM"), AttributionMethod::kGC);
  EXPECT_EQ(parse_method("Random"), AttributionMethod::kRandom);
  EXPECT_STREQ(to_string(AttributionMethod::kGC), "GC");
  EXPECT_THROW(parse_method("lime"), ParameterError);
}

TEST(RandomMask, MatchesMeanAndIsDeterministic) {
  for (float scale : {0.05f, 0.3f, 0.9f}) {
    const AttributionMap like = ramp(16, 16, "img", scale);
    const AttributionMap r = random_mask_like(like, 7);
    r.validate();
    EXPECT_NEAR(r.mean(), like.mean(), 1e-4) << scale;
    EXPECT_EQ(r.method, AttributionMethod::kRandom);
    EXPECT_EQ(r.image_id, "img");
    EXPECT_EQ(random_mask_like(like, 7).values, r.values);
    EXPECT_NE(random_mask_like(like, 8).values, r.values);
  }
  // Means near 1 force clipping; the mean still matches.
  AttributionMap dense = AttributionMap::filled(16, 16, 0.97f);
  EXPECT_NEAR(random_mask_like(dense, 1).mean(), 0.97, 1e-4);
  for (float v : {0.0f, 1.0f}) {
    const AttributionMap flat = random_mask_like(AttributionMap::filled(4, 4, v), 1);
    for (float x : flat.values) EXPECT_EQ(x, v);
  }
  EXPECT_NE(random_config_hash("abc", 1), random_config_hash("abc", 2));
  EXPECT_NE(random_config_hash("abc", 1), random_config_hash("abd", 1));
}

TEST(RandomMask, ValuesAreSpreadNotConstant) {
  const AttributionMap r = random_mask_like(AttributionMap::filled(32, 32, 0.25f), 3);
  // A rescaled U[0,1] with mean 0.25 spans [0, 0.5].
  const auto [lo, hi] = std::minmax_element(r.values.begin(), r.values.end());
  EXPECT_LT(*lo, 0.01f);
  EXPECT_GT(*hi, 0.49f);
  EXPECT_LE(*hi, 0.5001f);
}

TEST(Cache, RoundTripIsExact) {
  testkit::TempDir dir;
  AttributionCache cache(dir.path());
  AttributionMap m = ramp(7, 5, "class a/img 01.png");
  m.values[3] = 0.1f;  // not representable in fewer bits
  EXPECT_FALSE(cache.get(key_of(m)).has_value());
  EXPECT_FALSE(cache.contains(key_of(m)));
  cache.put(m, {{"steps", 3}});
  ASSERT_TRUE(cache.contains(key_of(m)));
  const auto back = cache.get(key_of(m));
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->values, m.values);
  EXPECT_EQ(back->height, 7);
  EXPECT_EQ(back->width, 5);
  EXPECT_EQ(back->image_id, m.image_id);
  EXPECT_EQ(back->config_hash, m.config_hash);

  const auto path = cache.entry_path(key_of(m));
  EXPECT_EQ(path.parent_path(), dir.path() / "cnn-small" / "SS" / "abc123");
  EXPECT_EQ(std::filesystem::file_size(path), 8u + 8u + 4u * 35u);
  const auto manifest = nlohmann::json::parse(testkit::read_text(path.parent_path() / "manifest.json"));
  EXPECT_EQ(manifest["source_model_id"], "cnn-small");
  EXPECT_EQ(manifest["method"], "SS");
  EXPECT_EQ(manifest["config_hash"], "abc123");
  EXPECT_EQ(manifest["parameters"]["steps"], 3);
  EXPECT_TRUE(manifest.contains("created_utc"));

  CacheKey other = key_of(m);
  other.config_hash = "zzz";
  EXPECT_FALSE(cache.get(other).has_value());
  other = key_of(m);
  other.method = AttributionMethod::kGC;
  EXPECT_FALSE(cache.get(other).has_value());
}

TEST(Cache, LastWriteWins) {
  testkit::TempDir dir;
  AttributionCache cache(dir.path());
  const AttributionMap a = ramp(4, 4, "img");
  AttributionMap b = a;
  std::reverse(b.values.begin(), b.values.end());
  cache.put(a);
  cache.put(b);
  EXPECT_EQ(cache.get(key_of(a))->values, b.values);
}

TEST(Cache, CorruptEntriesNameTheKey) {
  testkit::TempDir dir;
  AttributionCache cache(dir.path());
  const AttributionMap m = ramp(4, 4, "img-7");
  cache.put(m);
  const auto path = cache.entry_path(key_of(m));
  const std::string good = testkit::read_text(path);
  const std::vector<std::string> corruptions{
      good.substr(0, good.size() - 3), "XXXXXXXX" + good.substr(8), good + "extra", ""};
  for (const auto& bytes : corruptions) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    try {
      cache.get(key_of(m));
      FAIL() << "accepted corrupt entry";
    } catch (const CacheError& e) {
      EXPECT_NE(std::string(e.what()).find("img-7"), std::string::npos) << e.what();
    }
  }
  std::string out_of_range = good;
  const float two = 2.0f;
  std::memcpy(out_of_range.data() + 16, &two, 4);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << out_of_range;
  EXPECT_THROW(cache.get(key_of(m)), CacheError);
}

TEST(Cache, RejectsIncompleteMaps) {
  testkit::TempDir dir;
  AttributionCache cache(dir.path());
  AttributionMap m = ramp(2, 2, "");
  EXPECT_THROW(cache.put(m), CacheError);
  m = ramp(2, 2, "a");
  m.values[0] = -1;
  EXPECT_THROW(cache.put(m), ParameterError);
}

TEST(Cache, ConcurrentReadersAndWriters) {
  testkit::TempDir dir;
  AttributionCache cache(dir.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        const AttributionMap m = ramp(6, 6, "img-" + std::to_string(i), 0.5f + 0.1f * (i % 3));
        cache.put(m);
        const auto back = cache.get(key_of(m));
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(back->values.size(), 36u);
        (void)t;
      }
    });
  }
  for (auto& th : threads) th.join();
  for (int i = 0; i < 25; ++i) {
    const AttributionMap want = ramp(6, 6, "img-" + std::to_string(i), 0.5f + 0.1f * (i % 3));
    EXPECT_EQ(cache.get(key_of(want))->values, want.values);
  }
}

TEST(Cache, ImageIdEncoding) {
  EXPECT_EQ(encode_image_id("abc-1_2.png"), "abc-1_2.png");
  EXPECT_EQ(encode_image_id("a/b c"), "a%2Fb%20c");
  EXPECT_EQ(encode_image_id(".."), "%2E%2E");
  EXPECT_EQ(encode_image_id("."), "%2E");
  EXPECT_NE(encode_image_id("a/b"), encode_image_id("a%2Fb"));
}
