#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <regex>

#include "harmony/attribution/cache.hpp"
#include "harmony/error.hpp"
#include "harmony/pipeline/commands.hpp"
#include "harmony/pipeline/config.hpp"
#include "harmony/pipeline/plot.hpp"
#include "harmony/transfer/report.hpp"
#include "test_support.hpp"

using namespace harmony;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const fs::path& out) {
  RunConfig c;
  c.seed = 99;
  c.output_dir = out.string();
  c.dataset.train_n = 60;
  c.dataset.test_n = 9;
  for (const auto& [id, variant] : std::vector<std::pair<std::string, std::string>>{
           {"src", "cnn-small"}, {"tgt", "cnn-medium"}}) {
    ModelSpec m;
    m.id = id;
    m.variant = variant;
    m.train.epochs = 1;
    c.models.push_back(m);
  }
  c.source = "src";
  c.targets = {"tgt"};
  c.ss.steps = 3;
  c.ss.mask_grid = 4;
  c.ss.baselines_per_step = 2;
  c.evaluation.bins = 4;
  return c;
}

std::vector<std::size_t> svg_counts(const std::string& svg) {
  std::vector<std::size_t> out;
  const std::regex re("data-count=\"(\\d+)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back(std::stoul((*it)[1]));
  }
  return out;
}

std::vector<std::size_t> csv_counts(const std::string& csv) {
  std::vector<std::size_t> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) out.push_back(std::stoul(line.substr(line.rfind(',') + 1)));
  return out;
}

std::size_t file_count(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  return static_cast<std::size_t>(std::distance(fs::recursive_directory_iterator(dir), fs::recursive_directory_iterator()));
}

}  // namespace

TEST(Config, DeskConfigRoundTrips) {
  const RunConfig c = load_run_config(fs::path(HARMONY_SOURCE_DIR) / "configs" / "desk.json");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.models.size(), 3u);
  EXPECT_EQ(c.ss.objective_mode, ObjectiveMode::kLabelCe);
  EXPECT_EQ(run_config_from_json(to_json(c)), c);
  EXPECT_EQ(to_json(run_config_from_json(to_json(c))), to_json(c));
  RunConfig t = tiny_config("x");
  t.models[0].seed = 5;
  t.ss.seed = 3;
  t.ss_seed_set = true;
  t.method = AttributionMethod::kRandom;
  EXPECT_EQ(run_config_from_json(to_json(t)), t);
}

TEST(Config, Overrides) {
  nlohmann::json j = to_json(tiny_config("x"));
  apply_override(j, "ss.steps=7");
  apply_override(j, "models.1.train.epochs=4");
  apply_override(j, "method=GC");
  apply_override(j, "evaluation.binarize=true");
  apply_override(j, "output_dir=\"123\"");
  const RunConfig c = run_config_from_json(j);
  EXPECT_EQ(c.ss.steps, 7);
  EXPECT_EQ(c.models[1].train.epochs, 4);
  EXPECT_EQ(c.method, AttributionMethod::kGC);
  EXPECT_TRUE(c.evaluation.binarize);
  EXPECT_EQ(c.output_dir, "123");
  EXPECT_THROW(apply_override(j, "ss=3"), ConfigError);
  EXPECT_THROW(apply_override(j, "models=[]"), ConfigError);
  EXPECT_THROW(apply_override(j, "no_equals_sign"), ConfigError);
  EXPECT_THROW(apply_override(j, "models.9.id=a"), ConfigError);
}

TEST(Config, StrictParsingAndValidation) {
  nlohmann::json j = to_json(tiny_config("x"));
  j["ss"]["stepz"] = 3;
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  RunConfig c = tiny_config("x");
  c.source = "ghost";
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config("x");
  c.models[1].variant = "resnet";
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config("x");
  c.evaluation.threshold = 2;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), Error);
}

TEST(Config, PathsAndSeeds) {
  RunConfig c = tiny_config("/tmp/out");
  EXPECT_EQ(c.weights_path(c.models[0]), fs::path("/tmp/out/models/src.hwt"));
  EXPECT_EQ(c.report_path(), fs::path("/tmp/out/report-SS"));
  ::unsetenv(kCacheRootEnv);
  EXPECT_EQ(c.cache_root(), fs::path("/tmp/out/cache"));
  c.cache_dir = "/tmp/c2";
  EXPECT_EQ(c.cache_root(), fs::path("/tmp/c2"));
  ::setenv(kCacheRootEnv, "/tmp/envcache", 1);
  EXPECT_EQ(c.cache_root(), fs::path("/tmp/envcache"));
  ::unsetenv(kCacheRootEnv);
  EXPECT_NE(c.model_seed(c.models[0]), c.model_seed(c.models[1]));
  EXPECT_NE(c.model_seed(c.models[0]), c.train_seed(c.models[0]));
  EXPECT_NE(c.effective_ss().seed, 0u);
  c.ss.seed = 4;
  c.ss_seed_set = true;
  EXPECT_EQ(c.effective_ss().seed, 4u);
}

TEST(Commands, TrainIsDeterministicAndFailsFast) {
  testkit::TempDir dir;
  const RunConfig a = tiny_config(dir / "a" / "nested");
  const RunConfig b = tiny_config(dir / "b");
  const auto summary = cmd_train(a);
  cmd_train(b);
  const std::string ha = testkit::read_text(fs::path(a.output_dir) / "history.csv");
  EXPECT_EQ(ha, testkit::read_text(fs::path(b.output_dir) / "history.csv"));
  EXPECT_EQ(ha.substr(0, ha.find('\n')), "model_id,epoch,loss,train_accuracy");
  EXPECT_EQ(summary["models"].size(), 2u);
  EXPECT_TRUE(fs::exists(a.weights_path(a.models[1])));

  RunConfig bad = tiny_config(dir / "bad");
  bad.models[1].variant = "resnet";
  EXPECT_THROW(cmd_train(bad), ConfigError);
  EXPECT_FALSE(fs::exists(bad.weights_path(bad.models[0])));
}

TEST(Commands, AttributeEvaluatePlotReport) {
  testkit::TempDir dir;
  RunConfig c = tiny_config(dir.path());
  EXPECT_THROW(cmd_attribute(c), IoError);  // no weights yet
  cmd_train(c);

  const auto first = cmd_attribute(c);
  EXPECT_EQ(first["computed"], 9);
  const auto again = cmd_attribute(c);
  EXPECT_EQ(again["computed"], 0);
  EXPECT_EQ(again["cache_hits"], 9);

  // Deleting the cache recomputes identical arrays.
  const auto [train_set, test_set] = load_splits(c);
  AttributionCache cache(c.cache_root());
  const std::string hash = first["config_hash"];
  const CacheKey key{test_set[2].id, "src", AttributionMethod::kSS, hash};
  const auto before = cache.get(key);
  ASSERT_TRUE(before.has_value());
  fs::remove_all(c.cache_root());
  EXPECT_THROW(cmd_evaluate(c), CacheError);
  EXPECT_EQ(cmd_attribute(c)["computed"], 9);
  EXPECT_EQ(cache.get(key)->values, before->values);

  cmd_evaluate(c);
  const fs::path report_dir = c.report_path();
  const TransferReport rep = read_report_json(report_dir / "report.json");
  EXPECT_EQ(run_config_from_json(rep.config), c);
  EXPECT_EQ(rep.entries.size(), 4u);

  const auto plotted = cmd_plot(report_dir);
  const fs::path plots = report_dir / "plots";
  EXPECT_EQ(file_count(plots), 5u);
  for (const auto& e : rep.entries) {
    const std::string stem = record_stem(e);
    EXPECT_EQ(svg_counts(testkit::read_text(plots / (stem + "__p_pred.svg"))),
              csv_counts(testkit::read_text(report_dir / "histograms" / (stem + "__p_pred.csv"))));
  }
  EXPECT_TRUE(fs::exists(plots / "grid__p_pred.svg"));

  c.triptychs = 2;
  cmd_plot(report_dir, dir / "trip", &c);
  EXPECT_EQ(file_count(dir / "trip"), 7u);

  const auto table = cmd_report({report_dir / "report.json"}, dir / "table.md");
  EXPECT_EQ(testkit::read_text(dir / "table.md"), table["table"].get<std::string>());

  // Identity masks make every F record equal its I record.
  c.evaluation.identity_masks = true;
  c.report_dir = (dir / "identity").string();
  cmd_evaluate(c);
  const TransferReport id = read_report_json(dir / "identity" / "report.json");
  for (const auto& m : id.models()) {
    EXPECT_EQ(id.find(m, InputMode::kFeature)->record.rows, id.find(m, InputMode::kImage)->record.rows);
  }
}

TEST(Commands, GradCamLayerErrorListsLayers) {
  testkit::TempDir dir;
  RunConfig c = tiny_config(dir.path());
  cmd_train(c);
  c.method = AttributionMethod::kGC;
  c.gc_layer = "nope";
  try {
    cmd_attribute(c);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("block1"), std::string::npos) << e.what();
  }
  c.gc_layer.clear();
  EXPECT_EQ(cmd_attribute(c)["computed"], 9);
}

TEST(Commands, PlotErrorsWriteNothing) {
  testkit::TempDir dir;
  EXPECT_THROW(cmd_plot(dir / "missing"), Error);
  EXPECT_EQ(file_count(dir.path()), 0u);
  fs::create_directories(dir / "empty");
  std::ofstream(dir / "empty" / "report.json") << R"({"source_model":"a","method":"SS","records":[]})";
  EXPECT_THROW(cmd_plot(dir / "empty"), EvaluationError);
  EXPECT_FALSE(fs::exists(dir / "empty" / "plots"));
}

TEST(Plot, SvgAndTriptych) {
  Histogram h;
  h.counts = {3, 0, 7, 1};
  const std::string svg = histogram_svg(h, "cnn (F)");
  EXPECT_EQ(svg_counts(svg), h.counts);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("cnn (F)"), std::string::npos);
  const std::string grid = histogram_grid_svg({{"a", h}, {"b", h}, {"c", h}}, 2);
  EXPECT_EQ(svg_counts(grid).size(), 12u);

  const ImageTensor x(3, 4, 4, 0.5);
  const ImageTensor t = triptych(x, std::vector<float>(16, 1.0f), x, 2);
  EXPECT_EQ(t.channels(), 3);
  EXPECT_EQ(t.height(), 8);
  EXPECT_GE(t.width(), 24);
}
