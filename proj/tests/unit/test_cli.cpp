#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "harmony/attribution/cache.hpp"
#include "test_support.hpp"

using namespace harmony;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome run(const testkit::TempDir& dir, const std::string& args, const std::string& env = "") {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + " " + quote(HARMONY_CLI_PATH) + " " + args + " >" + quote(out.string()) + " 2>" +
                          quote(err.string());
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testkit::read_text(out), testkit::read_text(err)};
}

nlohmann::json error_line(const std::string& err) {
  const auto pos = err.rfind("error: ");
  if (pos == std::string::npos) return nullptr;
  return nlohmann::json::parse(err.substr(pos + 7, err.find('\n', pos) - pos - 7));
}

fs::path write_tiny_config(const testkit::TempDir& dir) {
  nlohmann::json j = {
      {"seed", 3},
      {"output_dir", (dir / "run").string()},
      {"dataset", {{"kind", "shapes"}, {"num_classes", 3}, {"side", 16}, {"train_n", 30}, {"test_n", 6}}},
      {"models",
       {{{"id", "a"}, {"variant", "cnn-small"}, {"train", {{"epochs", 1}}}},
        {{"id", "b"}, {"variant", "cnn-small"}, {"train", {{"epochs", 1}}}}}},
      {"source", "a"},
      {"targets", {"b"}},
      {"method", "GC"},
      {"evaluation", {{"bins", 4}}}};
  const fs::path path = dir / "tiny.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST(Cli, ReportRendersGoldenTable) {
  testkit::TempDir dir;
  const auto r = run(dir, "report --input " + quote(testkit::test_data("fixtures/table1_ss.json").string()));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, testkit::read_text(testkit::test_data("golden/table1_ss.md")));
}

TEST(Cli, ErrorsAreMachineReadable) {
  testkit::TempDir dir;
  const auto missing = run(dir, "train --config " + quote((dir / "nope.json").string()));
  EXPECT_NE(missing.code, 0);
  const auto line = error_line(missing.err);
  ASSERT_TRUE(line.is_object()) << missing.err;
  EXPECT_EQ(line["command"], "train");
  EXPECT_EQ(line["type"], "config");
  EXPECT_NE(line["message"].get<std::string>().find("nope.json"), std::string::npos);

  const auto usage = run(dir, "train");
  EXPECT_EQ(usage.code, 2);
  EXPECT_EQ(error_line(usage.err)["type"], "usage");
  EXPECT_EQ(run(dir, "frobnicate").code, 2);
  EXPECT_EQ(run(dir, "").code, 2);

  const fs::path cfg = write_tiny_config(dir);
  const auto bad_key = run(dir, "train --config " + quote(cfg.string()) + " --set ss.nonsense=1");
  EXPECT_EQ(bad_key.code, 1);
  EXPECT_EQ(error_line(bad_key.err)["type"], "config");
  const auto no_weights = run(dir, "attribute --config " + quote(cfg.string()));
  EXPECT_EQ(no_weights.code, 1);
  EXPECT_EQ(error_line(no_weights.err)["type"], "io");
}

TEST(Cli, EndToEndWithOverridesAndCacheEnv) {
  testkit::TempDir dir;
  const fs::path cfg = write_tiny_config(dir);
  const std::string c = " --config " + quote(cfg.string());
  const auto train = run(dir, "train" + c + " --set models.1.train.epochs=2 --seed 4");
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_EQ(nlohmann::json::parse(train.out)["models"].size(), 2u);
  const std::string history = testkit::read_text(dir / "run" / "history.csv");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 4);  // header + 1 + 2 epochs

  const fs::path env_cache = dir / "envcache";
  const std::string env = std::string(kCacheRootEnv) + "=" + quote(env_cache.string());
  const auto attr = run(dir, "--log-level warn attribute" + c + " --seed 4 --cache-dir " + quote((dir / "ignored").string()), env);
  ASSERT_EQ(attr.code, 0) << attr.err;
  const auto summary = nlohmann::json::parse(attr.out);
  EXPECT_EQ(summary["computed"], 6);
  EXPECT_EQ(fs::path(summary["cache"].get<std::string>()), env_cache);
  EXPECT_TRUE(fs::exists(env_cache / "a" / "GC"));
  EXPECT_FALSE(fs::exists(dir / "ignored"));

  const auto eval = run(dir, "evaluate" + c + " --seed 4", env);
  ASSERT_EQ(eval.code, 0) << eval.err;
  EXPECT_TRUE(fs::exists(dir / "run" / "report-GC" / "report.csv"));

  const auto plot = run(dir, "plot" + c);
  ASSERT_EQ(plot.code, 0) << plot.err;
  EXPECT_TRUE(fs::exists(dir / "run" / "report-GC" / "plots" / "grid__p_pred.svg"));

  const auto rep = run(dir, "report" + c + " --output " + quote((dir / "t.md").string()));
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(rep.out, testkit::read_text(dir / "t.md"));
  EXPECT_NE(rep.out.find("| GC "), std::string::npos);

  // Without the env var the cache at output_dir is empty, so evaluate fails cleanly.
  const auto cold = run(dir, "evaluate" + c + " --seed 4");
  EXPECT_EQ(cold.code, 1);
  EXPECT_EQ(error_line(cold.err)["type"], "cache");
}
