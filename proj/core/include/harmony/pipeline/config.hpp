#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmony/attribution/attribution_map.hpp"
#include "harmony/attribution/soundness.hpp"
#include "harmony/data/dataset.hpp"
#include "harmony/model/train.hpp"
#include "harmony/transfer/metrics.hpp"

namespace harmony {

struct DatasetSpec {
  std::string kind = "shapes";  // shapes | folder
  // shapes
  int num_classes = 3;
  int side = 16;
  int channels = 3;
  int train_n = 6000;
  int test_n = 1200;
  // folder
  std::string root;
  std::string manifest;  // optional, relative to root unless absolute
  double train_ratio = 0.8;
  std::string tag;       // optional override of the folder dataset tag

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct ModelSpec {
  std::string id;
  std::string variant;
  std::string weights;  // empty: <output_dir>/models/<id>.hwt
  int patch = 4;        // vit-tiny
  std::optional<std::uint64_t> seed;  // init seed; derived from the root seed when absent
  TrainConfig train;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct EvaluationSpec {
  bool binarize = false;
  double threshold = 0.5;
  F1Averaging f1_averaging = F1Averaging::kMacro;
  int bins = 10;
  bool identity_masks = false;
  int batch_size = 64;

  friend bool operator==(const EvaluationSpec&, const EvaluationSpec&) = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::string cache_dir;   // empty: <output_dir>/cache
  std::string report_dir;  // empty: <output_dir>/report-<method>
  DatasetSpec dataset;
  std::vector<ModelSpec> models;
  std::string source;
  std::vector<std::string> targets;
  AttributionMethod method = AttributionMethod::kSS;
  SSConfig ss;
  bool ss_seed_set = false;  // ss.seed given explicitly; otherwise derived from `seed`
  std::string gc_layer;
  EvaluationSpec evaluation;
  int jobs = 1;
  int triptychs = 0;  // Fig.-1-style PNGs written by `plot`

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  // Throws ConfigError on dangling model references, unknown variants and
  // out-of-range options.
  void validate() const;

  const ModelSpec& model(const std::string& id) const;
  std::filesystem::path weights_path(const ModelSpec& spec) const;
  std::filesystem::path cache_root() const;  // honours HARMONY_CACHE_DIR
  std::filesystem::path report_path() const;
  SSConfig effective_ss() const;
  std::uint64_t model_seed(const ModelSpec& spec) const;
  std::uint64_t train_seed(const ModelSpec& spec) const;
  std::uint64_t random_seed() const;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

// Reads a config file, applies `key.path=value` overrides to scalar keys and
// parses the result. Values are read as JSON when they parse (numbers,
// booleans, quoted strings) and as bare strings otherwise.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
void apply_override(nlohmann::json& j, const std::string& assignment);

// Train and test splits described by the dataset spec.
std::pair<Dataset, Dataset> load_splits(const RunConfig& config);

}  // namespace harmony
