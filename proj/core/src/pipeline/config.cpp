#include "harmony/pipeline/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "../file_util.hpp"
#include "harmony/attribution/cache.hpp"
#include "harmony/data/image_folder.hpp"
#include "harmony/data/shapes.hpp"
#include "harmony/error.hpp"
#include "harmony/hashing.hpp"
#include "harmony/model/zoo.hpp"

namespace harmony {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},     {"batch_size", t.batch_size}, {"step_size", t.step_size},
          {"momentum", t.momentum}, {"optimizer", t.optimizer}};
}

TrainConfig train_from_json(const json& j) {
  check_keys(j, "train", {"epochs", "batch_size", "step_size", "momentum", "optimizer"});
  TrainConfig d, t;
  t.epochs = j.value("epochs", d.epochs);
  t.batch_size = j.value("batch_size", d.batch_size);
  t.step_size = j.value("step_size", d.step_size);
  t.momentum = j.value("momentum", d.momentum);
  t.optimizer = j.value("optimizer", d.optimizer);
  return t;
}

}  // namespace

json to_json(const RunConfig& c) {
  json dataset;
  if (c.dataset.kind == "folder") {
    dataset = {{"kind", "folder"},           {"root", c.dataset.root},
               {"manifest", c.dataset.manifest}, {"train_ratio", c.dataset.train_ratio},
               {"tag", c.dataset.tag},       {"side", c.dataset.side},
               {"channels", c.dataset.channels}};
  } else {
    dataset = {{"kind", c.dataset.kind},       {"num_classes", c.dataset.num_classes},
               {"side", c.dataset.side},       {"channels", c.dataset.channels},
               {"train_n", c.dataset.train_n}, {"test_n", c.dataset.test_n}};
  }
  json models = json::array();
  for (const auto& m : c.models) {
    json mj = {{"id", m.id},
               {"variant", m.variant},
               {"weights", m.weights},
               {"patch", m.patch},
               {"train", train_to_json(m.train)}};
    if (m.seed) mj["seed"] = *m.seed;
    models.push_back(mj);
  }
  json ss = c.ss;
  if (!c.ss_seed_set) ss.erase("seed");
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"cache_dir", c.cache_dir},
          {"report_dir", c.report_dir},
          {"dataset", dataset},
          {"models", models},
          {"source", c.source},
          {"targets", c.targets},
          {"method", to_string(c.method)},
          {"ss", ss},
          {"gc_layer", c.gc_layer},
          {"evaluation",
           {{"binarize", c.evaluation.binarize},
            {"threshold", c.evaluation.threshold},
            {"f1_averaging", to_string(c.evaluation.f1_averaging)},
            {"bins", c.evaluation.bins},
            {"identity_masks", c.evaluation.identity_masks},
            {"batch_size", c.evaluation.batch_size}}},
          {"jobs", c.jobs},
          {"triptychs", c.triptychs}};
}

RunConfig run_config_from_json(const json& j) {
  try {
    check_keys(j, "config",
               {"seed", "output_dir", "cache_dir", "report_dir", "dataset", "models", "source",
                "targets", "method", "ss", "gc_layer", "evaluation", "jobs", "triptychs"});
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.report_dir = j.value("report_dir", c.report_dir);
    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      check_keys(d, "dataset",
                 {"kind", "num_classes", "side", "channels", "train_n", "test_n", "root", "manifest",
                  "train_ratio", "tag"});
      DatasetSpec& s = c.dataset;
      s.kind = d.value("kind", s.kind);
      s.num_classes = d.value("num_classes", s.num_classes);
      s.side = d.value("side", s.side);
      s.channels = d.value("channels", s.channels);
      s.train_n = d.value("train_n", s.train_n);
      s.test_n = d.value("test_n", s.test_n);
      s.root = d.value("root", s.root);
      s.manifest = d.value("manifest", s.manifest);
      s.train_ratio = d.value("train_ratio", s.train_ratio);
      s.tag = d.value("tag", s.tag);
    }
    for (const auto& mj : j.value("models", json::array())) {
      check_keys(mj, "models[]", {"id", "variant", "weights", "patch", "seed", "train"});
      ModelSpec m;
      m.id = mj.at("id").get<std::string>();
      m.variant = mj.value("variant", m.id);
      m.weights = mj.value("weights", m.weights);
      m.patch = mj.value("patch", m.patch);
      if (mj.contains("seed")) m.seed = mj["seed"].get<std::uint64_t>();
      if (mj.contains("train")) m.train = train_from_json(mj["train"]);
      c.models.push_back(std::move(m));
    }
    c.source = j.value("source", c.source);
    c.targets = j.value("targets", c.targets);
    c.method = parse_method(j.value("method", std::string(to_string(c.method))));
    if (j.contains("ss")) {
      check_keys(j["ss"], "ss",
                 {"steps", "step_size", "baselines_per_step", "sparsity_weight", "tv_weight",
                  "objective_mode", "mask_init", "seed", "mask_grid", "resample_baselines"});
      c.ss = j["ss"].get<SSConfig>();
      c.ss_seed_set = j["ss"].contains("seed");
    }
    c.gc_layer = j.value("gc_layer", c.gc_layer);
    if (j.contains("evaluation")) {
      const json& e = j["evaluation"];
      check_keys(e, "evaluation",
                 {"binarize", "threshold", "f1_averaging", "bins", "identity_masks", "batch_size"});
      EvaluationSpec& s = c.evaluation;
      s.binarize = e.value("binarize", s.binarize);
      s.threshold = e.value("threshold", s.threshold);
      s.f1_averaging = parse_f1_averaging(e.value("f1_averaging", std::string(to_string(s.f1_averaging))));
      s.bins = e.value("bins", s.bins);
      s.identity_masks = e.value("identity_masks", s.identity_masks);
      s.batch_size = e.value("batch_size", s.batch_size);
    }
    c.jobs = j.value("jobs", c.jobs);
    c.triptychs = j.value("triptychs", c.triptychs);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

void RunConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (dataset.kind == "shapes") {
    if (dataset.num_classes < 2 || dataset.num_classes > 10) throw ConfigError("dataset.num_classes must be in 2..10");
    if (dataset.side < 16) throw ConfigError("dataset.side must be at least 16");
    if (dataset.train_n < dataset.num_classes || dataset.test_n < dataset.num_classes) {
      throw ConfigError("dataset.train_n and test_n must each cover every class");
    }
  } else if (dataset.kind == "folder") {
    if (dataset.root.empty()) throw ConfigError("dataset.root is required for folder datasets");
    if (!(dataset.train_ratio > 0.0 && dataset.train_ratio < 1.0)) {
      throw ConfigError("dataset.train_ratio must lie in (0,1)");
    }
  } else {
    throw ConfigError("dataset.kind must be 'shapes' or 'folder', got '" + dataset.kind + "'");
  }
  if (dataset.channels != 1 && dataset.channels != 3) throw ConfigError("dataset.channels must be 1 or 3");
  std::set<std::string> ids;
  for (const auto& m : models) {
    if (m.id.empty()) throw ConfigError("model id must not be empty");
    if (!ids.insert(m.id).second) throw ConfigError("duplicate model id '" + m.id + "'");
    if (!is_known_variant(m.variant)) {
      std::string known;
      for (const auto& v : known_variants()) known += (known.empty() ? "" : ", ") + v;
      throw ConfigError("model '" + m.id + "' has unknown variant '" + m.variant + "' (known: " + known + ")");
    }
    try {
      m.train.validate();
    } catch (const ParameterError& e) {
      throw ConfigError("model '" + m.id + "': " + e.what());
    }
  }
  auto check_ref = [&](const std::string& id, const char* role) {
    if (!ids.count(id)) throw ConfigError(std::string(role) + " '" + id + "' is not among the configured models");
  };
  if (!source.empty()) check_ref(source, "source model");
  for (const auto& t : targets) check_ref(t, "target model");
  try {
    ss.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (evaluation.bins < 2) throw ConfigError("evaluation.bins must be at least 2");
  if (!(evaluation.threshold >= 0.0 && evaluation.threshold <= 1.0)) {
    throw ConfigError("evaluation.threshold must lie in [0,1]");
  }
  if (evaluation.batch_size < 1) throw ConfigError("evaluation.batch_size must be positive");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (triptychs < 0) throw ConfigError("triptychs must be >= 0");
}

const ModelSpec& RunConfig::model(const std::string& id) const {
  for (const auto& m : models) {
    if (m.id == id) return m;
  }
  throw ConfigError("model '" + id + "' is not configured");
}

std::filesystem::path RunConfig::weights_path(const ModelSpec& spec) const {
  if (!spec.weights.empty()) return spec.weights;
  return std::filesystem::path(output_dir) / "models" / (spec.id + ".hwt");
}

std::filesystem::path RunConfig::cache_root() const {
  if (const char* env = std::getenv(kCacheRootEnv); env && *env) return env;
  if (!cache_dir.empty()) return cache_dir;
  return std::filesystem::path(output_dir) / "cache";
}

std::filesystem::path RunConfig::report_path() const {
  if (!report_dir.empty()) return report_dir;
  return std::filesystem::path(output_dir) / (std::string("report-") + to_string(method));
}

SSConfig RunConfig::effective_ss() const {
  SSConfig s = ss;
  if (!ss_seed_set) s.seed = derive_seed(seed, "ss");
  return s;
}

std::uint64_t RunConfig::model_seed(const ModelSpec& spec) const {
  return spec.seed ? *spec.seed : derive_seed(seed, "init/" + spec.id);
}

std::uint64_t RunConfig::train_seed(const ModelSpec& spec) const {
  return derive_seed(seed, "train/" + spec.id);
}

std::uint64_t RunConfig::random_seed() const { return derive_seed(seed, "random"); }

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  if (value.is_object() || value.is_array()) {
    throw ConfigError("override '" + path + "' must be a scalar");
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override key '" + path + "' is malformed");
    json* child = nullptr;
    if (node->is_array()) {
      if (key.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("override key '" + path + "' indexes a list with '" + key + "'");
      }
      const std::size_t index = std::stoul(key);
      if (index >= node->size()) throw ConfigError("override key '" + path + "' is out of range");
      child = &(*node)[index];
    } else if (node->is_object()) {
      child = &(*node)[key];
    } else {
      throw ConfigError("override key '" + path + "' does not address an object");
    }
    if (dot == std::string::npos) {
      if (child->is_object() || child->is_array()) {
        throw ConfigError("override key '" + path + "' addresses a non-scalar");
      }
      *child = value;
      return;
    }
    if (child->is_null()) *child = json::object();
    node = child;
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const IoError&) {
    throw ConfigError("cannot read config " + path.string());
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  RunConfig c = run_config_from_json(j);
  c.validate();
  return c;
}

std::pair<Dataset, Dataset> load_splits(const RunConfig& config) {
  const DatasetSpec& d = config.dataset;
  if (d.kind == "folder") {
    std::optional<std::filesystem::path> manifest;
    if (!d.manifest.empty()) {
      std::filesystem::path m = d.manifest;
      manifest = m.is_absolute() ? m : std::filesystem::path(d.root) / m;
    }
    const Dataset all = load_image_folder(d.root, manifest, d.tag);
    return split_by_hash(all, d.train_ratio, derive_seed(config.seed, "data/split"));
  }
  ShapesParams p;
  p.num_classes = d.num_classes;
  p.side = d.side;
  p.n = d.train_n;
  p.seed = derive_seed(config.seed, "data/train");
  p.split = Split::kTrain;
  Dataset train = generate_shapes_dataset(p);
  p.n = d.test_n;
  p.seed = derive_seed(config.seed, "data/test");
  p.split = Split::kTest;
  return {std::move(train), generate_shapes_dataset(p)};
}

}  // namespace harmony
