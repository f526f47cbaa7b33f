#include "harmony/pipeline/commands.hpp"

#include <cctype>
#include <map>

#include <spdlog/spdlog.h>

#include "../file_util.hpp"
#include "harmony/attribution/cache.hpp"
#include "harmony/data/image_io.hpp"
#include "harmony/error.hpp"
#include "harmony/features/extract.hpp"
#include "harmony/model/weights.hpp"
#include "harmony/model/zoo.hpp"
#include "harmony/pipeline/plot.hpp"
#include "harmony/transfer/protocol.hpp"

namespace harmony {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return out;
}

const std::string& require_source(const RunConfig& config) {
  if (config.source.empty()) throw ConfigError("no source model configured");
  return config.source;
}

AttributionOptions attribution_options(const RunConfig& config, const Dataset* baselines) {
  AttributionOptions o;
  o.ss = config.effective_ss();
  o.gc_layer = config.gc_layer;
  o.random_seed = config.random_seed();
  o.baselines = baselines;
  o.jobs = config.jobs;
  return o;
}

}  // namespace

ClassifierAdapter load_model(const RunConfig& config, const std::string& id) {
  const ModelSpec& spec = config.model(id);
  const fs::path path = config.weights_path(spec);
  if (!fs::exists(path)) {
    throw IoError("weights for model '" + id + "' not found at " + path.string() + " (run `harmony train` first)");
  }
  ClassifierAdapter adapter = load_weights(path);
  if (adapter.manifest().variant != spec.variant) {
    throw ModelError("weights at " + path.string() + " hold variant '" + adapter.manifest().variant +
                     "' but model '" + id + "' is configured as '" + spec.variant + "'");
  }
  adapter.mutable_manifest().model_id = id;
  return adapter;
}

json cmd_train(const RunConfig& config) {
  config.validate();
  if (config.models.empty()) throw ConfigError("no models configured");
  const InputSpec spec = toy_input_spec(config.dataset.channels, config.dataset.side);

  // Build every architecture before any training so bad specs fail fast.
  std::vector<ClassifierAdapter> models;
  auto [train_set, test_set] = load_splits(config);
  for (const auto& m : config.models) {
    ModelManifest manifest;
    manifest.model_id = m.id;
    manifest.variant = m.variant;
    manifest.input_spec = spec;
    manifest.num_classes = train_set.num_classes();
    manifest.seed = config.model_seed(m);
    manifest.patch = m.variant == "vit-tiny" ? m.patch : 0;
    models.push_back(build_from_manifest(manifest));
  }

  fs::create_directories(config.output_dir);
  std::string history = "model_id,epoch,loss,train_accuracy\n";
  json summary = json::array();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const ModelSpec& m = config.models[i];
    ClassifierAdapter& adapter = models[i];
    TrainConfig tc = m.train;
    tc.seed = config.train_seed(m);
    spdlog::info("training {} ({}, {} parameters) for {} epochs", m.id, m.variant,
                 adapter.network().parameter_count(), tc.epochs);
    TrainHistory h;
    try {
      h = train(adapter, train_set, tc);
    } catch (const TrainingError& e) {
      throw TrainingError("model '" + m.id + "' diverged: " + e.what(), e.epoch());
    }
    for (const auto& e : h.epochs) {
      history += m.id + "," + std::to_string(e.epoch) + "," + detail::format_double("%.10g", e.loss) + "," +
                 detail::format_double("%.10g", e.train_accuracy) + "\n";
    }
    const EvalRecord test = evaluate(adapter, test_set, InputMode::kImage, {}, config.evaluation.f1_averaging,
                                     config.evaluation.batch_size);
    const fs::path path = config.weights_path(m);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_weights(adapter, path);
    spdlog::info("{}: test accuracy {:.4f}, weights {}", m.id, test.accuracy, path.string());
    summary.push_back({{"id", m.id}, {"weights", path.string()}, {"test_accuracy", test.accuracy}});
  }
  detail::write_file_atomic(fs::path(config.output_dir) / "history.csv", history);
  return {{"command", "train"}, {"models", summary}};
}

json cmd_attribute(const RunConfig& config, bool keep_going) {
  config.validate();
  ClassifierAdapter source = load_model(config, require_source(config));
  auto [train_set, test_set] = load_splits(config);
  AttributionOptions options = attribution_options(config, &train_set);
  options.keep_going = keep_going;
  AttributionCache cache(config.cache_root());
  const AttributionRun run = attribute_dataset(source, test_set, config.method, options, &cache);
  json failures = json::array();
  for (const auto& [id, message] : run.failures) failures.push_back({{"image_id", id}, {"message", message}});
  return {{"command", "attribute"},
          {"source", source.model_id()},
          {"method", to_string(config.method)},
          {"config_hash", method_config_hash(config.method, options, source)},
          {"cache", config.cache_root().string()},
          {"images", test_set.size()},
          {"cache_hits", run.cache_hits},
          {"computed", run.computed},
          {"failures", failures}};
}

json cmd_evaluate(const RunConfig& config) {
  config.validate();
  ClassifierAdapter source = load_model(config, require_source(config));
  std::vector<ClassifierAdapter> targets;
  for (const auto& t : config.targets) targets.push_back(load_model(config, t));
  auto [train_set, test_set] = load_splits(config);

  ProtocolOptions options;
  options.attribution = attribution_options(config, &train_set);
  options.attribution.cache_only = true;
  options.binarize = config.evaluation.binarize;
  options.threshold = config.evaluation.threshold;
  options.f1_averaging = config.evaluation.f1_averaging;
  options.bins = config.evaluation.bins;
  options.identity_masks = config.evaluation.identity_masks;
  options.config = to_json(config);

  AttributionCache cache(config.cache_root());
  const TransferReport report =
      run_transfer_protocol(source, targets, config.method, test_set, options, &cache);
  write_report(report, config.report_path());

  json rows = json::array();
  for (const auto& e : report.entries) {
    rows.push_back({{"target_model", e.record.target_model_id},
                    {"input_mode", to_string(e.record.mode)},
                    {"accuracy", e.record.accuracy},
                    {"f1", e.record.f1}});
  }
  return {{"command", "evaluate"},
          {"report_dir", config.report_path().string()},
          {"mean_mask_area", report.mean_mask_area},
          {"records", rows}};
}

json cmd_plot(const fs::path& report_dir, const std::optional<fs::path>& out_dir, const RunConfig* config) {
  const fs::path report_file = report_dir / "report.json";
  if (!fs::exists(report_file)) throw IoError("missing inputs: " + report_file.string());
  const TransferReport report = read_report_json(report_file);
  if (report.entries.empty()) throw EvaluationError("report " + report_file.string() + " is empty");

  const fs::path dir = out_dir ? *out_dir : report_dir / "plots";
  std::map<fs::path, std::string> svgs;
  std::vector<PanelSpec> panels;
  std::vector<std::string> missing;
  for (const auto& e : report.entries) {
    if (e.p_pred.bins() < 1) {
      missing.push_back(record_stem(e) + " histogram");
      continue;
    }
    const std::string title = e.record.target_model_id + " (" + to_string(e.record.mode) + ")";
    svgs[dir / (record_stem(e) + "__p_pred.svg")] = histogram_svg(e.p_pred, title);
    panels.push_back({title, e.p_pred});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IoError("missing inputs: " + list);
  }
  svgs[dir / "grid__p_pred.svg"] = histogram_grid_svg(panels, static_cast<int>(panels.size()));

  // Triptychs need the dataset and the cached maps; gather them before
  // writing anything.
  std::vector<std::pair<fs::path, ImageTensor>> pngs;
  if (config && config->triptychs > 0) {
    ClassifierAdapter source = load_model(*config, require_source(*config));
    auto splits = load_splits(*config);
    const Dataset& test_set = splits.second;
    AttributionCache cache(config->cache_root());
    const AttributionOptions options = attribution_options(*config, &splits.first);
    const std::string hash = method_config_hash(config->method, options, source);
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(config->triptychs), test_set.size());
    for (std::size_t i = 0; i < n; ++i) {
      const LabeledExample& ex = test_set[i];
      const auto map = cache.get({ex.id, source.model_id(), config->method, hash});
      if (!map) {
        missing.push_back(ex.id);
        continue;
      }
      const AttributionMap m = resize_map(*map, ex.image.height(), ex.image.width());
      const FeatureInput f =
          extract_features(ex.image, m, config->evaluation.binarize, config->evaluation.threshold);
      pngs.emplace_back(dir / ("triptych__" + sanitize(ex.id) + ".png"), triptych(ex.image, m.values, f.data));
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw CacheError("missing inputs: no cached attribution for " + list);
    }
  }

  json files = json::array();
  for (const auto& [path, text] : svgs) {
    detail::write_file_atomic(path, text);
    files.push_back(path.string());
  }
  for (const auto& [path, image] : pngs) {
    write_png(path, image);
    files.push_back(path.string());
  }
  return {{"command", "plot"}, {"files", files}};
}

json cmd_report(const std::vector<fs::path>& reports, const std::optional<fs::path>& output) {
  if (reports.empty()) throw ConfigError("no report files given");
  std::vector<std::string> missing;
  for (const auto& p : reports) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IoError("missing inputs: " + list);
  }
  std::vector<TransferReport> loaded;
  for (const auto& p : reports) loaded.push_back(read_report_json(p));
  const std::string table = render_table(loaded);
  if (output) detail::write_file_atomic(*output, table);
  json j = {{"command", "report"}, {"table", table}};
  if (output) j["output"] = output->string();
  return j;
}

}  // namespace harmony
