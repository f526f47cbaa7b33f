#include "harmony/transfer/protocol.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "harmony/attribution/grad_cam.hpp"
#include "harmony/attribution/random_mask.hpp"
#include "harmony/error.hpp"
#include "harmony/features/extract.hpp"
#include "harmony/hashing.hpp"

namespace harmony {

namespace {

// Runs fn(stream, index) for index in [0, n) over `jobs` threads, index
// striped by stream. Rethrows the first exception.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const int streams = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (streams == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(0, i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::atomic<bool> stop{false};
  std::vector<std::thread> threads;
  for (int s = 0; s < streams; ++s) {
    threads.emplace_back([&, s] {
      try {
        for (std::size_t i = static_cast<std::size_t>(s); i < n && !stop; i += streams) fn(s, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::string join_ids(const std::vector<std::string>& ids, std::size_t limit = 20) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > limit) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

std::string method_config_hash(AttributionMethod method, const AttributionOptions& options,
                               ClassifierAdapter& source) {
  switch (method) {
    case AttributionMethod::kSS:
      return options.ss.hash();
    case AttributionMethod::kGC:
      return grad_cam_config_hash(options.gc_layer.empty() ? source.default_cam_layer()
                                                           : options.gc_layer);
    case AttributionMethod::kRandom:
      return random_config_hash(options.ss.hash(), options.random_seed);
  }
  return {};
}

AttributionRun attribute_dataset(ClassifierAdapter& source, const Dataset& dataset,
                                 AttributionMethod method, const AttributionOptions& options,
                                 AttributionCache* cache) {
  if (dataset.empty()) throw ParameterError("no images to attribute");
  std::string layer;
  if (method == AttributionMethod::kGC) {
    layer = options.gc_layer.empty() ? source.default_cam_layer() : options.gc_layer;
    source.activation(layer);  // fails early, listing the published layers
  } else {
    options.ss.validate();
  }
  const std::string hash = method_config_hash(method, options, source);
  const std::string ss_hash = options.ss.hash();

  std::optional<CompositeSampler> sampler;
  if (method != AttributionMethod::kGC && !options.cache_only) {
    sampler.emplace(options.baselines ? *options.baselines : dataset, source.input_spec());
  }
  nlohmann::json params;
  if (method == AttributionMethod::kGC) {
    params = {{"layer", layer}};
  } else {
    params = {{"ss", options.ss}};
    if (method == AttributionMethod::kRandom) params["random_seed"] = options.random_seed;
  }

  const int streams = std::max(1, std::min<int>(options.jobs, static_cast<int>(dataset.size())));
  std::vector<ClassifierAdapter> adapters;
  for (int s = 1; s < streams; ++s) adapters.push_back(source);
  auto adapter_for = [&](int s) -> ClassifierAdapter& { return s == 0 ? source : adapters[s - 1]; };

  AttributionRun run;
  run.maps.resize(dataset.size());
  std::mutex mutex;
  std::vector<std::string> missing;

  auto lookup = [&](const CacheKey& key) -> std::optional<AttributionMap> {
    if (!cache) return std::nullopt;
    return cache->get(key);
  };

  parallel_for(dataset.size(), streams, [&](int s, std::size_t i) {
    const LabeledExample& ex = dataset[i];
    const CacheKey key{ex.id, source.model_id(), method, hash};
    std::optional<AttributionMap> map = lookup(key);
    bool computed = false;
    if (!map && options.cache_only) {
      std::lock_guard lock(mutex);
      missing.push_back(ex.id);
      return;
    }
    try {
      if (!map) {
        ClassifierAdapter& adapter = adapter_for(s);
        if (method == AttributionMethod::kGC) {
          map = grad_cam(adapter, ex, layer);
        } else {
          const CacheKey ss_key{ex.id, source.model_id(), AttributionMethod::kSS, ss_hash};
          std::optional<AttributionMap> ss = lookup(ss_key);
          if (!ss) {
            ss = optimize_ss_mask(adapter, ex, *sampler, options.ss).map;
            if (cache) cache->put(*ss, {{"ss", options.ss}});
          }
          if (method == AttributionMethod::kSS) {
            map = std::move(*ss);
          } else {
            map = random_mask_like(*ss, derive_seed(options.random_seed, "random/" + ex.id));
            map->config_hash = hash;
          }
        }
        if (cache && !(method == AttributionMethod::kSS)) cache->put(*map, params);
        computed = true;
      }
    } catch (const Error& e) {
      if (!options.keep_going) {
        throw Error(e.kind(), "attribution failed for '" + ex.id + "': " + e.what());
      }
      std::lock_guard lock(mutex);
      run.failures.emplace_back(ex.id, e.what());
      spdlog::warn("attribution failed for '{}': {}", ex.id, e.what());
      return;
    }
    std::lock_guard lock(mutex);
    run.maps[i] = std::move(map);
    (computed ? run.computed : run.cache_hits) += 1;
  });

  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw CacheError("attribution cache for " + source.model_id() + "/" + to_string(method) + "/" +
                     hash + " lacks " + std::to_string(missing.size()) + " image(s): " +
                     join_ids(missing));
  }
  spdlog::info("{} {} attributions: {} cache hit(s), {} computed{}", source.model_id(),
               to_string(method), run.cache_hits, run.computed,
               run.computed == 0 ? " (all hit)" : "");
  return run;
}

TransferReport run_transfer_protocol(ClassifierAdapter& source, std::vector<ClassifierAdapter>& targets,
                                     AttributionMethod method, const Dataset& dataset,
                                     const ProtocolOptions& options, AttributionCache* cache) {
  if (options.bins < 2) throw ParameterError("histograms need at least 2 bins");
  if (!(options.threshold >= 0.0 && options.threshold <= 1.0)) {
    throw ParameterError("binarize threshold must lie in [0,1]");
  }
  const std::string& tag = source.manifest().dataset_tag;
  auto check_tag = [&](const std::string& who, const std::string& other) {
    if (other != tag) {
      throw EvaluationError("dataset tag mismatch: source '" + source.model_id() + "' has '" + tag +
                            "' but " + who + " has '" + other + "'");
    }
  };
  for (const auto& t : targets) check_tag("target '" + t.model_id() + "'", t.manifest().dataset_tag);
  check_tag("the evaluation dataset", dataset.tag());

  std::vector<AttributionMap> maps;
  maps.reserve(dataset.size());
  if (options.identity_masks) {
    for (const auto& ex : dataset) {
      AttributionMap m = AttributionMap::filled(ex.image.height(), ex.image.width(), 1.0f);
      m.image_id = ex.id;
      m.source_model_id = source.model_id();
      m.method = method;
      m.config_hash = "identity";
      maps.push_back(std::move(m));
    }
  } else {
    AttributionOptions attribution = options.attribution;
    attribution.keep_going = false;
    AttributionRun run = attribute_dataset(source, dataset, method, attribution, cache);
    for (auto& m : run.maps) maps.push_back(std::move(*m));
  }

  FeatureSet features;
  double area = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ImageTensor& x = dataset[i].image;
    const AttributionMap m = resize_map(maps[i], x.height(), x.width());
    area += options.binarize
                ? static_cast<double>(std::count_if(m.values.begin(), m.values.end(),
                                                    [&](float v) { return v >= options.threshold; })) /
                      static_cast<double>(m.values.size())
                : m.mean();
    features.emplace(dataset[i].id, extract_features(x, m, options.binarize, options.threshold));
  }

  std::vector<ClassifierAdapter*> models{&source};
  for (auto& t : targets) {
    if (t.model_id() != source.model_id()) models.push_back(&t);
  }
  std::vector<EvalRecord> records(models.size() * 2);
  parallel_for(models.size(), options.attribution.jobs, [&](int, std::size_t i) {
    ClassifierAdapter& model = *models[i];
    records[2 * i] = evaluate(model, dataset, InputMode::kImage, {}, options.f1_averaging);
    records[2 * i + 1] = evaluate(model, dataset, InputMode::kFeature, features, options.f1_averaging);
  });

  TransferReport report;
  report.source_model_id = source.model_id();
  report.method = method;
  for (const auto& t : targets) report.targets.push_back(t.model_id());
  report.f1_averaging = options.f1_averaging;
  report.bins = options.bins;
  report.binarized = options.binarize;
  report.mean_mask_area = area / static_cast<double>(dataset.size());
  report.config = options.config;
  for (auto& r : records) {
    ReportEntry e;
    e.source_model_id = source.model_id();
    e.method = method;
    e.p_pred = probability_histogram(r, ProbabilityKind::kPred, options.bins);
    e.p_true = probability_histogram(r, ProbabilityKind::kTrue, options.bins);
    e.record = std::move(r);
    report.entries.push_back(std::move(e));
  }
  report.validate();
  return report;
}

}  // namespace harmony
