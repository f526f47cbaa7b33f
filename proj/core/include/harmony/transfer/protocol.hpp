#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmony/attribution/cache.hpp"
#include "harmony/attribution/soundness.hpp"
#include "harmony/data/dataset.hpp"
#include "harmony/transfer/report.hpp"

namespace harmony {

struct AttributionOptions {
  SSConfig ss;
  std::string gc_layer;        // empty: the source's default layer
  std::uint64_t random_seed = 0;
  const Dataset* baselines = nullptr;  // SS baseline pool; defaults to the attributed dataset
  int jobs = 1;                // concurrent attribution streams
  bool keep_going = false;     // record per-image failures instead of aborting
  bool cache_only = false;     // never compute; missing entries are an error
};

struct AttributionRun {
  std::vector<std::optional<AttributionMap>> maps;  // dataset order
  std::size_t cache_hits = 0;
  std::size_t computed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (image id, message)
};

// Cache key hash for a method under the given options and source model.
std::string method_config_hash(AttributionMethod method, const AttributionOptions& options,
                               ClassifierAdapter& source);

// Attributions for every example of `dataset`, read from `cache` when present
// and written back when computed. RANDOM maps match the mass of the SS map of
// the same image. Streams use independent copies of `source`.
AttributionRun attribute_dataset(ClassifierAdapter& source, const Dataset& dataset,
                                 AttributionMethod method, const AttributionOptions& options,
                                 AttributionCache* cache);

struct ProtocolOptions {
  AttributionOptions attribution;
  bool binarize = false;
  double threshold = 0.5;
  F1Averaging f1_averaging = F1Averaging::kMacro;
  int bins = 10;
  bool identity_masks = false;  // debug: all-ones masks instead of attributions
  nlohmann::json config = nlohmann::json::object();  // snapshot stored in the report
};

// Attributes the dataset on the source, extracts features once, evaluates the
// source and every target on images (I) and features (F), and assembles the
// report. All models and the dataset must share one dataset tag. Nothing is
// returned unless every record was produced.
TransferReport run_transfer_protocol(ClassifierAdapter& source, std::vector<ClassifierAdapter>& targets,
                                     AttributionMethod method, const Dataset& dataset,
                                     const ProtocolOptions& options, AttributionCache* cache = nullptr);

}  // namespace harmony
