#include "harmony/data/dataset.hpp"

#include <unordered_set>

#include "harmony/error.hpp"
#include "harmony/hashing.hpp"

namespace harmony {

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kAll: return "all";
  }
  return "all";
}

Dataset::Dataset(std::vector<LabeledExample> examples, std::vector<std::string> class_names,
                 Split split, std::string tag)
    : examples_(std::move(examples)),
      class_names_(std::move(class_names)),
      split_(split),
      tag_(std::move(tag)) {
  std::unordered_set<std::string> ids;
  ids.reserve(examples_.size());
  for (const auto& ex : examples_) {
    if (ex.label < 0 || ex.label >= num_classes()) {
      throw DatasetError("example '" + ex.id + "' has label " + std::to_string(ex.label) +
                         " outside the " + std::to_string(num_classes()) + " classes");
    }
    if (!ids.insert(ex.id).second) throw DatasetError("duplicate example id '" + ex.id + "'");
    ex.image.validate();
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names_.size(), 0);
  for (const auto& ex : examples_) ++counts[static_cast<std::size_t>(ex.label)];
  return counts;
}

std::size_t Dataset::find(const std::string& id) const {
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    if (examples_[i].id == id) return i;
  }
  return examples_.size();
}

std::pair<Dataset, Dataset> split_by_hash(const Dataset& dataset, double train_ratio,
                                          std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ParameterError("train_ratio must lie in (0,1)");
  }
  std::vector<LabeledExample> train, test;
  for (const auto& ex : dataset) {
    const std::uint64_t h = mix64(fnv1a64(ex.id) ^ seed);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    (u < train_ratio ? train : test).push_back(ex);
  }
  return {Dataset(std::move(train), dataset.class_names(), Split::kTrain, dataset.tag()),
          Dataset(std::move(test), dataset.class_names(), Split::kTest, dataset.tag())};
}

}  // namespace harmony
