#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "harmony/data/image.hpp"

namespace harmony {

struct LabeledExample {
  ImageTensor image;
  int label = 0;
  std::string id;
};

enum class Split { kTrain, kTest, kAll };

const char* to_string(Split split);

// Immutable labeled image collection. `tag()` identifies the data
// distribution the examples were drawn from; models trained on the same
// distribution carry the same tag in their manifests.
class Dataset {
 public:
  Dataset() = default;
  // Validates label range, id uniqueness and image ranges.
  Dataset(std::vector<LabeledExample> examples, std::vector<std::string> class_names, Split split,
          std::string tag);

  const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
  const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  int num_classes() const noexcept { return static_cast<int>(class_names_.size()); }
  Split split() const noexcept { return split_; }
  const std::string& tag() const noexcept { return tag_; }

  std::vector<std::size_t> class_counts() const;
  // Index of the example with the given id, or size() if absent.
  std::size_t find(const std::string& id) const;

  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

 private:
  std::vector<LabeledExample> examples_;
  std::vector<std::string> class_names_;
  Split split_ = Split::kAll;
  std::string tag_;
};

// Deterministic split by hashing example ids: an example goes to train when
// its (seeded) hash falls below `train_ratio`. Order within each part follows
// the input order.
std::pair<Dataset, Dataset> split_by_hash(const Dataset& dataset, double train_ratio,
                                          std::uint64_t seed);

}  // namespace harmony
