#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "harmony/data/dataset.hpp"
#include "harmony/model/adapter.hpp"

namespace harmony {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double step_size = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::string optimizer = "sgd-momentum";  // sgd-momentum | sgd | adam

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;            // mean cross-entropy over the epoch
  double train_accuracy = 0.0;  // running accuracy on the training batches
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// Mini-batch cross-entropy training. Images are fitted to the adapter's input
// geometry once up front; batches are drawn from a per-epoch shuffle seeded
// by `config.seed`. Throws TrainingError naming the epoch on a non-finite
// loss. The adapter's manifest dataset tag is set to the dataset's tag.
TrainHistory train(ClassifierAdapter& adapter, const Dataset& train_set, const TrainConfig& config);

}  // namespace harmony
