#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "harmony/data/dataset.hpp"

namespace harmony {

// Names of the shape classes, in class-index order. The generator uses the
// first `num_classes` of these.
const std::vector<std::string>& shape_class_names();

struct ShapesParams {
  int n = 0;
  int num_classes = 3;
  int side = 16;
  std::uint64_t seed = 0;
  Split split = Split::kAll;
};

// Synthetic desk-scale classification corpus: one class-identifying shape at
// a random position, scale and colour over a noise background. Example i has
// label i % num_classes, so class counts differ by at most one.
Dataset generate_shapes_dataset(const ShapesParams& params);
Dataset generate_shapes_dataset(int n, int num_classes, int side, std::uint64_t seed);

// Tag shared by every dataset the generator produces for a given class count
// and side length, independent of seed and split.
std::string shapes_dataset_tag(int num_classes, int side);

}  // namespace harmony
