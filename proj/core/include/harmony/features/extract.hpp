#pragma once

#include <filesystem>
#include <string>

#include "harmony/attribution/attribution_map.hpp"
#include "harmony/data/image.hpp"

namespace harmony {

struct FeatureProvenance {
  std::string source_model_id;
  AttributionMethod method = AttributionMethod::kSS;
  std::string config_hash;

  friend bool operator==(const FeatureProvenance&, const FeatureProvenance&) = default;
};

// Masked image fed to target models in feature mode. Lives in raw [0,1]
// image space; each target applies its own preprocessing afterwards.
struct FeatureInput {
  ImageTensor data;
  std::string image_id;
  FeatureProvenance provenance;
  bool binarized = false;
};

// Channel c of the result is M ⊙ x_c, with M replaced by 1[M ≥ threshold]
// when `binarize` is set. Throws ParameterError on a spatial shape mismatch.
FeatureInput extract_features(const ImageTensor& x, const AttributionMap& mask, bool binarize = false,
                              double threshold = 0.5);

// Resamples a map to another spatial size (bilinear, clamped to [0,1]).
AttributionMap resize_map(const AttributionMap& map, int height, int width);

// Writes the feature image as an 8-bit PNG.
void export_feature_png(const FeatureInput& feature, const std::filesystem::path& path);

}  // namespace harmony
