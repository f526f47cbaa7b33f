#include "harmony/features/extract.hpp"

#include <algorithm>

#include "harmony/data/image_io.hpp"
#include "harmony/data/preprocess.hpp"
#include "harmony/error.hpp"

namespace harmony {

FeatureInput extract_features(const ImageTensor& x, const AttributionMap& mask, bool binarize,
                              double threshold) {
  if (mask.height != x.height() || mask.width != x.width() ||
      mask.values.size() != x.plane_size()) {
    throw ParameterError("attribution map " + std::to_string(mask.height) + "x" +
                         std::to_string(mask.width) + " does not match image " +
                         std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                         (mask.image_id.empty() ? "" : " for '" + mask.image_id + "'"));
  }
  FeatureInput out;
  out.data = ImageTensor(x.channels(), x.height(), x.width());
  const std::size_t plane = x.plane_size();
  auto src = x.values();
  auto dst = out.data.values();
  for (std::size_t i = 0; i < plane; ++i) {
    const double m = binarize ? (mask.values[i] >= threshold ? 1.0 : 0.0)
                              : static_cast<double>(mask.values[i]);
    for (int c = 0; c < x.channels(); ++c) dst[c * plane + i] = m * src[c * plane + i];
  }
  out.image_id = mask.image_id;
  out.provenance = {mask.source_model_id, mask.method, mask.config_hash};
  out.binarized = binarize;
  return out;
}

AttributionMap resize_map(const AttributionMap& map, int height, int width) {
  if (map.height == height && map.width == width) return map;
  std::vector<double> plane(map.values.begin(), map.values.end());
  const std::vector<double> up = resize_plane(plane, map.height, map.width, height, width);
  AttributionMap out = map;
  out.height = height;
  out.width = width;
  out.values.resize(up.size());
  for (std::size_t i = 0; i < up.size(); ++i) {
    out.values[i] = static_cast<float>(std::clamp(up[i], 0.0, 1.0));
  }
  return out;
}

void export_feature_png(const FeatureInput& feature, const std::filesystem::path& path) {
  write_png(path, feature.data);
}

}  // namespace harmony
