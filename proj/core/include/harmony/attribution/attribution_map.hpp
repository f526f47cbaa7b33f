#pragma once

#include <optional>
#include <string>
#include <vector>

namespace harmony {

enum class AttributionMethod { kSS, kGC, kRandom };

const char* to_string(AttributionMethod method);
// Accepts "SS", "GC", "RANDOM" (case-insensitive) and "GM" as an alias of GC.
AttributionMethod parse_method(const std::string& text);

// H×W importance map in [0,1] at the source model's input resolution. A zero
// entry marks a pixel with no role in the classification; larger values mark
// more important pixels. Stored as float32, the on-disk cache precision.
struct AttributionMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
  std::string image_id;
  std::string source_model_id;
  AttributionMethod method = AttributionMethod::kSS;
  std::string config_hash;

  static AttributionMap filled(int height, int width, float value);

  float at(int h, int w) const { return values[static_cast<std::size_t>(h) * width + w]; }
  double mean() const;
  // Throws ParameterError unless values has height*width finite entries in [0,1].
  void validate() const;
};

}  // namespace harmony
