#include "harmony/attribution/attribution_map.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "harmony/error.hpp"

namespace harmony {

const char* to_string(AttributionMethod method) {
  switch (method) {
    case AttributionMethod::kSS: return "SS";
    case AttributionMethod::kGC: return "GC";
    case AttributionMethod::kRandom: return "RANDOM";
  }
  return "SS";
}

AttributionMethod parse_method(const std::string& text) {
  std::string up = text;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "SS") return AttributionMethod::kSS;
  if (up == "GC" || up == "GM" || up == "GRADCAM" || up == "GRAD-CAM") return AttributionMethod::kGC;
  if (up == "RANDOM") return AttributionMethod::kRandom;
  throw ParameterError("unknown attribution method '" + text + "' (expected SS, GC or RANDOM)");
}

AttributionMap AttributionMap::filled(int height, int width, float value) {
  AttributionMap m;
  m.height = height;
  m.width = width;
  m.values.assign(static_cast<std::size_t>(height) * width, value);
  return m;
}

double AttributionMap::mean() const {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (float v : values) s += v;
  return s / static_cast<double>(values.size());
}

void AttributionMap::validate() const {
  if (height <= 0 || width <= 0 || values.size() != static_cast<std::size_t>(height) * width) {
    throw ParameterError("attribution map size does not match its shape");
  }
  for (float v : values) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw ParameterError("attribution map value outside [0,1]");
    }
  }
}

}  // namespace harmony
