#include "harmony/data/image.hpp"

#include <algorithm>
#include <cmath>

#include "harmony/error.hpp"

namespace harmony {

ImageTensor::ImageTensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ParameterError("image dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

ImageTensor::ImageTensor(int channels, int height, int width, std::vector<double> values)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ParameterError("image dimensions must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(channels) * height * width) {
    throw ParameterError("image value count does not match C*H*W");
  }
}

void ImageTensor::validate() const {
  if (channels_ != 1 && channels_ != 3) {
    throw ParameterError("image must have 1 or 3 channels, got " + std::to_string(channels_));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ParameterError("image value outside [0,1]: " + std::to_string(v));
    }
  }
}

double ImageTensor::min_value() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double ImageTensor::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

}  // namespace harmony
