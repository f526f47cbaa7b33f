#pragma once

#include <span>
#include <vector>

namespace harmony {

// C×H×W image with values in [0,1]. Channel-major storage.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, double fill = 0.0);
  ImageTensor(int channels, int height, int width, std::vector<double> values);

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return values_.size(); }

  double& at(int c, int h, int w) noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + h) * width_ + w];
  }
  double at(int c, int h, int w) const noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + h) * width_ + w];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> channel(int c) const noexcept {
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(c) * plane_size(),
                                                    plane_size());
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  // Throws ParameterError unless channels ∈ {1,3} and every value is a finite
  // number in [0,1].
  void validate() const;

  double min_value() const;
  double max_value() const;

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

}  // namespace harmony
