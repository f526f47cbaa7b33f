#pragma once

#include <string>
#include <vector>

#include "harmony/data/image.hpp"
#include "harmony/tensor.hpp"

namespace harmony {

// Input contract of a classifier: target geometry plus optional per-channel
// normalisation (x - mean) / scale. Empty mean/scale means no normalisation.
struct InputSpec {
  int channels = 3;
  int height = 16;
  int width = 16;
  std::vector<double> mean;
  std::vector<double> scale;

  bool has_normalization() const { return !mean.empty(); }
  void validate() const;
  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

// Separable bilinear sampling weights with half-pixel centres and edge
// clamping. The same kernel serves image resizing and attribution-map
// upsampling; `apply_adjoint` is its transpose.
class BilinearResampler {
 public:
  BilinearResampler(int in_height, int in_width, int out_height, int out_width);

  int in_height() const { return in_h_; }
  int in_width() const { return in_w_; }
  int out_height() const { return out_h_; }
  int out_width() const { return out_w_; }

  // `in` is in_height*in_width, `out` is out_height*out_width.
  void apply(const double* in, double* out) const;
  void apply_adjoint(const double* out_grad, double* in_grad) const;

 private:
  struct Tap {
    int i0;
    int i1;
    double t;
  };
  static std::vector<Tap> taps(int in, int out);

  int in_h_, in_w_, out_h_, out_w_;
  std::vector<Tap> rows_;
  std::vector<Tap> cols_;
};

std::vector<double> resize_plane(const std::vector<double>& plane, int in_h, int in_w, int out_h,
                                 int out_w);

// Resize (bilinear) and convert channels to the spec geometry. 3→1 uses
// ITU-R BT.601 luma, 1→3 replicates. No normalisation.
ImageTensor fit_to_spec(const ImageTensor& x, const InputSpec& spec);

// Per-channel (x - mean) / scale on a copy.
ImageTensor normalize(const ImageTensor& x, const InputSpec& spec);

// fit_to_spec followed by normalize. The input is never modified.
ImageTensor preprocess(const ImageTensor& x, const InputSpec& spec);

// Stacks equally shaped images into an NCHW batch.
Tensor stack_images(const std::vector<const ImageTensor*>& images);
Tensor stack_images(const std::vector<ImageTensor>& images);
ImageTensor unstack_image(const Tensor& batch, int index);

}  // namespace harmony
