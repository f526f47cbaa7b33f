#include "harmony/data/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "harmony/error.hpp"

namespace harmony {

void InputSpec::validate() const {
  if (channels != 1 && channels != 3) throw ParameterError("input spec channels must be 1 or 3");
  if (height <= 0 || width <= 0) throw ParameterError("input spec size must be positive");
  if (mean.size() != scale.size()) throw ParameterError("input spec mean/scale length differ");
  if (!mean.empty() && mean.size() != static_cast<std::size_t>(channels)) {
    throw ParameterError("input spec normalisation needs one mean/scale per channel");
  }
  for (double s : scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("normalisation scale must be > 0");
  }
}

std::vector<BilinearResampler::Tap> BilinearResampler::taps(int in, int out) {
  std::vector<Tap> t(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
  }
  return t;
}

BilinearResampler::BilinearResampler(int in_height, int in_width, int out_height, int out_width)
    : in_h_(in_height), in_w_(in_width), out_h_(out_height), out_w_(out_width) {
  if (in_height <= 0 || in_width <= 0 || out_height <= 0 || out_width <= 0) {
    throw ParameterError("resampler sizes must be positive");
  }
  rows_ = taps(in_h_, out_h_);
  cols_ = taps(in_w_, out_w_);
}

void BilinearResampler::apply(const double* in, double* out) const {
  for (int y = 0; y < out_h_; ++y) {
    const Tap& ry = rows_[static_cast<std::size_t>(y)];
    const double* r0 = in + static_cast<std::size_t>(ry.i0) * in_w_;
    const double* r1 = in + static_cast<std::size_t>(ry.i1) * in_w_;
    for (int x = 0; x < out_w_; ++x) {
      const Tap& cx = cols_[static_cast<std::size_t>(x)];
      // lerp form keeps constant inputs exactly constant
      const double top = r0[cx.i0] + (r0[cx.i1] - r0[cx.i0]) * cx.t;
      const double bot = r1[cx.i0] + (r1[cx.i1] - r1[cx.i0]) * cx.t;
      out[static_cast<std::size_t>(y) * out_w_ + x] = top + (bot - top) * ry.t;
    }
  }
}

void BilinearResampler::apply_adjoint(const double* out_grad, double* in_grad) const {
  std::fill(in_grad, in_grad + static_cast<std::size_t>(in_h_) * in_w_, 0.0);
  for (int y = 0; y < out_h_; ++y) {
    const Tap& ry = rows_[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w_; ++x) {
      const Tap& cx = cols_[static_cast<std::size_t>(x)];
      const double g = out_grad[static_cast<std::size_t>(y) * out_w_ + x];
      const double g0 = g * (1.0 - ry.t);
      const double g1 = g * ry.t;
      in_grad[static_cast<std::size_t>(ry.i0) * in_w_ + cx.i0] += g0 * (1.0 - cx.t);
      in_grad[static_cast<std::size_t>(ry.i0) * in_w_ + cx.i1] += g0 * cx.t;
      in_grad[static_cast<std::size_t>(ry.i1) * in_w_ + cx.i0] += g1 * (1.0 - cx.t);
      in_grad[static_cast<std::size_t>(ry.i1) * in_w_ + cx.i1] += g1 * cx.t;
    }
  }
}

std::vector<double> resize_plane(const std::vector<double>& plane, int in_h, int in_w, int out_h,
                                 int out_w) {
  if (plane.size() != static_cast<std::size_t>(in_h) * in_w) {
    throw ParameterError("plane size does not match its declared shape");
  }
  if (in_h == out_h && in_w == out_w) return plane;
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  BilinearResampler(in_h, in_w, out_h, out_w).apply(plane.data(), out.data());
  return out;
}

ImageTensor fit_to_spec(const ImageTensor& x, const InputSpec& spec) {
  spec.validate();
  const int in_c = x.channels();
  if (in_c != spec.channels && !(in_c == 3 && spec.channels == 1) &&
      !(in_c == 1 && spec.channels == 3)) {
    throw ParameterError("cannot convert " + std::to_string(in_c) + " channels to " +
                         std::to_string(spec.channels));
  }

  // Channel conversion first, at source resolution.
  ImageTensor converted = x;
  if (in_c == 3 && spec.channels == 1) {
    converted = ImageTensor(1, x.height(), x.width());
    for (int h = 0; h < x.height(); ++h) {
      for (int w = 0; w < x.width(); ++w) {
        converted.at(0, h, w) =
            0.299 * x.at(0, h, w) + 0.587 * x.at(1, h, w) + 0.114 * x.at(2, h, w);
      }
    }
  } else if (in_c == 1 && spec.channels == 3) {
    converted = ImageTensor(3, x.height(), x.width());
    for (int c = 0; c < 3; ++c) {
      std::copy(x.channel(0).begin(), x.channel(0).end(),
                converted.values().begin() + static_cast<std::ptrdiff_t>(c * x.plane_size()));
    }
  }

  if (converted.height() == spec.height && converted.width() == spec.width) return converted;

  ImageTensor out(spec.channels, spec.height, spec.width);
  BilinearResampler resampler(converted.height(), converted.width(), spec.height, spec.width);
  for (int c = 0; c < spec.channels; ++c) {
    resampler.apply(converted.channel(c).data(),
                    out.values().data() + static_cast<std::size_t>(c) * out.plane_size());
  }
  return out;
}

ImageTensor normalize(const ImageTensor& x, const InputSpec& spec) {
  if (!spec.has_normalization()) return x;
  if (static_cast<std::size_t>(x.channels()) != spec.mean.size()) {
    throw ParameterError("normalisation channel count mismatch");
  }
  ImageTensor out = x;
  for (int c = 0; c < x.channels(); ++c) {
    const double m = spec.mean[static_cast<std::size_t>(c)];
    const double s = spec.scale[static_cast<std::size_t>(c)];
    auto* p = out.values().data() + static_cast<std::size_t>(c) * out.plane_size();
    for (std::size_t i = 0; i < out.plane_size(); ++i) p[i] = (p[i] - m) / s;
  }
  return out;
}

ImageTensor preprocess(const ImageTensor& x, const InputSpec& spec) {
  return normalize(fit_to_spec(x, spec), spec);
}

Tensor stack_images(const std::vector<const ImageTensor*>& images) {
  if (images.empty()) throw ParameterError("cannot stack an empty image list");
  const ImageTensor& first = *images.front();
  Tensor batch({static_cast<int>(images.size()), first.channels(), first.height(), first.width()});
  const std::size_t stride = first.size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i]->same_shape(first)) throw ParameterError("cannot stack images of mixed shapes");
    std::copy(images[i]->values().begin(), images[i]->values().end(), batch.data() + i * stride);
  }
  return batch;
}

Tensor stack_images(const std::vector<ImageTensor>& images) {
  std::vector<const ImageTensor*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& im : images) ptrs.push_back(&im);
  return stack_images(ptrs);
}

ImageTensor unstack_image(const Tensor& batch, int index) {
  if (batch.rank() != 4) throw ParameterError("unstack_image expects an NCHW batch");
  const std::size_t stride = batch.stride0();
  std::vector<double> v(batch.data() + static_cast<std::size_t>(index) * stride,
                        batch.data() + static_cast<std::size_t>(index + 1) * stride);
  return ImageTensor(batch.dim(1), batch.dim(2), batch.dim(3), std::move(v));
}

}  // namespace harmony
