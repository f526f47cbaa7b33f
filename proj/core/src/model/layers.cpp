#include "harmony/model/layers.hpp"

#include <cmath>

#include "eigen_views.hpp"
#include "harmony/error.hpp"

namespace harmony {

using detail::ConstMatView;
using detail::ConstVecView;
using detail::MatView;
using detail::VecView;

namespace {

Tensor normal_init(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

void require_rank(const Tensor& x, int rank, const char* layer) {
  if (x.rank() != rank) {
    throw ModelError(std::string(layer) + " expects a rank-" + std::to_string(rank) +
                     " input, got " + x.shape_string());
  }
}

}  // namespace

// ---------------------------------------------------------------- Normalize

Normalize::Normalize(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw ParameterError("normalize: mean/scale size mismatch");
}

Tensor Normalize::forward(const Tensor& x) {
  require_rank(x, 4, "normalize");
  if (mean_.empty()) return x;
  if (static_cast<std::size_t>(x.dim(1)) != mean_.size()) {
    throw ModelError("normalize: channel count mismatch");
  }
  Tensor y = x;
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < x.dim(1); ++c) {
      double* p = y.data() + (static_cast<std::size_t>(n) * x.dim(1) + c) * plane;
      const double m = mean_[static_cast<std::size_t>(c)];
      const double s = scale_[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - m) / s;
    }
  }
  return y;
}

Tensor Normalize::backward(const Tensor& grad_out, BackwardMode) {
  if (mean_.empty()) return grad_out;
  Tensor g = grad_out;
  const std::size_t plane = static_cast<std::size_t>(g.dim(2)) * g.dim(3);
  for (int n = 0; n < g.dim(0); ++n) {
    for (int c = 0; c < g.dim(1); ++c) {
      double* p = g.data() + (static_cast<std::size_t>(n) * g.dim(1) + c) * plane;
      const double s = scale_[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) p[i] /= s;
    }
  }
  return g;
}

// ------------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng)
    : in_c_(in_channels), out_c_(out_channels), k_(kernel), stride_(stride), pad_(padding) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0) {
    throw ParameterError("conv2d: invalid geometry");
  }
  const int fan_in = in_c_ * k_ * k_;
  weight_ = Parameter(normal_init({out_c_, fan_in}, std::sqrt(2.0 / fan_in), rng));
  bias_ = Parameter(Tensor({out_c_}));
}

Tensor Conv2d::forward(const Tensor& x) {
  require_rank(x, 4, "conv2d");
  if (x.dim(1) != in_c_) {
    throw ModelError("conv2d: expected " + std::to_string(in_c_) + " input channels, got " +
                     std::to_string(x.dim(1)));
  }
  const int n_batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  out_h_ = (h + 2 * pad_ - k_) / stride_ + 1;
  out_w_ = (w + 2 * pad_ - k_) / stride_ + 1;
  if (out_h_ <= 0 || out_w_ <= 0) throw ModelError("conv2d: input smaller than kernel");
  in_shape_ = x.shape();

  const int kk = in_c_ * k_ * k_;
  const int p = out_h_ * out_w_;
  cols_.assign(static_cast<std::size_t>(n_batch) * kk * p, 0.0);
  Tensor y({n_batch, out_c_, out_h_, out_w_});
  ConstMatView wmat(weight_.value.data(), out_c_, kk);
  ConstVecView bias(bias_.value.data(), out_c_);

  for (int n = 0; n < n_batch; ++n) {
    double* cols = cols_.data() + static_cast<std::size_t>(n) * kk * p;
    for (int c = 0; c < in_c_; ++c) {
      const double* src = x.data() + (static_cast<std::size_t>(n) * in_c_ + c) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          double* row = cols + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * p;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) row[oy * out_w_ + ox] = src[iy * w + ix];
            }
          }
        }
      }
    }
    ConstMatView cmat(cols, kk, p);
    MatView out(y.data() + static_cast<std::size_t>(n) * out_c_ * p, out_c_, p);
    out.noalias() = wmat * cmat;
    out.colwise() += bias;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, BackwardMode mode) {
  const int n_batch = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const int kk = in_c_ * k_ * k_;
  const int p = out_h_ * out_w_;
  Tensor dx(in_shape_);
  ConstMatView wmat(weight_.value.data(), out_c_, kk);
  MatView dw(weight_.grad.data(), out_c_, kk);
  VecView db(bias_.grad.data(), out_c_);
  detail::RowMat dcols(kk, p);

  for (int n = 0; n < n_batch; ++n) {
    ConstMatView g(grad_out.data() + static_cast<std::size_t>(n) * out_c_ * p, out_c_, p);
    ConstMatView cmat(cols_.data() + static_cast<std::size_t>(n) * kk * p, kk, p);
    if (mode == BackwardMode::kAccumulateParams) {
      dw.noalias() += g * cmat.transpose();
      db += g.rowwise().sum();
    }
    dcols.noalias() = wmat.transpose() * g;
    for (int c = 0; c < in_c_; ++c) {
      double* dst = dx.data() + (static_cast<std::size_t>(n) * in_c_ + c) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const double* row = dcols.data() + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * p;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) dst[iy * w + ix] += row[oy * out_w_ + ox];
            }
          }
        }
      }
    }
  }
  return dx;
}

// --------------------------------------------------------------------- Gelu

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor Gelu::forward(const Tensor& x) {
  input_ = x;
  Tensor y = x;
  for (double& v : y.values()) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    v = 0.5 * v * (1.0 + t);
  }
  return y;
}

Tensor Gelu::backward(const Tensor& grad_out, BackwardMode) {
  Tensor g = grad_out;
  const double* x = input_.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = x[i];
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    g[i] *= 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
  }
  return g;
}

// ---------------------------------------------------------------- AvgPool2d

Tensor AvgPool2d::forward(const Tensor& x) {
  require_rank(x, 4, "avgpool2d");
  in_shape_ = x.shape();
  const int n_batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h / window_, ow = w / window_;
  if (oh == 0 || ow == 0) throw ModelError("avgpool2d: input smaller than window");
  Tensor y({n_batch, c, oh, ow});
  const double inv = 1.0 / (window_ * window_);
  for (int n = 0; n < n_batch; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double s = 0.0;
          for (int dy = 0; dy < window_; ++dy) {
            for (int dx = 0; dx < window_; ++dx) s += x.at(n, ch, oy * window_ + dy, ox * window_ + dx);
          }
          y.at(n, ch, oy, ox) = s * inv;
        }
      }
    }
  }
  return y;
}

Tensor AvgPool2d::backward(const Tensor& grad_out, BackwardMode) {
  Tensor dx(in_shape_);
  const double inv = 1.0 / (window_ * window_);
  for (int n = 0; n < grad_out.dim(0); ++n) {
    for (int ch = 0; ch < grad_out.dim(1); ++ch) {
      for (int oy = 0; oy < grad_out.dim(2); ++oy) {
        for (int ox = 0; ox < grad_out.dim(3); ++ox) {
          const double g = grad_out.at(n, ch, oy, ox) * inv;
          for (int dy = 0; dy < window_; ++dy) {
            for (int ddx = 0; ddx < window_; ++ddx) dx.at(n, ch, oy * window_ + dy, ox * window_ + ddx) = g;
          }
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x) {
  require_rank(x, 4, "global_avgpool");
  in_shape_ = x.shape();
  const int n_batch = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n_batch, c});
  for (int i = 0; i < n_batch * c; ++i) {
    const double* p = x.data() + static_cast<std::size_t>(i) * plane;
    double s = 0.0;
    for (std::size_t j = 0; j < plane; ++j) s += p[j];
    y[static_cast<std::size_t>(i)] = s / static_cast<double>(plane);
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out, BackwardMode) {
  Tensor dx(in_shape_);
  const std::size_t plane = static_cast<std::size_t>(in_shape_[2]) * in_shape_[3];
  const double inv = 1.0 / static_cast<double>(plane);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    double* p = dx.data() + i * plane;
    const double g = grad_out[i] * inv;
    for (std::size_t j = 0; j < plane; ++j) p[j] = g;
  }
  return dx;
}

// ------------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, Rng& rng) : in_(in_features), out_(out_features) {
  if (in_features <= 0 || out_features <= 0) throw ParameterError("linear: invalid size");
  weight_ = Parameter(normal_init({out_, in_}, std::sqrt(1.0 / in_), rng));
  bias_ = Parameter(Tensor({out_}));
}

Tensor Linear::forward(const Tensor& x) {
  if (x.rank() < 2 || x.dim(-1) != in_) {
    throw ModelError("linear: expected last axis " + std::to_string(in_) + ", got " +
                     x.shape_string());
  }
  input_ = x;
  const int rows = static_cast<int>(x.size() / static_cast<std::size_t>(in_));
  std::vector<int> shape = x.shape();
  shape.back() = out_;
  Tensor y(shape);
  ConstMatView xm(x.data(), rows, in_);
  ConstMatView wm(weight_.value.data(), out_, in_);
  MatView ym(y.data(), rows, out_);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += ConstVecView(bias_.value.data(), out_).transpose();
  return y;
}

Tensor Linear::backward(const Tensor& grad_out, BackwardMode mode) {
  const int rows = static_cast<int>(input_.size() / static_cast<std::size_t>(in_));
  ConstMatView g(grad_out.data(), rows, out_);
  ConstMatView wm(weight_.value.data(), out_, in_);
  if (mode == BackwardMode::kAccumulateParams) {
    ConstMatView xm(input_.data(), rows, in_);
    MatView(weight_.grad.data(), out_, in_).noalias() += g.transpose() * xm;
    VecView(bias_.grad.data(), out_) += g.colwise().sum().transpose();
  }
  Tensor dx(input_.shape());
  MatView(dx.data(), rows, in_).noalias() = g * wm;
  return dx;
}

}  // namespace harmony
