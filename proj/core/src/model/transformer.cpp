// Token-sequence layers used by the toy vision transformer, plus the generic
// containers.
#include <cmath>

#include "eigen_views.hpp"
#include "harmony/error.hpp"
#include "harmony/model/layers.hpp"

namespace harmony {

using detail::ConstMatView;
using detail::ConstVecView;
using detail::MatView;
using detail::RowMat;
using detail::VecView;

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(int features, double eps)
    : features_(features), eps_(eps), gain_(Tensor({features}, 1.0)), shift_(Tensor({features})) {
  if (features <= 0) throw ParameterError("layernorm: invalid size");
}

Tensor LayerNorm::forward(const Tensor& x) {
  if (x.dim(-1) != features_) throw ModelError("layernorm: feature size mismatch");
  const std::size_t rows = x.size() / static_cast<std::size_t>(features_);
  normalized_ = Tensor(x.shape());
  inv_std_.assign(rows, 0.0);
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * features_;
    double mean = 0.0;
    for (int i = 0; i < features_; ++i) mean += in[i];
    mean /= features_;
    double var = 0.0;
    for (int i = 0; i < features_; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= features_;
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[r] = inv;
    double* xh = normalized_.data() + r * features_;
    double* out = y.data() + r * features_;
    for (int i = 0; i < features_; ++i) {
      xh[i] = (in[i] - mean) * inv;
      out[i] = gain_.value[static_cast<std::size_t>(i)] * xh[i] + shift_.value[static_cast<std::size_t>(i)];
    }
  }
  return y;
}

Tensor LayerNorm::backward(const Tensor& grad_out, BackwardMode mode) {
  const std::size_t rows = grad_out.size() / static_cast<std::size_t>(features_);
  Tensor dx(grad_out.shape());
  std::vector<double> dxh(static_cast<std::size_t>(features_));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = grad_out.data() + r * features_;
    const double* xh = normalized_.data() + r * features_;
    double mean_d = 0.0, mean_dx = 0.0;
    for (int i = 0; i < features_; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      dxh[ui] = g[i] * gain_.value[ui];
      mean_d += dxh[ui];
      mean_dx += dxh[ui] * xh[i];
      if (mode == BackwardMode::kAccumulateParams) {
        gain_.grad[ui] += g[i] * xh[i];
        shift_.grad[ui] += g[i];
      }
    }
    mean_d /= features_;
    mean_dx /= features_;
    double* out = dx.data() + r * features_;
    for (int i = 0; i < features_; ++i) {
      out[i] = inv_std_[r] * (dxh[static_cast<std::size_t>(i)] - mean_d - xh[i] * mean_dx);
    }
  }
  return dx;
}

// ------------------------------------------------------- grid <-> tokens

Tensor GridToTokens::forward(const Tensor& x) {
  if (x.rank() != 4) throw ModelError("grid_to_tokens expects NCHW input");
  in_shape_ = x.shape();
  const int n_batch = x.dim(0), d = x.dim(1), t = x.dim(2) * x.dim(3);
  Tensor y({n_batch, t, d});
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < d; ++c) {
      const double* src = x.data() + (static_cast<std::size_t>(n) * d + c) * t;
      for (int i = 0; i < t; ++i) y[(static_cast<std::size_t>(n) * t + i) * d + c] = src[i];
    }
  }
  return y;
}

Tensor GridToTokens::backward(const Tensor& grad_out, BackwardMode) {
  Tensor dx(in_shape_);
  const int n_batch = in_shape_[0], d = in_shape_[1], t = in_shape_[2] * in_shape_[3];
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < d; ++c) {
      double* dst = dx.data() + (static_cast<std::size_t>(n) * d + c) * t;
      for (int i = 0; i < t; ++i) dst[i] = grad_out[(static_cast<std::size_t>(n) * t + i) * d + c];
    }
  }
  return dx;
}

Tensor TokensToGrid::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) != gh_ * gw_) {
    throw ModelError("tokens_to_grid: token count does not match the grid");
  }
  const int n_batch = x.dim(0), t = x.dim(1), d = x.dim(2);
  Tensor y({n_batch, d, gh_, gw_});
  for (int n = 0; n < n_batch; ++n) {
    for (int i = 0; i < t; ++i) {
      for (int c = 0; c < d; ++c) {
        y[(static_cast<std::size_t>(n) * d + c) * t + i] = x[(static_cast<std::size_t>(n) * t + i) * d + c];
      }
    }
  }
  return y;
}

Tensor TokensToGrid::backward(const Tensor& grad_out, BackwardMode) {
  const int n_batch = grad_out.dim(0), d = grad_out.dim(1), t = gh_ * gw_;
  Tensor dx({n_batch, t, d});
  for (int n = 0; n < n_batch; ++n) {
    for (int i = 0; i < t; ++i) {
      for (int c = 0; c < d; ++c) {
        dx[(static_cast<std::size_t>(n) * t + i) * d + c] = grad_out[(static_cast<std::size_t>(n) * d + c) * t + i];
      }
    }
  }
  return dx;
}

// -------------------------------------------------------- PositionEmbedding

PositionEmbedding::PositionEmbedding(int tokens, int dim, Rng& rng) {
  Tensor t({tokens, dim});
  std::normal_distribution<double> dist(0.0, 0.02);
  for (double& v : t.values()) v = dist(rng);
  table_ = Parameter(std::move(t));
}

Tensor PositionEmbedding::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) != table_.value.dim(0) || x.dim(2) != table_.value.dim(1)) {
    throw ModelError("position_embedding: shape mismatch " + x.shape_string());
  }
  Tensor y = x;
  const std::size_t stride = table_.value.size();
  for (int n = 0; n < x.dim(0); ++n) {
    double* p = y.data() + static_cast<std::size_t>(n) * stride;
    for (std::size_t i = 0; i < stride; ++i) p[i] += table_.value[i];
  }
  return y;
}

Tensor PositionEmbedding::backward(const Tensor& grad_out, BackwardMode mode) {
  if (mode == BackwardMode::kAccumulateParams) {
    const std::size_t stride = table_.value.size();
    for (int n = 0; n < grad_out.dim(0); ++n) {
      const double* g = grad_out.data() + static_cast<std::size_t>(n) * stride;
      for (std::size_t i = 0; i < stride; ++i) table_.grad[i] += g[i];
    }
  }
  return grad_out;
}

// ---------------------------------------------------------------- attention

MultiHeadSelfAttention::MultiHeadSelfAttention(int dim, int heads, Rng& rng)
    : dim_(dim), heads_(heads) {
  if (dim <= 0 || heads <= 0 || dim % heads != 0) {
    throw ParameterError("mhsa: dim must be a positive multiple of heads");
  }
  std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / dim));
  Tensor qkv({3 * dim, dim});
  for (double& v : qkv.values()) v = dist(rng);
  Tensor out({dim, dim});
  for (double& v : out.values()) v = dist(rng);
  qkv_w_ = Parameter(std::move(qkv));
  qkv_b_ = Parameter(Tensor({3 * dim}));
  out_w_ = Parameter(std::move(out));
  out_b_ = Parameter(Tensor({dim}));
}

Tensor MultiHeadSelfAttention::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(2) != dim_) throw ModelError("mhsa: expected (N, T, D) input");
  input_ = x;
  const int n_batch = x.dim(0), t = x.dim(1), d = dim_, dh = dim_ / heads_;
  const int rows = n_batch * t;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  qkv_ = Tensor({n_batch, t, 3 * d});
  {
    MatView q(qkv_.data(), rows, 3 * d);
    q.noalias() = ConstMatView(x.data(), rows, d) * ConstMatView(qkv_w_.value.data(), 3 * d, d).transpose();
    q.rowwise() += ConstVecView(qkv_b_.value.data(), 3 * d).transpose();
  }
  attn_ = Tensor({n_batch, heads_, t, t});
  context_ = Tensor({n_batch, t, d});
  for (int n = 0; n < n_batch; ++n) {
    ConstMatView qkv(qkv_.data() + static_cast<std::size_t>(n) * t * 3 * d, t, 3 * d);
    MatView ctx(context_.data() + static_cast<std::size_t>(n) * t * d, t, d);
    for (int h = 0; h < heads_; ++h) {
      MatView a(attn_.data() + (static_cast<std::size_t>(n) * heads_ + h) * t * t, t, t);
      a.noalias() = qkv.middleCols(h * dh, dh) * qkv.middleCols(d + h * dh, dh).transpose();
      a *= scale;
      for (int r = 0; r < t; ++r) {
        auto row = a.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
      }
      ctx.middleCols(h * dh, dh).noalias() = a * qkv.middleCols(2 * d + h * dh, dh);
    }
  }
  Tensor y({n_batch, t, d});
  MatView ym(y.data(), rows, d);
  ym.noalias() = ConstMatView(context_.data(), rows, d) * ConstMatView(out_w_.value.data(), d, d).transpose();
  ym.rowwise() += ConstVecView(out_b_.value.data(), d).transpose();
  return y;
}

Tensor MultiHeadSelfAttention::backward(const Tensor& grad_out, BackwardMode mode) {
  const int n_batch = input_.dim(0), t = input_.dim(1), d = dim_, dh = dim_ / heads_;
  const int rows = n_batch * t;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool params = mode == BackwardMode::kAccumulateParams;

  ConstMatView g(grad_out.data(), rows, d);
  if (params) {
    MatView(out_w_.grad.data(), d, d).noalias() += g.transpose() * ConstMatView(context_.data(), rows, d);
    VecView(out_b_.grad.data(), d) += g.colwise().sum().transpose();
  }
  RowMat dctx = g * ConstMatView(out_w_.value.data(), d, d);

  RowMat dqkv(rows, 3 * d);
  RowMat da(t, t);
  for (int n = 0; n < n_batch; ++n) {
    ConstMatView qkv(qkv_.data() + static_cast<std::size_t>(n) * t * 3 * d, t, 3 * d);
    auto dctx_n = dctx.middleRows(n * t, t);
    auto dqkv_n = dqkv.middleRows(n * t, t);
    for (int h = 0; h < heads_; ++h) {
      ConstMatView a(attn_.data() + (static_cast<std::size_t>(n) * heads_ + h) * t * t, t, t);
      const auto v = qkv.middleCols(2 * d + h * dh, dh);
      const auto dc = dctx_n.middleCols(h * dh, dh);
      da.noalias() = dc * v.transpose();
      dqkv_n.middleCols(2 * d + h * dh, dh).noalias() = a.transpose() * dc;
      // softmax backward, then the 1/sqrt(dh) scale
      for (int r = 0; r < t; ++r) {
        const double dot = da.row(r).dot(a.row(r));
        da.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix() * scale;
      }
      dqkv_n.middleCols(h * dh, dh).noalias() = da * qkv.middleCols(d + h * dh, dh);
      dqkv_n.middleCols(d + h * dh, dh).noalias() = da.transpose() * qkv.middleCols(h * dh, dh);
    }
  }
  if (params) {
    MatView(qkv_w_.grad.data(), 3 * d, d).noalias() += dqkv.transpose() * ConstMatView(input_.data(), rows, d);
    VecView(qkv_b_.grad.data(), 3 * d) += dqkv.colwise().sum().transpose();
  }
  Tensor dx(input_.shape());
  MatView(dx.data(), rows, d).noalias() = dqkv * ConstMatView(qkv_w_.value.data(), 3 * d, d);
  return dx;
}

// --------------------------------------------------------------- containers

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out, BackwardMode mode) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, mode);
  return g;
}

std::vector<ParameterRef> Sequential::parameters() {
  std::vector<ParameterRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto& p : layers_[i]->parameters()) {
      out.push_back({std::to_string(i) + "." + p.name, p.param});
    }
  }
  return out;
}

Tensor Residual::forward(const Tensor& x) {
  Tensor y = inner_.forward(x);
  y += x;
  return y;
}

Tensor Residual::backward(const Tensor& grad_out, BackwardMode mode) {
  Tensor g = inner_.backward(grad_out, mode);
  g += grad_out;
  return g;
}

std::vector<ParameterRef> Residual::parameters() { return inner_.parameters(); }

}  // namespace harmony
