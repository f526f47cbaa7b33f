#include "harmony/model/adapter.hpp"

#include <algorithm>
#include <cmath>

#include "harmony/error.hpp"

namespace harmony {
namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out.empty() ? "<none>" : out;
}

// Row-wise log-softmax of (N, K) logits.
Tensor log_softmax_rows(const Tensor& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (int i = 0; i < n; ++i) {
    const double* z = logits.data() + static_cast<std::size_t>(i) * k;
    double* o = out.data() + static_cast<std::size_t>(i) * k;
    const double m = *std::max_element(z, z + k);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(z[j] - m);
    const double lse = m + std::log(s);
    for (int j = 0; j < k; ++j) o[j] = z[j] - lse;
  }
  return out;
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = log_softmax_rows(logits);
  for (double& v : p.values()) v = std::exp(v);
  return p;
}

ClassifierAdapter::ClassifierAdapter(ModelManifest manifest, Network network, Capabilities caps)
    : manifest_(std::move(manifest)), network_(std::move(network)), caps_(caps) {
  manifest_.input_spec.validate();
  if (manifest_.num_classes < 2) throw ParameterError("a classifier needs at least 2 classes");
}

void ClassifierAdapter::check_batch(const Tensor& batch) const {
  const auto& s = input_spec();
  if (batch.rank() != 4 || batch.dim(1) != s.channels || batch.dim(2) != s.height ||
      batch.dim(3) != s.width) {
    throw ModelError("model '" + model_id() + "' expects (N," + std::to_string(s.channels) + "," +
                     std::to_string(s.height) + "," + std::to_string(s.width) + ") input, got " +
                     batch.shape_string());
  }
}

ActivationHandle ClassifierAdapter::activation(const std::string& name) {
  if (!network_.is_published(name)) {
    throw ModelError("model '" + model_id() + "' has no published layer '" + name +
                     "'; published layers: " + join(layer_names()));
  }
  Tensor probe({1, input_spec().channels, input_spec().height, input_spec().width}, 0.5);
  Tensor act;
  network_.forward(probe, &name, &act);
  return {name, act.dim(1), act.dim(2), act.dim(3)};
}

std::string ClassifierAdapter::default_cam_layer() const {
  const auto names = layer_names();
  if (names.empty()) throw ModelError("model '" + model_id() + "' publishes no spatial layer");
  return names.back();
}

Tensor ClassifierAdapter::logits(const Tensor& batch) {
  check_batch(batch);
  return network_.forward(batch);
}

Tensor ClassifierAdapter::predict_proba(const Tensor& batch) { return softmax_rows(logits(batch)); }

GradientResult ClassifierAdapter::gradient_of_scalar(const Tensor& batch,
                                                     const ScalarSelector& selector,
                                                     const std::optional<std::string>& layer) {
  check_batch(batch);
  if (layer) {
    if (!caps_.activation_capture) {
      throw ModelError("model '" + model_id() + "' does not support activation capture");
    }
    if (!network_.is_published(*layer)) {
      throw ModelError("model '" + model_id() + "' has no published layer '" + *layer +
                       "'; published layers: " + join(layer_names()));
    }
  } else if (!caps_.input_gradients) {
    throw ModelError("model '" + model_id() + "' does not support input gradients");
  }
  if (selector.kind != ScalarSelector::Kind::kEntropy &&
      (selector.class_index < 0 || selector.class_index >= num_classes())) {
    throw ParameterError("selector class index out of range");
  }

  GradientResult result;
  const std::string* capture = layer ? &*layer : nullptr;
  const Tensor z = network_.forward(batch, capture, &result.activation);
  const Tensor logp = log_softmax_rows(z);
  result.probabilities = logp;
  for (double& v : result.probabilities.values()) v = std::exp(v);

  const int n = z.dim(0), k = z.dim(1);
  const double w = selector.weight;
  Tensor dz(z.shape());
  double value = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* lp = logp.data() + static_cast<std::size_t>(i) * k;
    const double* p = result.probabilities.data() + static_cast<std::size_t>(i) * k;
    double* g = dz.data() + static_cast<std::size_t>(i) * k;
    switch (selector.kind) {
      case ScalarSelector::Kind::kClassScore:
        value += z[static_cast<std::size_t>(i) * k + selector.class_index];
        g[selector.class_index] = w;
        break;
      case ScalarSelector::Kind::kNegLogProb:
        value -= lp[selector.class_index];
        for (int j = 0; j < k; ++j) g[j] = w * p[j];
        g[selector.class_index] -= w;
        break;
      case ScalarSelector::Kind::kEntropy: {
        double h = 0.0;
        for (int j = 0; j < k; ++j) h -= p[j] * lp[j];
        value += h;
        // dH/dz_j = -p_j (log p_j + H)
        for (int j = 0; j < k; ++j) g[j] = -w * p[j] * (lp[j] + h);
        break;
      }
    }
  }
  result.value = w * value;

  Tensor grad_layer;
  Tensor grad_input = network_.backward(dz, BackwardMode::kInputOnly, capture, &grad_layer,
                                        /*stop_at_capture=*/capture != nullptr);
  result.gradient = capture ? std::move(grad_layer) : std::move(grad_input);
  return result;
}

}  // namespace harmony
