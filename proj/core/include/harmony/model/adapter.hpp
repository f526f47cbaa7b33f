#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "harmony/data/image.hpp"
#include "harmony/data/preprocess.hpp"
#include "harmony/model/network.hpp"
#include "harmony/tensor.hpp"

namespace harmony {

inline constexpr int kWeightsFormatVersion = 1;

// Self-description of a model. Persisted in weight files.
struct ModelManifest {
  std::string model_id;
  std::string variant;  // cnn-small | cnn-medium | cnn-large | vit-tiny | custom
  InputSpec input_spec;
  int num_classes = 0;
  std::uint64_t seed = 0;
  int patch = 0;            // vit-tiny only
  std::string dataset_tag;  // data distribution the weights were trained on
  int format_version = kWeightsFormatVersion;

  friend bool operator==(const ModelManifest&, const ModelManifest&) = default;
};

struct Capabilities {
  bool input_gradients = true;
  bool activation_capture = true;
};

struct ActivationHandle {
  std::string layer_name;
  int channels = 0;
  int height = 0;
  int width = 0;
};

// Scalar that gradients are taken of, summed over the batch rows.
struct ScalarSelector {
  enum class Kind {
    kClassScore,   // logit of `class_index`
    kNegLogProb,   // -log softmax(logits)[class_index]
    kEntropy,      // Shannon entropy (nats) of softmax(logits)
  };
  Kind kind = Kind::kClassScore;
  int class_index = 0;
  double weight = 1.0;

  static ScalarSelector class_score(int c, double weight = 1.0) {
    return {Kind::kClassScore, c, weight};
  }
  static ScalarSelector neg_log_prob(int c, double weight = 1.0) {
    return {Kind::kNegLogProb, c, weight};
  }
  static ScalarSelector entropy(double weight = 1.0) { return {Kind::kEntropy, 0, weight}; }
};

struct GradientResult {
  double value = 0.0;     // selected scalar, summed over rows and weighted
  Tensor gradient;        // shape of the input batch or of the captured activation
  Tensor activation;      // captured activation when gradients target a layer
  Tensor probabilities;   // (N, num_classes)
};

// Row-wise softmax of (N, K) logits.
Tensor softmax_rows(const Tensor& logits);

// Uniform contract over a classifier. Inputs are NCHW batches already fitted
// to `input_spec()` geometry with raw [0,1] values; normalisation is part of
// the network, so input gradients are with respect to raw pixel values.
//
// Copies are independent instances (deep-copied weights) and may run in
// parallel; a single instance serves one call at a time.
class ClassifierAdapter {
 public:
  ClassifierAdapter() = default;
  ClassifierAdapter(ModelManifest manifest, Network network, Capabilities caps = {});

  const std::string& model_id() const noexcept { return manifest_.model_id; }
  const ModelManifest& manifest() const noexcept { return manifest_; }
  ModelManifest& mutable_manifest() noexcept { return manifest_; }
  const InputSpec& input_spec() const noexcept { return manifest_.input_spec; }
  int num_classes() const noexcept { return manifest_.num_classes; }
  const Capabilities& capabilities() const noexcept { return caps_; }

  // Published spatial activation layers, input to output order.
  std::vector<std::string> layer_names() const { return network_.published_layers(); }
  // Throws ModelError listing the published layers when `name` is unknown.
  ActivationHandle activation(const std::string& name);
  // Last published layer; Grad-CAM's default target.
  std::string default_cam_layer() const;

  Tensor logits(const Tensor& batch);
  Tensor predict_proba(const Tensor& batch);

  // Exact gradient of the selected scalar with respect to the input batch, or
  // with respect to the named activation when `layer` is set.
  GradientResult gradient_of_scalar(const Tensor& batch, const ScalarSelector& selector,
                                    const std::optional<std::string>& layer = std::nullopt);

  // Geometric preprocessing (resize + channel conversion) to the input spec.
  ImageTensor prepare(const ImageTensor& image) const { return fit_to_spec(image, input_spec()); }

  Network& network() noexcept { return network_; }

 private:
  void check_batch(const Tensor& batch) const;

  ModelManifest manifest_;
  Network network_;
  Capabilities caps_;
};

}  // namespace harmony
