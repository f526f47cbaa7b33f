#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "harmony/model/layers.hpp"

namespace harmony {

// Named chain of layers mapping an NCHW batch to (N, num_classes) logits.
// Layers flagged `published` expose their (N, C, h, w) output as an
// activation that gradients can be taken against.
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Network& add(std::string name, std::unique_ptr<Layer> layer, bool published = false);

  // Runs the chain. When `capture` names a layer, its output is copied into
  // `*captured`.
  Tensor forward(const Tensor& x, const std::string* capture = nullptr, Tensor* captured = nullptr);

  // Backpropagates d(scalar)/d(logits). When `capture` names a layer, the
  // gradient with respect to that layer's output is copied into `*captured`;
  // with `stop_at_capture` the pass ends there and an empty tensor is
  // returned instead of the input gradient.
  Tensor backward(const Tensor& grad_logits, BackwardMode mode, const std::string* capture = nullptr,
                  Tensor* captured = nullptr, bool stop_at_capture = false);

  std::vector<std::string> layer_names() const;
  std::vector<std::string> published_layers() const;
  bool has_layer(const std::string& name) const;
  bool is_published(const std::string& name) const;

  // Dotted names: "<layer>.<param path>".
  std::vector<ParameterRef> parameters();
  void zero_grad();
  std::size_t parameter_count();

 private:
  struct Entry {
    std::string name;
    std::unique_ptr<Layer> layer;
    bool published = false;
  };
  std::vector<Entry> layers_;
};

}  // namespace harmony
