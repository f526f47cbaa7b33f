#include "harmony/model/network.hpp"

#include "harmony/error.hpp"

namespace harmony {

Network::Network(const Network& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& e : other.layers_) layers_.push_back({e.name, e.layer->clone(), e.published});
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

Network& Network::add(std::string name, std::unique_ptr<Layer> layer, bool published) {
  if (has_layer(name)) throw ParameterError("duplicate layer name '" + name + "'");
  layers_.push_back({std::move(name), std::move(layer), published});
  return *this;
}

Tensor Network::forward(const Tensor& x, const std::string* capture, Tensor* captured) {
  Tensor h = x;
  for (auto& e : layers_) {
    h = e.layer->forward(h);
    if (capture && captured && e.name == *capture) *captured = h;
  }
  return h;
}

Tensor Network::backward(const Tensor& grad_logits, BackwardMode mode, const std::string* capture,
                         Tensor* captured, bool stop_at_capture) {
  Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    if (capture && it->name == *capture) {
      if (captured) *captured = g;
      if (stop_at_capture) return {};
    }
    g = it->layer->backward(g, mode);
  }
  return g;
}

std::vector<std::string> Network::layer_names() const {
  std::vector<std::string> out;
  for (const auto& e : layers_) out.push_back(e.name);
  return out;
}

std::vector<std::string> Network::published_layers() const {
  std::vector<std::string> out;
  for (const auto& e : layers_) {
    if (e.published) out.push_back(e.name);
  }
  return out;
}

bool Network::has_layer(const std::string& name) const {
  for (const auto& e : layers_) {
    if (e.name == name) return true;
  }
  return false;
}

bool Network::is_published(const std::string& name) const {
  for (const auto& e : layers_) {
    if (e.name == name) return e.published;
  }
  return false;
}

std::vector<ParameterRef> Network::parameters() {
  std::vector<ParameterRef> out;
  for (auto& e : layers_) {
    for (auto& p : e.layer->parameters()) out.push_back({e.name + "." + p.name, p.param});
  }
  return out;
}

void Network::zero_grad() {
  for (auto& p : parameters()) p.param->grad.fill(0.0);
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (auto& p : parameters()) n += p.param->value.size();
  return n;
}

}  // namespace harmony
