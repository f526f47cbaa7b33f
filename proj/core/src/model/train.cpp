#include "harmony/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "harmony/error.hpp"
#include "harmony/hashing.hpp"

namespace harmony {

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be at least 1");
  if (batch_size < 1) throw ParameterError("batch_size must be at least 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ParameterError("step_size must be > 0");
  if (optimizer != "sgd-momentum" && optimizer != "sgd" && optimizer != "adam") {
    throw ParameterError("unknown optimizer '" + optimizer + "'");
  }
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::vector<ParameterRef> params)
      : cfg_(cfg), params_(std::move(params)) {
    for (auto& p : params_) {
      first_.emplace_back(p.param->value.shape());
      if (cfg_.optimizer == "adam") second_.emplace_back(p.param->value.shape());
    }
  }

  void step() {
    ++t_;
    const double lr = cfg_.step_size;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& w = params_[i].param->value;
      const Tensor& g = params_[i].param->grad;
      Tensor& m = first_[i];
      if (cfg_.optimizer == "adam") {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        Tensor& v = second_[i];
        const double c1 = 1.0 - std::pow(b1, t_);
        const double c2 = 1.0 - std::pow(b2, t_);
        for (std::size_t j = 0; j < w.size(); ++j) {
          m[j] = b1 * m[j] + (1.0 - b1) * g[j];
          v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
          w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
        }
      } else {
        const double mu = cfg_.optimizer == "sgd" ? 0.0 : cfg_.momentum;
        for (std::size_t j = 0; j < w.size(); ++j) {
          m[j] = mu * m[j] + g[j];
          w[j] -= lr * m[j];
        }
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<ParameterRef> params_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  int t_ = 0;
};

}  // namespace

TrainHistory train(ClassifierAdapter& adapter, const Dataset& train_set, const TrainConfig& config) {
  config.validate();
  if (train_set.num_classes() != adapter.num_classes()) {
    throw ParameterError("dataset has " + std::to_string(train_set.num_classes()) +
                         " classes but model '" + adapter.model_id() + "' has " +
                         std::to_string(adapter.num_classes()));
  }
  if (train_set.empty()) throw ParameterError("training set is empty");

  std::vector<ImageTensor> images;
  images.reserve(train_set.size());
  for (const auto& ex : train_set) images.push_back(adapter.prepare(ex.image));

  Network& net = adapter.network();
  Optimizer opt(config, net.parameters());
  const auto& spec = adapter.input_spec();
  const std::size_t stride = images.front().size();
  const int k = adapter.num_classes();

  std::vector<std::size_t> order(images.size());
  TrainHistory history;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, "epoch/" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const int b = static_cast<int>(end - start);
      Tensor x({b, spec.channels, spec.height, spec.width});
      std::vector<int> labels(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const std::size_t idx = order[start + static_cast<std::size_t>(i)];
        std::copy(images[idx].values().begin(), images[idx].values().end(),
                  x.data() + static_cast<std::size_t>(i) * stride);
        labels[static_cast<std::size_t>(i)] = train_set[idx].label;
      }

      net.zero_grad();
      const Tensor p = softmax_rows(net.forward(x));
      Tensor dz = p;
      for (int i = 0; i < b; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        const double* row = p.data() + static_cast<std::size_t>(i) * k;
        loss_sum -= std::log(std::max(row[y], 1e-300));
        if (std::max_element(row, row + k) - row == y) ++correct;
        dz[static_cast<std::size_t>(i) * k + y] -= 1.0;
      }
      dz *= 1.0 / b;
      if (!std::isfinite(loss_sum)) {
        throw TrainingError("model '" + adapter.model_id() + "' diverged (non-finite loss) in epoch " +
                                std::to_string(epoch),
                            epoch);
      }
      net.backward(dz, BackwardMode::kAccumulateParams);
      opt.step();
    }
    const double n = static_cast<double>(order.size());
    history.epochs.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
  }
  adapter.mutable_manifest().dataset_tag = train_set.tag();
  return history;
}

}  // namespace harmony
