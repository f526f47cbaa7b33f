#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmony/attribution/attribution_map.hpp"
#include "harmony/data/dataset.hpp"
#include "harmony/data/preprocess.hpp"
#include "harmony/model/adapter.hpp"
#include "harmony/model/layers.hpp"

namespace harmony {

enum class ObjectiveMode {
  kEntropy,  // mean entropy of the model output over composites
  kLabelCe,  // mean -log p_label over composites
};

const char* to_string(ObjectiveMode mode);
ObjectiveMode parse_objective_mode(const std::string& text);

// Mask optimisation hyper-parameters. The mask is M = up(sigmoid(theta)),
// with theta on a mask_grid × mask_grid lattice (0 = input resolution) and
// `up` the bilinear resampler.
struct SSConfig {
  int steps = 200;
  double step_size = 8.0;
  int baselines_per_step = 8;
  double sparsity_weight = 0.5;  // weight of mean(M)
  double tv_weight = 0.0;        // weight of the mean squared neighbour difference of M
  ObjectiveMode objective_mode = ObjectiveMode::kEntropy;
  double mask_init = 0.5;
  std::uint64_t seed = 0;
  int mask_grid = 0;
  bool resample_baselines = true;  // fresh baselines every step

  void validate() const;
  // Stable hex digest of every field; keys the attribution cache.
  std::string hash() const;
  friend bool operator==(const SSConfig&, const SSConfig&) = default;
};

void to_json(nlohmann::json& j, const SSConfig& c);
void from_json(const nlohmann::json& j, SSConfig& c);

// Shannon entropy in nats with 0·log 0 = 0. Throws ParameterError when p is
// not on the probability simplex within 1e-5.
double entropy(std::span<const double> p);

// x̃_j = M ⊙ x + (1 − M) ⊙ x̄_j with M broadcast over channels. `mask` is
// H×W row-major.
std::vector<ImageTensor> composite_sample(const ImageTensor& x, std::span<const double> mask,
                                          const std::vector<ImageTensor>& baselines);
std::vector<ImageTensor> composite_sample(const ImageTensor& x, const AttributionMap& mask,
                                          const std::vector<ImageTensor>& baselines);

// Source of baseline images x̄, already fitted to the source model's input
// geometry. Never returns the image under attribution.
class CompositeSampler {
 public:
  CompositeSampler(const Dataset& baseline_source, const InputSpec& spec);
  // Always yields exactly `baselines`, in order, whatever k and the excluded id.
  static CompositeSampler fixed(std::vector<ImageTensor> baselines);

  std::vector<ImageTensor> draw(int k, const std::string& exclude_id, Rng& rng) const;
  std::size_t pool_size() const { return images_.size(); }
  bool is_fixed() const { return fixed_; }

 private:
  CompositeSampler() = default;
  std::vector<ImageTensor> images_;
  std::vector<std::string> ids_;
  bool fixed_ = false;
};

struct ObjectiveValue {
  double value = 0.0;
  std::vector<double> gradient;  // d value / d theta, theta layout
};

// Objective at mask logits `theta` for image `x` (fitted to the model input)
// over the given baselines, with analytic gradient.
ObjectiveValue ss_objective(ClassifierAdapter& adapter, const ImageTensor& x,
                            std::span<const double> theta, const std::vector<ImageTensor>& baselines,
                            const SSConfig& config, int label);

// Same, drawing config.baselines_per_step baselines from `sampler`.
ObjectiveValue ss_objective(ClassifierAdapter& adapter, const LabeledExample& example,
                            std::span<const double> theta, const CompositeSampler& sampler,
                            const SSConfig& config, Rng& rng);

// Side length of the theta lattice for an input of the given size.
std::pair<int, int> mask_lattice(const SSConfig& config, int height, int width);

// Mask M = up(sigmoid(theta)) at input resolution.
std::vector<double> mask_from_logits(std::span<const double> theta, const SSConfig& config,
                                     int height, int width);

struct SSResult {
  AttributionMap map;
  double initial_objective = 0.0;  // on a fixed evaluation baseline set
  double final_objective = 0.0;    // same baseline set
  std::vector<double> theta;
};

// Plain gradient descent on theta from logit(mask_init), or from
// `initial_theta` when given, with fresh baselines per step. Throws
// OptimizerError carrying the step index if the objective turns non-finite.
SSResult optimize_ss_mask(ClassifierAdapter& adapter, const LabeledExample& example,
                          const CompositeSampler& sampler, const SSConfig& config,
                          const std::optional<std::vector<double>>& initial_theta = std::nullopt);

}  // namespace harmony
