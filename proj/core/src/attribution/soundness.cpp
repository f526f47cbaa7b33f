#include "harmony/attribution/soundness.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "harmony/error.hpp"
#include "harmony/hashing.hpp"

namespace harmony {

const char* to_string(ObjectiveMode mode) {
  return mode == ObjectiveMode::kEntropy ? "entropy" : "label-ce";
}

ObjectiveMode parse_objective_mode(const std::string& text) {
  if (text == "entropy") return ObjectiveMode::kEntropy;
  if (text == "label-ce") return ObjectiveMode::kLabelCe;
  throw ParameterError("unknown objective mode '" + text + "' (expected entropy or label-ce)");
}

void SSConfig::validate() const {
  if (steps < 1) throw ParameterError("ss.steps must be at least 1");
  if (baselines_per_step < 1) throw ParameterError("ss.baselines_per_step must be at least 1");
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ParameterError("ss.step_size must be >= 0");
  if (!(sparsity_weight >= 0.0)) throw ParameterError("ss.sparsity_weight must be >= 0");
  if (!(tv_weight >= 0.0)) throw ParameterError("ss.tv_weight must be >= 0");
  if (!(mask_init > 0.0 && mask_init < 1.0)) throw ParameterError("ss.mask_init must lie in (0,1)");
  if (mask_grid < 0) throw ParameterError("ss.mask_grid must be >= 0");
}

void to_json(nlohmann::json& j, const SSConfig& c) {
  j = nlohmann::json{{"steps", c.steps},
                     {"step_size", c.step_size},
                     {"baselines_per_step", c.baselines_per_step},
                     {"sparsity_weight", c.sparsity_weight},
                     {"tv_weight", c.tv_weight},
                     {"objective_mode", to_string(c.objective_mode)},
                     {"mask_init", c.mask_init},
                     {"seed", c.seed},
                     {"mask_grid", c.mask_grid},
                     {"resample_baselines", c.resample_baselines}};
}

void from_json(const nlohmann::json& j, SSConfig& c) {
  const SSConfig d;
  c.steps = j.value("steps", d.steps);
  c.step_size = j.value("step_size", d.step_size);
  c.baselines_per_step = j.value("baselines_per_step", d.baselines_per_step);
  c.sparsity_weight = j.value("sparsity_weight", d.sparsity_weight);
  c.tv_weight = j.value("tv_weight", d.tv_weight);
  c.objective_mode = parse_objective_mode(j.value("objective_mode", std::string(to_string(d.objective_mode))));
  c.mask_init = j.value("mask_init", d.mask_init);
  c.seed = j.value("seed", d.seed);
  c.mask_grid = j.value("mask_grid", d.mask_grid);
  c.resample_baselines = j.value("resample_baselines", d.resample_baselines);
}

std::string SSConfig::hash() const {
  nlohmann::json j = *this;
  j["method"] = "SS";
  return hex64(fnv1a64(j.dump()));
}

double entropy(std::span<const double> p) {
  if (p.empty()) throw ParameterError("entropy of an empty vector");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < -1e-5) throw ParameterError("entropy input is not a probability vector");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-5) throw ParameterError("entropy input does not sum to 1");
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::vector<ImageTensor> composite_sample(const ImageTensor& x, std::span<const double> mask,
                                          const std::vector<ImageTensor>& baselines) {
  if (mask.size() != x.plane_size()) {
    throw ParameterError("mask size does not match the image plane");
  }
  std::vector<ImageTensor> out;
  out.reserve(baselines.size());
  const std::size_t plane = x.plane_size();
  for (const auto& b : baselines) {
    if (!b.same_shape(x)) throw ParameterError("baseline shape does not match the image");
    ImageTensor y(x.channels(), x.height(), x.width());
    for (int c = 0; c < x.channels(); ++c) {
      const double* xs = x.values().data() + c * plane;
      const double* bs = b.values().data() + c * plane;
      double* ys = y.values().data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) ys[i] = mask[i] * xs[i] + (1.0 - mask[i]) * bs[i];
    }
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<ImageTensor> composite_sample(const ImageTensor& x, const AttributionMap& mask,
                                          const std::vector<ImageTensor>& baselines) {
  if (mask.height != x.height() || mask.width != x.width()) {
    throw ParameterError("mask shape does not match the image");
  }
  std::vector<double> m(mask.values.begin(), mask.values.end());
  return composite_sample(x, m, baselines);
}

// ------------------------------------------------------------------ sampler

CompositeSampler::CompositeSampler(const Dataset& baseline_source, const InputSpec& spec) {
  images_.reserve(baseline_source.size());
  for (const auto& ex : baseline_source) {
    images_.push_back(fit_to_spec(ex.image, spec));
    ids_.push_back(ex.id);
  }
  if (images_.empty()) throw ParameterError("baseline source is empty");
}

CompositeSampler CompositeSampler::fixed(std::vector<ImageTensor> baselines) {
  if (baselines.empty()) throw ParameterError("fixed baseline set is empty");
  CompositeSampler s;
  s.images_ = std::move(baselines);
  s.fixed_ = true;
  return s;
}

std::vector<ImageTensor> CompositeSampler::draw(int k, const std::string& exclude_id, Rng& rng) const {
  if (fixed_) return images_;
  const std::size_t n = images_.size();
  std::size_t excluded = 0;
  for (const auto& id : ids_) excluded += id == exclude_id ? 1 : 0;
  if (excluded == n) throw ParameterError("no baseline available other than '" + exclude_id + "'");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<ImageTensor> out;
  out.reserve(static_cast<std::size_t>(k));
  while (static_cast<int>(out.size()) < k) {
    const std::size_t i = pick(rng);
    if (ids_[i] == exclude_id) continue;
    out.push_back(images_[i]);
  }
  return out;
}

// ---------------------------------------------------------------- objective

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

struct MaskState {
  int grid_h, grid_w, h, w;
  std::vector<double> s;     // sigmoid(theta) on the lattice
  std::vector<double> mask;  // at input resolution
};

MaskState expand(std::span<const double> theta, const SSConfig& config, int h, int w) {
  MaskState st;
  std::tie(st.grid_h, st.grid_w) = mask_lattice(config, h, w);
  st.h = h;
  st.w = w;
  if (theta.size() != static_cast<std::size_t>(st.grid_h) * st.grid_w) {
    throw ParameterError("mask logits have " + std::to_string(theta.size()) + " entries, expected " +
                         std::to_string(st.grid_h * st.grid_w));
  }
  st.s.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) st.s[i] = sigmoid(theta[i]);
  st.mask = resize_plane(st.s, st.grid_h, st.grid_w, h, w);
  return st;
}

}  // namespace

std::pair<int, int> mask_lattice(const SSConfig& config, int height, int width) {
  if (config.mask_grid <= 0) return {height, width};
  return {config.mask_grid, config.mask_grid};
}

std::vector<double> mask_from_logits(std::span<const double> theta, const SSConfig& config,
                                     int height, int width) {
  return expand(theta, config, height, width).mask;
}

ObjectiveValue ss_objective(ClassifierAdapter& adapter, const ImageTensor& x,
                            std::span<const double> theta, const std::vector<ImageTensor>& baselines,
                            const SSConfig& config, int label) {
  if (baselines.empty()) throw ParameterError("ss_objective needs at least one baseline");
  const int h = x.height(), w = x.width(), channels = x.channels();
  const MaskState st = expand(theta, config, h, w);
  const std::size_t plane = x.plane_size();
  const double k = static_cast<double>(baselines.size());

  const Tensor batch = stack_images(composite_sample(x, st.mask, baselines));
  const ScalarSelector selector = config.objective_mode == ObjectiveMode::kEntropy
                                      ? ScalarSelector::entropy(1.0 / k)
                                      : ScalarSelector::neg_log_prob(label, 1.0 / k);
  const GradientResult g = adapter.gradient_of_scalar(batch, selector);

  // d/dM of the data term: Σ_j Σ_c g_jc ⊙ (x_c − x̄_jc)
  std::vector<double> dmask(plane, 0.0);
  for (std::size_t j = 0; j < baselines.size(); ++j) {
    const double* bj = baselines[j].values().data();
    const double* gj = g.gradient.data() + j * plane * channels;
    for (int c = 0; c < channels; ++c) {
      const double* xs = x.values().data() + c * plane;
      const double* bs = bj + c * plane;
      const double* gs = gj + c * plane;
      for (std::size_t i = 0; i < plane; ++i) dmask[i] += gs[i] * (xs[i] - bs[i]);
    }
  }

  double value = g.value;
  double mass = 0.0;
  for (double m : st.mask) mass += m;
  value += config.sparsity_weight * mass / static_cast<double>(plane);
  const double dmass = config.sparsity_weight / static_cast<double>(plane);
  for (double& d : dmask) d += dmass;

  if (config.tv_weight > 0.0) {
    const double pairs = static_cast<double>(h * (w - 1) + (h - 1) * w);
    if (pairs > 0) {
      double tv = 0.0;
      const double scale = config.tv_weight / pairs;
      auto pair = [&](std::size_t a, std::size_t b) {
        const double d = st.mask[a] - st.mask[b];
        tv += d * d;
        dmask[a] += 2.0 * scale * d;
        dmask[b] -= 2.0 * scale * d;
      };
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const std::size_t i = static_cast<std::size_t>(y) * w + xx;
          if (xx + 1 < w) pair(i, i + 1);
          if (y + 1 < h) pair(i, i + static_cast<std::size_t>(w));
        }
      }
      value += scale * tv;
    }
  }

  ObjectiveValue out;
  out.value = value;
  out.gradient.resize(st.s.size());
  if (st.grid_h == h && st.grid_w == w) {
    out.gradient = dmask;
  } else {
    BilinearResampler(st.grid_h, st.grid_w, h, w).apply_adjoint(dmask.data(), out.gradient.data());
  }
  for (std::size_t i = 0; i < st.s.size(); ++i) out.gradient[i] *= st.s[i] * (1.0 - st.s[i]);
  return out;
}

ObjectiveValue ss_objective(ClassifierAdapter& adapter, const LabeledExample& example,
                            std::span<const double> theta, const CompositeSampler& sampler,
                            const SSConfig& config, Rng& rng) {
  const ImageTensor x = adapter.prepare(example.image);
  return ss_objective(adapter, x, theta, sampler.draw(config.baselines_per_step, example.id, rng),
                      config, example.label);
}

SSResult optimize_ss_mask(ClassifierAdapter& adapter, const LabeledExample& example,
                          const CompositeSampler& sampler, const SSConfig& config,
                          const std::optional<std::vector<double>>& initial_theta) {
  config.validate();
  if (!adapter.capabilities().input_gradients) {
    throw ModelError("model '" + adapter.model_id() + "' does not support input gradients");
  }
  const ImageTensor x = adapter.prepare(example.image);
  const int h = x.height(), w = x.width();
  const auto [gh, gw] = mask_lattice(config, h, w);

  std::vector<double> theta(static_cast<std::size_t>(gh) * gw,
                            std::log(config.mask_init / (1.0 - config.mask_init)));
  if (initial_theta) {
    if (initial_theta->size() != theta.size()) throw ParameterError("initial mask logits have the wrong size");
    theta = *initial_theta;
  }

  Rng step_rng(derive_seed(config.seed, "ss-steps/" + example.id));
  Rng eval_rng(derive_seed(config.seed, "ss-eval/" + example.id));
  const std::vector<ImageTensor> eval_set = sampler.draw(config.baselines_per_step, example.id, eval_rng);

  SSResult result;
  result.initial_objective = ss_objective(adapter, x, theta, eval_set, config, example.label).value;
  if (!std::isfinite(result.initial_objective)) {
    throw OptimizerError("non-finite objective for '" + example.id + "' at step 0", 0);
  }

  for (int step = 0; step < config.steps; ++step) {
    const std::vector<ImageTensor> baselines =
        config.resample_baselines ? sampler.draw(config.baselines_per_step, example.id, step_rng) : eval_set;
    const ObjectiveValue obj = ss_objective(adapter, x, theta, baselines, config, example.label);
    bool finite = std::isfinite(obj.value);
    for (double g : obj.gradient) finite = finite && std::isfinite(g);
    if (!finite) {
      throw OptimizerError("non-finite objective for '" + example.id + "' at step " +
                               std::to_string(step),
                           step);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= config.step_size * obj.gradient[i];
  }

  result.final_objective = ss_objective(adapter, x, theta, eval_set, config, example.label).value;
  const std::vector<double> mask = mask_from_logits(theta, config, h, w);

  AttributionMap& map = result.map;
  map.height = h;
  map.width = w;
  map.values.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    map.values[i] = static_cast<float>(std::clamp(mask[i], 0.0, 1.0));
  }
  map.image_id = example.id;
  map.source_model_id = adapter.model_id();
  map.method = AttributionMethod::kSS;
  map.config_hash = config.hash();
  result.theta = std::move(theta);
  return result;
}

}  // namespace harmony
