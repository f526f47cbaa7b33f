#include "harmony/model/zoo.hpp"

#include "harmony/error.hpp"
#include "harmony/hashing.hpp"
#include "harmony/model/weights.hpp"

namespace harmony {
namespace {

struct CnnStage {
  int channels;
  bool pool_after;
};

std::vector<CnnStage> cnn_stages(CnnSize size) {
  switch (size) {
    case CnnSize::kSmall: return {{8, true}, {16, false}};
    case CnnSize::kMedium: return {{12, true}, {24, false}, {24, false}};
    case CnnSize::kLarge: return {{16, false}, {16, true}, {32, false}, {32, false}};
  }
  return {};
}

const char* cnn_variant(CnnSize size) {
  switch (size) {
    case CnnSize::kSmall: return "cnn-small";
    case CnnSize::kMedium: return "cnn-medium";
    case CnnSize::kLarge: return "cnn-large";
  }
  return "cnn-small";
}

}  // namespace

InputSpec toy_input_spec(int channels, int side) {
  InputSpec spec;
  spec.channels = channels;
  spec.height = side;
  spec.width = side;
  spec.mean.assign(static_cast<std::size_t>(channels), 0.5);
  spec.scale.assign(static_cast<std::size_t>(channels), 0.25);
  return spec;
}

ClassifierAdapter build_toy_cnn(CnnSize size, const InputSpec& spec, int num_classes,
                                std::uint64_t seed, const std::string& model_id) {
  spec.validate();
  if (num_classes < 2) throw ParameterError("num_classes must be at least 2");
  Rng rng(derive_seed(seed, "init"));

  Network net;
  net.add("normalize", std::make_unique<Normalize>(spec.mean, spec.scale));
  int in_c = spec.channels;
  int h = spec.height;
  int stage_index = 0;
  for (const auto& stage : cnn_stages(size)) {
    ++stage_index;
    const std::string n = std::to_string(stage_index);
    net.add("conv" + n, std::make_unique<Conv2d>(in_c, stage.channels, 3, 1, 1, rng));
    net.add("block" + n, std::make_unique<Gelu>(), /*published=*/true);
    if (stage.pool_after && h >= 4) {
      net.add("pool" + n, std::make_unique<AvgPool2d>(2));
      h /= 2;
    }
    in_c = stage.channels;
  }
  net.add("gap", std::make_unique<GlobalAvgPool>());
  net.add("head", std::make_unique<Linear>(in_c, num_classes, rng));

  ModelManifest m;
  m.variant = cnn_variant(size);
  m.model_id = model_id.empty() ? m.variant : model_id;
  m.input_spec = spec;
  m.num_classes = num_classes;
  m.seed = seed;
  return ClassifierAdapter(std::move(m), std::move(net));
}

ClassifierAdapter build_toy_vit(const InputSpec& spec, int num_classes, int patch,
                                std::uint64_t seed, const std::string& model_id) {
  spec.validate();
  if (num_classes < 2) throw ParameterError("num_classes must be at least 2");
  if (patch <= 0 || spec.height % patch != 0 || spec.width % patch != 0) {
    throw ParameterError("input " + std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                         " is not divisible by patch " + std::to_string(patch));
  }
  constexpr int kDim = 32;
  constexpr int kHeads = 2;
  constexpr int kMlp = 64;
  constexpr int kBlocks = 2;
  const int gh = spec.height / patch;
  const int gw = spec.width / patch;
  Rng rng(derive_seed(seed, "init"));

  Network net;
  net.add("normalize", std::make_unique<Normalize>(spec.mean, spec.scale));
  net.add("patch_embed", std::make_unique<Conv2d>(spec.channels, kDim, patch, patch, 0, rng));
  net.add("tokens", std::make_unique<GridToTokens>());
  net.add("positions", std::make_unique<PositionEmbedding>(gh * gw, kDim, rng));
  for (int b = 1; b <= kBlocks; ++b) {
    Sequential attn;
    attn.add(std::make_unique<LayerNorm>(kDim));
    attn.add(std::make_unique<MultiHeadSelfAttention>(kDim, kHeads, rng));
    Sequential mlp;
    mlp.add(std::make_unique<LayerNorm>(kDim));
    mlp.add(std::make_unique<Linear>(kDim, kMlp, rng));
    mlp.add(std::make_unique<Gelu>());
    mlp.add(std::make_unique<Linear>(kMlp, kDim, rng));
    const std::string n = std::to_string(b);
    net.add("block" + n + "_attn", std::make_unique<Residual>(std::move(attn)));
    net.add("block" + n + "_mlp", std::make_unique<Residual>(std::move(mlp)));
  }
  net.add("tokens_grid", std::make_unique<TokensToGrid>(gh, gw), /*published=*/true);
  net.add("gap", std::make_unique<GlobalAvgPool>());
  net.add("head_norm", std::make_unique<LayerNorm>(kDim));
  net.add("head", std::make_unique<Linear>(kDim, num_classes, rng));

  ModelManifest m;
  m.variant = "vit-tiny";
  m.model_id = model_id.empty() ? m.variant : model_id;
  m.input_spec = spec;
  m.num_classes = num_classes;
  m.seed = seed;
  m.patch = patch;
  return ClassifierAdapter(std::move(m), std::move(net));
}

const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> v = {"cnn-small", "cnn-medium", "cnn-large", "vit-tiny"};
  return v;
}

bool is_known_variant(const std::string& variant) {
  for (const auto& v : known_variants()) {
    if (v == variant) return true;
  }
  return false;
}

ClassifierAdapter build_from_manifest(const ModelManifest& m) {
  ClassifierAdapter a;
  if (m.variant == "cnn-small") {
    a = build_toy_cnn(CnnSize::kSmall, m.input_spec, m.num_classes, m.seed, m.model_id);
  } else if (m.variant == "cnn-medium") {
    a = build_toy_cnn(CnnSize::kMedium, m.input_spec, m.num_classes, m.seed, m.model_id);
  } else if (m.variant == "cnn-large") {
    a = build_toy_cnn(CnnSize::kLarge, m.input_spec, m.num_classes, m.seed, m.model_id);
  } else if (m.variant == "vit-tiny") {
    a = build_toy_vit(m.input_spec, m.num_classes, m.patch, m.seed, m.model_id);
  } else {
    throw ModelError("unknown model variant '" + m.variant + "'");
  }
  a.mutable_manifest().dataset_tag = m.dataset_tag;
  return a;
}

void ModelRegistry::register_manifest(const ModelManifest& manifest) {
  if (!is_known_variant(manifest.variant)) {
    throw ModelError("unknown model variant '" + manifest.variant + "'");
  }
  std::lock_guard lock(mutex_);
  entries_[manifest.model_id] = Entry{manifest, std::nullopt};
}

void ModelRegistry::register_weights(const std::string& model_id,
                                     const std::filesystem::path& weights) {
  std::lock_guard lock(mutex_);
  entries_[model_id] = Entry{std::nullopt, weights};
}

bool ModelRegistry::contains(const std::string& model_id) const {
  std::lock_guard lock(mutex_);
  return entries_.count(model_id) > 0;
}

std::vector<std::string> ModelRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

ClassifierAdapter ModelRegistry::resolve(const std::string& model_id) const {
  Entry entry;
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(model_id);
    if (it == entries_.end()) throw ModelError("unknown model id '" + model_id + "'");
    entry = it->second;
  }
  if (entry.weights) {
    ClassifierAdapter a = load_weights(*entry.weights);
    a.mutable_manifest().model_id = model_id;
    return a;
  }
  return build_from_manifest(*entry.manifest);
}

}  // namespace harmony
