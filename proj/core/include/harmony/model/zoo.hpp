#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "harmony/model/adapter.hpp"

namespace harmony {

enum class CnnSize { kSmall, kMedium, kLarge };

// Toy input contract: given geometry, per-channel mean 0.5 and scale 0.25.
InputSpec toy_input_spec(int channels, int side);

// Three CNNs of one design (conv/GELU stages, average pooling, global pooling
// and a linear head) that differ in depth and width. Published layers are
// the post-activation outputs of every conv stage.
ClassifierAdapter build_toy_cnn(CnnSize size, const InputSpec& spec, int num_classes,
                                std::uint64_t seed, const std::string& model_id = "");

// Patch-embedding transformer: conv patchify, learned positions, two pre-norm
// blocks, then the last block's tokens reshaped to the patch grid (published
// as "tokens_grid"), global pooling, layer norm and a linear head.
ClassifierAdapter build_toy_vit(const InputSpec& spec, int num_classes, int patch,
                                std::uint64_t seed, const std::string& model_id = "");

const std::vector<std::string>& known_variants();
bool is_known_variant(const std::string& variant);

// Builds a freshly initialised model from a manifest (variant + seed).
ClassifierAdapter build_from_manifest(const ModelManifest& manifest);

// Resolves model ids to adapters: either a seeded architecture or a weights
// file. Every resolve() returns a new independent instance.
class ModelRegistry {
 public:
  void register_manifest(const ModelManifest& manifest);
  void register_weights(const std::string& model_id, const std::filesystem::path& weights);
  bool contains(const std::string& model_id) const;
  std::vector<std::string> ids() const;
  ClassifierAdapter resolve(const std::string& model_id) const;

 private:
  struct Entry {
    std::optional<ModelManifest> manifest;
    std::optional<std::filesystem::path> weights;
  };
  mutable std::mutex mutex_;
  std::map<std::string, Entry> entries_;
};

}  // namespace harmony
