#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "harmony/attribution/attribution_map.hpp"

namespace harmony {

struct CacheKey {
  std::string image_id;
  std::string source_model_id;
  AttributionMethod method = AttributionMethod::kSS;
  std::string config_hash;

  std::string describe() const;
};

// Environment variable overriding the cache root chosen by the CLI.
inline constexpr const char* kCacheRootEnv = "HARMONY_CACHE_DIR";

// On-disk attribution store:
//   <root>/<source_model_id>/<method>/<config_hash>/<image file>.amap
//   <root>/<source_model_id>/<method>/<config_hash>/manifest.json
// Array files hold an 8-byte magic "HRMAMAP1", little-endian u32 height and
// width, then height*width little-endian float32 values (docs/formats.md).
// Readers may run concurrently; writers are serialised.
class AttributionCache {
 public:
  explicit AttributionCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  // Writes the entry (last write wins; overwrites are logged) and records
  // `parameters` in the directory manifest.
  void put(const AttributionMap& map, const nlohmann::json& parameters = nlohmann::json::object());
  // Absent when no entry exists; throws CacheError naming the key when the
  // entry is unreadable.
  std::optional<AttributionMap> get(const CacheKey& key) const;
  bool contains(const CacheKey& key) const;

  std::filesystem::path entry_path(const CacheKey& key) const;

 private:
  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
};

// File-name-safe encoding of an image id (percent-encodes anything outside
// [A-Za-z0-9._-]).
std::string encode_image_id(const std::string& id);

}  // namespace harmony
