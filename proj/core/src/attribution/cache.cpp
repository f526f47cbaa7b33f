#include "harmony/attribution/cache.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "harmony/error.hpp"
#include "../file_util.hpp"

namespace harmony {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'R', 'M', 'A', 'M', 'A', 'P', '1'};
constexpr const char* kExtension = ".amap";
constexpr std::uint32_t kMaxSide = 1u << 16;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

std::string CacheKey::describe() const {
  return source_model_id + "/" + to_string(method) + "/" + config_hash + "/" + image_id;
}

std::string encode_image_id(const std::string& id) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  // "." and ".." are not usable as file names.
  if (out == "." || out == "..") {
    out = out.size() == 1 ? "%2E" : "%2E%2E";
  }
  return out;
}

AttributionCache::AttributionCache(fs::path root) : root_(std::move(root)) {}

fs::path AttributionCache::entry_path(const CacheKey& key) const {
  return root_ / encode_image_id(key.source_model_id) / to_string(key.method) /
         encode_image_id(key.config_hash) / (encode_image_id(key.image_id) + kExtension);
}

void AttributionCache::put(const AttributionMap& map, const nlohmann::json& parameters) {
  map.validate();
  if (map.image_id.empty() || map.source_model_id.empty() || map.config_hash.empty()) {
    throw CacheError("attribution map lacks an image id, source model or config hash");
  }
  const CacheKey key{map.image_id, map.source_model_id, map.method, map.config_hash};
  const fs::path path = entry_path(key);

  std::ostringstream bytes(std::ios::binary);
  bytes.write(kMagic.data(), kMagic.size());
  put_u32(bytes, static_cast<std::uint32_t>(map.height));
  put_u32(bytes, static_cast<std::uint32_t>(map.width));
  for (float v : map.values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));

  std::unique_lock lock(mutex_);
  try {
    fs::create_directories(path.parent_path());
    const fs::path manifest = path.parent_path() / "manifest.json";
    if (!fs::exists(manifest)) {
      nlohmann::json m = {{"source_model_id", map.source_model_id},
                          {"method", to_string(map.method)},
                          {"config_hash", map.config_hash},
                          {"parameters", parameters},
                          {"created_utc", utc_now()},
                          {"array_format", "HRMAMAP1 float32 little-endian"}};
      detail::write_file_atomic(manifest, m.dump(2) + "\n");
    }
    if (fs::exists(path)) spdlog::debug("overwriting cache entry {}", key.describe());
    detail::write_file_atomic(path, bytes.str());
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cache write failed for ") + key.describe() + ": " + e.what());
  }
}

std::optional<AttributionMap> AttributionCache::get(const CacheKey& key) const {
  const fs::path path = entry_path(key);
  std::shared_lock lock(mutex_);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;

  auto corrupt = [&](const std::string& why) {
    return CacheError("corrupt cache entry " + key.describe() + " (" + path.string() + "): " + why);
  };
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw corrupt("bad magic");
  std::uint32_t h = 0, w = 0;
  if (!get_u32(in, h) || !get_u32(in, w)) throw corrupt("truncated header");
  if (h == 0 || w == 0 || h > kMaxSide || w > kMaxSide) throw corrupt("bad shape");

  AttributionMap map;
  map.height = static_cast<int>(h);
  map.width = static_cast<int>(w);
  map.values.resize(static_cast<std::size_t>(h) * w);
  for (float& v : map.values) {
    std::uint32_t bits = 0;
    if (!get_u32(in, bits)) throw corrupt("truncated data");
    v = std::bit_cast<float>(bits);
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) throw corrupt("value outside [0,1]");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw corrupt("trailing bytes");
  map.image_id = key.image_id;
  map.source_model_id = key.source_model_id;
  map.method = key.method;
  map.config_hash = key.config_hash;
  return map;
}

bool AttributionCache::contains(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  return fs::exists(entry_path(key));
}

}  // namespace harmony
