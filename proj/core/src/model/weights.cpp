#include "harmony/model/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "harmony/error.hpp"
#include "harmony/model/manifest_json.hpp"
#include "harmony/model/zoo.hpp"

namespace harmony {

using nlohmann::json;

void to_json(json& j, const InputSpec& s) {
  j = json{{"channels", s.channels}, {"height", s.height}, {"width", s.width},
           {"mean", s.mean},         {"scale", s.scale}};
}

void from_json(const json& j, InputSpec& s) {
  s.channels = j.at("channels").get<int>();
  s.height = j.at("height").get<int>();
  s.width = j.at("width").get<int>();
  s.mean = j.value("mean", std::vector<double>{});
  s.scale = j.value("scale", std::vector<double>{});
}

void to_json(json& j, const ModelManifest& m) {
  j = json{{"model_id", m.model_id},
           {"variant", m.variant},
           {"input_spec", m.input_spec},
           {"num_classes", m.num_classes},
           {"seed", m.seed},
           {"patch", m.patch},
           {"dataset_tag", m.dataset_tag},
           {"format_version", m.format_version}};
}

void from_json(const json& j, ModelManifest& m) {
  m.model_id = j.at("model_id").get<std::string>();
  m.variant = j.at("variant").get<std::string>();
  m.input_spec = j.at("input_spec").get<InputSpec>();
  m.num_classes = j.at("num_classes").get<int>();
  m.seed = j.value("seed", std::uint64_t{0});
  m.patch = j.value("patch", 0);
  m.dataset_tag = j.value("dataset_tag", std::string{});
  m.format_version = j.value("format_version", 0);
}

namespace {

constexpr char kMagic[8] = {'H', 'R', 'M', 'W', 'G', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

struct Container {
  ModelManifest manifest;
  std::map<std::string, Tensor> arrays;
};

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ModelError("'" + path.string() + "' is not a harmony weights file");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (16 + header_len > bytes.size()) throw ModelError("truncated weights header in '" + path.string() + "'");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw ModelError("corrupt weights header in '" + path.string() + "': " + e.what());
  }
  Container c;
  c.manifest = header.at("manifest").get<ModelManifest>();
  if (c.manifest.format_version != kWeightsFormatVersion) {
    throw ModelError("weights file '" + path.string() + "' has format version " +
                     std::to_string(c.manifest.format_version) + ", expected " +
                     std::to_string(kWeightsFormatVersion));
  }
  std::size_t offset = 16 + header_len;
  for (const auto& entry : header.at("arrays")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    const std::size_t need = t.size() * 8;
    if (offset + need > bytes.size()) throw ModelError("truncated array '" + name + "' in '" + path.string() + "'");
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = std::bit_cast<double>(get_u64(bytes.data() + offset + 8 * i));
    }
    offset += need;
    c.arrays.emplace(name, std::move(t));
  }
  return c;
}

void assign(ClassifierAdapter& adapter, const Container& c, const std::filesystem::path& path) {
  for (auto& ref : adapter.network().parameters()) {
    auto it = c.arrays.find(ref.name);
    if (it == c.arrays.end()) {
      throw ModelError("weights file '" + path.string() + "' lacks array '" + ref.name + "'");
    }
    if (it->second.shape() != ref.param->value.shape()) {
      throw ModelError("array '" + ref.name + "' in '" + path.string() + "' has shape " +
                       it->second.shape_string() + ", expected " + ref.param->value.shape_string());
    }
    ref.param->value = it->second;
  }
}

}  // namespace

void save_weights(const ClassifierAdapter& adapter, const std::filesystem::path& path) {
  ClassifierAdapter copy = adapter;
  json index = json::array();
  auto params = copy.network().parameters();
  for (const auto& p : params) index.push_back({{"name", p.name}, {"shape", p.param->value.shape()}});
  const std::string header = json{{"manifest", copy.manifest()}, {"arrays", index}}.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weights file '" + path.string() + "'");
  out.write(kMagic, 8);
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& p : params) {
    for (double v : p.param->value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed writing weights file '" + path.string() + "'");
}

ModelManifest read_weights_manifest(const std::filesystem::path& path) {
  return read_container(path).manifest;
}

ClassifierAdapter load_weights(const std::filesystem::path& path) {
  Container c = read_container(path);
  ClassifierAdapter adapter = build_from_manifest(c.manifest);
  assign(adapter, c, path);
  return adapter;
}

void load_weights_into(ClassifierAdapter& adapter, const std::filesystem::path& path) {
  Container c = read_container(path);
  const auto& m = adapter.manifest();
  if (c.manifest.num_classes != m.num_classes) {
    throw ModelError("weights file '" + path.string() + "' has " +
                     std::to_string(c.manifest.num_classes) + " classes, model '" + m.model_id +
                     "' has " + std::to_string(m.num_classes));
  }
  if (c.manifest.variant != m.variant) {
    throw ModelError("weights file '" + path.string() + "' holds variant '" + c.manifest.variant +
                     "', model is '" + m.variant + "'");
  }
  if (!(c.manifest.input_spec == m.input_spec)) {
    throw ModelError("weights file '" + path.string() + "' has a different input spec");
  }
  assign(adapter, c, path);
  adapter.mutable_manifest().dataset_tag = c.manifest.dataset_tag;
}

}  // namespace harmony
