#pragma once

#include <filesystem>

#include "harmony/model/adapter.hpp"

namespace harmony {

// Single-file container: 8-byte magic "HRMWGT01", little-endian u64 header
// length, JSON header (manifest + ordered array index), then the arrays as
// little-endian float64 in index order. See docs/formats.md.
void save_weights(const ClassifierAdapter& adapter, const std::filesystem::path& path);

// Rebuilds the architecture from the stored manifest and loads the arrays.
ClassifierAdapter load_weights(const std::filesystem::path& path);

// Loads into an existing adapter. Throws ModelError when the stored manifest
// disagrees on variant, class count or input spec, or when any array is
// missing or differently shaped.
void load_weights_into(ClassifierAdapter& adapter, const std::filesystem::path& path);

ModelManifest read_weights_manifest(const std::filesystem::path& path);

}  // namespace harmony
