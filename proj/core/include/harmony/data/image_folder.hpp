#pragma once

#include <filesystem>
#include <optional>

#include "harmony/data/dataset.hpp"

namespace harmony {

// Loads `root/<class_name>/<file>` or, when `manifest` is given, the lines
// `relative_path<TAB>class_name` of that file (paths relative to `root`).
// Ids are the root-relative paths with '/' separators. Class names are sorted
// in the subdirectory convention and in first-appearance order for manifests.
Dataset load_image_folder(const std::filesystem::path& root,
                          const std::optional<std::filesystem::path>& manifest = std::nullopt,
                          const std::string& tag = "");

// Writes one PNG per example plus `manifest.tsv` in the loader's format.
void export_image_folder(const Dataset& dataset, const std::filesystem::path& root);

}  // namespace harmony
