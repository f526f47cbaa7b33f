#pragma once

#include <nlohmann/json.hpp>

#include "harmony/model/adapter.hpp"

namespace harmony {

void to_json(nlohmann::json& j, const InputSpec& spec);
void from_json(const nlohmann::json& j, InputSpec& spec);
void to_json(nlohmann::json& j, const ModelManifest& m);
void from_json(const nlohmann::json& j, ModelManifest& m);

}  // namespace harmony
