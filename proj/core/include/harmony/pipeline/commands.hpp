#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmony/model/adapter.hpp"
#include "harmony/pipeline/config.hpp"
#include "harmony/transfer/report.hpp"

namespace harmony {

// Each command returns a JSON summary of what it did.

// Trains every configured model on the train split; writes weights and
// <output_dir>/history.csv. Variants are checked before any training starts.
nlohmann::json cmd_train(const RunConfig& config);

// Attributes every test image on the source model into the cache. Cache hits
// are skipped. Without keep_going the first failing image aborts the run.
nlohmann::json cmd_attribute(const RunConfig& config, bool keep_going = false);

// Runs the transfer protocol from cached attributions and writes the report
// files under config.report_path().
nlohmann::json cmd_evaluate(const RunConfig& config);

// Histogram panels (SVG) per (model, mode) plus a combined grid, read from
// the report in `report_dir`; plots go to `out_dir` (default
// <report_dir>/plots). When `config` asks for triptychs, also writes
// input/map/feature PNGs for the first test images.
nlohmann::json cmd_plot(const std::filesystem::path& report_dir,
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                        const RunConfig* config = nullptr);

// Renders report.json files as one comparison table; writes it to `output`
// when given and returns it under "table".
nlohmann::json cmd_report(const std::vector<std::filesystem::path>& reports,
                          const std::optional<std::filesystem::path>& output = std::nullopt);

// Loads the weights of a configured model, checking they exist.
ClassifierAdapter load_model(const RunConfig& config, const std::string& id);

}  // namespace harmony
