#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmony/transfer/evaluate.hpp"

namespace harmony {

struct ReportEntry {
  std::string source_model_id;
  AttributionMethod method = AttributionMethod::kSS;
  EvalRecord record;
  Histogram p_pred;
  Histogram p_true;
};

// Results of one source/method run over the source and its targets, in
// column order: source first, then targets, each as I then F.
struct TransferReport {
  std::string source_model_id;
  AttributionMethod method = AttributionMethod::kSS;
  std::vector<std::string> targets;
  F1Averaging f1_averaging = F1Averaging::kMacro;
  int bins = 10;
  bool binarized = false;
  double mean_mask_area = 0.0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ReportEntry> entries;

  // Entry for (target, mode), or nullptr.
  const ReportEntry* find(const std::string& target, InputMode mode) const;
  // Models in column order (source, then targets).
  std::vector<std::string> models() const;
  // Completeness and per-record invariants; throws EvaluationError.
  void validate() const;
};

nlohmann::json to_json(const TransferReport& report);
TransferReport report_from_json(const nlohmann::json& j);
TransferReport read_report_json(const std::filesystem::path& path);

// Safe file stem for per-record outputs, e.g. "cnn-large__F".
std::string record_stem(const ReportEntry& entry);

// Writes report.csv, report.json, examples/<stem>.csv and
// histograms/<stem>__{p_pred,p_true}.csv under `dir`. Every file is
// rendered before the first one is written.
void write_report(const TransferReport& report, const std::filesystem::path& dir);

std::string report_csv(const std::vector<const TransferReport*>& reports);
std::string examples_csv(const EvalRecord& record);
std::string histogram_csv(const Histogram& histogram);

// Markdown table with one accuracy row (percent, two decimals) and one F1 row
// (two decimals) per report, and an "<model> (I)" / "<model> (F)" column pair
// per model. All reports must cover the same models.
std::string render_table(const std::vector<TransferReport>& reports);

}  // namespace harmony
