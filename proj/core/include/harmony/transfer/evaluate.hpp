#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "harmony/attribution/attribution_map.hpp"
#include "harmony/data/dataset.hpp"
#include "harmony/features/extract.hpp"
#include "harmony/model/adapter.hpp"
#include "harmony/transfer/metrics.hpp"

namespace harmony {

enum class InputMode { kImage, kFeature };

const char* to_string(InputMode mode);  // "I" / "F"
InputMode parse_input_mode(const std::string& text);

struct ExampleRow {
  std::string image_id;
  int true_label = 0;
  int pred = 0;
  double p_true = 0.0;
  double p_pred = 0.0;  // probability of the predicted class, so p_pred >= p_true

  friend bool operator==(const ExampleRow&, const ExampleRow&) = default;
};

struct EvalRecord {
  std::string target_model_id;
  InputMode mode = InputMode::kImage;
  std::optional<std::string> source_model_id;  // feature mode only
  std::optional<AttributionMethod> method;     // feature mode only
  std::size_t n = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  F1Averaging f1_averaging = F1Averaging::kMacro;
  std::vector<ExampleRow> rows;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

using FeatureSet = std::unordered_map<std::string, FeatureInput>;

// Runs `target` over every example, either on the image (kImage) or on the
// example's feature input (kFeature), fitted to the target's input spec.
// Throws EvaluationError listing the ids without a feature input.
EvalRecord evaluate(ClassifierAdapter& target, const Dataset& dataset, InputMode mode,
                    const FeatureSet& features = {},
                    F1Averaging averaging = F1Averaging::kMacro, int batch_size = 64);

enum class ProbabilityKind { kTrue, kPred };

const char* to_string(ProbabilityKind which);  // "p_true" / "p_pred"

struct Histogram {
  std::vector<std::size_t> counts;  // equal-width bins over [0,1]

  int bins() const { return static_cast<int>(counts.size()); }
  double bin_left(int i) const { return static_cast<double>(i) / bins(); }
  double bin_right(int i) const { return static_cast<double>(i + 1) / bins(); }
  std::size_t total() const;

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

// Bin i holds p in [i/bins, (i+1)/bins); the last bin is closed on the right.
// Throws ParameterError when bins < 2.
Histogram probability_histogram(const EvalRecord& record, ProbabilityKind which, int bins);

// Checks the row-level invariants (probabilities in [0,1], p_pred >= p_true,
// n == rows, accuracy consistent with rows). Throws EvaluationError.
void check_record(const EvalRecord& record);

}  // namespace harmony
