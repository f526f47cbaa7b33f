#include "harmony/transfer/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "harmony/error.hpp"

namespace harmony {

const char* to_string(InputMode mode) { return mode == InputMode::kImage ? "I" : "F"; }

InputMode parse_input_mode(const std::string& text) {
  if (text == "I") return InputMode::kImage;
  if (text == "F") return InputMode::kFeature;
  throw ParameterError("unknown input mode '" + text + "' (expected I or F)");
}

const char* to_string(ProbabilityKind which) {
  return which == ProbabilityKind::kTrue ? "p_true" : "p_pred";
}

std::size_t Histogram::total() const {
  std::size_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

EvalRecord evaluate(ClassifierAdapter& target, const Dataset& dataset, InputMode mode,
                    const FeatureSet& features, F1Averaging averaging, int batch_size) {
  if (dataset.empty()) throw EvaluationError("cannot evaluate on an empty dataset");
  if (batch_size < 1) throw ParameterError("batch size must be positive");
  if (dataset.num_classes() > target.num_classes()) {
    throw EvaluationError("model '" + target.model_id() + "' has " +
                          std::to_string(target.num_classes()) + " classes but the dataset has " +
                          std::to_string(dataset.num_classes()));
  }
  const FeatureInput* first = nullptr;
  if (mode == InputMode::kFeature) {
    std::vector<std::string> missing;
    for (const auto& ex : dataset) {
      auto it = features.find(ex.id);
      if (it == features.end()) {
        missing.push_back(ex.id);
      } else if (!first) {
        first = &it->second;
      }
    }
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
      throw EvaluationError("missing feature inputs for " + std::to_string(missing.size()) +
                            " image(s): " + list);
    }
  }

  EvalRecord record;
  record.target_model_id = target.model_id();
  record.mode = mode;
  record.f1_averaging = averaging;
  if (first) {
    record.source_model_id = first->provenance.source_model_id;
    record.method = first->provenance.method;
  }
  record.rows.reserve(dataset.size());

  const int k = target.num_classes();
  std::vector<ImageTensor> batch;
  std::vector<std::size_t> indices;
  auto flush = [&] {
    if (batch.empty()) return;
    const Tensor probs = target.predict_proba(stack_images(batch));
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const LabeledExample& ex = dataset[indices[b]];
      const double* p = probs.data() + b * static_cast<std::size_t>(k);
      const int pred = static_cast<int>(std::max_element(p, p + k) - p);
      record.rows.push_back({ex.id, ex.label, pred, p[ex.label], p[pred]});
    }
    batch.clear();
    indices.clear();
  };
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledExample& ex = dataset[i];
    const ImageTensor& src = mode == InputMode::kImage ? ex.image : features.at(ex.id).data;
    batch.push_back(target.prepare(src));
    indices.push_back(i);
    if (static_cast<int>(batch.size()) == batch_size) flush();
  }
  flush();

  std::vector<int> preds, truths;
  for (const auto& r : record.rows) {
    preds.push_back(r.pred);
    truths.push_back(r.true_label);
  }
  record.n = record.rows.size();
  record.accuracy = accuracy(preds, truths);
  record.f1 = f1_score(preds, truths, averaging, k);
  return record;
}

Histogram probability_histogram(const EvalRecord& record, ProbabilityKind which, int bins) {
  if (bins < 2) throw ParameterError("histograms need at least 2 bins");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const auto& r : record.rows) {
    const double p = which == ProbabilityKind::kTrue ? r.p_true : r.p_pred;
    const int i = std::clamp(static_cast<int>(std::floor(p * bins)), 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(i)];
  }
  return h;
}

void check_record(const EvalRecord& record) {
  const std::string who = record.target_model_id + " (" + to_string(record.mode) + ")";
  if (record.n != record.rows.size()) throw EvaluationError(who + ": n does not match the rows");
  std::size_t hits = 0;
  for (const auto& r : record.rows) {
    if (!(r.p_true >= 0.0 && r.p_true <= 1.0 && r.p_pred >= 0.0 && r.p_pred <= 1.0)) {
      throw EvaluationError(who + ": probability outside [0,1] for '" + r.image_id + "'");
    }
    if (r.p_pred < r.p_true) throw EvaluationError(who + ": p_pred < p_true for '" + r.image_id + "'");
    hits += r.pred == r.true_label ? 1 : 0;
  }
  if (!record.rows.empty() &&
      record.accuracy != static_cast<double>(hits) / static_cast<double>(record.rows.size())) {
    throw EvaluationError(who + ": accuracy does not match the rows");
  }
}

}  // namespace harmony
