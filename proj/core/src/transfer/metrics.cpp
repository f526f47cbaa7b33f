#include "harmony/transfer/metrics.hpp"

#include <algorithm>

#include "harmony/error.hpp"

namespace harmony {

namespace {

void check_lengths(const std::vector<int>& preds, const std::vector<int>& truths) {
  if (preds.size() != truths.size()) {
    throw EvaluationError("prediction/label length mismatch: " + std::to_string(preds.size()) +
                          " vs " + std::to_string(truths.size()));
  }
  if (preds.empty()) throw EvaluationError("no predictions to score");
}

}  // namespace

const char* to_string(F1Averaging averaging) {
  return averaging == F1Averaging::kMacro ? "macro" : "weighted";
}

F1Averaging parse_f1_averaging(const std::string& text) {
  if (text == "macro") return F1Averaging::kMacro;
  if (text == "weighted") return F1Averaging::kWeighted;
  throw ParameterError("unknown f1 averaging '" + text + "' (expected macro or weighted)");
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& truths) {
  check_lengths(preds, truths);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == truths[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::vector<double> per_class_f1(const std::vector<int>& preds, const std::vector<int>& truths,
                                 int num_classes) {
  check_lengths(preds, truths);
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0), fn(num_classes, 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = truths[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes) {
      throw EvaluationError("label outside 0.." + std::to_string(num_classes - 1));
    }
    if (p == t) {
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  std::vector<double> f1(num_classes, 0.0);
  for (int c = 0; c < num_classes; ++c) {
    const double precision = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
    const double recall = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
    f1[c] = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return f1;
}

double f1_score(const std::vector<int>& preds, const std::vector<int>& truths,
                F1Averaging averaging, int num_classes) {
  check_lengths(preds, truths);
  if (num_classes < 0) {
    num_classes = 1 + std::max(*std::max_element(preds.begin(), preds.end()),
                               *std::max_element(truths.begin(), truths.end()));
  }
  const std::vector<double> f1 = per_class_f1(preds, truths, num_classes);
  std::vector<double> support(num_classes, 0.0);
  std::vector<bool> present(num_classes, false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    support[truths[i]] += 1;
    present[truths[i]] = true;
    present[preds[i]] = true;
  }
  double sum = 0.0, weight = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    if (!present[c]) continue;
    const double w = averaging == F1Averaging::kMacro ? 1.0 : support[c];
    sum += w * f1[c];
    weight += w;
  }
  return weight > 0 ? sum / weight : 0.0;
}

}  // namespace harmony
