#pragma once

#include <string>
#include <vector>

namespace harmony {

enum class F1Averaging { kMacro, kWeighted };

const char* to_string(F1Averaging averaging);
F1Averaging parse_f1_averaging(const std::string& text);

// Exact fraction of equal entries. Throws EvaluationError on a length
// mismatch or empty input.
double accuracy(const std::vector<int>& preds, const std::vector<int>& truths);

// Per-class F1 = 2PR/(P+R), 0 when P+R = 0, for classes 0..num_classes-1.
std::vector<double> per_class_f1(const std::vector<int>& preds, const std::vector<int>& truths,
                                 int num_classes);

// Averages per-class F1 over the classes occurring in truths or preds:
// unweighted (macro) or weighted by true-label support (weighted).
// num_classes < 0 infers the class count from the labels.
double f1_score(const std::vector<int>& preds, const std::vector<int>& truths,
                F1Averaging averaging = F1Averaging::kMacro, int num_classes = -1);

}  // namespace harmony
