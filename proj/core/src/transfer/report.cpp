#include "harmony/transfer/report.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "../file_util.hpp"
#include "harmony/error.hpp"

namespace harmony {

using nlohmann::json;
using detail::format_double;

const ReportEntry* TransferReport::find(const std::string& target, InputMode mode) const {
  for (const auto& e : entries) {
    if (e.record.target_model_id == target && e.record.mode == mode) return &e;
  }
  return nullptr;
}

std::vector<std::string> TransferReport::models() const {
  std::vector<std::string> out{source_model_id};
  for (const auto& t : targets) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

void TransferReport::validate() const {
  if (entries.empty()) throw EvaluationError("report has no records");
  for (const auto& model : models()) {
    for (InputMode mode : {InputMode::kImage, InputMode::kFeature}) {
      if (!find(model, mode)) {
        throw EvaluationError("report lacks the " + std::string(to_string(mode)) + " record for '" +
                              model + "'");
      }
    }
  }
  for (const auto& e : entries) {
    check_record(e.record);
    if (e.record.rows.empty()) continue;
    for (const Histogram* h : {&e.p_pred, &e.p_true}) {
      if (h->total() != e.record.n) {
        throw EvaluationError("histogram of " + record_stem(e) + " does not sum to n");
      }
    }
  }
}

std::string record_stem(const ReportEntry& entry) {
  std::string stem = entry.record.target_model_id + "__" + to_string(entry.record.mode);
  for (char& c : stem) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return stem;
}

json to_json(const TransferReport& report) {
  json records = json::array();
  for (const auto& e : report.entries) {
    const EvalRecord& r = e.record;
    json rows = json::array();
    for (const auto& row : r.rows) {
      rows.push_back({{"image_id", row.image_id},
                      {"true", row.true_label},
                      {"pred", row.pred},
                      {"p_true", row.p_true},
                      {"p_pred", row.p_pred}});
    }
    records.push_back({{"source_model", e.source_model_id},
                       {"method", to_string(e.method)},
                       {"target_model", r.target_model_id},
                       {"input_mode", to_string(r.mode)},
                       {"n", r.n},
                       {"accuracy", r.accuracy},
                       {"f1", r.f1},
                       {"f1_averaging", to_string(r.f1_averaging)},
                       {"histograms", {{"p_pred", e.p_pred.counts}, {"p_true", e.p_true.counts}}},
                       {"rows", rows}});
  }
  return json{{"source_model", report.source_model_id},
              {"method", to_string(report.method)},
              {"targets", report.targets},
              {"f1_averaging", to_string(report.f1_averaging)},
              {"bins", report.bins},
              {"binarized", report.binarized},
              {"mean_mask_area", report.mean_mask_area},
              {"config", report.config},
              {"records", records}};
}

TransferReport report_from_json(const json& j) {
  try {
    TransferReport report;
    report.source_model_id = j.at("source_model").get<std::string>();
    report.method = parse_method(j.at("method").get<std::string>());
    report.targets = j.value("targets", std::vector<std::string>{});
    report.f1_averaging = parse_f1_averaging(j.value("f1_averaging", std::string("macro")));
    report.bins = j.value("bins", 10);
    report.binarized = j.value("binarized", false);
    report.mean_mask_area = j.value("mean_mask_area", 0.0);
    report.config = j.value("config", json::object());
    for (const auto& rj : j.at("records")) {
      ReportEntry e;
      e.source_model_id = rj.value("source_model", report.source_model_id);
      e.method = parse_method(rj.value("method", std::string(to_string(report.method))));
      EvalRecord& r = e.record;
      r.target_model_id = rj.at("target_model").get<std::string>();
      r.mode = parse_input_mode(rj.at("input_mode").get<std::string>());
      if (r.mode == InputMode::kFeature) {
        r.source_model_id = e.source_model_id;
        r.method = e.method;
      }
      r.accuracy = rj.at("accuracy").get<double>();
      r.f1 = rj.at("f1").get<double>();
      r.f1_averaging = parse_f1_averaging(rj.value("f1_averaging", std::string(to_string(report.f1_averaging))));
      for (const auto& row : rj.value("rows", json::array())) {
        r.rows.push_back({row.at("image_id").get<std::string>(), row.at("true").get<int>(),
                          row.at("pred").get<int>(), row.at("p_true").get<double>(),
                          row.at("p_pred").get<double>()});
      }
      r.n = rj.value("n", r.rows.size());
      if (rj.contains("histograms")) {
        e.p_pred.counts = rj["histograms"].at("p_pred").get<std::vector<std::size_t>>();
        e.p_true.counts = rj["histograms"].at("p_true").get<std::vector<std::size_t>>();
      } else if (!r.rows.empty()) {
        e.p_pred = probability_histogram(r, ProbabilityKind::kPred, report.bins);
        e.p_true = probability_histogram(r, ProbabilityKind::kTrue, report.bins);
      }
      report.entries.push_back(std::move(e));
    }
    return report;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

TransferReport read_report_json(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

std::string report_csv(const std::vector<const TransferReport*>& reports) {
  std::string out = "source_model,method,target_model,input_mode,n,accuracy,f1,f1_averaging\n";
  for (const TransferReport* report : reports) {
    for (const auto& e : report->entries) {
      const EvalRecord& r = e.record;
      out += e.source_model_id + "," + to_string(e.method) + "," + r.target_model_id + "," +
             to_string(r.mode) + "," + std::to_string(r.n) + "," +
             format_double("%.10g", r.accuracy) + "," + format_double("%.10g", r.f1) + "," +
             to_string(r.f1_averaging) + "\n";
    }
  }
  return out;
}

std::string examples_csv(const EvalRecord& record) {
  std::string out = "image_id,true,pred,p_true,p_pred\n";
  for (const auto& r : record.rows) {
    out += r.image_id + "," + std::to_string(r.true_label) + "," + std::to_string(r.pred) + "," +
           format_double("%.9g", r.p_true) + "," + format_double("%.9g", r.p_pred) + "\n";
  }
  return out;
}

std::string histogram_csv(const Histogram& histogram) {
  std::string out = "bin_left,bin_right,count\n";
  for (int i = 0; i < histogram.bins(); ++i) {
    out += format_double("%.6g", histogram.bin_left(i)) + "," +
           format_double("%.6g", histogram.bin_right(i)) + "," +
           std::to_string(histogram.counts[static_cast<std::size_t>(i)]) + "\n";
  }
  return out;
}

void write_report(const TransferReport& report, const std::filesystem::path& dir) {
  report.validate();
  std::map<std::filesystem::path, std::string> files;
  files[dir / "report.csv"] = report_csv({&report});
  files[dir / "report.json"] = to_json(report).dump(2) + "\n";
  for (const auto& e : report.entries) {
    const std::string stem = record_stem(e);
    files[dir / "examples" / (stem + ".csv")] = examples_csv(e.record);
    files[dir / "histograms" / (stem + "__p_pred.csv")] = histogram_csv(e.p_pred);
    files[dir / "histograms" / (stem + "__p_true.csv")] = histogram_csv(e.p_true);
  }
  for (const auto& [path, bytes] : files) detail::write_file_atomic(path, bytes);
}

std::string render_table(const std::vector<TransferReport>& reports) {
  if (reports.empty()) throw EvaluationError("no reports to render");
  const std::vector<std::string> models = reports.front().models();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Exp.", "Metric"};
  for (const auto& m : models) {
    header.push_back(m + " (I)");
    header.push_back(m + " (F)");
  }
  rows.push_back(header);
  for (const auto& report : reports) {
    if (report.models() != models) throw EvaluationError("reports cover different models");
    std::vector<std::string> acc{to_string(report.method), "accuracy"};
    std::vector<std::string> f1{"", "F1"};
    for (const auto& m : models) {
      for (InputMode mode : {InputMode::kImage, InputMode::kFeature}) {
        const ReportEntry* e = report.find(m, mode);
        if (!e) {
          throw EvaluationError("report lacks the " + std::string(to_string(mode)) + " record for '" +
                                m + "'");
        }
        acc.push_back(format_double("%.2f", 100.0 * e->record.accuracy) + "%");
        f1.push_back(format_double("%.2f", e->record.f1));
      }
    }
    rows.push_back(acc);
    rows.push_back(f1);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string s = "|";
    for (std::size_t c = 0; c < row.size(); ++c) {
      s += " " + row[c] + std::string(width[c] - row[c].size(), ' ') + " |";
    }
    return s + "\n";
  };
  std::string out = line(rows[0]);
  out += "|";
  for (std::size_t c = 0; c < width.size(); ++c) out += std::string(width[c] + 2, '-') + "|";
  out += "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) out += line(rows[r]);
  return out;
}

}  // namespace harmony
