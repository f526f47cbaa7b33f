// harmony: train toy classifiers, attribute, evaluate cross-model feature
// transfer and render reports.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "harmony/error.hpp"
#include "harmony/pipeline/commands.hpp"
#include "harmony/pipeline/config.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string cache_dir;
  std::string method;
  std::string source;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "Run config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--set", c.sets, "Override a scalar config key, e.g. --set ss.steps=50")
      ->type_name("KEY=VALUE");
  cmd->add_option("--seed", c.seed, "Root seed");
  cmd->add_option("--output-dir", c.output_dir, "Output directory");
  cmd->add_option("--cache-dir", c.cache_dir, "Attribution cache root (HARMONY_CACHE_DIR wins)");
  cmd->add_option("--method", c.method, "Attribution method: SS, GC or RANDOM");
  cmd->add_option("--source", c.source, "Source model id");
  cmd->add_option("--jobs", c.jobs, "Concurrent attribution/evaluation streams");
}

harmony::RunConfig load(const Common& c) {
  std::vector<std::string> sets = c.sets;
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  if (!c.output_dir.empty()) sets.push_back("output_dir=" + nlohmann::json(c.output_dir).dump());
  if (!c.cache_dir.empty()) sets.push_back("cache_dir=" + nlohmann::json(c.cache_dir).dump());
  if (!c.method.empty()) sets.push_back("method=" + nlohmann::json(c.method).dump());
  if (!c.source.empty()) sets.push_back("source=" + nlohmann::json(c.source).dump());
  if (c.jobs) sets.push_back("jobs=" + std::to_string(*c.jobs));
  return harmony::load_run_config(c.config, sets);
}

void print_error(const std::string& command, const std::string& type, const std::string& message) {
  const nlohmann::json line = {{"command", command}, {"type", type}, {"message", message}};
  std::cerr << "error: " << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-architecture feature attribution transfer"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  Common train_opts, attr_opts, eval_opts, plot_opts, report_opts;
  auto* train = app.add_subcommand("train", "Train the configured models");
  add_common(train, train_opts, true);

  auto* attribute = app.add_subcommand("attribute", "Fill the attribution cache for the test split");
  add_common(attribute, attr_opts, true);
  bool keep_going = false;
  attribute->add_flag("--keep-going", keep_going, "Record failing images and continue");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate image and feature inputs, write the report");
  add_common(evaluate, eval_opts, true);
  bool identity = false;
  evaluate->add_flag("--identity-masks", identity, "Debug: use all-ones masks");

  auto* plot = app.add_subcommand("plot", "Plot report histograms");
  add_common(plot, plot_opts, false);
  std::string report_dir, plot_out;
  plot->add_option("--report-dir", report_dir, "Directory holding report.json");
  plot->add_option("--out-dir", plot_out, "Where plots go (default <report-dir>/plots)");

  auto* report = app.add_subcommand("report", "Render report.json files as a comparison table");
  add_common(report, report_opts, false);
  std::vector<std::string> inputs;
  std::string report_out;
  report->add_option("--input", inputs, "report.json files (default: the config's report)");
  report->add_option("--output", report_out, "Write the table here as well as to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "usage",
                e.what());
    return 2;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("harmony"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    nlohmann::json result;
    if (command == "train") {
      result = harmony::cmd_train(load(train_opts));
    } else if (command == "attribute") {
      result = harmony::cmd_attribute(load(attr_opts), keep_going);
    } else if (command == "evaluate") {
      if (identity) eval_opts.sets.push_back("evaluation.identity_masks=true");
      result = harmony::cmd_evaluate(load(eval_opts));
    } else if (command == "plot") {
      std::optional<harmony::RunConfig> config;
      if (!plot_opts.config.empty()) config = load(plot_opts);
      if (report_dir.empty()) {
        if (!config) throw harmony::ConfigError("plot needs --report-dir or --config");
        report_dir = config->report_path().string();
      }
      result = harmony::cmd_plot(report_dir,
                                 plot_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(plot_out),
                                 config ? &*config : nullptr);
    } else if (command == "report") {
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      if (paths.empty()) {
        if (report_opts.config.empty()) throw harmony::ConfigError("report needs --input or --config");
        paths.push_back(load(report_opts).report_path() / "report.json");
      }
      result = harmony::cmd_report(
          paths, report_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(report_out));
      std::cout << result["table"].get<std::string>();
      return 0;
    }
    std::cout << result.dump() << std::endl;
    return 0;
  } catch (const harmony::Error& e) {
    print_error(command, e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    print_error(command, "io", e.what());
  } catch (const std::exception& e) {
    print_error(command, "internal", e.what());
  }
  return 1;
}
