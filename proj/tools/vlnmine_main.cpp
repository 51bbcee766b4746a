#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vlnmine/config.hpp"
#include "vlnmine/log.hpp"
#include "vlnmine/pipeline.hpp"

namespace {

using vlnmine::PipelineConfig;
using vlnmine::StageOptions;
using vlnmine::StageResult;

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"room-tour trajectory mining pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string videos_csv;
  std::string format;
  int workers = 0;
  bool dry_run = false;
  bool log_json = false;

  const std::map<std::string,
                 std::pair<std::string, StageResult (*)(const PipelineConfig&,
                                                        const StageOptions&)>>
      stages = {
          {"ingest",
           {"apply the video acceptance rules", &vlnmine::run_ingest}},
          {"merge", {"fuse per-clip sub-models", &vlnmine::run_merge}},
          {"mine",
           {"scale, decision points, steps, candidates", &vlnmine::run_mine}},
          {"caption",
           {"spatial captions and room smoothing", &vlnmine::run_caption}},
          {"instruct",
           {"generate instructions (resumable)", &vlnmine::run_instruct}},
          {"emit", {"write dataset records and manifest", &vlnmine::run_emit}},
          {"eval", {"path-level navigation metrics", &vlnmine::run_eval}},
          {"all", {"run the full pipeline", &vlnmine::run_all}},
      };

  std::string selected;
  for (const auto& [name, stage] : stages) {
    CLI::App* sub = app.add_subcommand(name, stage.first);
    sub->add_option("--config", config_path, "pipeline config file")
        ->required();
    sub->add_option("--videos", videos_csv,
                    "comma-separated video ids (default: all)");
    sub->add_option("--workers", workers, "parallel videos (default: config)");
    sub->add_flag("--dry-run", dry_run, "report planned work, write nothing");
    sub->add_option("--format", format,
                    "override written model format {binary,text}")
        ->check(CLI::IsMember({"binary", "text"}));
    sub->add_flag("--log-json", log_json, "one JSON event per log line");
    sub->callback([&selected, name = name]() { selected = name; });
  }

  CLI11_PARSE(app, argc, argv);
  vlnmine::log::set_json_output(log_json);

  PipelineConfig config;
  try {
    config = vlnmine::load_config(config_path);
  } catch (const vlnmine::ConfigError& err) {
    vlnmine::log::error("config.invalid", {{"error", err.what()}});
    return 2;
  }

  StageOptions options;
  options.videos = split_csv(videos_csv);
  options.workers = workers;
  options.dry_run = dry_run;
  if (format == "binary") {
    options.format_override = vlnmine::ModelFormat::kBinary;
  } else if (format == "text") {
    options.format_override = vlnmine::ModelFormat::kText;
  }

  try {
    const StageResult result = stages.at(selected).second(config, options);
    if (!result.ok()) {
      vlnmine::log::error(
          "run.partial_failure",
          {{"stage", selected},
           {"failures", std::to_string(result.failures.size())}});
      return 1;
    }
    vlnmine::log::info("run.ok", {{"stage", selected}});
    return 0;
  } catch (const vlnmine::ConfigError& err) {
    vlnmine::log::error("run.config_error", {{"error", err.what()}});
    return 2;
  } catch (const std::exception& err) {
    vlnmine::log::error("run.error", {{"error", err.what()}});
    return 1;
  }
}
