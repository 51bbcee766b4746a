#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vlnmine/colmap_model.hpp"
#include "vlnmine/config.hpp"

namespace vlnmine {

struct StageOptions {
  std::vector<std::string> videos;  // empty selects every discovered video
  int workers = 0;                  // 0 keeps the configured worker count
  bool dry_run = false;
  std::optional<ModelFormat> format_override;  // written merged models
};

struct StageResult {
  int processed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // video, error

  bool ok() const { return failures.empty(); }
};

// Stages communicate exclusively through files under config.output_dir:
//   ingest  -> ingest/accepted.json
//   merge   -> merged/<video>/component_<id>/{cameras,images,points3D}.*,
//              merged/<video>/merge_report.json
//   mine    -> mine/<video>.json
//   caption -> caption/<video>.json
//   instruct-> instruct/results.jsonl (append-only, resumable)
//   emit    -> records/description.jsonl, records/action.jsonl, manifest.json
//   eval    -> eval/metrics.json
// Each stage validates that its upstream artifacts exist and names the
// missing file otherwise.
StageResult run_ingest(const PipelineConfig& config, const StageOptions& opts);
StageResult run_merge(const PipelineConfig& config, const StageOptions& opts);
StageResult run_mine(const PipelineConfig& config, const StageOptions& opts);
StageResult run_caption(const PipelineConfig& config, const StageOptions& opts);
StageResult run_instruct(const PipelineConfig& config, const StageOptions& opts);
StageResult run_emit(const PipelineConfig& config, const StageOptions& opts);
StageResult run_eval(const PipelineConfig& config, const StageOptions& opts);

// ingest, merge, mine, caption, instruct, emit in dependency order.
StageResult run_all(const PipelineConfig& config, const StageOptions& opts);

}  // namespace vlnmine
