#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlnmine/errors.hpp"

namespace vlnmine {

// Resolved pipeline configuration. The on-disk form is a flat
// `key = value` text file (see docs/config.md); every tunable constant of
// the mining pipeline is a named key with the default recorded here.
struct PipelineConfig {
  // paths
  std::filesystem::path models_dir;
  std::filesystem::path annotations_dir;
  std::filesystem::path output_dir;
  std::filesystem::path prompt_template = "assets/instruction_prompt.json";
  std::filesystem::path path_records;  // eval input (JSON lines)

  std::string profile = "production";  // "production" | "test"
  double fps = 3.0;

  // video acceptance
  double min_duration_s = 180.0;
  int min_shots = 9;
  double min_coverage = 0.8;

  // sub-model merging
  int min_shared_frames = 3;
  double clip_length_s = 100.0;
  double clip_overlap_s = 10.0;
  std::string model_format = "binary";  // format of written merged models

  // trajectory mining
  double walking_speed_mps = 1.42;
  double stillness_floor_ratio = 0.01;
  double turn_threshold_deg = 45.0;
  int lookahead_frames = 3;
  int nms_window = 4;
  double dbscan_eps_m = 1.0;
  int dbscan_min_pts = 2;
  double step_interval_m = 1.5;
  double description_period_s = 2.0;
  int max_negatives = 1;
  int revisit_gap_frames = 15;
  std::map<std::string, double> scale_overrides;  // scale_override.<video_id>

  // spatial annotation
  double overlap_threshold = 0.3;
  int room_smoothing_window = 5;
  std::vector<std::string> room_types;  // defaults to the 16-type vocabulary

  // instruction generation client
  std::string endpoint_url;
  std::string model = "gpt-4-turbo";
  double temperature = 0.7;
  int max_tokens = 512;
  int max_attempts = 5;
  int backoff_base_ms = 1000;
  int backoff_max_ms = 30000;
  int request_timeout_s = 30;
  int concurrency = 4;
  std::string credential_env = "VLNMINE_API_KEY";

  // evaluation
  double success_threshold_m = 3.0;

  int workers = 1;

  PipelineConfig();

  // Fingerprint of the keys that shape record content. Paths, endpoint and
  // scheduling knobs are excluded so record ids survive relocation.
  std::string semantic_hash() const;

  nlohmann::ordered_json snapshot() const;
};

// Throws ConfigError naming the offending key on unknown keys, bad values
// or out-of-range settings.
PipelineConfig load_config(const std::filesystem::path& path);

void validate_config(const PipelineConfig& config);

}  // namespace vlnmine
