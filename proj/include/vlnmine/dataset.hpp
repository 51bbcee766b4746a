#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlnmine/geometry.hpp"
#include "vlnmine/mining.hpp"

namespace vlnmine {

struct GeometryFeature {
  double distance_m = 0.0;
  double heading_deg = 0.0;  // in [0, 180]
};

// Euclidean distance plus the angle between the current viewing direction
// and the bearing toward the candidate. Coincident positions (< 1 mm) map
// to (0, 0) by convention.
GeometryFeature explicit_geometry(const ViewState& current,
                                  const ViewState& candidate);

struct GenerationProvenance {
  std::string model;
  double temperature = 0.0;
  std::string prompt_hash;
  int attempts = 0;
};

// Description-enriched trajectory: 2 s-sampled frames with captions, rooms
// and the generated instruction when the service call succeeded.
struct TrajectoryRecord {
  std::string record_id;
  std::string video_id;
  std::vector<int> frame_indices;
  std::vector<std::vector<std::string>> captions;  // per sampled frame
  std::vector<std::string> rooms;                  // per sampled frame
  std::optional<std::string> instruction;
  std::optional<GenerationProvenance> generation;
  std::optional<int> relevance_score;  // 1..4, entered by later review
};

struct ActionCandidate {
  int frame_index = 0;
  bool positive = false;
  double distance_m = 0.0;
  double heading_deg = 0.0;
};

// Action-enriched step record. ground_truth indexes the positive candidate;
// absent means STOP at this step.
struct ActionRecord {
  std::string record_id;
  std::string video_id;
  int frame_index = 0;        // current step frame
  std::vector<int> history;   // prior step frames
  std::vector<ActionCandidate> candidates;
  std::optional<int> ground_truth;
};

std::string description_record_id(const std::string& video_id,
                                  int first_frame, int last_frame,
                                  const std::string& config_hash);
std::string action_record_id(const std::string& video_id, int step_frame,
                             const std::string& config_hash);

TrajectoryRecord make_description_record(
    const std::string& video_id, std::vector<int> frame_indices,
    std::vector<std::vector<std::string>> captions,
    std::vector<std::string> rooms, std::optional<std::string> instruction,
    std::optional<GenerationProvenance> generation,
    const std::string& config_hash);

// One record per step frame: history = prior steps, positive = next step,
// negatives = decision-point clusters whose centroid lies within eps_m of
// the current position. The final step carries STOP.
std::vector<ActionRecord> make_action_records(
    const Trajectory& trajectory, std::span<const int> step_frames,
    std::span<const ActionCandidateSet> candidate_sets, double eps_m,
    const std::string& config_hash);

nlohmann::ordered_json to_json(const TrajectoryRecord& record);
nlohmann::ordered_json to_json(const ActionRecord& record);

// Schema enforcement mirroring docs/record_schemas.md; throws SchemaError.
void validate_description_record(const nlohmann::json& record);
void validate_action_record(const nlohmann::json& record);

// Validates and appends records as JSON lines; a schema violation aborts
// before anything is written.
std::size_t emit_description_records(std::span<const TrajectoryRecord> records,
                                     const std::filesystem::path& path);
std::size_t emit_action_records(std::span<const ActionRecord> records,
                                const std::filesystem::path& path);

struct VideoCounts {
  int frames_registered = 0;
  int frames_dropped = 0;
  int decision_points = 0;
  int description_records = 0;
  int action_records = 0;
  int generation_failures = 0;
};

struct CorpusManifest {
  std::map<std::string, VideoCounts> videos;
  nlohmann::ordered_json config_snapshot;
  std::string toolkit_version;
};

// Writes the manifest after recounting the emitted record files; a count
// mismatch raises ConsistencyError and nothing is written.
void write_manifest(const CorpusManifest& manifest,
                    const std::filesystem::path& manifest_path,
                    const std::filesystem::path& description_file,
                    const std::filesystem::path& action_file);

}  // namespace vlnmine
