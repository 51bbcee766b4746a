#include "vlnmine/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vlnmine/hash.hpp"

namespace vlnmine {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kCoincidentM = 1e-3;

[[noreturn]] void fail(const std::string& what) { throw SchemaError(what); }

void require(bool ok, const std::string& what) {
  if (!ok) {
    fail(what);
  }
}

bool strictly_increasing(const json& arr) {
  for (std::size_t i = 0; i + 1 < arr.size(); ++i) {
    if (!(arr[i].get<long long>() < arr[i + 1].get<long long>())) {
      return false;
    }
  }
  return true;
}

bool all_integers(const json& arr) {
  return std::all_of(arr.begin(), arr.end(),
                     [](const json& v) { return v.is_number_integer(); });
}

}  // namespace

GeometryFeature explicit_geometry(const ViewState& current,
                                  const ViewState& candidate) {
  const Eigen::Vector3d offset = candidate.position - current.position;
  const double distance = offset.norm();
  if (distance < kCoincidentM) {
    return {0.0, 0.0};
  }
  const Eigen::Vector3d bearing = offset / distance;
  return {distance, angular_change_deg(current.direction, bearing)};
}

std::string description_record_id(const std::string& video_id,
                                  int first_frame, int last_frame,
                                  const std::string& config_hash) {
  return fnv1a64_hex("desc:" + video_id + ":" + std::to_string(first_frame) +
                     "-" + std::to_string(last_frame) + ":" + config_hash);
}

std::string action_record_id(const std::string& video_id, int step_frame,
                             const std::string& config_hash) {
  return fnv1a64_hex("act:" + video_id + ":" + std::to_string(step_frame) +
                     ":" + config_hash);
}

TrajectoryRecord make_description_record(
    const std::string& video_id, std::vector<int> frame_indices,
    std::vector<std::vector<std::string>> captions,
    std::vector<std::string> rooms, std::optional<std::string> instruction,
    std::optional<GenerationProvenance> generation,
    const std::string& config_hash) {
  if (frame_indices.empty() || captions.size() != frame_indices.size() ||
      rooms.size() != frame_indices.size()) {
    throw InvalidInput("description record arity mismatch for " + video_id);
  }
  TrajectoryRecord record;
  record.record_id = description_record_id(video_id, frame_indices.front(),
                                           frame_indices.back(), config_hash);
  record.video_id = video_id;
  record.frame_indices = std::move(frame_indices);
  record.captions = std::move(captions);
  record.rooms = std::move(rooms);
  record.instruction = std::move(instruction);
  record.generation = std::move(generation);
  return record;
}

std::vector<ActionRecord> make_action_records(
    const Trajectory& trajectory, std::span<const int> step_frames,
    std::span<const ActionCandidateSet> candidate_sets, double eps_m,
    const std::string& config_hash) {
  std::vector<ActionRecord> records;
  records.reserve(step_frames.size());
  for (std::size_t k = 0; k < step_frames.size(); ++k) {
    const int current_frame = step_frames[k];
    const ViewState& current = trajectory.at_frame(current_frame).view;

    ActionRecord record;
    record.record_id =
        action_record_id(trajectory.video_id, current_frame, config_hash);
    record.video_id = trajectory.video_id;
    record.frame_index = current_frame;
    record.history.assign(step_frames.begin(),
                          step_frames.begin() + static_cast<long>(k));

    const bool terminal = k + 1 == step_frames.size();
    std::optional<int> positive_frame;
    if (!terminal) {
      positive_frame = step_frames[k + 1];
      const ViewState& next = trajectory.at_frame(*positive_frame).view;
      const GeometryFeature geo = explicit_geometry(current, next);
      record.candidates.push_back(
          {*positive_frame, true, geo.distance_m, geo.heading_deg});
      record.ground_truth = 0;
    }

    // Side-watching negatives from clusters anchored at this location.
    std::set<int> negative_frames;
    for (const ActionCandidateSet& set : candidate_sets) {
      if ((set.centroid - current.position).norm() > eps_m) {
        continue;
      }
      for (const int frame : set.negatives) {
        if (positive_frame && frame == *positive_frame) {
          continue;
        }
        negative_frames.insert(frame);
      }
    }
    for (const int frame : negative_frames) {
      const ViewState& view = trajectory.at_frame(frame).view;
      const GeometryFeature geo = explicit_geometry(current, view);
      record.candidates.push_back({frame, false, geo.distance_m,
                                   geo.heading_deg});
    }
    records.push_back(std::move(record));
  }
  return records;
}

ordered_json to_json(const TrajectoryRecord& record) {
  ordered_json j;
  j["record_id"] = record.record_id;
  j["video_id"] = record.video_id;
  j["frame_indices"] = record.frame_indices;
  j["captions"] = record.captions;
  j["rooms"] = record.rooms;
  if (record.instruction) {
    j["instruction"] = *record.instruction;
  }
  if (record.generation) {
    ordered_json g;
    g["model"] = record.generation->model;
    g["temperature"] = record.generation->temperature;
    g["prompt_hash"] = record.generation->prompt_hash;
    g["attempts"] = record.generation->attempts;
    j["generation"] = g;
  }
  if (record.relevance_score) {
    j["relevance_score"] = *record.relevance_score;
  }
  return j;
}

ordered_json to_json(const ActionRecord& record) {
  ordered_json j;
  j["record_id"] = record.record_id;
  j["video_id"] = record.video_id;
  j["frame_index"] = record.frame_index;
  j["history"] = record.history;
  ordered_json candidates = ordered_json::array();
  for (const ActionCandidate& c : record.candidates) {
    ordered_json cj;
    cj["frame_index"] = c.frame_index;
    cj["role"] = c.positive ? "positive" : "negative";
    cj["distance_m"] = c.distance_m;
    cj["heading_deg"] = c.heading_deg;
    candidates.push_back(cj);
  }
  j["candidates"] = candidates;
  if (record.ground_truth) {
    j["ground_truth"] = *record.ground_truth;
  } else {
    j["ground_truth"] = "STOP";
  }
  return j;
}

void validate_description_record(const json& record) {
  require(record.is_object(), "description record must be an object");
  require(record.contains("record_id") && record["record_id"].is_string() &&
              record["record_id"].get<std::string>().size() == 16,
          "record_id must be a 16-hex string");
  require(record.contains("video_id") && record["video_id"].is_string() &&
              !record["video_id"].get<std::string>().empty(),
          "video_id must be a non-empty string");
  require(record.contains("frame_indices") &&
              record["frame_indices"].is_array() &&
              !record["frame_indices"].empty() &&
              all_integers(record["frame_indices"]) &&
              strictly_increasing(record["frame_indices"]),
          "frame_indices must be a strictly increasing integer array");
  const std::size_t n = record["frame_indices"].size();
  require(record.contains("captions") && record["captions"].is_array() &&
              record["captions"].size() == n,
          "captions must align with frame_indices");
  for (const auto& per_frame : record["captions"]) {
    require(per_frame.is_array(), "captions entries must be arrays");
    for (const auto& caption : per_frame) {
      require(caption.is_string(), "captions must be strings");
    }
  }
  require(record.contains("rooms") && record["rooms"].is_array() &&
              record["rooms"].size() == n,
          "rooms must align with frame_indices");
  for (const auto& room : record["rooms"]) {
    require(room.is_string() && !room.get<std::string>().empty(),
            "rooms must be non-empty strings");
  }
  const bool has_instruction = record.contains("instruction");
  const bool has_generation = record.contains("generation");
  require(has_instruction == has_generation,
          "instruction and generation provenance must appear together");
  if (has_instruction) {
    require(record["instruction"].is_string() &&
                !record["instruction"].get<std::string>().empty(),
            "instruction must be a non-empty string");
    const json& g = record["generation"];
    require(g.is_object() && g.contains("model") && g["model"].is_string() &&
                g.contains("temperature") && g["temperature"].is_number() &&
                g.contains("prompt_hash") && g["prompt_hash"].is_string() &&
                g.contains("attempts") && g["attempts"].is_number_integer(),
            "generation provenance incomplete");
  }
  if (record.contains("relevance_score")) {
    require(record["relevance_score"].is_number_integer() &&
                record["relevance_score"].get<int>() >= 1 &&
                record["relevance_score"].get<int>() <= 4,
            "relevance_score must be an integer in 1..4");
  }
}

void validate_action_record(const json& record) {
  require(record.is_object(), "action record must be an object");
  require(record.contains("record_id") && record["record_id"].is_string() &&
              record["record_id"].get<std::string>().size() == 16,
          "record_id must be a 16-hex string");
  require(record.contains("video_id") && record["video_id"].is_string() &&
              !record["video_id"].get<std::string>().empty(),
          "video_id must be a non-empty string");
  require(record.contains("frame_index") &&
              record["frame_index"].is_number_integer(),
          "frame_index must be an integer");
  require(record.contains("history") && record["history"].is_array() &&
              all_integers(record["history"]) &&
              strictly_increasing(record["history"]),
          "history must be a strictly increasing integer array");
  if (!record["history"].empty()) {
    require(record["history"].back().get<int>() <
                record["frame_index"].get<int>(),
            "history must precede the current frame");
  }
  require(record.contains("candidates") && record["candidates"].is_array(),
          "candidates must be an array");
  int positives = 0;
  int positive_index = -1;
  for (std::size_t i = 0; i < record["candidates"].size(); ++i) {
    const json& c = record["candidates"][i];
    require(c.is_object() && c.contains("frame_index") &&
                c["frame_index"].is_number_integer(),
            "candidate frame_index must be an integer");
    require(c.contains("role") && c["role"].is_string() &&
                (c["role"] == "positive" || c["role"] == "negative"),
            "candidate role must be positive or negative");
    require(c.contains("distance_m") && c["distance_m"].is_number() &&
                c["distance_m"].get<double>() >= 0.0,
            "candidate distance_m must be >= 0");
    require(c.contains("heading_deg") && c["heading_deg"].is_number() &&
                c["heading_deg"].get<double>() >= 0.0 &&
                c["heading_deg"].get<double>() <= 180.0,
            "candidate heading_deg must be in [0, 180]");
    if (c["role"] == "positive") {
      ++positives;
      positive_index = static_cast<int>(i);
    }
  }
  require(record.contains("ground_truth"), "ground_truth required");
  const json& gt = record["ground_truth"];
  if (gt.is_string()) {
    require(gt.get<std::string>() == "STOP",
            "ground_truth string must be STOP");
    require(positives == 0, "STOP records must carry no positive candidate");
  } else {
    require(gt.is_number_integer(), "ground_truth must be an index or STOP");
    require(positives == 1, "exactly one positive candidate required");
    require(gt.get<int>() == positive_index,
            "ground_truth must index the positive candidate");
  }
}

namespace {

template <typename Record>
std::size_t emit_records(std::span<const Record> records,
                         const std::filesystem::path& path,
                         void (*validate)(const json&)) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const Record& record : records) {
    const ordered_json j = to_json(record);
    validate(j);
    lines.push_back(j.dump());
  }
  if (!path.parent_path().empty()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::app);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  for (const std::string& line : lines) {
    out << line << '\n';
  }
  return lines.size();
}

std::map<std::string, std::pair<int, int>> recount(
    const std::filesystem::path& description_file,
    const std::filesystem::path& action_file) {
  std::map<std::string, std::pair<int, int>> counts;
  const auto scan = [&](const std::filesystem::path& file, bool description) {
    std::ifstream in(file);
    if (!in) {
      return;
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) {
        continue;
      }
      const json doc = json::parse(line);
      auto& entry = counts[doc.at("video_id").get<std::string>()];
      (description ? entry.first : entry.second) += 1;
    }
  };
  scan(description_file, true);
  scan(action_file, false);
  return counts;
}

}  // namespace

std::size_t emit_description_records(std::span<const TrajectoryRecord> records,
                                     const std::filesystem::path& path) {
  return emit_records(records, path, &validate_description_record);
}

std::size_t emit_action_records(std::span<const ActionRecord> records,
                                const std::filesystem::path& path) {
  return emit_records(records, path, &validate_action_record);
}

void write_manifest(const CorpusManifest& manifest,
                    const std::filesystem::path& manifest_path,
                    const std::filesystem::path& description_file,
                    const std::filesystem::path& action_file) {
  const auto counts = recount(description_file, action_file);
  for (const auto& [video, expected] : manifest.videos) {
    const auto it = counts.find(video);
    const int desc = it == counts.end() ? 0 : it->second.first;
    const int act = it == counts.end() ? 0 : it->second.second;
    if (desc != expected.description_records ||
        act != expected.action_records) {
      throw ConsistencyError(
          "manifest counts for video " + video + " (" +
          std::to_string(expected.description_records) + "/" +
          std::to_string(expected.action_records) +
          ") do not match emitted files (" + std::to_string(desc) + "/" +
          std::to_string(act) + ")");
    }
  }
  for (const auto& [video, counted] : counts) {
    if (manifest.videos.count(video) == 0 &&
        (counted.first > 0 || counted.second > 0)) {
      throw ConsistencyError("emitted records for video " + video +
                             " missing from the manifest");
    }
  }

  ordered_json j;
  j["toolkit_version"] = manifest.toolkit_version;
  ordered_json videos = ordered_json::object();
  for (const auto& [video, c] : manifest.videos) {
    ordered_json v;
    v["frames_registered"] = c.frames_registered;
    v["frames_dropped"] = c.frames_dropped;
    v["decision_points"] = c.decision_points;
    v["description_records"] = c.description_records;
    v["action_records"] = c.action_records;
    v["generation_failures"] = c.generation_failures;
    videos[video] = v;
  }
  j["videos"] = videos;
  j["config"] = manifest.config_snapshot;

  if (!manifest_path.parent_path().empty()) {
    std::filesystem::create_directories(manifest_path.parent_path());
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + manifest_path.string());
  }
  out << j.dump(2) << '\n';
}

}  // namespace vlnmine
