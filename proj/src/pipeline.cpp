#include "vlnmine/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "vlnmine/annotate.hpp"
#include "vlnmine/annotation_io.hpp"
#include "vlnmine/dataset.hpp"
#include "vlnmine/hash.hpp"
#include "vlnmine/instructgen.hpp"
#include "vlnmine/log.hpp"
#include "vlnmine/merge.hpp"
#include "vlnmine/metrics.hpp"
#include "vlnmine/mining.hpp"

namespace vlnmine {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kMetaSuffix = ".meta.json";

std::string stage_dir_name(const std::string& stage) { return stage; }

fs::path accepted_path(const PipelineConfig& cfg) {
  return cfg.output_dir / "ingest" / "accepted.json";
}
fs::path merged_dir(const PipelineConfig& cfg, const std::string& video) {
  return cfg.output_dir / "merged" / video;
}
fs::path mine_path(const PipelineConfig& cfg, const std::string& video) {
  return cfg.output_dir / "mine" / (video + ".json");
}
fs::path caption_path(const PipelineConfig& cfg, const std::string& video) {
  return cfg.output_dir / "caption" / (video + ".json");
}
fs::path instruct_results_path(const PipelineConfig& cfg) {
  return cfg.output_dir / "instruct" / "results.jsonl";
}
fs::path description_records_path(const PipelineConfig& cfg) {
  return cfg.output_dir / "records" / "description.jsonl";
}
fs::path action_records_path(const PipelineConfig& cfg) {
  return cfg.output_dir / "records" / "action.jsonl";
}
fs::path manifest_path(const PipelineConfig& cfg) {
  return cfg.output_dir / "manifest.json";
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    if (producer == "input") {
      throw Error("missing artifact " + path.string() +
                  "; expected as pipeline input");
    }
    throw Error("missing artifact " + path.string() + "; run the '" +
                producer + "' stage first");
  }
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  json doc;
  in >> doc;
  return doc;
}

void dump_json_file(const ordered_json& doc, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out << doc.dump(2) << '\n';
}

// All videos with a metadata document, in sorted order.
std::vector<std::string> discover_videos(const PipelineConfig& cfg,
                                         const StageOptions& opts) {
  if (!fs::exists(cfg.annotations_dir)) {
    throw Error("annotations_dir " + cfg.annotations_dir.string() +
                " does not exist");
  }
  std::vector<std::string> videos;
  for (const auto& entry : fs::directory_iterator(cfg.annotations_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > std::string(kMetaSuffix).size() &&
        name.ends_with(kMetaSuffix)) {
      videos.push_back(
          name.substr(0, name.size() - std::string(kMetaSuffix).size()));
    }
  }
  std::sort(videos.begin(), videos.end());
  if (opts.videos.empty()) {
    return videos;
  }
  std::vector<std::string> selected;
  for (const std::string& wanted : opts.videos) {
    if (std::find(videos.begin(), videos.end(), wanted) == videos.end()) {
      throw Error("video '" + wanted + "' has no metadata under " +
                  cfg.annotations_dir.string());
    }
    selected.push_back(wanted);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<std::string> accepted_videos(const PipelineConfig& cfg,
                                         const StageOptions& opts) {
  require_artifact(accepted_path(cfg), "ingest");
  const json doc = load_json_file(accepted_path(cfg));
  std::vector<std::string> accepted;
  for (const auto& v : doc.at("accepted")) {
    accepted.push_back(v.get<std::string>());
  }
  std::sort(accepted.begin(), accepted.end());
  if (opts.videos.empty()) {
    return accepted;
  }
  std::vector<std::string> selected;
  for (const std::string& wanted : opts.videos) {
    if (std::binary_search(accepted.begin(), accepted.end(), wanted)) {
      selected.push_back(wanted);
    } else {
      log::warn("stage.video_not_accepted", {{"video", wanted}});
    }
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

int effective_workers(const PipelineConfig& cfg, const StageOptions& opts) {
  return opts.workers > 0 ? opts.workers : cfg.workers;
}

// Runs `work` over the videos with a bounded worker pool, isolating
// per-video failures into the stage result.
StageResult for_each_video(const std::vector<std::string>& videos, int workers,
                           const std::function<void(const std::string&)>& work) {
  StageResult result;
  result.processed = static_cast<int>(videos.size());
  std::atomic<std::size_t> next{0};
  std::mutex failures_mutex;

  const auto runner = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= videos.size()) {
        return;
      }
      try {
        work(videos[i]);
      } catch (const std::exception& err) {
        std::lock_guard<std::mutex> lock(failures_mutex);
        result.failures.emplace_back(videos[i], err.what());
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(
      std::max(1, workers), std::max<std::size_t>(videos.size(), 1));
  if (threads <= 1) {
    runner();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(runner);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  std::sort(result.failures.begin(), result.failures.end());
  for (const auto& [video, error] : result.failures) {
    log::error("stage.video_failed", {{"video", video}, {"error", error}});
  }
  return result;
}

// ---- mine stage artifacts ----

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

struct MineArtifact {
  Trajectory trajectory;  // scaled
  std::vector<DecisionPoint> decision_points;
  std::vector<ActionCandidateSet> candidate_sets;
  std::vector<int> step_frames;
  std::vector<int> description_frames;
  int frames_registered = 0;
  int frames_dropped = 0;
};

void write_mine_artifact(const MineArtifact& artifact, const fs::path& path) {
  ordered_json doc;
  doc["video_id"] = artifact.trajectory.video_id;
  doc["fps"] = artifact.trajectory.fps;
  doc["scale"] = artifact.trajectory.scale;
  doc["scale_source"] =
      artifact.trajectory.scale_source == ScaleSource::kUserOverride
          ? "user_override"
          : "walking_speed_estimate";
  doc["frames_registered"] = artifact.frames_registered;
  doc["frames_dropped"] = artifact.frames_dropped;
  ordered_json frames = ordered_json::array();
  for (const TrajectoryFrame& f : artifact.trajectory.frames) {
    ordered_json fj;
    fj["frame_index"] = f.frame_index;
    fj["position"] = vec3_json(f.view.position);
    fj["direction"] = vec3_json(f.view.direction);
    frames.push_back(fj);
  }
  doc["frames"] = frames;
  ordered_json points = ordered_json::array();
  for (const DecisionPoint& p : artifact.decision_points) {
    ordered_json pj;
    pj["frame_index"] = p.frame_index;
    pj["peak_angular_change_deg"] = p.peak_angular_change_deg;
    pj["cluster_id"] = p.cluster_id;
    points.push_back(pj);
  }
  doc["decision_points"] = points;
  ordered_json sets = ordered_json::array();
  for (const ActionCandidateSet& s : artifact.candidate_sets) {
    ordered_json sj;
    sj["cluster_id"] = s.cluster_id;
    sj["positive"] = s.positive;
    sj["negatives"] = s.negatives;
    sj["member_frames"] = s.member_frames;
    sj["centroid"] = vec3_json(s.centroid);
    sj["revisit"] = s.revisit;
    sets.push_back(sj);
  }
  doc["candidate_sets"] = sets;
  doc["step_frames"] = artifact.step_frames;
  doc["description_frames"] = artifact.description_frames;
  dump_json_file(doc, path);
}

MineArtifact read_mine_artifact(const fs::path& path) {
  const json doc = load_json_file(path);
  MineArtifact artifact;
  artifact.trajectory.video_id = doc.at("video_id").get<std::string>();
  artifact.trajectory.fps = doc.at("fps").get<double>();
  artifact.trajectory.scale = doc.at("scale").get<double>();
  artifact.trajectory.scale_source =
      doc.at("scale_source").get<std::string>() == "user_override"
          ? ScaleSource::kUserOverride
          : ScaleSource::kWalkingSpeedEstimate;
  artifact.trajectory.scaled = true;
  for (const json& fj : doc.at("frames")) {
    TrajectoryFrame frame;
    frame.frame_index = fj.at("frame_index").get<int>();
    frame.view.position = vec3_from(fj.at("position"));
    frame.view.direction = vec3_from(fj.at("direction"));
    artifact.trajectory.frames.push_back(frame);
  }
  for (const json& pj : doc.at("decision_points")) {
    artifact.decision_points.push_back(
        {pj.at("frame_index").get<int>(),
         pj.at("peak_angular_change_deg").get<double>(),
         pj.at("cluster_id").get<int>()});
  }
  for (const json& sj : doc.at("candidate_sets")) {
    ActionCandidateSet set;
    set.cluster_id = sj.at("cluster_id").get<int>();
    set.positive = sj.at("positive").get<int>();
    set.negatives = sj.at("negatives").get<std::vector<int>>();
    set.member_frames = sj.at("member_frames").get<std::vector<int>>();
    set.centroid = vec3_from(sj.at("centroid"));
    set.revisit = sj.at("revisit").get<bool>();
    artifact.candidate_sets.push_back(std::move(set));
  }
  artifact.step_frames = doc.at("step_frames").get<std::vector<int>>();
  artifact.description_frames =
      doc.at("description_frames").get<std::vector<int>>();
  artifact.frames_registered = doc.at("frames_registered").get<int>();
  artifact.frames_dropped = doc.at("frames_dropped").get<int>();
  return artifact;
}

// ---- caption stage artifacts ----

struct CaptionArtifact {
  std::map<int, std::vector<std::string>> captions;  // frame -> captions
  std::vector<std::pair<int, std::string>> rooms;    // smoothed
  int objects_dropped = 0;
};

void write_caption_artifact(const std::string& video,
                            const CaptionArtifact& artifact,
                            const fs::path& path) {
  ordered_json doc;
  doc["video_id"] = video;
  ordered_json frames = ordered_json::array();
  for (const auto& [frame, captions] : artifact.captions) {
    ordered_json fj;
    fj["frame_index"] = frame;
    fj["captions"] = captions;
    frames.push_back(fj);
  }
  doc["frames"] = frames;
  ordered_json rooms = ordered_json::array();
  for (const auto& [frame, room] : artifact.rooms) {
    rooms.push_back(ordered_json::array({frame, room}));
  }
  doc["rooms_smoothed"] = rooms;
  doc["objects_dropped"] = artifact.objects_dropped;
  dump_json_file(doc, path);
}

CaptionArtifact read_caption_artifact(const fs::path& path) {
  const json doc = load_json_file(path);
  CaptionArtifact artifact;
  for (const json& fj : doc.at("frames")) {
    artifact.captions[fj.at("frame_index").get<int>()] =
        fj.at("captions").get<std::vector<std::string>>();
  }
  for (const json& rj : doc.at("rooms_smoothed")) {
    artifact.rooms.emplace_back(rj.at(0).get<int>(),
                                rj.at(1).get<std::string>());
  }
  artifact.objects_dropped = doc.value("objects_dropped", 0);
  return artifact;
}

// Smoothed room at the frame, falling back to the nearest labeled frame.
std::string room_at(const std::vector<std::pair<int, std::string>>& rooms,
                    int frame) {
  if (rooms.empty()) {
    return "hallway";  // neutral fallback for unlabeled clips
  }
  const auto after = std::lower_bound(
      rooms.begin(), rooms.end(), frame,
      [](const auto& entry, int f) { return entry.first < f; });
  if (after != rooms.end() && after->first == frame) {
    return after->second;
  }
  if (after == rooms.begin()) {
    return after->second;
  }
  return std::prev(after)->second;
}

std::string describe_plan(const std::vector<std::string>& videos) {
  std::string joined;
  for (const std::string& v : videos) {
    joined += joined.empty() ? v : "," + v;
  }
  return joined;
}

}  // namespace

StageResult run_ingest(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto videos = discover_videos(cfg, opts);
  if (opts.dry_run) {
    log::info("ingest.dry_run", {{"videos", describe_plan(videos)},
                                 {"would_write", accepted_path(cfg).string()}});
    return {static_cast<int>(videos.size()), {}};
  }

  ordered_json accepted = ordered_json::array();
  ordered_json rejected = ordered_json::array();
  StageResult result;
  result.processed = static_cast<int>(videos.size());
  for (const std::string& video : videos) {
    try {
      const VideoMetadata meta = load_video_metadata(
          cfg.annotations_dir / (video + kMetaSuffix));
      const AcceptDecision decision = accept_video(
          meta, cfg.min_duration_s, cfg.min_shots, cfg.min_coverage);
      if (decision.accepted) {
        accepted.push_back(video);
        log::info("ingest.accepted", {{"video", video}});
      } else {
        ordered_json r;
        r["video_id"] = video;
        r["reason"] = decision.reason;
        rejected.push_back(r);
        log::info("ingest.rejected",
                  {{"video", video}, {"reason", decision.reason}});
      }
    } catch (const std::exception& err) {
      result.failures.emplace_back(video, err.what());
      log::error("ingest.failed", {{"video", video}, {"error", err.what()}});
    }
  }
  ordered_json doc;
  doc["accepted"] = accepted;
  doc["rejected"] = rejected;
  dump_json_file(doc, accepted_path(cfg));
  return result;
}

StageResult run_merge(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto videos = accepted_videos(cfg, opts);
  const ModelFormat out_format =
      opts.format_override.value_or(cfg.model_format == "text"
                                        ? ModelFormat::kText
                                        : ModelFormat::kBinary);
  if (opts.dry_run) {
    log::info("merge.dry_run", {{"videos", describe_plan(videos)}});
    return {static_cast<int>(videos.size()), {}};
  }

  return for_each_video(videos, effective_workers(cfg, opts),
                        [&](const std::string& video) {
    const fs::path model_root = cfg.models_dir / video;
    if (!fs::exists(model_root)) {
      throw Error("no reconstruction directory " + model_root.string());
    }
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(model_root)) {
      if (entry.is_directory()) {
        subdirs.push_back(entry.path());
      }
    }
    std::sort(subdirs.begin(), subdirs.end());
    if (subdirs.empty()) {
      throw Error("no sub-model directories under " + model_root.string());
    }
    std::vector<SubModel> submodels;
    for (const fs::path& dir : subdirs) {
      SubModel sub = parse_model(dir, ModelFormat::kAuto, -1, cfg.fps);
      const double span = sub.clip_end_s - sub.clip_start_s;
      if (span > cfg.clip_length_s + cfg.clip_overlap_s) {
        log::warn("merge.clip_span_exceeded",
                  {{"video", video},
                   {"model", std::to_string(sub.model_id)},
                   {"span_s", std::to_string(span)}});
      }
      submodels.push_back(std::move(sub));
    }

    const OverlapGraph graph =
        build_overlap_graph(submodels, cfg.min_shared_frames);
    const auto merged = merge_components(graph, submodels);

    int min_frame = std::numeric_limits<int>::max();
    int max_frame = std::numeric_limits<int>::min();
    for (const SubModel& sub : submodels) {
      if (!sub.poses.empty()) {
        min_frame = std::min(min_frame, sub.poses.begin()->first);
        max_frame = std::max(max_frame, sub.poses.rbegin()->first);
      }
    }

    std::size_t primary = 0;
    for (std::size_t i = 1; i < merged.size(); ++i) {
      if (merged[i].poses.size() > merged[primary].poses.size()) {
        primary = i;
      }
    }

    const fs::path out_root = merged_dir(cfg, video);
    fs::create_directories(out_root);
    ordered_json report;
    report["video_id"] = video;
    report["submodels"] = submodels.size();
    ordered_json components = ordered_json::array();
    for (const MergedModel& component : merged) {
      SubModel as_model;
      as_model.model_id = component.component_id;
      as_model.poses = component.poses;
      as_model.intrinsics = component.intrinsics;
      as_model.recompute_clip_span(cfg.fps);
      write_model(as_model,
                  out_root / ("component_" +
                              std::to_string(component.component_id)),
                  out_format);
      ordered_json cj;
      cj["component_id"] = component.component_id;
      cj["poses"] = component.poses.size();
      ordered_json residuals = ordered_json::array();
      for (const auto& [edge, rms] : component.alignment_residuals) {
        residuals.push_back(ordered_json::array({edge.first, edge.second, rms}));
      }
      cj["alignment_residuals"] = residuals;
      components.push_back(cj);
    }
    report["components"] = components;
    report["primary_component"] =
        merged.empty() ? -1 : merged[primary].component_id;
    report["frames_registered"] =
        merged.empty() ? 0 : merged[primary].poses.size();
    const int expected = merged.empty() || min_frame > max_frame
                             ? 0
                             : max_frame - min_frame + 1;
    report["frames_dropped"] =
        expected == 0 ? 0
                      : expected - static_cast<int>(merged[primary].poses.size());
    dump_json_file(report, out_root / "merge_report.json");
    log::info("merge.done", {{"video", video},
                             {"components", std::to_string(merged.size())}});
  });
}

StageResult run_mine(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto videos = accepted_videos(cfg, opts);
  if (opts.dry_run) {
    log::info("mine.dry_run", {{"videos", describe_plan(videos)}});
    return {static_cast<int>(videos.size()), {}};
  }

  return for_each_video(videos, effective_workers(cfg, opts),
                        [&](const std::string& video) {
    const fs::path report_path = merged_dir(cfg, video) / "merge_report.json";
    require_artifact(report_path, "merge");
    const json report = load_json_file(report_path);
    const int primary = report.at("primary_component").get<int>();
    if (primary < 0) {
      throw Error("video " + video + " merged to zero components");
    }
    const fs::path component_dir =
        merged_dir(cfg, video) / ("component_" + std::to_string(primary));
    require_artifact(component_dir, "merge");
    const SubModel model =
        parse_model(component_dir, ModelFormat::kAuto, primary, cfg.fps);

    MergedModel as_merged;
    as_merged.component_id = primary;
    as_merged.poses = model.poses;
    Trajectory trajectory = trajectory_from_model(video, as_merged, cfg.fps);

    double scale = 0.0;
    ScaleSource source = ScaleSource::kWalkingSpeedEstimate;
    if (const auto it = cfg.scale_overrides.find(video);
        it != cfg.scale_overrides.end()) {
      scale = it->second;
      source = ScaleSource::kUserOverride;
    } else {
      scale = estimate_scale(trajectory, cfg.walking_speed_mps,
                             cfg.stillness_floor_ratio);
    }
    apply_scale(trajectory, scale, source);

    DecisionPointParams params;
    params.threshold_deg = cfg.turn_threshold_deg;
    params.lookahead_frames = cfg.lookahead_frames;
    params.nms_window = cfg.nms_window;
    params.eps_m = cfg.dbscan_eps_m;
    params.min_pts = cfg.dbscan_min_pts;

    MineArtifact artifact;
    artifact.decision_points = detect_decision_points(trajectory, params);
    artifact.candidate_sets =
        make_action_candidates(trajectory, artifact.decision_points,
                               cfg.max_negatives, cfg.revisit_gap_frames);
    artifact.step_frames = resample_steps(trajectory, cfg.step_interval_m);
    artifact.description_frames =
        sample_description_frames(trajectory, cfg.description_period_s);
    artifact.frames_registered = report.at("frames_registered").get<int>();
    artifact.frames_dropped = report.at("frames_dropped").get<int>();
    artifact.trajectory = std::move(trajectory);
    write_mine_artifact(artifact, mine_path(cfg, video));
    log::info("mine.done",
              {{"video", video},
               {"decision_points",
                std::to_string(artifact.decision_points.size())},
               {"steps", std::to_string(artifact.step_frames.size())}});
  });
}

StageResult run_caption(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto videos = accepted_videos(cfg, opts);
  if (opts.dry_run) {
    log::info("caption.dry_run", {{"videos", describe_plan(videos)}});
    return {static_cast<int>(videos.size()), {}};
  }

  std::vector<std::string_view> vocabulary;
  vocabulary.reserve(cfg.room_types.size());
  for (const std::string& room : cfg.room_types) {
    vocabulary.push_back(room);
  }

  return for_each_video(videos, effective_workers(cfg, opts),
                        [&](const std::string& video) {
    const fs::path annotation_file = cfg.annotations_dir / (video + ".json");
    require_artifact(annotation_file, "input");
    const auto frames = load_video_annotations(annotation_file);

    CaptionArtifact artifact;
    std::vector<std::pair<int, std::string>> raw_rooms;
    for (const FrameAnnotation& frame : frames) {
      std::optional<DepthImage> depth;
      if (!frame.depth_file.empty()) {
        depth = load_depth(cfg.annotations_dir / frame.depth_file,
                           frame.depth_min, frame.depth_max);
      } else if (!frame.objects.empty()) {
        artifact.objects_dropped += static_cast<int>(frame.objects.size());
      }
      auto captions = caption_frame(frame, depth ? &*depth : nullptr,
                                    cfg.overlap_threshold);
      if (depth) {
        int labeled = 0;
        for (const DetectedObject& obj : frame.objects) {
          labeled += label_object(obj.tag, obj.box, *depth,
                                  cfg.overlap_threshold)
                         .has_value()
                         ? 1
                         : 0;
        }
        artifact.objects_dropped +=
            static_cast<int>(frame.objects.size()) - labeled;
      }
      artifact.captions[frame.frame_index] = std::move(captions);
      if (frame.room_label_raw) {
        raw_rooms.emplace_back(frame.frame_index, *frame.room_label_raw);
      }
    }
    if (!raw_rooms.empty()) {
      artifact.rooms = smooth_room_labels(raw_rooms, cfg.room_smoothing_window,
                                          vocabulary)
                           .labels;
    }
    write_caption_artifact(video, artifact, caption_path(cfg, video));
    log::info("caption.done",
              {{"video", video},
               {"frames", std::to_string(artifact.captions.size())},
               {"objects_dropped",
                std::to_string(artifact.objects_dropped)}});
  });
}

namespace {

// Prediction frames for one video's description window.
std::vector<FrameDescription> description_frames_for(
    const MineArtifact& mine, const CaptionArtifact& caption) {
  std::vector<FrameDescription> frames;
  for (const int frame : mine.description_frames) {
    FrameDescription fd;
    fd.frame_index = frame;
    fd.room = room_at(caption.rooms, frame);
    if (const auto it = caption.captions.find(frame);
        it != caption.captions.end()) {
      fd.captions = it->second;
    }
    frames.push_back(std::move(fd));
  }
  return frames;
}

}  // namespace

StageResult run_instruct(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto videos = accepted_videos(cfg, opts);
  const PromptBundle bundle = load_prompt_bundle(cfg.prompt_template);
  if (cfg.profile == "production" && bundle.examples.empty()) {
    throw ConfigError(
        "prompt template has no in-context examples; required in the "
        "production profile");
  }
  const std::string config_hash = cfg.semantic_hash();

  std::vector<BatchItem> items;
  StageResult result;
  result.processed = static_cast<int>(videos.size());
  for (const std::string& video : videos) {
    try {
      require_artifact(mine_path(cfg, video), "mine");
      require_artifact(caption_path(cfg, video), "caption");
      const MineArtifact mine = read_mine_artifact(mine_path(cfg, video));
      const CaptionArtifact caption =
          read_caption_artifact(caption_path(cfg, video));
      const auto frames = description_frames_for(mine, caption);
      const bool any_caption =
          std::any_of(frames.begin(), frames.end(),
                      [](const FrameDescription& f) {
                        return !f.captions.empty();
                      });
      if (frames.empty() || !any_caption) {
        throw EmptyTrajectory("video " + video +
                              " has no captioned description frames");
      }
      items.push_back(
          {description_record_id(video, frames.front().frame_index,
                                 frames.back().frame_index, config_hash),
           build_prompt(frames, bundle)});
    } catch (const std::exception& err) {
      result.failures.emplace_back(video, err.what());
      log::error("instruct.prompt_failed",
                 {{"video", video}, {"error", err.what()}});
    }
  }

  if (opts.dry_run) {
    const auto done = load_instruction_results(instruct_results_path(cfg));
    std::size_t pending = 0;
    for (const BatchItem& item : items) {
      pending += done.count(item.record_id) == 0 ? 1 : 0;
    }
    log::info("instruct.dry_run",
              {{"records", std::to_string(items.size())},
               {"pending", std::to_string(pending)},
               {"would_write", instruct_results_path(cfg).string()}});
    return result;
  }

  ClientConfig client;
  client.endpoint_url = cfg.endpoint_url;
  client.model = cfg.model;
  client.temperature = cfg.temperature;
  client.max_tokens = cfg.max_tokens;
  client.max_attempts = cfg.max_attempts;
  client.backoff_base_ms = cfg.backoff_base_ms;
  client.backoff_max_ms = cfg.backoff_max_ms;
  client.timeout_s = cfg.request_timeout_s;
  client.credential_env = cfg.credential_env;

  const BatchReport report = generate_batch(
      items, client, cfg.concurrency, instruct_results_path(cfg));
  log::info("instruct.done",
            {{"requested", std::to_string(report.requested)},
             {"skipped", std::to_string(report.skipped)},
             {"succeeded", std::to_string(report.succeeded)},
             {"failed", std::to_string(report.failed)}});
  for (const auto& [record_id, error] : report.failures) {
    result.failures.emplace_back(record_id, error);
  }
  return result;
}

StageResult run_emit(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto videos = accepted_videos(cfg, opts);
  require_artifact(instruct_results_path(cfg), "instruct");
  const auto instructions =
      load_instruction_results(instruct_results_path(cfg));
  const std::string config_hash = cfg.semantic_hash();

  if (opts.dry_run) {
    log::info("emit.dry_run",
              {{"videos", describe_plan(videos)},
               {"would_write", description_records_path(cfg).string() + "," +
                                   action_records_path(cfg).string() + "," +
                                   manifest_path(cfg).string()}});
    return {static_cast<int>(videos.size()), {}};
  }

  // Emission is a rewrite: stale record files would corrupt the recount.
  fs::create_directories(cfg.output_dir / "records");
  fs::remove(description_records_path(cfg));
  fs::remove(action_records_path(cfg));

  CorpusManifest manifest;
  manifest.toolkit_version = VLNMINE_VERSION;
  manifest.config_snapshot = cfg.snapshot();

  StageResult result;
  result.processed = static_cast<int>(videos.size());
  for (const std::string& video : videos) {
    try {
      require_artifact(mine_path(cfg, video), "mine");
      require_artifact(caption_path(cfg, video), "caption");
      const MineArtifact mine = read_mine_artifact(mine_path(cfg, video));
      const CaptionArtifact caption =
          read_caption_artifact(caption_path(cfg, video));

      VideoCounts counts;
      counts.frames_registered = mine.frames_registered;
      counts.frames_dropped = mine.frames_dropped;
      counts.decision_points = static_cast<int>(mine.decision_points.size());

      const auto frames = description_frames_for(mine, caption);
      std::vector<int> frame_indices;
      std::vector<std::vector<std::string>> captions;
      std::vector<std::string> rooms;
      for (const FrameDescription& f : frames) {
        frame_indices.push_back(f.frame_index);
        captions.push_back(f.captions);
        rooms.push_back(f.room);
      }
      const std::string record_id = description_record_id(
          video, frame_indices.front(), frame_indices.back(), config_hash);
      std::optional<std::string> instruction;
      std::optional<GenerationProvenance> provenance;
      if (const auto it = instructions.find(record_id);
          it != instructions.end()) {
        instruction = it->second.text;
        provenance = GenerationProvenance{it->second.model,
                                          it->second.temperature,
                                          it->second.prompt_hash,
                                          it->second.attempts};
      } else {
        counts.generation_failures += 1;
      }
      const TrajectoryRecord record = make_description_record(
          video, frame_indices, captions, rooms, instruction, provenance,
          config_hash);
      counts.description_records += static_cast<int>(emit_description_records(
          std::span<const TrajectoryRecord>(&record, 1),
          description_records_path(cfg)));

      const auto action_records = make_action_records(
          mine.trajectory, mine.step_frames, mine.candidate_sets,
          cfg.dbscan_eps_m, config_hash);
      counts.action_records += static_cast<int>(
          emit_action_records(action_records, action_records_path(cfg)));

      manifest.videos[video] = counts;
      log::info("emit.done",
                {{"video", video},
                 {"action_records", std::to_string(counts.action_records)}});
    } catch (const std::exception& err) {
      result.failures.emplace_back(video, err.what());
      log::error("emit.failed", {{"video", video}, {"error", err.what()}});
    }
  }

  write_manifest(manifest, manifest_path(cfg), description_records_path(cfg),
                 action_records_path(cfg));
  return result;
}

StageResult run_eval(const PipelineConfig& cfg, const StageOptions& opts) {
  if (cfg.path_records.empty()) {
    throw ConfigError("key 'path_records': required for the eval stage");
  }
  require_artifact(cfg.path_records, "input");
  if (opts.dry_run) {
    log::info("eval.dry_run",
              {{"input", cfg.path_records.string()},
               {"would_write",
                (cfg.output_dir / "eval" / "metrics.json").string()}});
    return {0, {}};
  }
  const auto records =
      read_path_records(cfg.path_records, cfg.success_threshold_m);
  const MetricsSummary summary = evaluate(records);
  fs::create_directories(cfg.output_dir / "eval");
  write_metrics_summary(summary, cfg.output_dir / "eval" / "metrics.json");
  log::info("eval.done", {{"episodes", std::to_string(summary.episodes)},
                          {"sr", std::to_string(summary.sr)},
                          {"spl", std::to_string(summary.spl)},
                          {"gp_m", std::to_string(summary.gp_m)}});
  return {static_cast<int>(records.size()), {}};
}

StageResult run_all(const PipelineConfig& cfg, const StageOptions& opts) {
  StageResult total;
  for (const auto& [name, stage] :
       std::vector<std::pair<std::string, StageResult (*)(
                                 const PipelineConfig&, const StageOptions&)>>{
           {"ingest", &run_ingest},
           {"merge", &run_merge},
           {"mine", &run_mine},
           {"caption", &run_caption},
           {"instruct", &run_instruct},
           {"emit", &run_emit}}) {
    log::info("stage.start", {{"stage", stage_dir_name(name)}});
    const StageResult result = stage(cfg, opts);
    total.processed = std::max(total.processed, result.processed);
    total.failures.insert(total.failures.end(), result.failures.begin(),
                          result.failures.end());
    if (!result.ok()) {
      log::error("stage.failed", {{"stage", name}});
      return total;
    }
  }
  return total;
}

}  // namespace vlnmine
