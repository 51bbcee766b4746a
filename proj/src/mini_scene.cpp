#include "vlnmine/mini_scene.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "vlnmine/annotation_io.hpp"
#include "vlnmine/colmap_model.hpp"
#include "vlnmine/geometry.hpp"

namespace vlnmine {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr double kStepM = 1.42 / 3.0;  // walking displacement per frame

std::string frame_name(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%06d.jpg", index);
  return buffer;
}

CameraPose pose_at(int frame, const Eigen::Vector3d& position,
                   double yaw_deg) {
  const double yaw = rad_from_deg(yaw_deg);
  Eigen::Matrix3d cam_to_world;
  cam_to_world.col(0) = Eigen::Vector3d(std::sin(yaw), -std::cos(yaw), 0.0);
  cam_to_world.col(1) = Eigen::Vector3d(0.0, 0.0, -1.0);
  cam_to_world.col(2) = Eigen::Vector3d(std::cos(yaw), std::sin(yaw), 0.0);

  CameraPose pose;
  pose.image_id = static_cast<std::uint32_t>(frame + 1);
  pose.frame_index = frame;
  pose.camera_id = 1;
  pose.name = frame_name(frame);
  pose.qvec = Eigen::Quaterniond(cam_to_world.transpose()).normalized();
  pose.tvec = -(cam_to_world.transpose() * position);
  return pose;
}

struct SceneFrame {
  Eigen::Vector3d position;
  double yaw_deg;
  std::string room;
};

ordered_json box_json(double x0, double y0, double x1, double y1) {
  return ordered_json::array({x0, y0, x1, y1});
}

ordered_json object_json(const std::string& tag, const ordered_json& box,
                         double confidence) {
  ordered_json o;
  o["tag"] = tag;
  o["box"] = box;
  o["confidence"] = confidence;
  return o;
}

}  // namespace

MiniScene generate_mini_scene(const fs::path& dir,
                              const std::string& endpoint_url) {
  MiniScene scene;
  scene.root = dir;
  scene.glance_start_frames = {6, 12, 18};
  scene.corner_position = {5.0 * kStepM, 0.0, 0.0};

  // Frame script: walk +x (0..5), glance right/back-left/back-right at the
  // corner (6..23, six frames each), then walk +y (24..35). Glance frames
  // sway by a few millimeters like a handheld camera would; that keeps the
  // shared camera centers off a single line without registering as motion.
  std::vector<SceneFrame> frames;
  for (int k = 0; k <= 5; ++k) {
    frames.push_back({{k * kStepM, 0.0, 0.0}, 0.0, "hallway"});
  }
  const double glance_yaws[3] = {-60.0, 175.0, -110.0};
  for (int g = 0; g < 3; ++g) {
    for (int k = 0; k < 6; ++k) {
      const int i = g * 6 + k;
      const Eigen::Vector3d sway(0.002 * std::sin(1.0 * i),
                                 0.002 * std::cos(1.3 * i),
                                 0.001 * std::sin(2.1 * i));
      frames.push_back(
          {scene.corner_position + sway, glance_yaws[g], "hallway"});
    }
  }
  for (int k = 1; k <= 12; ++k) {
    frames.push_back(
        {scene.corner_position + Eigen::Vector3d(0.0, k * kStepM, 0.0), 90.0,
         "living room"});
  }
  scene.num_frames = static_cast<int>(frames.size());

  // One mislabeled frame exercises room smoothing.
  frames[14].room = "kitchen";

  CameraIntrinsics camera;
  camera.camera_id = 1;
  camera.model = CameraModel::kSimplePinhole;
  camera.width = 640;
  camera.height = 360;
  camera.params = {500.0, 320.0, 180.0};

  // Two overlapping clips; the second carries its own similarity frame the
  // merge stage has to undo. The overlap spans both walk legs so the shared
  // camera centers are well-conditioned for alignment.
  SubModel clip0;
  clip0.model_id = 0;
  clip0.intrinsics.emplace(1, camera);
  SubModel clip1;
  clip1.model_id = 1;
  clip1.intrinsics.emplace(1, camera);

  SimilarityTransform perturb;
  perturb.scale = 1.25;
  perturb.rotation = Eigen::Quaterniond(
      Eigen::AngleAxisd(rad_from_deg(40.0), Eigen::Vector3d::UnitZ()));
  perturb.translation = {3.0, -2.0, 0.5};

  for (int k = 0; k < scene.num_frames; ++k) {
    const CameraPose pose = pose_at(k, frames[static_cast<std::size_t>(k)].position,
                                    frames[static_cast<std::size_t>(k)].yaw_deg);
    if (k <= 25) {
      clip0.poses.emplace(k, pose);
    }
    if (k >= 2) {
      clip1.poses.emplace(k, transformed(pose, perturb));
    }
  }
  clip0.recompute_clip_span(3.0);
  clip1.recompute_clip_span(3.0);

  const fs::path models = dir / "models" / scene.video_id;
  write_model(clip0, models / "0", ModelFormat::kBinary);
  write_model(clip1, models / "1", ModelFormat::kBinary);

  // Annotations: objects per walking phase, a depth ramp per frame.
  const fs::path annotations = dir / "annotations";
  const fs::path depth_dir = annotations / (scene.video_id + "_depth");
  fs::create_directories(depth_dir);

  constexpr int kDepthW = 64;
  constexpr int kDepthH = 48;
  ordered_json frames_json = ordered_json::array();
  for (int k = 0; k < scene.num_frames; ++k) {
    Pgm16 raster;
    raster.width = kDepthW;
    raster.height = kDepthH;
    raster.data.resize(kDepthW * kDepthH);
    for (int r = 0; r < kDepthH; ++r) {
      for (int c = 0; c < kDepthW; ++c) {
        const int ramp = k % 2 == 0 ? c : kDepthW - 1 - c;
        raster.data[static_cast<std::size_t>(r) * kDepthW +
                    static_cast<std::size_t>(c)] =
            static_cast<std::uint16_t>(ramp * 65535 / (kDepthW - 1));
      }
    }
    const std::string depth_name =
        scene.video_id + "_depth/" + frame_name(k).substr(0, 6) + ".pgm";
    write_pgm16(annotations / depth_name, raster);

    ordered_json objects = ordered_json::array();
    if (k <= 5) {
      objects.push_back(object_json("door", box_json(0.40, 0.15, 0.62, 0.85), 0.92));
      objects.push_back(object_json("carpet", box_json(0.05, 0.55, 0.95, 0.95), 0.88));
      objects.push_back(object_json("picture frame", box_json(0.02, 0.20, 0.20, 0.50), 0.71));
    } else if (k <= 11) {
      objects.push_back(object_json("window", box_json(0.70, 0.10, 0.98, 0.60), 0.90));
      objects.push_back(object_json("plant", box_json(0.10, 0.40, 0.35, 0.80), 0.77));
    } else if (k <= 17) {
      objects.push_back(object_json("staircase", box_json(0.30, 0.10, 0.70, 0.90), 0.85));
      objects.push_back(object_json("lamp", box_json(0.75, 0.30, 0.90, 0.70), 0.69));
    } else if (k <= 23) {
      objects.push_back(object_json("door", box_json(0.35, 0.10, 0.65, 0.90), 0.91));
      objects.push_back(object_json("carpet", box_json(0.10, 0.60, 0.90, 0.95), 0.83));
    } else {
      objects.push_back(object_json("sofa", box_json(0.55, 0.35, 0.95, 0.80), 0.94));
      objects.push_back(object_json("coffee table", box_json(0.25, 0.50, 0.60, 0.85), 0.81));
      objects.push_back(object_json("television", box_json(0.05, 0.25, 0.30, 0.60), 0.87));
    }

    ordered_json entry;
    entry["frame_index"] = k;
    entry["objects"] = objects;
    entry["depth_file"] = depth_name;
    entry["depth_min"] = 0.4;
    entry["depth_max"] = 8.0;
    entry["room_label"] = frames[static_cast<std::size_t>(k)].room;
    frames_json.push_back(entry);
  }
  {
    std::ofstream out(annotations / (scene.video_id + ".json"),
                      std::ios::trunc);
    out << frames_json.dump(1) << '\n';
  }

  // Metadata describing the full source video; the frames above cover only
  // its opening seconds.
  {
    ordered_json meta;
    meta["video_id"] = scene.video_id;
    meta["duration_s"] = 600.0;
    ordered_json shots = ordered_json::array();
    const double spans[10][2] = {{0, 60},    {60, 115},  {120, 170},
                                 {170, 230}, {230, 290}, {290, 350},
                                 {350, 410}, {410, 470}, {470, 530},
                                 {530, 585}};
    for (const auto& span : spans) {
      shots.push_back(ordered_json::array({span[0], span[1]}));
    }
    meta["shots"] = shots;
    std::ofstream out(annotations / (scene.video_id + ".meta.json"),
                      std::ios::trunc);
    out << meta.dump(1) << '\n';
  }

  {
    ordered_json prompt;
    prompt["task_instruction"] =
        "You are given a walking tour through a home as a sequence of "
        "frames. Each frame lists the visible objects with their position "
        "and distance, plus the room it was taken in. Write one concise "
        "navigation instruction that walks a person along this exact route, "
        "mentioning landmark objects and room changes in order.";
    ordered_json example;
    example["input"] =
        "Frame 0 (kitchen): There is a refrigerator to the right of the "
        "current spot in near distance.\n"
        "Frame 6 (dining room): There is a table to the center of the "
        "current spot in medium distance.";
    example["output"] =
        "Leave the kitchen keeping the refrigerator on your right, continue "
        "into the dining room and stop next to the table.";
    prompt["examples"] = ordered_json::array({example});
    prompt["_note"] =
        "Edit task_instruction and examples to match your production "
        "prompt wording; these defaults only fix the format.";
    std::ofstream out(dir / "prompt.json", std::ios::trunc);
    out << prompt.dump(1) << '\n';
  }

  scene.config_file = dir / "config.ini";
  {
    std::ofstream out(scene.config_file, std::ios::trunc);
    out << "# mini scene pipeline configuration\n"
        << "models_dir = " << (dir / "models").string() << "\n"
        << "annotations_dir = " << annotations.string() << "\n"
        << "output_dir = " << (dir / "out").string() << "\n"
        << "prompt_template = " << (dir / "prompt.json").string() << "\n"
        << "fps = 3\n"
        << "max_negatives = 3\n"
        << "workers = 1\n"
        << "concurrency = 2\n"
        << "max_attempts = 3\n"
        << "backoff_base_ms = 1\n"
        << "backoff_max_ms = 10\n"
        << "request_timeout_s = 5\n"
        << "model = mock-gpt\n"
        << "endpoint_url = " << endpoint_url << "\n";
  }
  return scene;
}

}  // namespace vlnmine
