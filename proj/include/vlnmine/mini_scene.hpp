#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vlnmine {

// Text every mock completion endpoint should return for the mini scene so
// golden outputs stay byte-stable.
inline constexpr const char* kMiniSceneInstruction =
    "Walk straight ahead past the door along the hallway carpet, pause at "
    "the corner to look around, then turn left into the living room and "
    "stop by the sofa.";

// Ground truth of the generated scene, for assertions.
struct MiniScene {
  std::string video_id = "tour001";
  std::filesystem::path root;
  std::filesystem::path config_file;
  int num_frames = 36;
  int corner_arrival_frame = 5;           // walking stops here
  std::vector<int> glance_start_frames;   // one per side glance
  int resume_frame = 24;                  // walking continues here
  Eigen::Vector3d corner_position = Eigen::Vector3d::Zero();
};

// Synthetic one-video room tour: a straight walk, three side glances at one
// corner, then a 90-degree turn onward. Writes COLMAP sub-models (the
// second clip perturbed by a similarity transform), per-frame annotations
// with depth rasters, video metadata, a prompt template and a pipeline
// config wired to `endpoint_url`. Fully deterministic.
MiniScene generate_mini_scene(const std::filesystem::path& dir,
                              const std::string& endpoint_url);

}  // namespace vlnmine
