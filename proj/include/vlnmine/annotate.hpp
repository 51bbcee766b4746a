#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vlnmine/errors.hpp"

namespace vlnmine {

// Closed room vocabulary used for frame-level location labels.
inline constexpr std::array<std::string_view, 16> kRoomTypes = {
    "bathroom", "kitchen",      "bedroom", "living room", "hallway",
    "office",   "dining room",  "foyer",   "laundry room", "outside",
    "porch",    "garage",       "front",   "patio",        "driveway",
    "backyard"};

enum class Zone { kLeft = 0, kCenter = 1, kRight = 2 };
enum class Band { kNear = 0, kMedium = 1, kFar = 2 };

std::string_view zone_name(Zone zone);
std::string_view band_name(Band band);

// Relative depth raster (row-major, larger = farther), dequantized from the
// 16-bit grayscale storage through the per-frame [min, max] sidecar values.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int col, int row) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }
};

// Normalized (x_min, y_min, x_max, y_max), all in [0, 1].
using Box = std::array<double, 4>;

struct DetectedObject {
  std::string tag;
  Box box{};
  double confidence = 0.0;
};

struct FrameAnnotation {
  int frame_index = 0;
  std::vector<DetectedObject> objects;
  std::string depth_file;  // empty when the frame has no depth raster
  double depth_min = 0.0;
  double depth_max = 1.0;
  std::optional<std::string> room_label_raw;
};

// Horizontal overlap of the box with the left (30%), center (40%) and right
// (30%) zones, as a share of the box's own extent. Ratios sum to 1.
std::array<double, 3> zone_overlap(const Box& box);

// Share of the box's pixels whose depth falls in the near / medium / far
// band. Bands split the whole frame's depth values at the 30th and 70th
// percentiles; a uniform-depth frame collapses onto near.
std::array<double, 3> depth_band_overlap(const Box& box,
                                         const DepthImage& depth);

struct SpatialLabel {
  std::string tag;
  std::vector<Zone> zones;
  std::vector<Band> bands;
};

// Zones and bands whose share strictly exceeds `threshold`; nullopt when
// either set comes out empty.
std::optional<SpatialLabel> label_object(const std::string& tag,
                                         const Box& box,
                                         const DepthImage& depth,
                                         double threshold = 0.3);

// One caption per (tag, zone, band) combination of every kept object, in
// lexicographic order of the rendered fields.
std::vector<std::string> caption_frame(const FrameAnnotation& annotation,
                                       const DepthImage* depth,
                                       double threshold = 0.3);

struct RoomSequence {
  std::vector<std::pair<int, std::string>> labels;  // (frame_index, room)
  bool smoothed = false;
};

// Centered sliding-window majority vote, iterated to a fixed point so that
// smoothing a smoothed sequence changes nothing. Ties keep the previous
// smoothed label (the raw one at the first frame). Labels outside the
// vocabulary raise VocabularyError.
RoomSequence smooth_room_labels(
    std::span<const std::pair<int, std::string>> raw, int window = 5,
    std::span<const std::string_view> vocabulary = kRoomTypes);

struct VideoMetadata {
  std::string video_id;
  double duration_s = 0.0;
  std::vector<std::pair<double, double>> shots;  // (start_s, end_s)
};

struct AcceptDecision {
  bool accepted = false;
  std::string reason;  // empty when accepted
};

// Keep a video iff it is long enough, has enough continuous shots, and the
// shots cover strictly more than the required share of its duration.
AcceptDecision accept_video(const VideoMetadata& meta,
                            double min_duration_s = 180.0, int min_shots = 9,
                            double min_coverage = 0.8);

}  // namespace vlnmine
