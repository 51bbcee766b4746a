#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vlnmine/annotate.hpp"

namespace vlnmine {

// Per-video annotation document: a JSON array of frame entries
// {frame_index, objects[], depth_file?, depth_min?, depth_max?, room_label?}.
// Validated against the schema in docs/; violations raise SchemaError with
// the offending path.
std::vector<FrameAnnotation> load_video_annotations(
    const std::filesystem::path& path);

// {video_id, duration_s, shots: [[start_s, end_s], ...]} with shots
// non-overlapping and inside [0, duration].
VideoMetadata load_video_metadata(const std::filesystem::path& path);

struct Pgm16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;  // row-major
};

Pgm16 read_pgm16(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const Pgm16& image);

// Dequantizes a stored raster through the frame's [depth_min, depth_max].
DepthImage load_depth(const std::filesystem::path& path, double depth_min,
                      double depth_max);

}  // namespace vlnmine
