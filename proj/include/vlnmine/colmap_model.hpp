#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "vlnmine/errors.hpp"

namespace vlnmine {

// Camera models accepted from COLMAP sparse reconstructions. The ids match
// COLMAP's on-disk model ids; anything else is rejected at parse time.
enum class CameraModel : std::int32_t {
  kSimplePinhole = 0,  // f, cx, cy
  kPinhole = 1,        // fx, fy, cx, cy
  kSimpleRadial = 2,   // f, cx, cy, k
  kRadial = 3,         // f, cx, cy, k1, k2
  kOpenCv = 4,         // fx, fy, cx, cy, k1, k2, p1, p2
};

std::size_t camera_model_param_count(CameraModel model);
std::string_view camera_model_name(CameraModel model);
CameraModel camera_model_from_name(std::string_view name);
CameraModel camera_model_from_id(std::int32_t id);

struct CameraIntrinsics {
  std::uint32_t camera_id = 0;
  CameraModel model = CameraModel::kSimplePinhole;
  std::uint64_t width = 0;
  std::uint64_t height = 0;
  std::vector<double> params;

  bool operator==(const CameraIntrinsics&) const = default;
};

// One registered frame. qvec is the world-to-camera rotation in COLMAP's
// (w, x, y, z) order; the camera center is C = -R^T * tvec.
struct CameraPose {
  std::uint32_t image_id = 0;
  int frame_index = 0;
  Eigen::Quaterniond qvec = Eigen::Quaterniond::Identity();
  Eigen::Vector3d tvec = Eigen::Vector3d::Zero();
  std::uint32_t camera_id = 0;
  std::string name;

  Eigen::Matrix3d rotation() const { return qvec.toRotationMatrix(); }
  Eigen::Vector3d center() const { return -(rotation().transpose() * tvec); }
};

// A sparse reconstruction of one video clip, keyed by frame index.
struct SubModel {
  int model_id = 0;
  std::map<int, CameraPose> poses;
  std::map<std::uint32_t, CameraIntrinsics> intrinsics;
  double clip_start_s = 0.0;
  double clip_end_s = 0.0;

  // clip_span from the registered frame range at the given sampling rate.
  void recompute_clip_span(double fps);
};

enum class ModelFormat { kBinary, kText, kAuto };

// Longest trailing digit run of the image-name stem, e.g. "000042.jpg" -> 42.
// Throws ParseError when the stem carries no digits.
int frame_index_from_name(std::string_view name);

inline double frame_timestamp_s(int frame_index, double fps) {
  return static_cast<double>(frame_index) / fps;
}

// Reads cameras.{bin|txt} and images.{bin|txt} from `dir`. points3D files are
// not needed and never read. model_id < 0 derives the id from trailing digits
// of the directory name (0 when there are none).
SubModel parse_model(const std::filesystem::path& dir,
                     ModelFormat format = ModelFormat::kAuto,
                     int model_id = -1, double fps = 3.0);

// Emits cameras/images/points3D in the requested format; points3D is always
// written empty. parse_model(write_model(m)) reproduces m field-by-field
// (exactly in binary, to 1e-9 in text).
void write_model(const SubModel& model, const std::filesystem::path& dir,
                 ModelFormat format);

}  // namespace vlnmine
