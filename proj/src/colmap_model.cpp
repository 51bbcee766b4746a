#include "vlnmine/colmap_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "vlnmine/log.hpp"

namespace vlnmine {
namespace {

struct ModelInfo {
  CameraModel model;
  std::string_view name;
  std::size_t params;
};

constexpr std::array<ModelInfo, 5> kModels = {{
    {CameraModel::kSimplePinhole, "SIMPLE_PINHOLE", 3},
    {CameraModel::kPinhole, "PINHOLE", 4},
    {CameraModel::kSimpleRadial, "SIMPLE_RADIAL", 4},
    {CameraModel::kRadial, "RADIAL", 5},
    {CameraModel::kOpenCv, "OPENCV", 8},
}};

template <typename T>
T byteswap_value(T value) {
  auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    return byteswap_value(value);
  }
  return value;
}

std::int64_t stream_offset(std::istream& in) {
  in.clear();  // tellg reports -1 while failbit is set
  return static_cast<std::int64_t>(in.tellg());
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw ParseError("truncated binary stream", stream_offset(in));
  }
  return to_little_endian(value);
}

template <typename T>
void write_le(std::ostream& out, T value) {
  const T le = to_little_endian(value);
  out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

// Unit-norm policy: a deviation within 1e-9 keeps the stored bits (exact
// binary round trips), up to 1e-6 is silently normalized, up to 1e-2 is
// normalized with a warning, beyond that the record is rejected.
void check_and_normalize_qvec(CameraPose& pose, std::int64_t locator) {
  const double norm = pose.qvec.norm();
  const double deviation = std::abs(norm - 1.0);
  if (deviation > 1e-2) {
    throw ParseError("quaternion norm " + std::to_string(norm) +
                         " too far from unit for image " + pose.name,
                     locator);
  }
  if (deviation <= 1e-9) {
    return;
  }
  if (deviation > 1e-6) {
    log::warn("colmap.qvec_normalized", {{"image", pose.name},
                                         {"norm", std::to_string(norm)}});
  }
  pose.qvec.normalize();
}

std::string stem_of(std::string_view name) {
  const auto slash = name.find_last_of("/\\");
  if (slash != std::string_view::npos) {
    name.remove_prefix(slash + 1);
  }
  const auto dot = name.find_last_of('.');
  if (dot != std::string_view::npos && dot > 0) {
    name = name.substr(0, dot);
  }
  return std::string(name);
}

int trailing_digits_or(std::string_view text, int fallback) {
  auto end = text.size();
  while (end > 0 && std::isdigit(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  if (end == text.size()) {
    return fallback;
  }
  const std::string digits(text.substr(end));
  errno = 0;
  const long long value = std::strtoll(digits.c_str(), nullptr, 10);
  if (errno != 0 || value > std::numeric_limits<int>::max()) {
    throw ParseError("frame index out of range in name '" + std::string(text) +
                     "'");
  }
  return static_cast<int>(value);
}

std::ifstream open_input(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) {
    throw MissingModelFile("missing model file: " + path.string());
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc
                                 : std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  return out;
}

void read_cameras_binary(const std::filesystem::path& path, SubModel& model) {
  auto in = open_input(path, true);
  const auto count = read_le<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    CameraIntrinsics cam;
    cam.camera_id = read_le<std::uint32_t>(in);
    cam.model = camera_model_from_id(read_le<std::int32_t>(in));
    cam.width = read_le<std::uint64_t>(in);
    cam.height = read_le<std::uint64_t>(in);
    cam.params.resize(camera_model_param_count(cam.model));
    for (double& p : cam.params) {
      p = read_le<double>(in);
    }
    model.intrinsics.emplace(cam.camera_id, std::move(cam));
  }
}

void read_images_binary(const std::filesystem::path& path, SubModel& model,
                        double fps) {
  (void)fps;
  auto in = open_input(path, true);
  const auto count = read_le<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    CameraPose pose;
    pose.image_id = read_le<std::uint32_t>(in);
    const double qw = read_le<double>(in);
    const double qx = read_le<double>(in);
    const double qy = read_le<double>(in);
    const double qz = read_le<double>(in);
    pose.qvec = Eigen::Quaterniond(qw, qx, qy, qz);
    pose.tvec.x() = read_le<double>(in);
    pose.tvec.y() = read_le<double>(in);
    pose.tvec.z() = read_le<double>(in);
    pose.camera_id = read_le<std::uint32_t>(in);
    char c = 0;
    while (in.get(c) && c != '\0') {
      pose.name += c;
    }
    if (!in) {
      throw ParseError("truncated image name", stream_offset(in));
    }
    check_and_normalize_qvec(pose, static_cast<std::int64_t>(in.tellg()));
    pose.frame_index = frame_index_from_name(pose.name);

    // Per-point payload is fixed width; skip it without decoding.
    const auto num_points2d = read_le<std::uint64_t>(in);
    in.seekg(static_cast<std::streamoff>(num_points2d) * 24, std::ios::cur);
    if (!in || in.peek() == std::char_traits<char>::eof()) {
      if (!in || i + 1 < count) {
        throw ParseError("truncated points2D block", stream_offset(in));
      }
    }
    model.poses.emplace(pose.frame_index, std::move(pose));
  }
}

// Skips blank lines and '#' comments; returns false at end of file.
bool next_data_line(std::istream& in, std::string& line, std::int64_t& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    if (const auto last = line.find_last_not_of(" \t\r");
        last != std::string::npos) {
      line = line.substr(first, last - first + 1);
    }
    return true;
  }
  return false;
}

void read_cameras_text(const std::filesystem::path& path, SubModel& model) {
  auto in = open_input(path, false);
  std::string line;
  std::int64_t lineno = 0;
  while (next_data_line(in, line, lineno)) {
    std::istringstream ls(line);
    CameraIntrinsics cam;
    std::string model_name;
    std::uint64_t camera_id = 0;
    if (!(ls >> camera_id >> model_name >> cam.width >> cam.height)) {
      throw ParseError("malformed camera record", lineno);
    }
    cam.camera_id = static_cast<std::uint32_t>(camera_id);
    cam.model = camera_model_from_name(model_name);
    cam.params.resize(camera_model_param_count(cam.model));
    for (double& p : cam.params) {
      if (!(ls >> p)) {
        throw ParseError("camera params truncated", lineno);
      }
    }
    double extra = 0;
    if (ls >> extra) {
      throw ParseError("camera params count exceeds model arity", lineno);
    }
    model.intrinsics.emplace(cam.camera_id, std::move(cam));
  }
}

void read_images_text(const std::filesystem::path& path, SubModel& model) {
  auto in = open_input(path, false);
  std::string line;
  std::int64_t lineno = 0;
  while (next_data_line(in, line, lineno)) {
    std::istringstream ls(line);
    CameraPose pose;
    std::uint64_t image_id = 0, camera_id = 0;
    double qw, qx, qy, qz;
    if (!(ls >> image_id >> qw >> qx >> qy >> qz >> pose.tvec.x() >>
          pose.tvec.y() >> pose.tvec.z() >> camera_id >> pose.name)) {
      throw ParseError("malformed image record", lineno);
    }
    pose.image_id = static_cast<std::uint32_t>(image_id);
    pose.camera_id = static_cast<std::uint32_t>(camera_id);
    pose.qvec = Eigen::Quaterniond(qw, qx, qy, qz);
    check_and_normalize_qvec(pose, lineno);
    pose.frame_index = frame_index_from_name(pose.name);
    // Second line holds the 2D observations; present but unused.
    if (!std::getline(in, line)) {
      throw ParseError("missing points2D line", lineno);
    }
    ++lineno;
    model.poses.emplace(pose.frame_index, std::move(pose));
  }
}

void write_cameras_binary(const SubModel& model,
                          const std::filesystem::path& path) {
  auto out = open_output(path, true);
  write_le<std::uint64_t>(out, model.intrinsics.size());
  for (const auto& [id, cam] : model.intrinsics) {
    write_le<std::uint32_t>(out, cam.camera_id);
    write_le<std::int32_t>(out, static_cast<std::int32_t>(cam.model));
    write_le<std::uint64_t>(out, cam.width);
    write_le<std::uint64_t>(out, cam.height);
    for (const double p : cam.params) {
      write_le<double>(out, p);
    }
  }
}

void write_images_binary(const SubModel& model,
                         const std::filesystem::path& path) {
  auto out = open_output(path, true);
  write_le<std::uint64_t>(out, model.poses.size());
  for (const auto& [idx, pose] : model.poses) {
    write_le<std::uint32_t>(out, pose.image_id);
    write_le<double>(out, pose.qvec.w());
    write_le<double>(out, pose.qvec.x());
    write_le<double>(out, pose.qvec.y());
    write_le<double>(out, pose.qvec.z());
    write_le<double>(out, pose.tvec.x());
    write_le<double>(out, pose.tvec.y());
    write_le<double>(out, pose.tvec.z());
    write_le<std::uint32_t>(out, pose.camera_id);
    out.write(pose.name.c_str(),
              static_cast<std::streamsize>(pose.name.size()) + 1);
    write_le<std::uint64_t>(out, 0);  // no 2D observations
  }
}

void write_points3d_binary(const std::filesystem::path& path) {
  auto out = open_output(path, true);
  write_le<std::uint64_t>(out, 0);
}

void write_cameras_text(const SubModel& model,
                        const std::filesystem::path& path) {
  auto out = open_output(path, false);
  out << "# Camera list with one line of data per camera:\n"
      << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
      << "# Number of cameras: " << model.intrinsics.size() << "\n";
  out << std::setprecision(17);
  for (const auto& [id, cam] : model.intrinsics) {
    out << cam.camera_id << ' ' << camera_model_name(cam.model) << ' '
        << cam.width << ' ' << cam.height;
    for (const double p : cam.params) {
      out << ' ' << p;
    }
    out << '\n';
  }
}

void write_images_text(const SubModel& model,
                       const std::filesystem::path& path) {
  auto out = open_output(path, false);
  out << "# Image list with two lines of data per image:\n"
      << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
      << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n"
      << "# Number of images: " << model.poses.size() << "\n";
  out << std::setprecision(17);
  for (const auto& [idx, pose] : model.poses) {
    out << pose.image_id << ' ' << pose.qvec.w() << ' ' << pose.qvec.x() << ' '
        << pose.qvec.y() << ' ' << pose.qvec.z() << ' ' << pose.tvec.x() << ' '
        << pose.tvec.y() << ' ' << pose.tvec.z() << ' ' << pose.camera_id
        << ' ' << pose.name << '\n';
    out << '\n';  // empty observations line
  }
}

void write_points3d_text(const std::filesystem::path& path) {
  auto out = open_output(path, false);
  out << "# 3D point list with one line of data per point:\n"
      << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, "
         "POINT2D_IDX)\n"
      << "# Number of points: 0, mean track length: 0\n";
}

ModelFormat detect_format(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (fs::exists(dir / "cameras.bin") && fs::exists(dir / "images.bin")) {
    return ModelFormat::kBinary;
  }
  if (fs::exists(dir / "cameras.txt") && fs::exists(dir / "images.txt")) {
    return ModelFormat::kText;
  }
  throw MissingModelFile("no cameras/images pair (.bin or .txt) in " +
                         dir.string());
}

}  // namespace

std::size_t camera_model_param_count(CameraModel model) {
  return kModels[static_cast<std::size_t>(model)].params;
}

std::string_view camera_model_name(CameraModel model) {
  return kModels[static_cast<std::size_t>(model)].name;
}

CameraModel camera_model_from_name(std::string_view name) {
  for (const auto& info : kModels) {
    if (info.name == name) {
      return info.model;
    }
  }
  throw ParseError("unsupported camera model '" + std::string(name) + "'");
}

CameraModel camera_model_from_id(std::int32_t id) {
  if (id < 0 || id >= static_cast<std::int32_t>(kModels.size())) {
    throw ParseError("unsupported camera model id " + std::to_string(id));
  }
  return kModels[static_cast<std::size_t>(id)].model;
}

int frame_index_from_name(std::string_view name) {
  const std::string stem = stem_of(name);
  const int index = trailing_digits_or(stem, -1);
  if (index < 0) {
    throw ParseError("image name '" + std::string(name) +
                     "' carries no frame index");
  }
  return index;
}

void SubModel::recompute_clip_span(double fps) {
  if (poses.empty()) {
    clip_start_s = clip_end_s = 0.0;
    return;
  }
  clip_start_s = frame_timestamp_s(poses.begin()->first, fps);
  clip_end_s = frame_timestamp_s(poses.rbegin()->first, fps);
}

SubModel parse_model(const std::filesystem::path& dir, ModelFormat format,
                     int model_id, double fps) {
  if (format == ModelFormat::kAuto) {
    format = detect_format(dir);
  }
  SubModel model;
  model.model_id =
      model_id >= 0 ? model_id : trailing_digits_or(dir.filename().string(), 0);
  if (format == ModelFormat::kBinary) {
    read_cameras_binary(dir / "cameras.bin", model);
    read_images_binary(dir / "images.bin", model, fps);
  } else {
    read_cameras_text(dir / "cameras.txt", model);
    read_images_text(dir / "images.txt", model);
  }
  model.recompute_clip_span(fps);
  return model;
}

void write_model(const SubModel& model, const std::filesystem::path& dir,
                 ModelFormat format) {
  if (format == ModelFormat::kAuto) {
    throw InvalidInput("write_model requires an explicit format");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir.string() + ": " +
                  ec.message());
  }
  if (format == ModelFormat::kBinary) {
    write_cameras_binary(model, dir / "cameras.bin");
    write_images_binary(model, dir / "images.bin");
    write_points3d_binary(dir / "points3D.bin");
  } else {
    write_cameras_text(model, dir / "cameras.txt");
    write_images_text(model, dir / "images.txt");
    write_points3d_text(dir / "points3D.txt");
  }
}

}  // namespace vlnmine
