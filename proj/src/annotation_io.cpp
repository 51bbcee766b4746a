#include "vlnmine/annotation_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vlnmine {
namespace {

using nlohmann::json;

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& err) {
    throw SchemaError(path.string() + ": " + err.what());
  }
  return doc;
}

[[noreturn]] void fail(const std::filesystem::path& path,
                       const std::string& where, const std::string& what) {
  throw SchemaError(path.string() + ": " + where + ": " + what);
}

double require_number(const json& j, const std::filesystem::path& path,
                      const std::string& where) {
  if (!j.is_number()) {
    fail(path, where, "expected a number");
  }
  return j.get<double>();
}

}  // namespace

std::vector<FrameAnnotation> load_video_annotations(
    const std::filesystem::path& path) {
  const json doc = load_json(path);
  if (!doc.is_array()) {
    fail(path, "$", "expected a top-level array of frame entries");
  }
  std::vector<FrameAnnotation> frames;
  frames.reserve(doc.size());
  int previous_index = -1;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& entry = doc[i];
    const std::string where = "$[" + std::to_string(i) + "]";
    if (!entry.is_object()) {
      fail(path, where, "expected an object");
    }
    FrameAnnotation frame;
    if (!entry.contains("frame_index") ||
        !entry["frame_index"].is_number_integer()) {
      fail(path, where + ".frame_index", "required integer");
    }
    frame.frame_index = entry["frame_index"].get<int>();
    if (frame.frame_index < 0) {
      fail(path, where + ".frame_index", "must be >= 0");
    }
    if (frame.frame_index <= previous_index) {
      fail(path, where + ".frame_index", "must be strictly increasing");
    }
    previous_index = frame.frame_index;

    if (!entry.contains("objects") || !entry["objects"].is_array()) {
      fail(path, where + ".objects", "required array");
    }
    for (std::size_t k = 0; k < entry["objects"].size(); ++k) {
      const json& obj = entry["objects"][k];
      const std::string obj_where = where + ".objects[" + std::to_string(k) + "]";
      DetectedObject detected;
      if (!obj.contains("tag") || !obj["tag"].is_string() ||
          obj["tag"].get<std::string>().empty()) {
        fail(path, obj_where + ".tag", "required non-empty string");
      }
      detected.tag = obj["tag"].get<std::string>();
      if (!obj.contains("box") || !obj["box"].is_array() ||
          obj["box"].size() != 4) {
        fail(path, obj_where + ".box", "required [x_min,y_min,x_max,y_max]");
      }
      for (int c = 0; c < 4; ++c) {
        detected.box[static_cast<std::size_t>(c)] =
            require_number(obj["box"][static_cast<std::size_t>(c)], path,
                           obj_where + ".box");
      }
      if (!(detected.box[0] >= 0.0 && detected.box[0] < detected.box[2] &&
            detected.box[2] <= 1.0 && detected.box[1] >= 0.0 &&
            detected.box[1] < detected.box[3] && detected.box[3] <= 1.0)) {
        fail(path, obj_where + ".box", "coordinates violate 0<=min<max<=1");
      }
      detected.confidence =
          obj.contains("confidence")
              ? require_number(obj["confidence"], path,
                               obj_where + ".confidence")
              : 1.0;
      frame.objects.push_back(std::move(detected));
    }

    if (entry.contains("depth_file")) {
      if (!entry["depth_file"].is_string()) {
        fail(path, where + ".depth_file", "expected string");
      }
      frame.depth_file = entry["depth_file"].get<std::string>();
    }
    if (entry.contains("depth_min")) {
      frame.depth_min = require_number(entry["depth_min"], path,
                                       where + ".depth_min");
    }
    if (entry.contains("depth_max")) {
      frame.depth_max = require_number(entry["depth_max"], path,
                                       where + ".depth_max");
    }
    if (frame.depth_min > frame.depth_max) {
      fail(path, where + ".depth_min", "depth_min exceeds depth_max");
    }
    if (entry.contains("room_label")) {
      if (!entry["room_label"].is_string()) {
        fail(path, where + ".room_label", "expected string");
      }
      frame.room_label_raw = entry["room_label"].get<std::string>();
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

VideoMetadata load_video_metadata(const std::filesystem::path& path) {
  const json doc = load_json(path);
  if (!doc.is_object()) {
    fail(path, "$", "expected an object");
  }
  VideoMetadata meta;
  if (!doc.contains("video_id") || !doc["video_id"].is_string()) {
    fail(path, "$.video_id", "required string");
  }
  meta.video_id = doc["video_id"].get<std::string>();
  if (!doc.contains("duration_s")) {
    fail(path, "$.duration_s", "required number");
  }
  meta.duration_s = require_number(doc["duration_s"], path, "$.duration_s");
  if (meta.duration_s <= 0.0) {
    fail(path, "$.duration_s", "must be positive");
  }
  if (!doc.contains("shots") || !doc["shots"].is_array()) {
    fail(path, "$.shots", "required array of [start_s, end_s]");
  }
  for (std::size_t i = 0; i < doc["shots"].size(); ++i) {
    const json& shot = doc["shots"][i];
    const std::string where = "$.shots[" + std::to_string(i) + "]";
    if (!shot.is_array() || shot.size() != 2) {
      fail(path, where, "expected [start_s, end_s]");
    }
    const double start = require_number(shot[0], path, where);
    const double end = require_number(shot[1], path, where);
    if (!(start >= 0.0 && start < end && end <= meta.duration_s)) {
      fail(path, where, "shot outside [0, duration] or empty");
    }
    meta.shots.emplace_back(start, end);
  }
  std::sort(meta.shots.begin(), meta.shots.end());
  for (std::size_t i = 0; i + 1 < meta.shots.size(); ++i) {
    if (meta.shots[i].second > meta.shots[i + 1].first) {
      fail(path, "$.shots", "shots overlap");
    }
  }
  return meta;
}

Pgm16 read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::string magic;
  in >> magic;
  if (magic != "P5") {
    throw ParseError(path.string() + ": not a P5 PGM");
  }
  const auto next_token = [&]() {
    std::string token;
    while (in >> token) {
      if (token[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return token;
    }
    throw ParseError(path.string() + ": truncated PGM header");
  };
  Pgm16 image;
  image.width = std::stoi(next_token());
  image.height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (image.width <= 0 || image.height <= 0 || maxval != 65535) {
    throw ParseError(path.string() + ": expected 16-bit PGM (maxval 65535)");
  }
  in.get();  // single whitespace after maxval
  const std::size_t count = static_cast<std::size_t>(image.width) *
                            static_cast<std::size_t>(image.height);
  image.data.resize(count);
  std::vector<unsigned char> raw(count * 2);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) {
    throw ParseError(path.string() + ": truncated PGM payload",
                     static_cast<std::int64_t>(in.gcount()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    image.data[i] = static_cast<std::uint16_t>(
        (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]);
  }
  return image;
}

void write_pgm16(const std::filesystem::path& path, const Pgm16& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out << "P5\n" << image.width << ' ' << image.height << "\n65535\n";
  std::vector<unsigned char> raw;
  raw.reserve(image.data.size() * 2);
  for (const std::uint16_t v : image.data) {
    raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

DepthImage load_depth(const std::filesystem::path& path, double depth_min,
                      double depth_max) {
  const Pgm16 pgm = read_pgm16(path);
  DepthImage depth;
  depth.width = pgm.width;
  depth.height = pgm.height;
  depth.values.resize(pgm.data.size());
  const double span = depth_max - depth_min;
  for (std::size_t i = 0; i < pgm.data.size(); ++i) {
    depth.values[i] = static_cast<float>(
        depth_min + span * (static_cast<double>(pgm.data[i]) / 65535.0));
  }
  return depth;
}

}  // namespace vlnmine
