#include "vlnmine/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace vlnmine {
namespace {

// Zone boundaries on a 0..100 axis. Working in percent keeps the arithmetic
// exact for percent-aligned boxes (a full-frame box yields 0.3/0.4/0.3).
constexpr double kZoneLo[3] = {0.0, 30.0, 70.0};
constexpr double kZoneHi[3] = {30.0, 70.0, 100.0};

void check_box(const Box& box) {
  const auto [x0, y0, x1, y1] = std::tuple(box[0], box[1], box[2], box[3]);
  if (!(x0 >= 0.0 && x0 < x1 && x1 <= 1.0 && y0 >= 0.0 && y0 < y1 &&
        y1 <= 1.0)) {
    throw InvalidInput("invalid normalized box");
  }
}

struct PixelRect {
  long c0, c1, r0, r1;  // half-open
};

PixelRect box_pixels(const Box& box, int width, int height) {
  PixelRect rect{};
  rect.c0 = std::clamp<long>(std::lround(box[0] * width), 0, width);
  rect.c1 = std::clamp<long>(std::lround(box[2] * width), 0, width);
  rect.r0 = std::clamp<long>(std::lround(box[1] * height), 0, height);
  rect.r1 = std::clamp<long>(std::lround(box[3] * height), 0, height);
  return rect;
}

}  // namespace

std::string_view zone_name(Zone zone) {
  switch (zone) {
    case Zone::kLeft:
      return "left";
    case Zone::kCenter:
      return "center";
    case Zone::kRight:
      return "right";
  }
  return "center";
}

std::string_view band_name(Band band) {
  switch (band) {
    case Band::kNear:
      return "near";
    case Band::kMedium:
      return "medium";
    case Band::kFar:
      return "far";
  }
  return "medium";
}

std::array<double, 3> zone_overlap(const Box& box) {
  check_box(box);
  const double bx0 = box[0] * 100.0;
  const double bx1 = box[2] * 100.0;
  const double width = bx1 - bx0;
  std::array<double, 3> ratios{};
  for (int z = 0; z < 3; ++z) {
    const double lo = std::max(kZoneLo[z], bx0);
    const double hi = std::min(kZoneHi[z], bx1);
    ratios[static_cast<std::size_t>(z)] = hi > lo ? (hi - lo) / width : 0.0;
  }
  return ratios;
}

std::array<double, 3> depth_band_overlap(const Box& box,
                                         const DepthImage& depth) {
  check_box(box);
  if (depth.width <= 0 || depth.height <= 0 ||
      depth.values.size() != static_cast<std::size_t>(depth.width) *
                                 static_cast<std::size_t>(depth.height)) {
    throw InvalidInput("depth map dimensions invalid");
  }

  // Nearest-rank percentiles over the whole frame.
  std::vector<float> sorted = depth.values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(n)));
    return sorted[std::min(n - 1, k == 0 ? 0 : k - 1)];
  };
  const float near_cut = rank(0.3);
  const float far_cut = rank(0.7);

  const PixelRect rect = box_pixels(box, depth.width, depth.height);
  const long total = (rect.c1 - rect.c0) * (rect.r1 - rect.r0);
  if (total <= 0) {
    throw DegenerateBox("box covers no pixels after rounding");
  }

  std::array<long, 3> counts{};
  for (long r = rect.r0; r < rect.r1; ++r) {
    for (long c = rect.c0; c < rect.c1; ++c) {
      const float d = depth.at(static_cast<int>(c), static_cast<int>(r));
      if (d <= near_cut) {
        ++counts[0];
      } else if (d <= far_cut) {
        ++counts[1];
      } else {
        ++counts[2];
      }
    }
  }
  return {static_cast<double>(counts[0]) / static_cast<double>(total),
          static_cast<double>(counts[1]) / static_cast<double>(total),
          static_cast<double>(counts[2]) / static_cast<double>(total)};
}

std::optional<SpatialLabel> label_object(const std::string& tag,
                                         const Box& box,
                                         const DepthImage& depth,
                                         double threshold) {
  SpatialLabel label;
  label.tag = tag;
  // A zone counts when the object substantially overlaps it from either
  // side: more than `threshold` of the box lies in the zone, or the box
  // covers more than `threshold` of the zone. The second arm is what lets
  // wide items (carpets, tables) register in every zone they span.
  const auto zones = zone_overlap(box);
  const double bx0 = box[0] * 100.0;
  const double bx1 = box[2] * 100.0;
  for (int z = 0; z < 3; ++z) {
    const double lo = std::max(kZoneLo[z], bx0);
    const double hi = std::min(kZoneHi[z], bx1);
    const double zone_share =
        hi > lo ? (hi - lo) / (kZoneHi[z] - kZoneLo[z]) : 0.0;
    if (zones[static_cast<std::size_t>(z)] > threshold ||
        zone_share > threshold) {
      label.zones.push_back(static_cast<Zone>(z));
    }
  }
  const auto bands = depth_band_overlap(box, depth);
  for (int b = 0; b < 3; ++b) {
    if (bands[static_cast<std::size_t>(b)] > threshold) {
      label.bands.push_back(static_cast<Band>(b));
    }
  }
  if (label.zones.empty() || label.bands.empty()) {
    return std::nullopt;
  }
  return label;
}

std::vector<std::string> caption_frame(const FrameAnnotation& annotation,
                                       const DepthImage* depth,
                                       double threshold) {
  std::vector<std::tuple<std::string, std::string, std::string>> parts;
  if (depth != nullptr) {
    for (const DetectedObject& obj : annotation.objects) {
      const auto label = label_object(obj.tag, obj.box, *depth, threshold);
      if (!label) {
        continue;
      }
      for (const Zone z : label->zones) {
        for (const Band b : label->bands) {
          parts.emplace_back(obj.tag, std::string(zone_name(z)),
                             std::string(band_name(b)));
        }
      }
    }
  }
  std::sort(parts.begin(), parts.end());
  std::vector<std::string> captions;
  captions.reserve(parts.size());
  for (const auto& [tag, zone, band] : parts) {
    captions.push_back("There is a " + tag + " to the " + zone +
                       " of the current spot in " + band + " distance.");
  }
  return captions;
}

namespace {

std::vector<std::string> majority_pass(std::span<const std::string> labels,
                                       int window) {
  const int n = static_cast<int>(labels.size());
  const int half = window / 2;
  std::vector<std::string> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::map<std::string, int> votes;
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    for (int j = lo; j <= hi; ++j) {
      ++votes[labels[static_cast<std::size_t>(j)]];
    }
    int best = 0;
    for (const auto& [label, count] : votes) {
      best = std::max(best, count);
    }
    std::vector<const std::string*> winners;
    for (const auto& [label, count] : votes) {
      if (count == best) {
        winners.push_back(&label);
      }
    }
    if (winners.size() == 1) {
      out[static_cast<std::size_t>(i)] = *winners.front();
    } else if (i == 0) {
      out[0] = labels[0];
    } else {
      out[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i - 1)];
    }
  }
  return out;
}

}  // namespace

RoomSequence smooth_room_labels(
    std::span<const std::pair<int, std::string>> raw, int window,
    std::span<const std::string_view> vocabulary) {
  if (window < 1 || window % 2 == 0) {
    throw InvalidInput("window must be odd and >= 1");
  }
  for (const auto& [frame, label] : raw) {
    if (std::find(vocabulary.begin(), vocabulary.end(), label) ==
        vocabulary.end()) {
      throw VocabularyError("room label '" + label + "' (frame " +
                            std::to_string(frame) +
                            ") is not in the room vocabulary");
    }
  }

  std::vector<std::string> current;
  current.reserve(raw.size());
  for (const auto& [frame, label] : raw) {
    current.push_back(label);
  }

  // Iterate the vote to a fixed point. If the dynamics cycle instead of
  // settling, the smallest state of the cycle is the canonical result; both
  // paths make smoothing idempotent.
  std::vector<std::vector<std::string>> history;
  while (true) {
    auto next = majority_pass(current, window);
    if (next == current) {
      break;
    }
    const auto seen = std::find(history.begin(), history.end(), next);
    if (seen != history.end()) {
      auto smallest = *std::min_element(seen, history.end());
      current = std::min(std::move(smallest), current);
      break;
    }
    history.push_back(current);
    current = std::move(next);
  }

  RoomSequence out;
  out.smoothed = true;
  out.labels.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.labels.emplace_back(raw[i].first, current[i]);
  }
  return out;
}

AcceptDecision accept_video(const VideoMetadata& meta, double min_duration_s,
                            int min_shots, double min_coverage) {
  if (meta.duration_s < min_duration_s) {
    return {false, "duration " + std::to_string(meta.duration_s) +
                       "s below minimum " + std::to_string(min_duration_s) +
                       "s"};
  }
  if (static_cast<int>(meta.shots.size()) < min_shots) {
    return {false, "only " + std::to_string(meta.shots.size()) +
                       " continuous shots, need " + std::to_string(min_shots)};
  }
  double covered = 0.0;
  for (const auto& [start, end] : meta.shots) {
    covered += end - start;
  }
  const double coverage = covered / meta.duration_s;
  if (!(coverage > min_coverage)) {
    return {false, "shots cover " + std::to_string(coverage * 100.0) +
                       "% of the video, need more than " +
                       std::to_string(min_coverage * 100.0) + "%"};
  }
  return {true, ""};
}

}  // namespace vlnmine
