#include "vlnmine/mining.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <string>

#include "vlnmine/errors.hpp"

namespace vlnmine {

const TrajectoryFrame& Trajectory::at_frame(int frame_index) const {
  const auto it = std::lower_bound(
      frames.begin(), frames.end(), frame_index,
      [](const TrajectoryFrame& f, int idx) { return f.frame_index < idx; });
  if (it == frames.end() || it->frame_index != frame_index) {
    throw InvalidInput("frame " + std::to_string(frame_index) +
                       " not in trajectory " + video_id);
  }
  return *it;
}

Trajectory trajectory_from_model(const std::string& video_id,
                                 const MergedModel& model, double fps) {
  Trajectory traj;
  traj.video_id = video_id;
  traj.fps = fps;
  traj.frames.reserve(model.poses.size());
  for (const auto& [frame, pose] : model.poses) {
    traj.frames.push_back({frame, view_state(pose)});
  }
  return traj;
}

double estimate_scale(const Trajectory& trajectory, double walking_speed_mps,
                      double stillness_floor_ratio) {
  const auto& frames = trajectory.frames;
  if (frames.size() < 10) {
    throw ScaleUndetermined("need at least 10 frames, got " +
                            std::to_string(frames.size()));
  }
  std::vector<double> steps;
  steps.reserve(frames.size() - 1);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    const int gap = frames[i + 1].frame_index - frames[i].frame_index;
    steps.push_back(
        (frames[i + 1].view.position - frames[i].view.position).norm() /
        static_cast<double>(gap));
  }
  // Order statistics (not interpolated) keep the estimate exactly
  // equivariant under uniform rescaling of the input.
  std::vector<double> sorted = steps;
  std::sort(sorted.begin(), sorted.end());
  const double p90 = sorted[std::min(sorted.size() - 1, sorted.size() * 9 / 10)];
  const double floor = stillness_floor_ratio * p90;

  std::vector<double> moving;
  for (const double d : sorted) {
    if (d > floor) {
      moving.push_back(d);
    }
  }
  if (moving.empty()) {
    throw ScaleUndetermined("all displacements at or below the stillness floor");
  }
  const double median = moving[(moving.size() - 1) / 2];
  return (walking_speed_mps / trajectory.fps) / median;
}

void apply_scale(Trajectory& trajectory, double scale, ScaleSource source) {
  if (scale <= 0.0) {
    throw InvalidInput("scale must be positive");
  }
  for (TrajectoryFrame& f : trajectory.frames) {
    f.view.position *= scale;
  }
  trajectory.scale = scale;
  trajectory.scale_source = source;
  trajectory.scaled = true;
}

std::vector<int> dbscan(std::span<const Eigen::Vector3d> points, double eps,
                        int min_pts) {
  if (eps <= 0.0 || min_pts < 1) {
    throw InvalidInput("dbscan requires eps > 0 and min_pts >= 1");
  }
  constexpr int kUndefined = -2;
  constexpr int kNoise = -1;
  const std::size_t n = points.size();
  std::vector<int> labels(n, kUndefined);
  const double eps_sq = eps * eps;

  const auto neighbors_of = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q) {
      if ((points[p] - points[q]).squaredNorm() <= eps_sq) {
        out.push_back(q);
      }
    }
    return out;
  };

  int next_cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels[p] != kUndefined) {
      continue;
    }
    auto neighbors = neighbors_of(p);
    if (static_cast<int>(neighbors.size()) < min_pts) {
      labels[p] = kNoise;
      continue;
    }
    const int cluster = next_cluster++;
    labels[p] = cluster;
    std::deque<std::size_t> seeds(neighbors.begin(), neighbors.end());
    while (!seeds.empty()) {
      const std::size_t q = seeds.front();
      seeds.pop_front();
      if (labels[q] == kNoise) {
        labels[q] = cluster;  // border point
        continue;
      }
      if (labels[q] != kUndefined) {
        continue;
      }
      labels[q] = cluster;
      auto q_neighbors = neighbors_of(q);
      if (static_cast<int>(q_neighbors.size()) >= min_pts) {
        seeds.insert(seeds.end(), q_neighbors.begin(), q_neighbors.end());
      }
    }
  }
  return labels;
}

std::vector<DecisionPoint> detect_decision_points(
    const Trajectory& trajectory, const DecisionPointParams& params) {
  if (params.nms_window < 1 || params.lookahead_frames < 1) {
    throw InvalidInput("nms_window and lookahead_frames must be >= 1");
  }
  const auto& frames = trajectory.frames;
  const int w = params.lookahead_frames;
  if (static_cast<int>(frames.size()) < 2 ||
      static_cast<int>(frames.size()) <= w) {
    return {};
  }

  const std::size_t signal_len = frames.size() - static_cast<std::size_t>(w);
  std::vector<double> signal(signal_len);
  for (std::size_t i = 0; i < signal_len; ++i) {
    signal[i] = angular_change_deg(frames[i].view.direction,
                                   frames[i + static_cast<std::size_t>(w)]
                                       .view.direction);
  }

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < signal_len; ++i) {
    if (signal[i] > params.threshold_deg) {
      candidates.push_back(i);
    }
  }

  // Greedy NMS: strongest first, earliest on ties.
  std::sort(candidates.begin(), candidates.end(),
            [&](std::size_t a, std::size_t b) {
              return signal[a] != signal[b] ? signal[a] > signal[b] : a < b;
            });
  std::vector<std::size_t> kept;
  for (const std::size_t c : candidates) {
    const bool suppressed = std::any_of(
        kept.begin(), kept.end(), [&](std::size_t k) {
          const auto d = c > k ? c - k : k - c;
          return d <= static_cast<std::size_t>(params.nms_window);
        });
    if (!suppressed) {
      kept.push_back(c);
    }
  }
  std::sort(kept.begin(), kept.end());

  std::vector<Eigen::Vector3d> positions;
  positions.reserve(kept.size());
  for (const std::size_t k : kept) {
    positions.push_back(frames[k].view.position);
  }
  std::vector<int> labels = dbscan(positions, params.eps_m, params.min_pts);
  int next_cluster = 0;
  for (const int l : labels) {
    next_cluster = std::max(next_cluster, l + 1);
  }
  for (int& l : labels) {
    if (l < 0) {
      l = next_cluster++;  // noise becomes its own cluster
    }
  }

  std::vector<DecisionPoint> points;
  points.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    points.push_back(
        {frames[kept[i]].frame_index, signal[kept[i]], labels[i]});
  }
  return points;
}

std::vector<ActionCandidateSet> make_action_candidates(
    const Trajectory& trajectory, std::span<const DecisionPoint> points,
    int max_negatives, int revisit_gap_frames) {
  if (max_negatives < 1) {
    throw InvalidInput("max_negatives must be >= 1");
  }
  std::map<int, std::vector<const DecisionPoint*>> clusters;
  for (const DecisionPoint& p : points) {
    clusters[p.cluster_id].push_back(&p);
  }

  std::vector<ActionCandidateSet> sets;
  for (const auto& [cluster_id, members] : clusters) {
    if (members.size() < 2) {
      continue;  // no distinct negative exists
    }
    ActionCandidateSet set;
    set.cluster_id = cluster_id;
    for (const DecisionPoint* m : members) {
      set.member_frames.push_back(m->frame_index);
    }
    std::sort(set.member_frames.begin(), set.member_frames.end());
    set.positive = set.member_frames.back();

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const int f : set.member_frames) {
      centroid += trajectory.at_frame(f).view.position;
    }
    set.centroid = centroid / static_cast<double>(set.member_frames.size());

    const Eigen::Vector3d positive_dir =
        trajectory.at_frame(set.positive).view.direction;
    std::vector<std::pair<double, int>> by_deviation;
    for (const int f : set.member_frames) {
      if (f == set.positive) {
        continue;
      }
      by_deviation.emplace_back(
          angular_change_deg(trajectory.at_frame(f).view.direction,
                             positive_dir),
          f);
    }
    std::sort(by_deviation.begin(), by_deviation.end(),
              [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first
                                          : a.second < b.second;
              });
    const std::size_t take =
        std::min<std::size_t>(by_deviation.size(),
                              static_cast<std::size_t>(max_negatives));
    for (std::size_t i = 0; i < take; ++i) {
      set.negatives.push_back(by_deviation[i].second);
    }

    for (std::size_t i = 0; i + 1 < set.member_frames.size(); ++i) {
      if (set.member_frames[i + 1] - set.member_frames[i] >
          revisit_gap_frames) {
        set.revisit = true;
        break;
      }
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<int> resample_steps(const Trajectory& trajectory,
                                double interval_m) {
  if (interval_m <= 0.0) {
    throw InvalidInput("interval_m must be positive");
  }
  const auto& frames = trajectory.frames;
  if (frames.empty()) {
    return {};
  }
  std::vector<int> steps{frames.front().frame_index};
  double since_last = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    since_last += (frames[i].view.position - frames[i - 1].view.position).norm();
    if (since_last >= interval_m) {
      steps.push_back(frames[i].frame_index);
      since_last = 0.0;
    }
  }
  if (steps.back() != frames.back().frame_index) {
    steps.push_back(frames.back().frame_index);
  }
  return steps;
}

std::vector<int> sample_description_frames(const Trajectory& trajectory,
                                           double period_s) {
  if (period_s <= 0.0) {
    throw InvalidInput("period_s must be positive");
  }
  const auto stride = static_cast<std::size_t>(
      std::max(1.0, std::ceil(period_s * trajectory.fps)));
  std::vector<int> sampled;
  for (std::size_t i = 0; i < trajectory.frames.size(); i += stride) {
    sampled.push_back(trajectory.frames[i].frame_index);
  }
  return sampled;
}

}  // namespace vlnmine
