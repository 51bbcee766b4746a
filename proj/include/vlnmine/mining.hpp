#pragma once

#include <span>
#include <string>
#include <vector>

#include "vlnmine/geometry.hpp"
#include "vlnmine/merge.hpp"

namespace vlnmine {

enum class ScaleSource { kWalkingSpeedEstimate, kUserOverride };

struct TrajectoryFrame {
  int frame_index = 0;
  ViewState view;
};

// Time-ordered camera positions and viewing directions for one video.
// Positions are reconstruction units until apply_scale puts them in meters.
struct Trajectory {
  std::string video_id;
  std::vector<TrajectoryFrame> frames;  // strictly increasing frame_index
  double fps = 3.0;
  double scale = 1.0;  // meters per reconstruction unit
  ScaleSource scale_source = ScaleSource::kWalkingSpeedEstimate;
  bool scaled = false;

  const TrajectoryFrame& at_frame(int frame_index) const;
};

Trajectory trajectory_from_model(const std::string& video_id,
                                 const MergedModel& model, double fps = 3.0);

// Anchors reconstruction units to meters through the typical indoor walking
// speed. Displacements are per frame-step (gap-normalized); values at or
// below 1% of the 90th-percentile displacement count as standing still and
// are excluded from the median. Throws ScaleUndetermined when nothing moves.
double estimate_scale(const Trajectory& trajectory,
                      double walking_speed_mps = 1.42,
                      double stillness_floor_ratio = 0.01);

void apply_scale(Trajectory& trajectory, double scale, ScaleSource source);

struct DecisionPoint {
  int frame_index = 0;
  double peak_angular_change_deg = 0.0;
  int cluster_id = 0;
};

struct DecisionPointParams {
  double threshold_deg = 45.0;
  int lookahead_frames = 3;  // accumulation span of the turn signal
  int nms_window = 4;
  double eps_m = 1.0;
  int min_pts = 2;
};

// Turn signal thresholding (> threshold, strict), greedy 1-D non-maximum
// suppression, then DBSCAN over the survivors' positions. DBSCAN noise
// points become singleton clusters.
std::vector<DecisionPoint> detect_decision_points(
    const Trajectory& trajectory, const DecisionPointParams& params = {});

// Standard density-based clustering. Labels are assigned in input order;
// -1 marks noise. Distances use <= eps.
std::vector<int> dbscan(std::span<const Eigen::Vector3d> points, double eps,
                        int min_pts);

struct ActionCandidateSet {
  int cluster_id = 0;
  int positive = 0;               // most recent member frame
  std::vector<int> negatives;     // by descending angular deviation
  std::vector<int> member_frames; // ascending
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  bool revisit = false;  // member frames split by a large temporal gap
};

// Per cluster: positive = highest frame index, negatives = up to
// max_negatives members with the greatest angular deviation from the
// positive's viewing direction. Single-member clusters are dropped.
std::vector<ActionCandidateSet> make_action_candidates(
    const Trajectory& trajectory, std::span<const DecisionPoint> points,
    int max_negatives = 1, int revisit_gap_frames = 15);

// Greedy arc-length walk: first frame, then every first frame at least
// interval_m down the path, and always the last frame.
std::vector<int> resample_steps(const Trajectory& trajectory,
                                double interval_m = 1.5);

// Every ceil(period_s * fps)-th registered frame, starting at the first.
std::vector<int> sample_description_frames(const Trajectory& trajectory,
                                           double period_s = 2.0);

}  // namespace vlnmine
