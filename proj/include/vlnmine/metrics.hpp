#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vlnmine/errors.hpp"

namespace vlnmine {

struct PathRecord {
  std::string episode_id;
  std::vector<Eigen::Vector3d> predicted_path;  // meters
  std::vector<Eigen::Vector3d> reference_path;  // meters
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  double success_threshold_m = 3.0;
};

double path_length(std::span<const Eigen::Vector3d> path);

// 1 iff the final predicted position lies within the threshold of the goal
// (inclusive boundary).
int success(const PathRecord& record);

double success_rate(std::span<const PathRecord> records);

// (1/N) sum success_i * l_i / max(p_i, l_i) with l the reference arc length
// and p the predicted arc length. Zero-length references are rejected.
double spl(std::span<const PathRecord> records);

// Mean advancement toward the goal in meters; negative when retreating.
double goal_progress(std::span<const PathRecord> records);

std::vector<PathRecord> read_path_records(const std::filesystem::path& path,
                                          double default_threshold_m = 3.0);

struct MetricsSummary {
  std::size_t episodes = 0;
  double sr = 0.0;
  double spl = 0.0;
  double gp_m = 0.0;
};

MetricsSummary evaluate(std::span<const PathRecord> records);

void write_metrics_summary(const MetricsSummary& summary,
                           const std::filesystem::path& path);

}  // namespace vlnmine
