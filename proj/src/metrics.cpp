#include "vlnmine/metrics.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace vlnmine {
namespace {

using nlohmann::json;

Eigen::Vector3d parse_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() ||
      !j[1].is_number() || !j[2].is_number()) {
    throw SchemaError(where + ": expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<Eigen::Vector3d> parse_path(const json& j,
                                        const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw SchemaError(where + ": expected a non-empty array of points");
  }
  std::vector<Eigen::Vector3d> path;
  path.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    path.push_back(parse_point(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return path;
}

}  // namespace

double path_length(std::span<const Eigen::Vector3d> path) {
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    length += (path[i + 1] - path[i]).norm();
  }
  return length;
}

int success(const PathRecord& record) {
  if (record.predicted_path.empty() || record.success_threshold_m <= 0.0) {
    throw InvalidInput("path record " + record.episode_id + " invalid");
  }
  return (record.predicted_path.back() - record.goal).norm() <=
                 record.success_threshold_m
             ? 1
             : 0;
}

double success_rate(std::span<const PathRecord> records) {
  if (records.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const PathRecord& r : records) {
    sum += success(r);
  }
  return sum / static_cast<double>(records.size());
}

double spl(std::span<const PathRecord> records) {
  if (records.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const PathRecord& r : records) {
    const double l = path_length(r.reference_path);
    if (l <= 0.0) {
      throw InvalidReference("episode " + r.episode_id +
                             " has a zero-length reference path");
    }
    const double p = path_length(r.predicted_path);
    sum += success(r) * l / std::max(p, l);
  }
  return sum / static_cast<double>(records.size());
}

double goal_progress(std::span<const PathRecord> records) {
  if (records.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const PathRecord& r : records) {
    if (r.predicted_path.empty()) {
      throw InvalidInput("episode " + r.episode_id + " has an empty path");
    }
    sum += (r.predicted_path.front() - r.goal).norm() -
           (r.predicted_path.back() - r.goal).norm();
  }
  return sum / static_cast<double>(records.size());
}

std::vector<PathRecord> read_path_records(const std::filesystem::path& path,
                                          double default_threshold_m) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<PathRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& err) {
      throw SchemaError(where + ": " + err.what());
    }
    PathRecord record;
    if (!doc.contains("episode_id") || !doc["episode_id"].is_string()) {
      throw SchemaError(where + ": episode_id required");
    }
    record.episode_id = doc["episode_id"].get<std::string>();
    record.predicted_path =
        parse_path(doc.value("predicted_path", json()), where + ".predicted_path");
    record.reference_path =
        parse_path(doc.value("reference_path", json()), where + ".reference_path");
    record.goal = parse_point(doc.value("goal", json()), where + ".goal");
    record.success_threshold_m =
        doc.value("success_threshold_m", default_threshold_m);
    if (record.success_threshold_m <= 0.0) {
      throw SchemaError(where + ": success_threshold_m must be positive");
    }
    records.push_back(std::move(record));
  }
  return records;
}

MetricsSummary evaluate(std::span<const PathRecord> records) {
  MetricsSummary summary;
  summary.episodes = records.size();
  summary.sr = success_rate(records);
  summary.spl = spl(records);
  summary.gp_m = goal_progress(records);
  return summary;
}

void write_metrics_summary(const MetricsSummary& summary,
                           const std::filesystem::path& path) {
  json doc;
  doc["episodes"] = summary.episodes;
  doc["sr"] = summary.sr;
  doc["spl"] = summary.spl;
  doc["gp_m"] = summary.gp_m;
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out << doc.dump(2) << '\n';
}

}  // namespace vlnmine
