#include "vlnmine/merge.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>

#include "vlnmine/log.hpp"

namespace vlnmine {
namespace {

std::vector<int> shared_frame_indices(const SubModel& a, const SubModel& b) {
  std::vector<int> shared;
  const auto& small = a.poses.size() <= b.poses.size() ? a : b;
  const auto& large = a.poses.size() <= b.poses.size() ? b : a;
  for (const auto& [frame, pose] : small.poses) {
    if (large.poses.count(frame) > 0) {
      shared.push_back(frame);
    }
  }
  return shared;
}

std::vector<Eigen::Vector3d> centers_at(const SubModel& model,
                                        std::span<const int> frames) {
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(frames.size());
  for (const int f : frames) {
    centers.push_back(model.poses.at(f).center());
  }
  return centers;
}

double center_rms(const SimilarityTransform& to_root_a,
                  const SimilarityTransform& to_root_b, const SubModel& a,
                  const SubModel& b, std::span<const int> frames) {
  double sum = 0.0;
  for (const int f : frames) {
    const Eigen::Vector3d pa = to_root_a.apply(a.poses.at(f).center());
    const Eigen::Vector3d pb = to_root_b.apply(b.poses.at(f).center());
    sum += (pa - pb).squaredNorm();
  }
  return frames.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(frames.size()));
}

}  // namespace

OverlapGraph build_overlap_graph(std::span<const SubModel> submodels,
                                 int min_shared) {
  OverlapGraph graph;
  std::unordered_map<int, const SubModel*> by_id;
  for (const SubModel& m : submodels) {
    if (!by_id.emplace(m.model_id, &m).second) {
      throw InvalidInput("duplicate sub-model id " +
                         std::to_string(m.model_id));
    }
    graph.nodes.push_back(m.model_id);
  }
  std::sort(graph.nodes.begin(), graph.nodes.end());

  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.nodes.size(); ++j) {
      const SubModel& a = *by_id.at(graph.nodes[i]);
      const SubModel& b = *by_id.at(graph.nodes[j]);
      auto shared = shared_frame_indices(a, b);
      if (static_cast<int>(shared.size()) >= min_shared) {
        graph.edges.push_back(
            {a.model_id, b.model_id, std::move(shared), std::nullopt});
      }
    }
  }
  return graph;
}

std::vector<MergedModel> merge_components(const OverlapGraph& graph,
                                          std::span<const SubModel> submodels) {
  std::unordered_map<int, const SubModel*> by_id;
  for (const SubModel& m : submodels) {
    by_id.emplace(m.model_id, &m);
  }

  // neighbor lists sorted by model id for deterministic traversal
  std::unordered_map<int, std::vector<std::pair<int, std::size_t>>> adjacency;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    adjacency[edge.model_a].emplace_back(edge.model_b, e);
    adjacency[edge.model_b].emplace_back(edge.model_a, e);
  }
  for (auto& [id, neighbors] : adjacency) {
    std::sort(neighbors.begin(), neighbors.end());
  }

  std::unordered_map<int, SimilarityTransform> to_root;
  std::vector<MergedModel> merged;

  for (const int root : graph.nodes) {
    if (to_root.count(root) > 0) {
      continue;
    }
    std::vector<int> members;
    to_root[root] = SimilarityTransform::Identity();

    const std::function<void(int)> dfs = [&](int current) {
      members.push_back(current);
      const auto it = adjacency.find(current);
      if (it == adjacency.end()) {
        return;
      }
      for (const auto& [neighbor, edge_idx] : it->second) {
        if (to_root.count(neighbor) > 0) {
          continue;
        }
        const auto& edge = graph.edges[edge_idx];
        const SubModel& parent = *by_id.at(current);
        const SubModel& child = *by_id.at(neighbor);
        try {
          const auto src = centers_at(child, edge.shared_frames);
          const auto dst = centers_at(parent, edge.shared_frames);
          const SimilarityTransform child_to_parent = umeyama_align<double>(
              std::span<const Eigen::Vector3d>(src),
              std::span<const Eigen::Vector3d>(dst));
          to_root[neighbor] = to_root.at(current) * child_to_parent;
          dfs(neighbor);
        } catch (const Error& err) {
          log::warn("merge.edge_dropped",
                    {{"model_a", std::to_string(edge.model_a)},
                     {"model_b", std::to_string(edge.model_b)},
                     {"reason", err.what()}});
        }
      }
    };
    dfs(root);

    std::sort(members.begin(), members.end());
    MergedModel out;
    out.component_id = members.front();

    // Conflicts: the sub-model with more registered frames wins, then the
    // lower id. Iterating big-to-small with emplace keeps the winner.
    std::vector<int> by_priority = members;
    std::sort(by_priority.begin(), by_priority.end(), [&](int a, int b) {
      const auto na = by_id.at(a)->poses.size();
      const auto nb = by_id.at(b)->poses.size();
      return na != nb ? na > nb : a < b;
    });
    for (const int id : by_priority) {
      const SubModel& m = *by_id.at(id);
      const SimilarityTransform& t = to_root.at(id);
      for (const auto& [frame, pose] : m.poses) {
        if (out.poses.emplace(frame, transformed(pose, t)).second) {
          out.pose_source.emplace(frame, id);
        }
      }
    }
    for (const int id : members) {
      for (const auto& [cid, cam] : by_id.at(id)->intrinsics) {
        out.intrinsics.emplace(cid, cam);
      }
    }
    for (const auto& edge : graph.edges) {
      const bool both_in = std::binary_search(members.begin(), members.end(),
                                              edge.model_a) &&
                           std::binary_search(members.begin(), members.end(),
                                              edge.model_b);
      if (both_in) {
        out.alignment_residuals.push_back(
            {{edge.model_a, edge.model_b},
             center_rms(to_root.at(edge.model_a), to_root.at(edge.model_b),
                        *by_id.at(edge.model_a), *by_id.at(edge.model_b),
                        edge.shared_frames)});
      }
    }
    merged.push_back(std::move(out));
  }
  return merged;
}

}  // namespace vlnmine
