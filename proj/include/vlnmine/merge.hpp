#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "vlnmine/colmap_model.hpp"
#include "vlnmine/geometry.hpp"

namespace vlnmine {

struct OverlapEdge {
  int model_a = 0;  // model_a < model_b
  int model_b = 0;
  std::vector<int> shared_frames;
  std::optional<SimilarityTransform> alignment;  // b -> a, set during merge
};

struct OverlapGraph {
  std::vector<int> nodes;  // sorted model ids
  std::vector<OverlapEdge> edges;
};

// Edge iff two sub-models register at least `min_shared` common frame
// indices. Throws InvalidInput on duplicate model ids.
OverlapGraph build_overlap_graph(std::span<const SubModel> submodels,
                                 int min_shared = 3);

struct MergedModel {
  int component_id = 0;  // lowest model id in the component
  std::map<int, CameraPose> poses;
  std::map<int, int> pose_source;  // frame_index -> winning model id
  std::map<std::uint32_t, CameraIntrinsics> intrinsics;
  // Per-edge RMS distance between shared camera centers after alignment,
  // in the component root's reconstruction units.
  std::vector<std::pair<std::pair<int, int>, double>> alignment_residuals;
};

// Depth-first fusion of each connected component into its lowest-id model's
// coordinate frame. Edges whose alignment fails are dropped with a warning,
// which may split a component. Deterministic under input permutation.
std::vector<MergedModel> merge_components(const OverlapGraph& graph,
                                          std::span<const SubModel> submodels);

}  // namespace vlnmine
