#pragma once

#include <map>
#include <optional>
#include <vector>

#include "pxc/scene.hpp"

namespace pxc {

// A prediction/ground-truth instance tagged with the scene it belongs to;
// matching never crosses scenes, ranking is global.
struct PredInstance {
  int scene = 0;
  int category = 0;
  double confidence = 1.0;
  std::vector<int> mask;  // sorted flat indices, full resolution
};

struct GtInstance {
  int scene = 0;
  int category = 0;
  std::vector<int> mask;
};

// |a intersect b| / |a union b| for sorted index sets. Both empty is a
// domain error.
double mask_iou(const std::vector<int>& a, const std::vector<int>& b);

struct ApResult {
  std::map<int, double> per_category;
  double mean = 0.0;
};

// Greedy confidence-ranked matching (ties: larger mask, then input order)
// against unmatched same-category same-scene ground truth at IoU >= iou_thr;
// AP is the exact area under the monotone non-increasing precision envelope.
// Categories absent from both predictions and ground truth are skipped.
ApResult average_precision(const std::vector<PredInstance>& preds,
                           const std::vector<GtInstance>& gts, double iou_thr);

struct CityscapesAp {
  double ap_mean = 0.0;
  double ap50 = 0.0;
  std::map<int, double> per_category;  // mean over thresholds
};

// Mean AP over IoU thresholds 0.50 to 0.95, step 0.05.
CityscapesAp cityscapes_ap(const std::vector<PredInstance>& preds,
                           const std::vector<GtInstance>& gts);

// One lane as sampled points: (row, mean x) on every sampling row where the
// lane has pixels.
struct Lane {
  std::vector<std::pair<int, double>> points;
};

Lane lane_from_mask(const std::vector<int>& mask, int w, int spacing);

struct LaneScore {
  double accuracy = 0.0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
};

struct LaneScoreConfig {
  double match_dist = 20.0;     // a point matches when |dx| < match_dist
  double fp_match_rate = 0.85;  // paired lanes below this rate count as FP
  bool extra_penalty = true;    // penalize predictions beyond N+2
};

// accuracy = matched points / ground-truth points, with each ground-truth
// lane greedily taking the unassigned prediction that matches the most of its
// points. Lanes are canonically ordered by mean x first, so listing order
// does not matter. Empty ground truth is a domain error.
LaneScore lane_score(const std::vector<Lane>& pred_lanes, const std::vector<Lane>& gt_lanes,
                     const LaneScoreConfig& cfg = {});

// Undirected instance-proximity graph: edge iff the minimum pixel distance
// between two instances is <= epsilon.
struct AdjacencyGraph {
  int vertices = 0;
  std::vector<std::vector<bool>> adj;

  bool edge(int u, int v) const { return adj[u][v]; }
  int edge_count() const;
  int max_degree() const;
};

AdjacencyGraph build_adjacency_graph(const InstanceLabelMap& instances, double epsilon);

// Exact chromatic number by backtracking over color assignments (vertex
// count capped at 16); nullopt when it exceeds k_max.
std::optional<int> chromatic_number_bruteforce(const AdjacencyGraph& g, int k_max);

}  // namespace pxc
