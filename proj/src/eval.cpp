#include "pxc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pxc/error.hpp"

namespace pxc {

double mask_iou(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) throw DomainError("IoU of two empty masks");
  size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Ranks: confidence desc, then mask size desc, then input order.
std::vector<int> ranked_order(const std::vector<PredInstance>& preds,
                              const std::vector<int>& subset) {
  std::vector<int> order = subset;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (preds[a].confidence != preds[b].confidence)
      return preds[a].confidence > preds[b].confidence;
    return preds[a].mask.size() > preds[b].mask.size();
  });
  return order;
}

double category_ap(const std::vector<PredInstance>& preds, const std::vector<int>& pred_idx,
                   const std::vector<GtInstance>& gts, const std::vector<int>& gt_idx,
                   double iou_thr) {
  const int g = static_cast<int>(gt_idx.size());
  if (g == 0) return 0.0;  // predictions without ground truth: pure false positives
  const std::vector<int> order = ranked_order(preds, pred_idx);

  std::vector<bool> gt_used(gt_idx.size(), false);
  std::vector<double> precision, recall;
  int tp = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    const PredInstance& p = preds[order[k]];
    int best = -1;
    double best_iou = 0.0;
    for (size_t gi = 0; gi < gt_idx.size(); ++gi) {
      if (gt_used[gi]) continue;
      const GtInstance& gt = gts[gt_idx[gi]];
      if (gt.scene != p.scene) continue;
      const double iou = mask_iou(p.mask, gt.mask);
      if (iou >= iou_thr && iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(gi);
      }
    }
    if (best >= 0) {
      gt_used[best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / g);
  }

  // Exact area under the non-increasing precision envelope.
  double ap = 0.0, prev_recall = 0.0;
  for (size_t k = 0; k < precision.size(); ++k) {
    double env = 0.0;
    for (size_t j = k; j < precision.size(); ++j) env = std::max(env, precision[j]);
    ap += (recall[k] - prev_recall) * env;
    prev_recall = recall[k];
  }
  return ap;
}

}  // namespace

ApResult average_precision(const std::vector<PredInstance>& preds,
                           const std::vector<GtInstance>& gts, double iou_thr) {
  if (!(iou_thr > 0.0) || !(iou_thr < 1.0)) throw ConfigError("iou threshold must be in (0,1)");
  std::set<int> categories;
  for (const auto& p : preds) categories.insert(p.category);
  for (const auto& g : gts) categories.insert(g.category);

  ApResult out;
  double sum = 0.0;
  for (int cat : categories) {
    std::vector<int> pi, gi;
    for (size_t i = 0; i < preds.size(); ++i)
      if (preds[i].category == cat) pi.push_back(static_cast<int>(i));
    for (size_t i = 0; i < gts.size(); ++i)
      if (gts[i].category == cat) gi.push_back(static_cast<int>(i));
    const double ap = category_ap(preds, pi, gts, gi, iou_thr);
    out.per_category[cat] = ap;
    sum += ap;
  }
  out.mean = categories.empty() ? 0.0 : sum / static_cast<double>(categories.size());
  return out;
}

CityscapesAp cityscapes_ap(const std::vector<PredInstance>& preds,
                           const std::vector<GtInstance>& gts) {
  CityscapesAp out;
  int count = 0;
  for (int t = 50; t <= 95; t += 5) {
    const ApResult r = average_precision(preds, gts, t / 100.0);
    out.ap_mean += r.mean;
    if (t == 50) out.ap50 = r.mean;
    for (const auto& [cat, ap] : r.per_category) out.per_category[cat] += ap;
    ++count;
  }
  out.ap_mean /= count;
  for (auto& [cat, ap] : out.per_category) ap /= count;
  return out;
}

Lane lane_from_mask(const std::vector<int>& mask, int w, int spacing) {
  Lane lane;
  int row = -1;
  double sum = 0.0;
  int n = 0;
  auto flush = [&]() {
    if (n > 0 && row % spacing == 0) lane.points.push_back({row, sum / n});
  };
  for (int p : mask) {
    const int r = p / w;
    if (r != row) {
      flush();
      row = r;
      sum = 0.0;
      n = 0;
    }
    sum += p % w;
    ++n;
  }
  flush();
  return lane;
}

namespace {

int matched_points(const Lane& pred, const Lane& gt, double match_dist) {
  int matched = 0;
  size_t i = 0;
  for (const auto& [row, x] : gt.points) {
    while (i < pred.points.size() && pred.points[i].first < row) ++i;
    if (i < pred.points.size() && pred.points[i].first == row &&
        std::abs(pred.points[i].second - x) < match_dist)
      ++matched;
  }
  return matched;
}

double mean_x(const Lane& l) {
  if (l.points.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [r, x] : l.points) s += x;
  return s / l.points.size();
}

std::vector<int> canonical_order(const std::vector<Lane>& lanes) {
  std::vector<int> order(lanes.size());
  for (size_t i = 0; i < lanes.size(); ++i) order[static_cast<int>(i)] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double xa = mean_x(lanes[a]), xb = mean_x(lanes[b]);
    if (xa != xb) return xa < xb;
    return lanes[a].points.size() > lanes[b].points.size();
  });
  return order;
}

}  // namespace

LaneScore lane_score(const std::vector<Lane>& pred_lanes, const std::vector<Lane>& gt_lanes,
                     const LaneScoreConfig& cfg) {
  if (gt_lanes.empty()) throw DomainError("lane score needs at least one ground-truth lane");
  const std::vector<int> gt_order = canonical_order(gt_lanes);
  const std::vector<int> pred_order = canonical_order(pred_lanes);

  int64_t total_gt_points = 0;
  for (const Lane& l : gt_lanes) total_gt_points += static_cast<int64_t>(l.points.size());
  if (total_gt_points == 0) throw DomainError("ground-truth lanes have no sampled points");

  std::vector<bool> pred_used(pred_lanes.size(), false);
  std::vector<double> pred_rate(pred_lanes.size(), 0.0);
  int64_t total_matched = 0;
  int unmatched_gt = 0;
  for (int gi : gt_order) {
    const Lane& gt = gt_lanes[gi];
    int best = -1, best_count = 0;
    for (int pi : pred_order) {
      if (pred_used[pi]) continue;
      const int m = matched_points(pred_lanes[pi], gt, cfg.match_dist);
      if (m > best_count) {
        best_count = m;
        best = pi;
      }
    }
    if (best < 0) {
      ++unmatched_gt;
      continue;
    }
    pred_used[best] = true;
    pred_rate[best] = gt.points.empty() ? 0.0
                                        : static_cast<double>(best_count) /
                                              static_cast<double>(gt.points.size());
    total_matched += best_count;
  }

  LaneScore out;
  out.accuracy = static_cast<double>(total_matched) / static_cast<double>(total_gt_points);
  out.fn_rate = static_cast<double>(unmatched_gt) / static_cast<double>(gt_lanes.size());
  int fp = 0;
  for (size_t pi = 0; pi < pred_lanes.size(); ++pi)
    if (!pred_used[pi] || pred_rate[pi] < cfg.fp_match_rate) ++fp;
  out.fp_rate = pred_lanes.empty() ? 0.0 : static_cast<double>(fp) / pred_lanes.size();

  const int n_gt = static_cast<int>(gt_lanes.size());
  const int extra = static_cast<int>(pred_lanes.size()) - (n_gt + 2);
  if (cfg.extra_penalty && extra > 0)
    out.accuracy *= std::max(0.0, 1.0 - static_cast<double>(extra) / n_gt);
  return out;
}

int AdjacencyGraph::edge_count() const {
  int e = 0;
  for (int u = 0; u < vertices; ++u)
    for (int v = u + 1; v < vertices; ++v)
      if (adj[u][v]) ++e;
  return e;
}

int AdjacencyGraph::max_degree() const {
  int best = 0;
  for (int u = 0; u < vertices; ++u) {
    int d = 0;
    for (int v = 0; v < vertices; ++v)
      if (v != u && adj[u][v]) ++d;
    best = std::max(best, d);
  }
  return best;
}

AdjacencyGraph build_adjacency_graph(const InstanceLabelMap& instances, double epsilon) {
  const int m = instances.max_id();
  if (m == 0) throw DomainError("adjacency graph needs at least one instance");

  struct Box {
    int rmin = 1 << 30, rmax = -1, cmin = 1 << 30, cmax = -1;
  };
  std::vector<std::vector<std::pair<int, int>>> pixels(m + 1);
  std::vector<Box> box(m + 1);
  for (int r = 0; r < instances.h; ++r)
    for (int c = 0; c < instances.w; ++c) {
      const int id = instances.at(r, c);
      if (id == 0) continue;
      pixels[id].push_back({r, c});
      box[id].rmin = std::min(box[id].rmin, r);
      box[id].rmax = std::max(box[id].rmax, r);
      box[id].cmin = std::min(box[id].cmin, c);
      box[id].cmax = std::max(box[id].cmax, c);
    }

  AdjacencyGraph g;
  g.vertices = m;
  g.adj.assign(m, std::vector<bool>(m, false));
  const double eps2 = epsilon * epsilon;
  auto box_gap = [](int lo1, int hi1, int lo2, int hi2) {
    if (hi1 < lo2) return lo2 - hi1;
    if (hi2 < lo1) return lo1 - hi2;
    return 0;
  };
  for (int u = 1; u <= m; ++u)
    for (int v = u + 1; v <= m; ++v) {
      const double gr = box_gap(box[u].rmin, box[u].rmax, box[v].rmin, box[v].rmax);
      const double gc = box_gap(box[u].cmin, box[u].cmax, box[v].cmin, box[v].cmax);
      if (gr * gr + gc * gc > eps2) continue;  // boxes already farther than epsilon
      bool edge = false;
      for (const auto& [ra, ca] : pixels[u]) {
        for (const auto& [rb, cb] : pixels[v]) {
          const double dr = ra - rb, dc = ca - cb;
          if (dr * dr + dc * dc <= eps2) {
            edge = true;
            break;
          }
        }
        if (edge) break;
      }
      g.adj[u - 1][v - 1] = g.adj[v - 1][u - 1] = edge;
    }
  return g;
}

namespace {
bool colorable(const AdjacencyGraph& g, const std::vector<int>& order, std::vector<int>& color,
               size_t pos, int k, int used) {
  if (pos == order.size()) return true;
  const int v = order[pos];
  // Symmetry pruning: a fresh color index beyond used+1 is interchangeable.
  const int limit = std::min(k, used + 1);
  for (int c = 1; c <= limit; ++c) {
    bool ok = true;
    for (int u = 0; u < g.vertices; ++u)
      if (g.adj[v][u] && color[u] == c) {
        ok = false;
        break;
      }
    if (!ok) continue;
    color[v] = c;
    if (colorable(g, order, color, pos + 1, k, std::max(used, c))) return true;
    color[v] = 0;
  }
  return false;
}
}  // namespace

std::optional<int> chromatic_number_bruteforce(const AdjacencyGraph& g, int k_max) {
  if (g.vertices > 16) throw DomainError("exhaustive coloring capped at 16 vertices");
  if (g.vertices == 0) throw DomainError("empty graph");
  std::vector<int> order(g.vertices);
  for (int i = 0; i < g.vertices; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    int da = 0, db = 0;
    for (int u = 0; u < g.vertices; ++u) {
      da += g.adj[a][u] ? 1 : 0;
      db += g.adj[b][u] ? 1 : 0;
    }
    return da > db;
  });
  for (int k = 1; k <= k_max; ++k) {
    std::vector<int> color(g.vertices, 0);
    if (colorable(g, order, color, 0, k, 0)) return k;
  }
  return std::nullopt;
}

}  // namespace pxc
