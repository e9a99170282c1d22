#include "pxc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pxc/error.hpp"

namespace pxc {

PostprocessConfig default_postprocess(int full_h, int full_w) {
  PostprocessConfig cfg;
  cfg.merge_threshold_px = 20.0 * full_w / 2048.0;
  cfg.size_threshold_px = 1500.0 * (static_cast<double>(full_h) * full_w) / 2097152.0;
  return cfg;
}

IdMap argmax_labeling(const ProbMap& pm) {
  IdMap out{pm.h, pm.w, std::vector<int>(static_cast<size_t>(pm.h) * pm.w, 0)};
  for (int64_t i = 0; i < static_cast<int64_t>(out.id.size()); ++i) {
    const double* row = pm.p.data() + i * pm.channels;
    int best = 0;
    for (int k = 1; k < pm.channels; ++k)
      if (row[k] > row[best]) best = k;
    out.id[i] = best;
  }
  return out;
}

std::vector<Segment> connected_components(const IdMap& ids) {
  const int h = ids.h, w = ids.w;
  std::vector<int> seg_of(static_cast<size_t>(h) * w, -1);
  std::vector<Segment> segs;
  std::vector<int> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int start = r * w + c;
      const int id = ids.id[start];
      if (id == 0 || seg_of[start] != -1) continue;
      const int seg_idx = static_cast<int>(segs.size());
      segs.push_back({});
      segs.back().color_id = id;
      stack.assign(1, start);
      seg_of[start] = seg_idx;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        segs[seg_idx].pixels.push_back(cur);
        const int cr = cur / w, cc = cur % w;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int nr = cr + dr, nc = cc + dc;
            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
            const int nxt = nr * w + nc;
            if (seg_of[nxt] == -1 && ids.id[nxt] == id) {
              seg_of[nxt] = seg_idx;
              stack.push_back(nxt);
            }
          }
      }
      std::sort(segs[seg_idx].pixels.begin(), segs[seg_idx].pixels.end());
    }
  }
  return segs;
}

void fill_segment_centers(std::vector<Segment>& segs, const CenterOffsetMap& center_pred,
                          int upsample) {
  for (Segment& s : segs) {
    double sx = 0.0, sy = 0.0;
    for (int p : s.pixels) {
      const int r = p / center_pred.w, c = p % center_pred.w;
      sx += upsample * c + center_pred.at(r, c, 0);
      sy += upsample * r + center_pred.at(r, c, 1);
    }
    s.center_x = sx / s.pixels.size();
    s.center_y = sy / s.pixels.size();
  }
}

namespace {
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};
}  // namespace

std::vector<Segment> merge_by_center(const std::vector<Segment>& segs,
                                     const CenterOffsetMap& center_pred, double threshold,
                                     int upsample, bool across_ids) {
  std::vector<Segment> work = segs;
  fill_segment_centers(work, center_pred, upsample);
  const int n = static_cast<int>(work.size());
  UnionFind uf(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!across_ids && work[i].color_id != work[j].color_id) continue;
      const double dx = work[i].center_x - work[j].center_x;
      const double dy = work[i].center_y - work[j].center_y;
      if (std::sqrt(dx * dx + dy * dy) <= threshold) uf.unite(i, j);
    }

  std::vector<Segment> out;
  std::vector<int> root_to_out(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = uf.find(i);
    if (root_to_out[root] == -1) {
      root_to_out[root] = static_cast<int>(out.size());
      out.push_back(work[i]);
      out.back().center_x *= out.back().pixels.size();
      out.back().center_y *= out.back().pixels.size();
    } else {
      Segment& dst = out[root_to_out[root]];
      dst.pixels.insert(dst.pixels.end(), work[i].pixels.begin(), work[i].pixels.end());
      dst.center_x += work[i].center_x * work[i].pixels.size();
      dst.center_y += work[i].center_y * work[i].pixels.size();
    }
  }
  for (Segment& s : out) {
    s.center_x /= s.pixels.size();
    s.center_y /= s.pixels.size();
    std::sort(s.pixels.begin(), s.pixels.end());
  }
  return out;
}

std::optional<std::pair<int, std::vector<int>>> assign_category(const Segment& seg,
                                                                const ProbMap& semantic_probs) {
  if (seg.pixels.empty()) throw DomainError("assign_category on an empty segment");
  const int classes = semantic_probs.channels - 1;
  std::vector<double> mean(classes + 1, 0.0);
  for (int p : seg.pixels)
    for (int k = 1; k <= classes; ++k)
      mean[k] += semantic_probs.p[static_cast<size_t>(p) * semantic_probs.channels + k];
  int category = 1;
  for (int k = 2; k <= classes; ++k)
    if (mean[k] > mean[category]) category = k;

  std::vector<int> clipped;
  for (int p : seg.pixels) {
    const double* row = semantic_probs.p.data() + static_cast<size_t>(p) * semantic_probs.channels;
    int best = 0;
    for (int k = 1; k <= classes; ++k)
      if (row[k] > row[best]) best = k;
    if (best == category) clipped.push_back(p);
  }
  if (clipped.empty()) return std::nullopt;
  return std::make_pair(category, std::move(clipped));
}

double score_confidence(int size_px, double size_threshold_px) {
  if (!(size_threshold_px > 0)) throw ConfigError("size threshold must be positive");
  if (size_px >= size_threshold_px) return 1.0;
  return size_px / size_threshold_px;
}

std::vector<int> upsample_mask(const std::vector<int>& pixels, int w, int factor) {
  std::vector<int> out;
  out.reserve(pixels.size() * factor * factor);
  const int fw = w * factor;
  for (int p : pixels) {
    const int r = p / w, c = p % w;
    for (int dr = 0; dr < factor; ++dr)
      for (int dc = 0; dc < factor; ++dc) out.push_back((r * factor + dr) * fw + c * factor + dc);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<InstancePrediction> predict_instances(const NetworkOutputs& outputs,
                                                  const PostprocessConfig& cfg) {
  const IdMap ids = argmax_labeling(outputs.instance_probs);
  std::vector<Segment> segs = connected_components(ids);
  segs = merge_by_center(segs, outputs.center_pred, cfg.merge_threshold_px, cfg.upsample,
                         cfg.merge_across_ids);

  std::vector<InstancePrediction> preds;
  const int area = cfg.upsample * cfg.upsample;
  for (const Segment& s : segs) {
    if (s.size() * area < cfg.min_segment_pixels) continue;
    auto cat = assign_category(s, outputs.semantic_probs);
    if (!cat) continue;
    InstancePrediction pred;
    pred.category = cat->first;
    pred.mask = upsample_mask(cat->second, ids.w, cfg.upsample);
    pred.confidence = score_confidence(static_cast<int>(pred.mask.size()), cfg.size_threshold_px);
    preds.push_back(std::move(pred));
  }
  return preds;
}

std::vector<std::vector<int>> index_masks(const IdMap& ids, int n, int upsample,
                                          int min_pixels_full) {
  std::vector<std::vector<int>> by_index(n + 1);
  for (int64_t p = 0; p < static_cast<int64_t>(ids.id.size()); ++p)
    if (ids.id[p] > 0 && ids.id[p] <= n) by_index[ids.id[p]].push_back(static_cast<int>(p));
  std::vector<std::vector<int>> out;
  const int area = upsample * upsample;
  for (int k = 1; k <= n; ++k) {
    if (static_cast<int>(by_index[k].size()) * area < std::max(1, min_pixels_full)) continue;
    out.push_back(upsample_mask(by_index[k], ids.w, upsample));
  }
  return out;
}

}  // namespace pxc
