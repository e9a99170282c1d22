#include "pxc/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "pxc/error.hpp"
#include "pxc/rng.hpp"

namespace pxc {
namespace {

// Fixed fill palette. Entries 0..4 (warm) are used by category 1 ("box"),
// entries 5..9 (cool) by category 2 ("disc"). The four hue groups are the
// index-reuse unit: coloring-mode layouts keep neighboring instances in
// different groups.
struct PaletteEntry {
  double r, g, b;
  int group;
};
constexpr std::array<PaletteEntry, 10> kPalette = {{
    {0.85, 0.15, 0.15, 0},
    {0.95, 0.45, 0.15, 0},
    {0.75, 0.20, 0.45, 0},
    {0.95, 0.85, 0.20, 1},
    {0.70, 0.65, 0.15, 1},
    {0.15, 0.75, 0.25, 2},
    {0.10, 0.65, 0.60, 2},
    {0.45, 0.85, 0.30, 2},
    {0.20, 0.35, 0.95, 3},
    {0.55, 0.25, 0.90, 3},
}};
constexpr double kBackgroundGray = 0.1;
constexpr double kColorJitter = 0.05;

int palette_begin(int category) { return category == 1 ? 0 : 5; }
int palette_end(int category) { return category == 1 ? 5 : 10; }

struct ShapeSpec {
  int kind = 0;  // 0 = box, 1 = disc
  int size = 0;
  int r0 = 0, c0 = 0;  // top-left of the bounding square
  int category = 1;
  int color = 0;
};

void draw_shape(InstanceLabelMap& map, const ShapeSpec& s, int id) {
  if (s.kind == 0) {
    for (int r = s.r0; r < s.r0 + s.size; ++r)
      for (int c = s.c0; c < s.c0 + s.size; ++c) map.at(r, c) = id;
  } else {
    const double cy = s.r0 + (s.size - 1) * 0.5;
    const double cx = s.c0 + (s.size - 1) * 0.5;
    const double rad = s.size * 0.5 - 0.1;
    for (int r = s.r0; r < s.r0 + s.size; ++r)
      for (int c = s.c0; c < s.c0 + s.size; ++c) {
        const double dy = r - cy, dx = c - cx;
        if (dy * dy + dx * dx <= rad * rad) map.at(r, c) = id;
      }
  }
}

// Max number of epsilon-inflated x-intervals covering any single x.
int max_interval_overlap(const std::vector<ShapeSpec>& shapes, double epsilon) {
  std::vector<std::pair<double, int>> events;
  for (const auto& s : shapes) {
    events.push_back({s.c0 - epsilon / 2.0, +1});
    events.push_back({s.c0 + s.size - 1 + epsilon / 2.0, -1});
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;  // open before close: count touching intervals
  });
  int depth = 0, best = 0;
  for (const auto& [x, d] : events) {
    depth += d;
    best = std::max(best, depth);
  }
  return best;
}

bool intervals_overlap(const ShapeSpec& a, const ShapeSpec& b, double epsilon) {
  const double a_lo = a.c0 - epsilon / 2.0, a_hi = a.c0 + a.size - 1 + epsilon / 2.0;
  const double b_lo = b.c0 - epsilon / 2.0, b_hi = b.c0 + b.size - 1 + epsilon / 2.0;
  return a_lo <= b_hi && b_lo <= a_hi;
}

// Picks a palette color for shape `i`, trying hardest to give it a hue group
// that none of its already-colored epsilon-neighbors use.
int pick_color(const std::vector<ShapeSpec>& shapes, int i, double epsilon, Rng& rng) {
  const int cat = shapes[i].category;
  // In the free layout (epsilon <= 0) every earlier shape counts as a
  // neighbor, so colors stay distinct while the palette lasts.
  std::vector<int> neighbor_colors, neighbor_groups;
  int nearest_group = -1;
  double nearest_dist = 1e30;
  for (int j = 0; j < i; ++j) {
    if (epsilon > 0 && !intervals_overlap(shapes[i], shapes[j], epsilon)) continue;
    neighbor_colors.push_back(shapes[j].color);
    neighbor_groups.push_back(kPalette[shapes[j].color].group);
    const double d = std::abs((shapes[i].c0 + shapes[i].size * 0.5) -
                              (shapes[j].c0 + shapes[j].size * 0.5));
    if (d < nearest_dist) {
      nearest_dist = d;
      nearest_group = kPalette[shapes[j].color].group;
    }
  }
  auto contains = [](const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  std::vector<int> tier0, tier1, tier2, tier3;
  for (int p = palette_begin(cat); p < palette_end(cat); ++p) {
    const int g = kPalette[p].group;
    tier3.push_back(p);
    if (contains(neighbor_colors, p)) continue;
    tier2.push_back(p);
    if (g != nearest_group) tier1.push_back(p);
    if (!contains(neighbor_groups, g)) tier0.push_back(p);
  }
  const std::vector<int>& pool = !tier0.empty() ? tier0
                                 : !tier1.empty() ? tier1
                                 : !tier2.empty() ? tier2
                                                  : tier3;
  return pool[rng.below(pool.size())];
}

struct Layout {
  std::vector<ShapeSpec> shapes;  // draw order: later entries occlude earlier
};

Layout layout_free(const SceneGenConfig& cfg, Rng& rng) {
  Layout out;
  const int count = rng.uniform_int(cfg.min_instances, cfg.max_instances);
  for (int i = 0; i < count; ++i) {
    ShapeSpec s;
    s.kind = static_cast<int>(rng.below(2));
    s.category = s.kind + 1;
    s.size = rng.uniform_int(cfg.shape_min, cfg.shape_max);
    s.r0 = rng.uniform_int(0, cfg.height - s.size);
    s.c0 = rng.uniform_int(0, cfg.width - s.size);
    out.shapes.push_back(s);
    out.shapes.back().color = pick_color(out.shapes, i, 0.0, rng);
  }
  return out;
}

// Coloring-mode layout: x-centers on an even grid with bounded jitter so at
// most 4 epsilon-inflated x-intervals ever overlap. Any two instances closer
// than epsilon in the image also overlap as inflated x-intervals, so the
// pixel-level adjacency graph is a subgraph of an interval graph with clique
// size <= 4, and therefore 4-colorable.
Layout layout_proximity(const SceneGenConfig& cfg, Rng& rng) {
  const double eps = cfg.proximity_epsilon;
  Layout out;
  const int count = rng.uniform_int(cfg.min_instances, cfg.max_instances);
  const double step = static_cast<double>(cfg.width) / count;
  const double inflated = cfg.shape_max + eps;
  double jitter = std::min(step / 3.0, (4.0 * step - inflated) / 2.0 - 1.0);
  if (jitter < 0) throw ConfigError("proximity layout infeasible: shrink shapes, epsilon, or instance count");

  for (int attempt = 0; attempt < 32; ++attempt) {
    out.shapes.clear();
    for (int i = 0; i < count; ++i) {
      ShapeSpec s;
      s.kind = static_cast<int>(rng.below(2));
      s.category = s.kind + 1;
      s.size = rng.uniform_int(cfg.shape_min, cfg.shape_max);
      const double cx = (i + 0.5) * step + rng.uniform(-jitter, jitter);
      s.c0 = std::clamp(static_cast<int>(std::lround(cx - s.size * 0.5)), 0, cfg.width - s.size);
      s.r0 = rng.uniform_int(0, cfg.height - s.size);
      out.shapes.push_back(s);
    }
    if (max_interval_overlap(out.shapes, eps) <= 4) break;
    if (attempt == 30) jitter = 0.0;  // final pass is provably within bound
  }
  for (int i = 0; i < count; ++i) out.shapes[i].color = pick_color(out.shapes, i, eps, rng);
  return out;
}

Scene assemble_scene(const SceneGenConfig& cfg, uint64_t seed) {
  Scene scene;
  scene.seed = seed;
  const int h = cfg.height, w = cfg.width;

  // Retry layouts whose occlusion pruning leaves too few instances.
  Rng rng(seed);
  std::vector<ShapeSpec> shapes;
  InstanceLabelMap raw{h, w, std::vector<int>(static_cast<size_t>(h) * w, 0)};
  std::vector<int> visible;
  int survivors = 0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Layout layout = cfg.proximity_epsilon > 0 ? layout_proximity(cfg, rng) : layout_free(cfg, rng);
    shapes = std::move(layout.shapes);
    std::fill(raw.id.begin(), raw.id.end(), 0);
    for (size_t i = 0; i < shapes.size(); ++i) draw_shape(raw, shapes[i], static_cast<int>(i) + 1);
    visible.assign(shapes.size() + 1, 0);
    for (int v : raw.id) ++visible[v];
    survivors = 0;
    for (size_t i = 1; i < visible.size(); ++i)
      if (visible[i] >= cfg.min_visible_pixels) ++survivors;
    if (survivors >= std::max(1, cfg.min_instances)) break;
    if (attempt == 63 && survivors == 0) throw ConfigError("could not place any visible instance");
  }

  // Compact ids over survivors, draw order preserved.
  std::vector<int> remap(shapes.size() + 1, 0);
  std::vector<int> color_of{0}, category_of{0};
  int next = 0;
  for (size_t i = 1; i <= shapes.size(); ++i) {
    if (visible[i] < cfg.min_visible_pixels) continue;
    remap[i] = ++next;
    color_of.push_back(shapes[i - 1].color);
    category_of.push_back(shapes[i - 1].category);
  }

  scene.instances = InstanceLabelMap{h, w, std::vector<int>(raw.id.size(), 0)};
  scene.semantics = SemanticLabelMap{h, w, std::vector<int>(raw.id.size(), 0)};
  scene.image = Image{h, w, std::vector<double>(raw.id.size() * 3, kBackgroundGray)};
  for (size_t p = 0; p < raw.id.size(); ++p) {
    const int id = remap[raw.id[p]];
    scene.instances.id[p] = id;
    scene.semantics.label[p] = id == 0 ? 0 : category_of[id];
    if (id != 0) {
      const PaletteEntry& col = kPalette[color_of[id]];
      const double base[3] = {col.r, col.g, col.b};
      for (int ch = 0; ch < 3; ++ch)
        scene.image.rgb[p * 3 + ch] =
            std::clamp(base[ch] + rng.uniform(-kColorJitter, kColorJitter), 0.0, 1.0);
    }
  }
  scene.centers = compute_center_offsets(scene.instances);
  return scene;
}

}  // namespace

int InstanceLabelMap::max_id() const {
  int m = 0;
  for (int v : id) m = std::max(m, v);
  return m;
}

void SceneGenConfig::validate() const {
  if (height < 8 || width < 8) throw ConfigError("scene size must be at least 8x8");
  if (kind != "shapes" && kind != "lanes") throw ConfigError("scene kind must be 'shapes' or 'lanes'");
  if (min_visible_pixels < 1) throw ConfigError("min_visible_pixels must be >= 1");
  if (kind == "shapes") {
    if (min_instances < 1 || max_instances < min_instances)
      throw ConfigError("need 1 <= min_instances <= max_instances");
    if (shape_min < 2 || shape_max < shape_min) throw ConfigError("need 2 <= shape_min <= shape_max");
    if (shape_max > std::min(height, width)) throw ConfigError("shape_max exceeds image size");
    if (proximity_epsilon > 0) {
      const double step = static_cast<double>(width) / max_instances;
      if (shape_max + proximity_epsilon + 2.0 > 4.0 * step)
        throw ConfigError("proximity layout infeasible: shape_max + epsilon must fit in four placement slots");
    }
  } else {
    if (lane_count_min < 1 || lane_count_max < lane_count_min || lane_count_max > 6)
      throw ConfigError("need 1 <= lane_count_min <= lane_count_max <= 6");
    if (lane_width < 1 || lane_width > width / 2) throw ConfigError("bad lane_width");
    if (lane_max_drift < 0) throw ConfigError("lane_max_drift must be >= 0");
    const double margin = lane_width / 2.0 + lane_max_drift + 2.0;
    const double span = width - 2.0 * margin;
    if (span / lane_count_max < lane_width + 2.0 * lane_max_drift + 2.0)
      throw ConfigError("lanes do not fit: reduce count, width, or drift");
  }
}

int semantic_class_count(const SceneGenConfig& cfg) { return cfg.kind == "lanes" ? 1 : 2; }

Scene gen_shapes_scene(const SceneGenConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (cfg.kind != "shapes") throw ConfigError("gen_shapes_scene needs kind 'shapes'");
  return assemble_scene(cfg, seed);
}

Scene gen_lane_scene(const SceneGenConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (cfg.kind != "lanes") throw ConfigError("gen_lane_scene needs kind 'lanes'");
  const int h = cfg.height, w = cfg.width;

  Scene scene;
  scene.seed = seed;
  Rng rng(seed);
  const int count = rng.uniform_int(cfg.lane_count_min, cfg.lane_count_max);
  const double margin = cfg.lane_width / 2.0 + cfg.lane_max_drift + 2.0;
  const double span = w - 2.0 * margin;
  const double slot = span / count;
  const double jitter = std::max(0.0, (slot - (cfg.lane_width + 2.0 * cfg.lane_max_drift + 2.0)) / 2.0);

  scene.instances = InstanceLabelMap{h, w, std::vector<int>(static_cast<size_t>(h) * w, 0)};
  scene.semantics = SemanticLabelMap{h, w, std::vector<int>(static_cast<size_t>(h) * w, 0)};
  scene.image = Image{h, w, std::vector<double>(static_cast<size_t>(h) * w * 3, kBackgroundGray)};

  std::vector<int> colors;  // distinct per lane
  for (int i = 0; i < count; ++i) {
    const double base = margin + (i + 0.5) * slot + rng.uniform(-jitter, jitter);
    const double a = rng.uniform(-cfg.lane_max_drift, cfg.lane_max_drift);
    const double b = rng.uniform(-2.0 * cfg.lane_max_drift, 2.0 * cfg.lane_max_drift);
    int color;
    do {
      color = static_cast<int>(rng.below(kPalette.size()));
    } while (std::find(colors.begin(), colors.end(), color) != colors.end());
    colors.push_back(color);
    for (int r = 0; r < h; ++r) {
      const double t = static_cast<double>(r) / (h - 1) - 0.5;
      const int xs = static_cast<int>(std::lround(base + a * t + b * t * t));
      const int c0 = std::clamp(xs - cfg.lane_width / 2, 0, w - cfg.lane_width);
      for (int c = c0; c < c0 + cfg.lane_width; ++c) {
        scene.instances.at(r, c) = i + 1;
        scene.semantics.at(r, c) = 1;
      }
    }
  }
  for (size_t p = 0; p < scene.instances.id.size(); ++p) {
    const int id = scene.instances.id[p];
    if (id == 0) continue;
    const PaletteEntry& col = kPalette[colors[id - 1]];
    const double base[3] = {col.r, col.g, col.b};
    for (int ch = 0; ch < 3; ++ch)
      scene.image.rgb[p * 3 + ch] =
          std::clamp(base[ch] + rng.uniform(-kColorJitter, kColorJitter), 0.0, 1.0);
  }
  scene.centers = compute_center_offsets(scene.instances);
  return scene;
}

Scene gen_scene(const SceneGenConfig& cfg, uint64_t seed) {
  return cfg.kind == "lanes" ? gen_lane_scene(cfg, seed) : gen_shapes_scene(cfg, seed);
}

CenterOffsetMap compute_center_offsets(const InstanceLabelMap& instances) {
  const int m = instances.max_id();
  std::vector<double> sum_r(m + 1, 0.0), sum_c(m + 1, 0.0);
  std::vector<int64_t> count(m + 1, 0);
  for (int r = 0; r < instances.h; ++r)
    for (int c = 0; c < instances.w; ++c) {
      const int id = instances.at(r, c);
      if (id == 0) continue;
      sum_r[id] += r;
      sum_c[id] += c;
      ++count[id];
    }
  CenterOffsetMap out{instances.h, instances.w,
                      std::vector<double>(static_cast<size_t>(instances.h) * instances.w * 2, 0.0)};
  for (int r = 0; r < instances.h; ++r)
    for (int c = 0; c < instances.w; ++c) {
      const int id = instances.at(r, c);
      if (id == 0) continue;
      out.at(r, c, 0) = sum_c[id] / count[id] - c;  // dx
      out.at(r, c, 1) = sum_r[id] / count[id] - r;  // dy
    }
  return out;
}

void validate_scene(const Scene& scene, int min_visible_pixels) {
  const auto& inst = scene.instances;
  const int h = inst.h, w = inst.w;
  if (scene.image.h != h || scene.image.w != w || scene.semantics.h != h || scene.semantics.w != w ||
      scene.centers.h != h || scene.centers.w != w)
    throw DomainError("scene maps disagree on shape");

  const int m = inst.max_id();
  std::vector<int> count(m + 1, 0);
  std::vector<int> category(m + 1, -1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int id = inst.at(r, c);
      const int sem = scene.semantics.at(r, c);
      if ((id == 0) != (sem == 0)) throw DomainError("semantics and instances disagree on background");
      if (id == 0) {
        if (scene.centers.at(r, c, 0) != 0.0 || scene.centers.at(r, c, 1) != 0.0)
          throw DomainError("nonzero center offset on background");
        continue;
      }
      ++count[id];
      if (category[id] == -1) category[id] = sem;
      if (category[id] != sem) throw DomainError("category varies inside one instance");
    }
  for (int id = 1; id <= m; ++id) {
    if (count[id] == 0) throw DomainError("instance ids are not contiguous");
    if (count[id] < min_visible_pixels) throw DomainError("instance below min_visible_pixels");
  }

  // mean over instance pixels of (p + offset) must be the centroid.
  std::vector<double> mr(m + 1, 0.0), mc(m + 1, 0.0), cr(m + 1, 0.0), cc(m + 1, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int id = inst.at(r, c);
      if (id == 0) continue;
      cr[id] += r;
      cc[id] += c;
      mr[id] += r + scene.centers.at(r, c, 1);
      mc[id] += c + scene.centers.at(r, c, 0);
    }
  for (int id = 1; id <= m; ++id) {
    if (std::abs(mr[id] / count[id] - cr[id] / count[id]) > 1e-9 ||
        std::abs(mc[id] / count[id] - cc[id] / count[id]) > 1e-9)
      throw DomainError("center offsets do not point at the centroid");
  }
}

}  // namespace pxc
