#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pxc {

// H x W x 3 interleaved RGB, values in [0, 1].
struct Image {
  int h = 0, w = 0;
  std::vector<double> rgb;

  double& at(int r, int c, int ch) { return rgb[(static_cast<size_t>(r) * w + c) * 3 + ch]; }
  double at(int r, int c, int ch) const { return rgb[(static_cast<size_t>(r) * w + c) * 3 + ch]; }
};

// H x W instance ids; 0 = background, ids 1..m contiguous.
struct InstanceLabelMap {
  int h = 0, w = 0;
  std::vector<int> id;

  int& at(int r, int c) { return id[static_cast<size_t>(r) * w + c]; }
  int at(int r, int c) const { return id[static_cast<size_t>(r) * w + c]; }
  int max_id() const;
};

// H x W category labels; 0 = background, 1..C = categories.
struct SemanticLabelMap {
  int h = 0, w = 0;
  std::vector<int> label;

  int& at(int r, int c) { return label[static_cast<size_t>(r) * w + c]; }
  int at(int r, int c) const { return label[static_cast<size_t>(r) * w + c]; }
};

// H x W x 2 per-pixel vector to the owning instance centroid, in pixels.
// Component 0 = dx (column direction), component 1 = dy (row direction).
// (0, 0) on background.
struct CenterOffsetMap {
  int h = 0, w = 0;
  std::vector<double> v;

  double& at(int r, int c, int k) { return v[(static_cast<size_t>(r) * w + c) * 2 + k]; }
  double at(int r, int c, int k) const { return v[(static_cast<size_t>(r) * w + c) * 2 + k]; }
};

struct Scene {
  Image image;
  InstanceLabelMap instances;
  SemanticLabelMap semantics;
  CenterOffsetMap centers;
  uint64_t seed = 0;
};

struct SceneGenConfig {
  int height = 64;
  int width = 64;
  std::string kind = "shapes";  // "shapes" | "lanes"

  // Shapes mode.
  int min_instances = 2;
  int max_instances = 4;
  std::string shape_kinds = "both";  // "box" | "disc" | "both"
  int shape_min = 10;                // bounding size in pixels
  int shape_max = 16;
  // > 0 switches to the coloring layout: shape placement guarantees that the
  // instance adjacency graph at this pixel distance is 4-colorable.
  double proximity_epsilon = 0.0;

  // Lanes mode.
  int lane_count_min = 3;
  int lane_count_max = 5;
  int lane_width = 10;
  double lane_max_drift = 6.0;  // max lateral deviation from the lane's base x

  int min_visible_pixels = 8;
  uint64_t seed = 1;

  // Throws ConfigError on infeasible settings.
  void validate() const;
};

int semantic_class_count(const SceneGenConfig& cfg);  // C: shapes 2, lanes 1

Scene gen_shapes_scene(const SceneGenConfig& cfg, uint64_t seed);
Scene gen_lane_scene(const SceneGenConfig& cfg, uint64_t seed);
Scene gen_scene(const SceneGenConfig& cfg, uint64_t seed);  // dispatch on cfg.kind

CenterOffsetMap compute_center_offsets(const InstanceLabelMap& instances);

// Checks every Scene invariant (shape agreement, min visible pixels,
// semantics/instances zero-consistency, id contiguity, centroid identity).
// Throws DomainError with a description on the first violation.
void validate_scene(const Scene& scene, int min_visible_pixels);

}  // namespace pxc
