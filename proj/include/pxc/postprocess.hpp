#pragma once

#include <optional>
#include <vector>

#include "pxc/outputs.hpp"

namespace pxc {

// Per-pixel winning index (0 = background) of the instance probability map.
struct IdMap {
  int h = 0, w = 0;
  std::vector<int> id;

  int at(int r, int c) const { return id[static_cast<size_t>(r) * w + c]; }
};

// A maximal 8-connected same-index region of the id map, plus the mean of the
// predicted object centers over its pixels (full-resolution units).
struct Segment {
  std::vector<int> pixels;  // sorted flat indices on the id-map grid
  int color_id = 0;
  double center_x = 0.0, center_y = 0.0;
  int size() const { return static_cast<int>(pixels.size()); }
};

struct InstancePrediction {
  std::vector<int> mask;  // sorted flat indices, full resolution
  int category = 0;
  double confidence = 1.0;
};

struct PostprocessConfig {
  double merge_threshold_px = 20.0;   // full-resolution pixels
  double size_threshold_px = 1500.0;  // confidence knee, full-resolution pixels
  int min_segment_pixels = 0;         // full-resolution; 0 disables the filter
  bool merge_across_ids = true;
  int upsample = 4;  // id-map cell -> upsample x upsample full-res block
};

// Image-size-scaled defaults (reference image 1024 x 2048).
PostprocessConfig default_postprocess(int full_h, int full_w);

// Argmax over channels; ties resolve to the lowest channel index.
IdMap argmax_labeling(const ProbMap& pm);

// Maximal 8-connected regions of equal nonzero id; segments partition the
// nonzero pixels and are ordered by their first pixel in scan order.
std::vector<Segment> connected_components(const IdMap& ids);

// Fills each segment's mean predicted center: mean over its cells of
// (upsample * cell + predicted offset).
void fill_segment_centers(std::vector<Segment>& segs, const CenterOffsetMap& center_pred,
                          int upsample);

// Transitive closure of "mean centers within threshold"; merged segments pool
// their pixels and combine centers by a size-weighted mean.
std::vector<Segment> merge_by_center(const std::vector<Segment>& segs,
                                     const CenterOffsetMap& center_pred, double threshold,
                                     int upsample, bool across_ids = true);

// Dominant category (argmax of the mean class-1..C probability over the
// segment) and the segment clipped to cells whose semantic argmax matches it.
// nullopt when the clipped mask is empty (the segment is dropped).
std::optional<std::pair<int, std::vector<int>>> assign_category(const Segment& seg,
                                                                const ProbMap& semantic_probs);

// 1 when size >= threshold, otherwise size / threshold.
double score_confidence(int size_px, double size_threshold_px);

std::vector<int> upsample_mask(const std::vector<int>& pixels, int w, int factor);

// argmax -> components -> center merge -> min-size filter -> category
// assignment -> x4 mask upsampling -> confidence.
std::vector<InstancePrediction> predict_instances(const NetworkOutputs& outputs,
                                                  const PostprocessConfig& cfg);

// Deployment path for bounded-instance tasks (no component extraction): one
// mask per active network index, upsampled to full resolution. Masks smaller
// than min_pixels_full are dropped.
std::vector<std::vector<int>> index_masks(const IdMap& ids, int n, int upsample,
                                          int min_pixels_full);

}  // namespace pxc
