#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "pxc/scene.hpp"

namespace pxc {

struct Pixel {
  int row = 0, col = 0;
  int instance_id = 0;
};

// One ordered pair of sampled pixels. `relation` is 1 iff both pixels belong
// to the same instance; `distance` is the Euclidean full-resolution pixel
// distance between them.
struct Pair {
  int a = 0, b = 0;  // indices into PairSet::pixels
  int relation = 0;
  double distance = 0.0;
};

struct PairSet {
  std::vector<Pixel> pixels;
  std::vector<Pair> pairs;
};

struct SamplerConfig {
  int per_instance_count = 50;
  double epsilon = std::numeric_limits<double>::infinity();
  bool include_self_pairs = true;

  void validate() const;
};

// 1 iff p and q carry the same instance id. Background pixels are outside the
// pairwise objective's domain and raise DomainError.
int relationship(const InstanceLabelMap& instances, const Pixel& p, const Pixel& q);

// Draws cfg.per_instance_count iid uniform pixels from every instance
// (with replacement), ids ascending. Throws DegenerateBatchError if the map
// has no instances.
std::vector<Pixel> sample_pixels(const InstanceLabelMap& instances, const SamplerConfig& cfg,
                                 uint64_t seed);

// All ordered pairs (self-pairs included when requested): |pairs| = |pixels|^2.
PairSet enumerate_pairs(std::vector<Pixel> pixels, const InstanceLabelMap& instances,
                        bool include_self_pairs = true);

// Keeps exactly the pairs with distance <= epsilon; pixel list unchanged.
PairSet filter_pairs(const PairSet& ps, double epsilon);

// sample -> enumerate -> filter in one call.
PairSet build_pair_set(const InstanceLabelMap& instances, const SamplerConfig& cfg, uint64_t seed);

}  // namespace pxc
