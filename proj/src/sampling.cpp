#include "pxc/sampling.hpp"

#include <cmath>

#include "pxc/error.hpp"
#include "pxc/rng.hpp"

namespace pxc {

void SamplerConfig::validate() const {
  if (per_instance_count < 1) throw ConfigError("per_instance_count must be >= 1");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
}

int relationship(const InstanceLabelMap& instances, const Pixel& p, const Pixel& q) {
  auto id_at = [&](const Pixel& x) {
    if (x.row < 0 || x.row >= instances.h || x.col < 0 || x.col >= instances.w)
      throw DomainError("pixel out of bounds");
    return instances.at(x.row, x.col);
  };
  const int a = id_at(p), b = id_at(q);
  if (a == 0 || b == 0) throw DomainError("background pixels have no pairwise relationship");
  return a == b ? 1 : 0;
}

std::vector<Pixel> sample_pixels(const InstanceLabelMap& instances, const SamplerConfig& cfg,
                                 uint64_t seed) {
  cfg.validate();
  const int m = instances.max_id();
  if (m == 0) throw DegenerateBatchError("label map has no instances to sample");

  std::vector<std::vector<Pixel>> by_id(m + 1);
  for (int r = 0; r < instances.h; ++r)
    for (int c = 0; c < instances.w; ++c) {
      const int id = instances.at(r, c);
      if (id > 0) by_id[id].push_back({r, c, id});
    }

  Rng rng(seed);
  std::vector<Pixel> out;
  out.reserve(static_cast<size_t>(m) * cfg.per_instance_count);
  for (int id = 1; id <= m; ++id) {
    const auto& pool = by_id[id];
    if (pool.empty()) throw DomainError("instance ids are not contiguous");
    for (int k = 0; k < cfg.per_instance_count; ++k) out.push_back(pool[rng.below(pool.size())]);
  }
  return out;
}

PairSet enumerate_pairs(std::vector<Pixel> pixels, const InstanceLabelMap& instances,
                        bool include_self_pairs) {
  if (pixels.empty()) throw DegenerateBatchError("cannot enumerate pairs of an empty pixel list");
  PairSet ps;
  ps.pixels = std::move(pixels);
  const int count = static_cast<int>(ps.pixels.size());
  ps.pairs.reserve(static_cast<size_t>(count) * count);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) {
      if (i == j && !include_self_pairs) continue;
      const Pixel& a = ps.pixels[i];
      const Pixel& b = ps.pixels[j];
      const double dr = a.row - b.row, dc = a.col - b.col;
      ps.pairs.push_back({i, j, relationship(instances, a, b), std::sqrt(dr * dr + dc * dc)});
    }
  }
  return ps;
}

PairSet filter_pairs(const PairSet& ps, double epsilon) {
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  PairSet out;
  out.pixels = ps.pixels;
  for (const Pair& p : ps.pairs)
    if (p.distance <= epsilon) out.pairs.push_back(p);
  return out;
}

PairSet build_pair_set(const InstanceLabelMap& instances, const SamplerConfig& cfg, uint64_t seed) {
  PairSet ps = enumerate_pairs(sample_pixels(instances, cfg, seed), instances, cfg.include_self_pairs);
  if (std::isinf(cfg.epsilon)) return ps;
  return filter_pairs(ps, cfg.epsilon);
}

}  // namespace pxc
