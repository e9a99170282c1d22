#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pxc/eval.hpp"
#include "pxc/losses.hpp"
#include "pxc/network.hpp"
#include "pxc/postprocess.hpp"
#include "pxc/sampling.hpp"
#include "pxc/scene.hpp"

namespace pxc {

struct EvalConfig {
  int lane_spacing = 10;
  LaneScoreConfig lane;
};

// Everything one run needs, loaded from a single JSON file. Shared quantities
// (seed, epsilon, n, image size, class count) have one source field each and
// are mirrored into the per-module configs by finalize().
struct RunConfig {
  int version = 1;
  uint64_t seed = 1;
  SceneGenConfig scene;
  SamplerConfig sampler;
  LossConfig loss;
  MiniFpnConfig network;
  PostprocessConfig post;  // negative thresholds select the size-scaled defaults
  EvalConfig eval;
  int gen_count = 100;
  int train_steps = 1000;

  // Mirrors shared fields and validates every section. Throws ConfigError.
  void finalize();
  uint64_t hash() const;  // FNV-1a of the canonical serialization
};

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

// Reads, finalizes, and returns the config. Honors the PXC_SEED environment
// variable as a seed override when apply_env_seed is set.
RunConfig load_config(const std::string& path, bool apply_env_seed = true);

}  // namespace pxc
