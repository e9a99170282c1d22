#include "pxc/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "pxc/error.hpp"

namespace pxc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json epsilon_to_json(double eps) {
  if (std::isinf(eps)) return "inf";
  return eps;
}

double epsilon_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    throw ConfigError("epsilon must be a positive number or \"inf\"");
  }
  return j.get<double>();
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

void RunConfig::finalize() {
  if (version != 1) throw ConfigError("unsupported config version");
  loss.epsilon = sampler.epsilon;
  scene.seed = seed;
  network.seed = seed;
  network.n = loss.n;
  network.semantic_classes = semantic_class_count(scene);
  network.height = scene.height;
  network.width = scene.width;
  if (post.merge_threshold_px < 0)
    post.merge_threshold_px = default_postprocess(scene.height, scene.width).merge_threshold_px;
  if (post.size_threshold_px < 0)
    post.size_threshold_px = default_postprocess(scene.height, scene.width).size_threshold_px;
  post.upsample = 4;

  scene.validate();
  sampler.validate();
  loss.validate();
  network.validate();
  if (gen_count < 1) throw ConfigError("gen.count must be >= 1");
  if (train_steps < 0) throw ConfigError("train.steps must be >= 0");
  if (eval.lane_spacing < 1) throw ConfigError("eval.lane_spacing must be >= 1");
  if (!(eval.lane.match_dist > 0)) throw ConfigError("eval.lane_match_dist must be positive");
  if (post.min_segment_pixels < 0) throw ConfigError("postprocess.min_segment_pixels must be >= 0");
  if (post.merge_threshold_px <= 0) throw ConfigError("postprocess.merge_threshold_px must be positive");
  if (post.size_threshold_px <= 0) throw ConfigError("postprocess.size_threshold_px must be positive");
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["version"] = cfg.version;
  j["seed"] = cfg.seed;
  j["scene"] = {{"height", cfg.scene.height},
                {"width", cfg.scene.width},
                {"kind", cfg.scene.kind},
                {"min_instances", cfg.scene.min_instances},
                {"max_instances", cfg.scene.max_instances},
                {"shape_min", cfg.scene.shape_min},
                {"shape_max", cfg.scene.shape_max},
                {"proximity_epsilon", cfg.scene.proximity_epsilon},
                {"lane_count_min", cfg.scene.lane_count_min},
                {"lane_count_max", cfg.scene.lane_count_max},
                {"lane_width", cfg.scene.lane_width},
                {"lane_max_drift", cfg.scene.lane_max_drift},
                {"min_visible_pixels", cfg.scene.min_visible_pixels}};
  j["sampler"] = {{"per_instance_count", cfg.sampler.per_instance_count},
                  {"epsilon", epsilon_to_json(cfg.sampler.epsilon)},
                  {"include_self_pairs", cfg.sampler.include_self_pairs}};
  j["loss"] = {{"sigma", cfg.loss.sigma},
               {"n", cfg.loss.n},
               {"w_ins", cfg.loss.w_ins},
               {"w_sem", cfg.loss.w_sem},
               {"w_ctr", cfg.loss.w_ctr},
               {"log_clamp", cfg.loss.log_clamp}};
  j["network"] = {{"channels", cfg.network.channels},
                  {"depth", cfg.network.depth},
                  {"lr_init", cfg.network.lr_init},
                  {"lr_decay_factor", cfg.network.lr_decay_factor},
                  {"lr_decay_period_epochs", cfg.network.lr_decay_period_epochs},
                  {"momentum", cfg.network.momentum}};
  j["postprocess"] = {{"merge_threshold_px", cfg.post.merge_threshold_px},
                      {"size_threshold_px", cfg.post.size_threshold_px},
                      {"min_segment_pixels", cfg.post.min_segment_pixels},
                      {"merge_across_ids", cfg.post.merge_across_ids}};
  j["eval"] = {{"lane_spacing", cfg.eval.lane_spacing},
               {"lane_match_dist", cfg.eval.lane.match_dist},
               {"lane_fp_match_rate", cfg.eval.lane.fp_match_rate},
               {"lane_extra_penalty", cfg.eval.lane.extra_penalty}};
  j["gen"] = {{"count", cfg.gen_count}};
  j["train"] = {{"steps", cfg.train_steps}};
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.version = field(j, "version", 1);
  cfg.seed = field<uint64_t>(j, "seed", 1);
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    cfg.scene.height = field(s, "height", cfg.scene.height);
    cfg.scene.width = field(s, "width", cfg.scene.width);
    cfg.scene.kind = field<std::string>(s, "kind", cfg.scene.kind);
    cfg.scene.min_instances = field(s, "min_instances", cfg.scene.min_instances);
    cfg.scene.max_instances = field(s, "max_instances", cfg.scene.max_instances);
    cfg.scene.shape_min = field(s, "shape_min", cfg.scene.shape_min);
    cfg.scene.shape_max = field(s, "shape_max", cfg.scene.shape_max);
    cfg.scene.proximity_epsilon = field(s, "proximity_epsilon", cfg.scene.proximity_epsilon);
    cfg.scene.lane_count_min = field(s, "lane_count_min", cfg.scene.lane_count_min);
    cfg.scene.lane_count_max = field(s, "lane_count_max", cfg.scene.lane_count_max);
    cfg.scene.lane_width = field(s, "lane_width", cfg.scene.lane_width);
    cfg.scene.lane_max_drift = field(s, "lane_max_drift", cfg.scene.lane_max_drift);
    cfg.scene.min_visible_pixels = field(s, "min_visible_pixels", cfg.scene.min_visible_pixels);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    cfg.sampler.per_instance_count = field(s, "per_instance_count", cfg.sampler.per_instance_count);
    if (s.contains("epsilon")) cfg.sampler.epsilon = epsilon_from_json(s.at("epsilon"));
    cfg.sampler.include_self_pairs = field(s, "include_self_pairs", cfg.sampler.include_self_pairs);
  }
  if (j.contains("loss")) {
    const auto& s = j.at("loss");
    cfg.loss.sigma = field(s, "sigma", cfg.loss.sigma);
    cfg.loss.n = field(s, "n", cfg.loss.n);
    cfg.loss.w_ins = field(s, "w_ins", cfg.loss.w_ins);
    cfg.loss.w_sem = field(s, "w_sem", cfg.loss.w_sem);
    cfg.loss.w_ctr = field(s, "w_ctr", cfg.loss.w_ctr);
    cfg.loss.log_clamp = field(s, "log_clamp", cfg.loss.log_clamp);
  }
  if (j.contains("network")) {
    const auto& s = j.at("network");
    cfg.network.channels = field(s, "channels", cfg.network.channels);
    cfg.network.depth = field(s, "depth", cfg.network.depth);
    cfg.network.lr_init = field(s, "lr_init", cfg.network.lr_init);
    cfg.network.lr_decay_factor = field(s, "lr_decay_factor", cfg.network.lr_decay_factor);
    cfg.network.lr_decay_period_epochs =
        field(s, "lr_decay_period_epochs", cfg.network.lr_decay_period_epochs);
    cfg.network.momentum = field(s, "momentum", cfg.network.momentum);
  }
  if (j.contains("postprocess")) {
    const auto& s = j.at("postprocess");
    cfg.post.merge_threshold_px = field(s, "merge_threshold_px", -1.0);
    cfg.post.size_threshold_px = field(s, "size_threshold_px", -1.0);
    cfg.post.min_segment_pixels = field(s, "min_segment_pixels", cfg.post.min_segment_pixels);
    cfg.post.merge_across_ids = field(s, "merge_across_ids", cfg.post.merge_across_ids);
  } else {
    cfg.post.merge_threshold_px = -1.0;
    cfg.post.size_threshold_px = -1.0;
  }
  if (j.contains("eval")) {
    const auto& s = j.at("eval");
    cfg.eval.lane_spacing = field(s, "lane_spacing", cfg.eval.lane_spacing);
    cfg.eval.lane.match_dist = field(s, "lane_match_dist", cfg.eval.lane.match_dist);
    cfg.eval.lane.fp_match_rate = field(s, "lane_fp_match_rate", cfg.eval.lane.fp_match_rate);
    cfg.eval.lane.extra_penalty = field(s, "lane_extra_penalty", cfg.eval.lane.extra_penalty);
  }
  if (j.contains("gen")) cfg.gen_count = field(j.at("gen"), "count", cfg.gen_count);
  if (j.contains("train")) cfg.train_steps = field(j.at("train"), "steps", cfg.train_steps);
  return cfg;
}

uint64_t RunConfig::hash() const {
  const std::string dump = config_to_json(*this).dump();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

RunConfig load_config(const std::string& path, bool apply_env_seed) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config JSON: " + std::string(e.what()));
  }
  RunConfig cfg;
  try {
    cfg = config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config field: " + std::string(e.what()));
  }
  if (apply_env_seed) {
    if (const char* env = std::getenv("PXC_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
  }
  cfg.finalize();
  return cfg;
}

}  // namespace pxc
