#include "pxc/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "pxc/error.hpp"
#include "pxc/eval.hpp"
#include "pxc/io.hpp"
#include "pxc/postprocess.hpp"
#include "pxc/rng.hpp"

namespace pxc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr uint64_t kSceneStream = 0x01;
constexpr uint64_t kPairDumpStream = 0x03;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);
}

json read_manifest(const std::string& data_dir) {
  std::ifstream f(data_dir + "/manifest.json");
  if (!f) throw ConfigError("missing dataset manifest in " + data_dir);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest: " + std::string(e.what()));
  }
  return j;
}

std::vector<Scene> load_dataset(const std::string& data_dir, const RunConfig& cfg) {
  const json manifest = read_manifest(data_dir);
  const int count = manifest.at("count").get<int>();
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (int i = 0; i < count; ++i) {
    Scene s = io::load_scene(data_dir, i);
    if (s.image.h != cfg.scene.height || s.image.w != cfg.scene.width)
      throw ConfigError("dataset scene size does not match config");
    scenes.push_back(std::move(s));
  }
  return scenes;
}

std::string pred_path(const std::string& dir, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pred_%06d.jsonl", index);
  return dir + "/" + buf;
}

json breakdown_json(int step, const LossBreakdown& b) {
  return json{{"step", step},       {"l_pair", b.l_pair}, {"l_bg", b.l_bg},
              {"l_sem", b.l_sem},   {"l_ctr", b.l_ctr},   {"l_total", b.l_total},
              {"pair_count", b.pair_count}};
}

void verify_checkpoint_matches(const ParameterStore& loaded, const MiniFpnConfig& cfg) {
  const ParameterStore expected = init_network(cfg);
  if (loaded.size() != expected.size())
    throw ConfigError("checkpoint does not match config (different layer set)");
  for (const auto& [name, t] : expected) {
    const auto it = loaded.find(name);
    if (it == loaded.end()) throw ConfigError("checkpoint missing tensor " + name);
    if (it->second.shape != t.shape) {
      if (name == "head_inst.o.b")
        throw ConfigError("checkpoint does not match config: n differs");
      throw ConfigError("checkpoint tensor " + name + " has the wrong shape");
    }
  }
}

std::vector<GtInstance> gt_instances(const Scene& scene, int scene_index) {
  std::vector<GtInstance> out;
  const int m = scene.instances.max_id();
  std::vector<GtInstance> by_id(m + 1);
  for (int64_t p = 0; p < static_cast<int64_t>(scene.instances.id.size()); ++p) {
    const int id = scene.instances.id[p];
    if (id == 0) continue;
    by_id[id].mask.push_back(static_cast<int>(p));
    by_id[id].category = scene.semantics.label[p];
  }
  for (int id = 1; id <= m; ++id) {
    by_id[id].scene = scene_index;
    out.push_back(std::move(by_id[id]));
  }
  return out;
}

}  // namespace

void cmd_gen(const GenOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  const int count = opt.count_override > 0 ? opt.count_override : cfg.gen_count;
  ensure_dir(opt.out_dir);

  for (int i = 0; i < count; ++i) {
    const uint64_t scene_seed = Rng::mix(Rng::mix(cfg.seed, kSceneStream), i);
    const Scene scene = gen_scene(cfg.scene, scene_seed);
    io::save_scene(opt.out_dir, i, scene);
    if (opt.dump_pairs) {
      const PairSet ps = build_pair_set(scene.instances, cfg.sampler,
                                        Rng::mix(Rng::mix(cfg.seed, kPairDumpStream), i));
      char buf[32];
      std::snprintf(buf, sizeof(buf), "pairs_%06d.jsonl", i);
      std::ofstream f(opt.out_dir + "/" + buf);
      if (!f) throw IoError("cannot write pair dump");
      for (const Pair& p : ps.pairs)
        f << json{{"a", p.a}, {"b", p.b}, {"relation", p.relation}, {"distance", p.distance}}
          << "\n";
    }
  }

  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(cfg.hash()));
  std::ofstream mf(opt.out_dir + "/manifest.json");
  if (!mf) throw IoError("cannot write manifest");
  mf << json{{"count", count}, {"seed", cfg.seed}, {"config_hash", hash_hex}}.dump(2) << "\n";
}

void cmd_train(const TrainOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  const std::vector<Scene> scenes = load_dataset(opt.data_dir, cfg);
  const int steps = opt.steps_override >= 0 ? opt.steps_override : cfg.train_steps;
  ensure_dir(opt.out_dir);

  std::ofstream metrics(opt.out_dir + "/metrics.jsonl");
  if (!metrics) throw IoError("cannot write metrics log");
  const TrainResult result =
      train(cfg.network, cfg.sampler, cfg.loss, scenes, steps,
            [&](int step, const LossBreakdown& b) { metrics << breakdown_json(step, b) << "\n"; });

  io::save_checkpoint(opt.out_dir + "/checkpoint.pxc", result.params);
  if (!opt.quiet)
    std::cout << breakdown_json(std::max(0, result.steps_run - 1), result.last) << "\n";
}

void cmd_infer_eval(const InferEvalOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  if (opt.mode != "ap" && opt.mode != "lane") throw ConfigError("mode must be 'ap' or 'lane'");
  if (opt.mode == "lane" && cfg.scene.kind != "lanes")
    throw ConfigError("lane mode requires a lanes dataset (scene.kind mismatch)");

  const ParameterStore params = io::load_checkpoint(opt.ckpt_path);
  verify_checkpoint_matches(params, cfg.network);
  const std::vector<Scene> scenes = load_dataset(opt.data_dir, cfg);
  ensure_dir(opt.out_dir);

  std::vector<PredInstance> all_preds;
  std::vector<GtInstance> all_gts;
  double lane_acc_sum = 0.0, lane_fp_sum = 0.0, lane_fn_sum = 0.0;

  for (int i = 0; i < static_cast<int>(scenes.size()); ++i) {
    const Scene& scene = scenes[i];
    std::ofstream pf(pred_path(opt.out_dir, i));
    if (!pf) throw IoError("cannot write predictions");

    if (opt.mode == "ap") {
      std::vector<InstancePrediction> preds;
      if (opt.debug_perfect) {
        for (const GtInstance& gt : gt_instances(scene, i))
          preds.push_back({gt.mask, gt.category, 1.0});
      } else {
        const NetworkOutputs out = forward(params, scene.image, cfg.network);
        preds = predict_instances(out, cfg.post);
      }
      for (const InstancePrediction& p : preds) {
        pf << json{{"category", p.category},
                   {"confidence", p.confidence},
                   {"rle", io::rle_encode(p.mask)}}
           << "\n";
        all_preds.push_back({i, p.category, p.confidence, p.mask});
      }
      for (GtInstance& gt : gt_instances(scene, i)) all_gts.push_back(std::move(gt));
    } else {
      std::vector<std::vector<int>> masks;
      if (opt.debug_perfect) {
        for (const GtInstance& gt : gt_instances(scene, i)) masks.push_back(gt.mask);
      } else {
        const NetworkOutputs out = forward(params, scene.image, cfg.network);
        const IdMap ids = argmax_labeling(out.instance_probs);
        masks = index_masks(ids, cfg.loss.n, cfg.post.upsample, cfg.post.min_segment_pixels);
      }
      std::vector<Lane> pred_lanes, gt_lanes;
      for (const auto& mask : masks) {
        pf << json{{"category", 1}, {"confidence", 1.0}, {"rle", io::rle_encode(mask)}} << "\n";
        pred_lanes.push_back(lane_from_mask(mask, scene.image.w, cfg.eval.lane_spacing));
      }
      for (const GtInstance& gt : gt_instances(scene, i))
        gt_lanes.push_back(lane_from_mask(gt.mask, scene.image.w, cfg.eval.lane_spacing));
      const LaneScore score = lane_score(pred_lanes, gt_lanes, cfg.eval.lane);
      lane_acc_sum += score.accuracy;
      lane_fp_sum += score.fp_rate;
      lane_fn_sum += score.fn_rate;
    }
  }

  json report;
  if (opt.mode == "ap") {
    const CityscapesAp ap = cityscapes_ap(all_preds, all_gts);
    json per_cat = json::object();
    for (const auto& [cat, v] : ap.per_category) per_cat[std::to_string(cat)] = v;
    report = json{{"mode", "ap"}, {"ap_mean", ap.ap_mean}, {"ap50", ap.ap50},
                  {"ap_per_category", per_cat}};
  } else {
    const double n = static_cast<double>(scenes.size());
    report = json{{"mode", "lane"},
                  {"lane", {{"accuracy", lane_acc_sum / n},
                            {"fp", lane_fp_sum / n},
                            {"fn", lane_fn_sum / n}}}};
  }
  std::ofstream rf(opt.out_dir + "/report.json");
  if (!rf) throw IoError("cannot write report");
  rf << report.dump(2) << "\n";
  if (!opt.quiet) std::cout << report << "\n";
}

double cmd_grad_check(const GradCheckOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  const GradCheckResult res = grad_check(cfg.network, cfg.loss, cfg.sampler, cfg.seed);
  std::cout << json{{"max_rel_error", res.max_rel_error}, {"coords_checked", res.coords_checked}}
            << "\n";
  return res.max_rel_error;
}

}  // namespace pxc
