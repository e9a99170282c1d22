#include "pxc/network.hpp"

#include <cmath>

#include "pxc/error.hpp"
#include "pxc/rng.hpp"

namespace pxc {

void MiniFpnConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  const int div = 1 << depth;
  if (height % div != 0 || width % div != 0)
    throw ConfigError("input size must be divisible by 2^depth");
  if (depth < 2) throw ConfigError("depth must be >= 2 to reach the 1/4-resolution map");
  if (channels < 4) throw ConfigError("channels must be >= 4");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (semantic_classes < 1) throw ConfigError("semantic_classes must be >= 1");
  if (!(lr_init > 0) || !(lr_decay_factor > 0) || lr_decay_period_epochs < 1)
    throw ConfigError("bad learning-rate schedule");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
}

namespace {

struct LayerSpec {
  std::string name;
  int k, ci, co;
};

// Creation order is the init order; the RNG consumes values in this sequence.
std::vector<LayerSpec> layer_specs(const MiniFpnConfig& cfg) {
  std::vector<LayerSpec> specs;
  const int c = cfg.channels;
  specs.push_back({"enc1", 3, 3, c});
  for (int i = 2; i <= cfg.depth; ++i) specs.push_back({"enc" + std::to_string(i), 3, c, c});
  for (int i = 2; i <= cfg.depth; ++i) specs.push_back({"lat" + std::to_string(i), 3, c, c});
  specs.push_back({"head_inst.c", 3, c, c});
  specs.push_back({"head_inst.o", 1, c, cfg.n + 1});
  specs.push_back({"head_sem.c", 3, c, c});
  specs.push_back({"head_sem.o", 1, c, cfg.semantic_classes + 1});
  specs.push_back({"head_ctr.c", 3, c, c});
  specs.push_back({"head_ctr.o", 1, c, 2});
  return specs;
}

}  // namespace

int64_t parameter_count(const MiniFpnConfig& cfg) {
  int64_t total = 0;
  for (const auto& s : layer_specs(cfg))
    total += static_cast<int64_t>(s.k) * s.k * s.ci * s.co + s.co;
  return total;
}

ParameterStore init_network(const MiniFpnConfig& cfg) {
  cfg.validate();
  Rng rng(Rng::mix(cfg.seed, 0x11));
  ParameterStore params;
  for (const auto& s : layer_specs(cfg)) {
    Tensor w = Tensor::zeros({s.k, s.k, s.ci, s.co});
    const double limit = std::sqrt(6.0 / (static_cast<double>(s.k) * s.k * s.ci));
    for (auto& v : w.v) v = rng.uniform(-limit, limit);
    params[s.name + ".w"] = std::move(w);
    params[s.name + ".b"] = Tensor::zeros({s.co});
  }
  return params;
}

ForwardHandles forward_on_tape(Tape& tape, const ParameterStore& params, const Image& image,
                               const MiniFpnConfig& cfg) {
  cfg.validate();
  if (image.h != cfg.height || image.w != cfg.width) throw ShapeError("image size mismatch");
  for (double v : image.rgb)
    if (!std::isfinite(v)) throw DomainError("non-finite input image");

  ForwardHandles h;
  for (const auto& [name, t] : params) h.params[name] = tape.leaf(t, /*requires_grad=*/true);
  auto p = [&](const std::string& name) {
    auto it = h.params.find(name);
    if (it == h.params.end()) throw ShapeError("missing parameter " + name);
    return it->second;
  };

  Tensor img;
  img.shape = {image.h, image.w, 3};
  img.v = image.rgb;
  int cur = tape.leaf(std::move(img), /*requires_grad=*/false);

  std::vector<int> blocks;  // block i (1-based) at resolution 1/2^i
  for (int i = 1; i <= cfg.depth; ++i) {
    const std::string name = "enc" + std::to_string(i);
    cur = ops::maxpool2(tape, ops::relu(tape, ops::conv2d(tape, cur, p(name + ".w"), p(name + ".b"), 3)));
    blocks.push_back(cur);
  }

  // Top-down: deepest lateral, upsample, sum with the next lateral, stopping
  // at 1/4 resolution (block index 2).
  int top = -1;
  for (int i = cfg.depth; i >= 2; --i) {
    const std::string name = "lat" + std::to_string(i);
    const int lat = ops::conv2d(tape, blocks[i - 1], p(name + ".w"), p(name + ".b"), 3);
    top = (top == -1) ? lat : ops::add(tape, ops::upsample2(tape, top), lat);
  }

  auto head = [&](const std::string& name) {
    const int trunk = ops::relu(tape, ops::conv2d(tape, top, p(name + ".c.w"), p(name + ".c.b"), 3));
    return ops::conv2d(tape, trunk, p(name + ".o.w"), p(name + ".o.b"), 1);
  };
  h.instance_probs = ops::softmax_channels(tape, head("head_inst"));
  h.semantic_probs = ops::softmax_channels(tape, head("head_sem"));
  h.center_pred = head("head_ctr");
  h.out_h = cfg.height / 4;
  h.out_w = cfg.width / 4;
  return h;
}

NetworkOutputs outputs_from_tape(const Tape& tape, const ForwardHandles& h) {
  NetworkOutputs out;
  const auto& si = tape.shape(h.instance_probs);
  out.instance_probs = ProbMap{si[0], si[1], si[2], tape.val(h.instance_probs)};
  const auto& ss = tape.shape(h.semantic_probs);
  out.semantic_probs = ProbMap{ss[0], ss[1], ss[2], tape.val(h.semantic_probs)};
  const auto& sc = tape.shape(h.center_pred);
  out.center_pred = CenterOffsetMap{sc[0], sc[1], tape.val(h.center_pred)};
  return out;
}

NetworkOutputs forward(const ParameterStore& params, const Image& image,
                       const MiniFpnConfig& cfg) {
  Tape tape;
  const ForwardHandles h = forward_on_tape(tape, params, image, cfg);
  return outputs_from_tape(tape, h);
}

LossNodes loss_on_tape(Tape& tape, const ForwardHandles& h, const Scene& scene,
                       const PairSet& ps, const LossConfig& cfg) {
  cfg.validate();
  if (scene.instances.h % h.out_h != 0) throw ShapeError("scene does not downscale to the output grid");
  const int scale = scene.instances.h / h.out_h;
  auto inst_q = std::make_shared<InstanceLabelMap>(downsample_labels(scene.instances, scale));
  auto sem_q = std::make_shared<SemanticLabelMap>(downsample_labels(scene.semantics, scale));
  auto ctr_q = std::make_shared<CenterOffsetMap>(downsample_centers(scene.centers, scale));
  auto refs = std::make_shared<std::vector<kernels::PairRef>>(resolve_pairs(ps, h.out_w, scale));

  LossNodes nodes;
  nodes.pair = ops::averaged_pair_loss(tape, h.instance_probs, refs, cfg.sigma, cfg.log_clamp);
  nodes.bg = ops::background_loss(tape, h.instance_probs, inst_q, cfg.log_clamp);
  nodes.sem = ops::semantic_ce_loss(tape, h.semantic_probs, sem_q, cfg.log_clamp);
  nodes.ctr = ops::center_smooth_l1_loss(tape, h.center_pred, ctr_q, inst_q);
  nodes.total = ops::weighted_sum(tape, {nodes.pair, nodes.bg, nodes.sem, nodes.ctr},
                                  {cfg.w_ins, cfg.w_ins, cfg.w_sem, cfg.w_ctr});
  nodes.breakdown.l_pair = tape.val(nodes.pair)[0];
  nodes.breakdown.l_bg = tape.val(nodes.bg)[0];
  nodes.breakdown.l_ins = nodes.breakdown.l_pair + nodes.breakdown.l_bg;
  nodes.breakdown.l_sem = tape.val(nodes.sem)[0];
  nodes.breakdown.l_ctr = tape.val(nodes.ctr)[0];
  nodes.breakdown.l_total = tape.val(nodes.total)[0];
  nodes.breakdown.pair_count = static_cast<int64_t>(ps.pairs.size());
  return nodes;
}

ParameterStore backward(Tape& tape, int loss_node, const ForwardHandles& h) {
  tape.backward(loss_node);
  ParameterStore grads;
  for (const auto& [name, id] : h.params) {
    Tensor g;
    g.shape = tape.shape(id);
    g.v = tape.grad(id);
    grads[name] = std::move(g);
  }
  return grads;
}

void sgd_step(ParameterStore& params, const ParameterStore& grads, double lr, double momentum,
              SgdState& state) {
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) throw ShapeError("gradient missing for " + name);
    if (git->second.shape != p.shape) throw ShapeError("gradient shape mismatch for " + name);
    Tensor& v = state.velocity.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    for (size_t i = 0; i < p.v.size(); ++i) {
      v.v[i] = momentum * v.v[i] + git->second.v[i];
      p.v[i] -= lr * v.v[i];
    }
  }
}

namespace {

double frozen_objective(const NetworkOutputs& out, const ProbMap& pm_star,
                        const PairSet& ps, const LossConfig& cfg, int scale,
                        const InstanceLabelMap& inst_q, const SemanticLabelMap& sem_q,
                        const CenterOffsetMap& ctr_q) {
  const double l_pair = averaged_pair_loss_frozen(out.instance_probs, pm_star, ps, cfg, scale);
  const double l_bg = background_loss(out.instance_probs, inst_q, cfg.log_clamp);
  const double l_sem = semantic_ce_loss(out.semantic_probs, sem_q, cfg.log_clamp);
  const double l_ctr = center_smooth_l1_loss(out.center_pred, ctr_q, inst_q);
  return cfg.w_ins * (l_pair + l_bg) + cfg.w_sem * l_sem + cfg.w_ctr * l_ctr;
}

}  // namespace

GradCheckResult grad_check(const MiniFpnConfig& cfg, const LossConfig& loss_cfg,
                           const SamplerConfig& sampler_cfg, uint64_t seed) {
  // A small scene with at least two instances so every loss term is active.
  SceneGenConfig scene_cfg;
  scene_cfg.height = cfg.height;
  scene_cfg.width = cfg.width;
  scene_cfg.min_instances = 2;
  scene_cfg.max_instances = 2;
  scene_cfg.shape_min = std::min(6, cfg.height / 2);
  scene_cfg.shape_max = std::min(7, cfg.height / 2);
  scene_cfg.min_visible_pixels = 4;
  const Scene scene = gen_shapes_scene(scene_cfg, Rng::mix(seed, 0x5C));
  const PairSet ps = build_pair_set(scene.instances, sampler_cfg, Rng::mix(seed, 0x5A));

  ParameterStore params = init_network(cfg);

  Tape tape;
  const ForwardHandles h = forward_on_tape(tape, params, scene.image, cfg);
  const LossNodes nodes = loss_on_tape(tape, h, scene, ps, loss_cfg);
  const ParameterStore analytic = backward(tape, nodes.total, h);
  const ProbMap pm_star = outputs_from_tape(tape, h).instance_probs;

  const int scale = scene.instances.h / h.out_h;
  const InstanceLabelMap inst_q = downsample_labels(scene.instances, scale);
  const SemanticLabelMap sem_q = downsample_labels(scene.semantics, scale);
  const CenterOffsetMap ctr_q = downsample_centers(scene.centers, scale);

  const double step = 1e-4;
  const int64_t total = parameter_count(cfg);
  const int64_t stride = std::max<int64_t>(1, total / 500);

  GradCheckResult res;
  int64_t coord = 0;
  for (auto& [name, p] : params) {
    const auto& ga = analytic.at(name);
    for (size_t i = 0; i < p.v.size(); ++i, ++coord) {
      if (coord % stride != 0) continue;
      const double keep = p.v[i];
      p.v[i] = keep + step;
      const double up = frozen_objective(forward(params, scene.image, cfg), pm_star, ps,
                                         loss_cfg, scale, inst_q, sem_q, ctr_q);
      p.v[i] = keep - step;
      const double dn = frozen_objective(forward(params, scene.image, cfg), pm_star, ps,
                                         loss_cfg, scale, inst_q, sem_q, ctr_q);
      p.v[i] = keep;
      const double fd = (up - dn) / (2.0 * step);
      const double an = ga.v[i];
      if (!std::isfinite(fd) || !std::isfinite(an))
        throw DivergenceError("non-finite gradient during check");
      const double rel = std::abs(an - fd) / std::max(1e-8, std::abs(an) + std::abs(fd));
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.coords_checked;
    }
  }
  return res;
}

TrainResult train(const MiniFpnConfig& cfg, const SamplerConfig& sampler_cfg,
                  const LossConfig& loss_cfg, const std::vector<Scene>& dataset, int steps,
                  const std::function<void(int, const LossBreakdown&)>& on_step) {
  cfg.validate();
  sampler_cfg.validate();
  loss_cfg.validate();
  if (dataset.empty()) throw ConfigError("training needs a nonempty dataset");

  TrainResult result;
  result.params = init_network(cfg);
  SgdState sgd;
  const int scenes = static_cast<int>(dataset.size());
  const uint64_t sample_stream = Rng::mix(cfg.seed, 0x22);

  for (int step = 0; step < steps; ++step) {
    const Scene& scene = dataset[step % scenes];
    const int epoch = step / scenes;
    const double lr = cfg.lr_init * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_period_epochs);

    const PairSet ps = build_pair_set(scene.instances, sampler_cfg, Rng::mix(sample_stream, step));

    Tape tape;
    const ForwardHandles h = forward_on_tape(tape, result.params, scene.image, cfg);
    const LossNodes nodes = loss_on_tape(tape, h, scene, ps, loss_cfg);
    if (!std::isfinite(nodes.breakdown.l_total))
      throw DivergenceError("training loss became non-finite at step " + std::to_string(step));

    const ParameterStore grads = backward(tape, nodes.total, h);
    sgd_step(result.params, grads, lr, cfg.momentum, sgd);
    for (const auto& [name, p] : result.params)
      for (double v : p.v)
        if (!std::isfinite(v))
          throw DivergenceError("parameter " + name + " became non-finite at step " +
                                std::to_string(step));

    result.last = nodes.breakdown;
    result.steps_run = step + 1;
    if (on_step) on_step(step, nodes.breakdown);
  }
  return result;
}

}  // namespace pxc
