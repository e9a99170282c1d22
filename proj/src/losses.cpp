#include "pxc/losses.hpp"

#include <cmath>

#include "pxc/error.hpp"
#include "pxc/outputs.hpp"

namespace pxc {

void LossConfig::validate() const {
  if (!(sigma > 0)) throw ConfigError("sigma must be positive");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (w_ins < 0 || w_sem < 0 || w_ctr < 0) throw ConfigError("loss weights must be >= 0");
  if (!(log_clamp > 0)) throw ConfigError("log_clamp must be positive");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (coloring_mode() && n < 4)
    throw ConfigError("n must be >= 4 when the pair set is distance-thresholded (index reuse)");
}

double kl_div(std::span<const double> p, std::span<const double> q, double clamp) {
  if (p.size() != q.size()) throw ShapeError("kl_div: distribution lengths differ");
  double acc = 0.0;
  for (size_t k = 0; k < p.size(); ++k) acc += p[k] * std::log((p[k] + clamp) / (q[k] + clamp));
  return acc;
}

double loss_same(std::span<const double> pi, std::span<const double> pj, double clamp) {
  return kl_div(pi, pj, clamp) + kl_div(pj, pi, clamp);
}

double loss_diff(std::span<const double> pi, std::span<const double> pj, double sigma,
                 double clamp) {
  return std::max(0.0, sigma - kl_div(pi, pj, clamp)) +
         std::max(0.0, sigma - kl_div(pj, pi, clamp));
}

double pair_loss(std::span<const double> pi, std::span<const double> pj, int relation,
                 double sigma, double clamp) {
  if (relation != 0 && relation != 1) throw DomainError("pair relation must be 0 or 1");
  return relation == 1 ? loss_same(pi, pj, clamp) : loss_diff(pi, pj, sigma, clamp);
}

namespace {
template <typename MapT>
MapT downsample_impl(const MapT& m, int factor, const char* what) {
  if (factor < 1 || m.h % factor != 0 || m.w % factor != 0)
    throw ShapeError(std::string(what) + ": size not divisible by downsample factor");
  MapT out;
  out.h = m.h / factor;
  out.w = m.w / factor;
  return out;
}
}  // namespace

InstanceLabelMap downsample_labels(const InstanceLabelMap& m, int factor) {
  InstanceLabelMap out = downsample_impl(m, factor, "instance map");
  out.id.resize(static_cast<size_t>(out.h) * out.w);
  for (int r = 0; r < out.h; ++r)
    for (int c = 0; c < out.w; ++c) out.at(r, c) = m.at(r * factor, c * factor);
  return out;
}

SemanticLabelMap downsample_labels(const SemanticLabelMap& m, int factor) {
  SemanticLabelMap out = downsample_impl(m, factor, "semantic map");
  out.label.resize(static_cast<size_t>(out.h) * out.w);
  for (int r = 0; r < out.h; ++r)
    for (int c = 0; c < out.w; ++c) out.at(r, c) = m.at(r * factor, c * factor);
  return out;
}

CenterOffsetMap downsample_centers(const CenterOffsetMap& m, int factor) {
  CenterOffsetMap out = downsample_impl(m, factor, "center map");
  out.v.resize(static_cast<size_t>(out.h) * out.w * 2);
  for (int r = 0; r < out.h; ++r)
    for (int c = 0; c < out.w; ++c) {
      out.at(r, c, 0) = m.at(r * factor, c * factor, 0);
      out.at(r, c, 1) = m.at(r * factor, c * factor, 1);
    }
  return out;
}

std::vector<kernels::PairRef> resolve_pairs(const PairSet& ps, int grid_w, int scale) {
  std::vector<kernels::PairRef> refs;
  refs.reserve(ps.pairs.size());
  for (const Pair& pr : ps.pairs) {
    const Pixel& a = ps.pixels[pr.a];
    const Pixel& b = ps.pixels[pr.b];
    refs.push_back({(a.row / scale) * grid_w + a.col / scale,
                    (b.row / scale) * grid_w + b.col / scale, pr.relation});
  }
  return refs;
}

double averaged_pair_loss_frozen(const ProbMap& pm, const ProbMap& pm_star, const PairSet& ps,
                                 const LossConfig& cfg, int scale) {
  if (ps.pairs.empty()) throw DegenerateBatchError("averaged pair loss over an empty pair set");
  if (pm.h != pm_star.h || pm.w != pm_star.w || pm.channels != pm_star.channels)
    throw ShapeError("prob maps disagree on shape");
  const auto refs = resolve_pairs(ps, pm.w, scale);
  const double sum = kernels::pair_loss_forward(pm.p.data(), pm_star.p.data(), pm.h * pm.w,
                                                pm.channels, refs.data(),
                                                static_cast<int64_t>(refs.size()), cfg.sigma,
                                                cfg.log_clamp);
  return sum / static_cast<double>(refs.size());
}

double averaged_pair_loss(const ProbMap& pm, const PairSet& ps, const LossConfig& cfg,
                          int scale) {
  return averaged_pair_loss_frozen(pm, pm, ps, cfg, scale);
}

double background_loss(const ProbMap& pm, const InstanceLabelMap& instances, double clamp) {
  if (pm.h != instances.h || pm.w != instances.w)
    throw ShapeError("background loss: prob map and label map shapes differ");
  const int64_t n_px = static_cast<int64_t>(pm.h) * pm.w;
  double acc = 0.0;
  for (int64_t i = 0; i < n_px; ++i) {
    const double* t = pm.p.data() + i * pm.channels;
    if (instances.id[i] == 0) {
      acc += std::log(t[0] + clamp);
    } else {
      double fg = 0.0;
      for (int k = 1; k < pm.channels; ++k) fg += t[k];
      acc += std::log(fg + clamp);
    }
  }
  return -acc / static_cast<double>(n_px);
}

double semantic_ce_loss(const ProbMap& sem_pm, const SemanticLabelMap& sem, double clamp) {
  if (sem_pm.h != sem.h || sem_pm.w != sem.w)
    throw ShapeError("semantic loss: prob map and label map shapes differ");
  const int64_t n_px = static_cast<int64_t>(sem_pm.h) * sem_pm.w;
  double acc = 0.0;
  for (int64_t i = 0; i < n_px; ++i) {
    const int cls = sem.label[i];
    if (cls < 0 || cls >= sem_pm.channels) throw DomainError("semantic class out of range");
    acc += std::log(sem_pm.p[i * sem_pm.channels + cls] + clamp);
  }
  return -acc / static_cast<double>(n_px);
}

namespace {
inline double smooth_l1(double e) {
  const double a = std::abs(e);
  return a < 1.0 ? 0.5 * e * e : a - 0.5;
}
}  // namespace

double center_smooth_l1_loss(const CenterOffsetMap& pred, const CenterOffsetMap& gt,
                             const InstanceLabelMap& instances) {
  if (pred.h != gt.h || pred.w != gt.w || pred.h != instances.h || pred.w != instances.w)
    throw ShapeError("center loss: map shapes differ");
  const int64_t n_px = static_cast<int64_t>(pred.h) * pred.w;
  double acc = 0.0;
  int64_t fg = 0;
  for (int64_t i = 0; i < n_px; ++i) {
    if (instances.id[i] == 0) continue;
    ++fg;
    acc += smooth_l1(pred.v[i * 2] - gt.v[i * 2]);
    acc += smooth_l1(pred.v[i * 2 + 1] - gt.v[i * 2 + 1]);
  }
  if (fg == 0) throw DegenerateBatchError("center loss: no foreground cells");
  return acc / static_cast<double>(2 * fg);
}

LossBreakdown total_loss(const NetworkOutputs& outputs, const Scene& scene, const PairSet& ps,
                         const LossConfig& cfg) {
  cfg.validate();
  const ProbMap& pm = outputs.instance_probs;
  if (scene.instances.h % pm.h != 0 || scene.instances.h / pm.h != scene.instances.w / pm.w)
    throw ShapeError("output grid is not an integer downscale of the scene");
  const int scale = scene.instances.h / pm.h;
  const InstanceLabelMap inst_q = downsample_labels(scene.instances, scale);
  const SemanticLabelMap sem_q = downsample_labels(scene.semantics, scale);
  const CenterOffsetMap ctr_q = downsample_centers(scene.centers, scale);

  LossBreakdown out;
  out.pair_count = static_cast<int64_t>(ps.pairs.size());
  out.l_pair = averaged_pair_loss(pm, ps, cfg, scale);
  out.l_bg = background_loss(pm, inst_q, cfg.log_clamp);
  out.l_ins = out.l_pair + out.l_bg;
  out.l_sem = semantic_ce_loss(outputs.semantic_probs, sem_q, cfg.log_clamp);
  out.l_ctr = center_smooth_l1_loss(outputs.center_pred, ctr_q, inst_q);
  out.l_total = cfg.w_ins * out.l_ins + cfg.w_sem * out.l_sem + cfg.w_ctr * out.l_ctr;
  return out;
}

}  // namespace pxc
