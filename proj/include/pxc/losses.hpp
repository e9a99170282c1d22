#pragma once

#include <limits>
#include <span>
#include <vector>

#include "pxc/kernels.hpp"
#include "pxc/sampling.hpp"
#include "pxc/scene.hpp"

namespace pxc {

// h x w x (n+1) per-pixel distribution over instance indices; channel 0 is
// background. Every pixel's channel vector sums to 1.
struct ProbMap {
  int h = 0, w = 0, channels = 0;
  std::vector<double> p;

  std::span<const double> pixel(int r, int c) const {
    return {p.data() + (static_cast<size_t>(r) * w + c) * channels, static_cast<size_t>(channels)};
  }
  double* pixel_mut(int r, int c) {
    return p.data() + (static_cast<size_t>(r) * w + c) * channels;
  }
};

struct LossConfig {
  double sigma = 2.0;
  double epsilon = std::numeric_limits<double>::infinity();
  int n = 8;  // instance indices (prob map has n+1 channels)
  double w_ins = 1.0, w_sem = 0.1, w_ctr = 0.01;
  double log_clamp = 1e-12;
  // true when the thresholded pair set (finite epsilon) is in use; requires n >= 4
  bool coloring_mode() const { return epsilon != std::numeric_limits<double>::infinity(); }

  void validate() const;
};

struct LossBreakdown {
  double l_pair = 0.0, l_bg = 0.0, l_ins = 0.0, l_sem = 0.0, l_ctr = 0.0, l_total = 0.0;
  int64_t pair_count = 0;
};

// --- scalar building blocks ------------------------------------------------

// sum_k p_k * ln((p_k + clamp) / (q_k + clamp)). Gradient, where one is
// taken, flows only through q.
double kl_div(std::span<const double> p, std::span<const double> q, double clamp = 1e-12);

// KL(Pi*||Pj) + KL(Pj*||Pi): cost of a same-instance pair.
double loss_same(std::span<const double> pi, std::span<const double> pj, double clamp = 1e-12);

// max(0, sigma - KL(Pi*||Pj)) + max(0, sigma - KL(Pj*||Pi)).
double loss_diff(std::span<const double> pi, std::span<const double> pj, double sigma,
                 double clamp = 1e-12);

// relation * loss_same + (1 - relation) * loss_diff.
double pair_loss(std::span<const double> pi, std::span<const double> pj, int relation,
                 double sigma, double clamp = 1e-12);

// --- map-level losses -------------------------------------------------------

// Nearest downsampling by an integer factor (top-left sample of each block).
InstanceLabelMap downsample_labels(const InstanceLabelMap& m, int factor);
SemanticLabelMap downsample_labels(const SemanticLabelMap& m, int factor);
CenterOffsetMap downsample_centers(const CenterOffsetMap& m, int factor);

// Maps sampled full-resolution pixels onto prob-map cells (coordinates
// divided by the scale factor, floor).
std::vector<kernels::PairRef> resolve_pairs(const PairSet& ps, int grid_w, int scale);

// Mean pair_loss over ps.pairs, evaluated on pm at 1/scale resolution.
// Throws DegenerateBatchError when the pair list is empty.
double averaged_pair_loss(const ProbMap& pm, const PairSet& ps, const LossConfig& cfg,
                          int scale = 4);

// Same value, but the starred (constant) argument of every KL term is read
// from pm_star. With pm_star == pm this is averaged_pair_loss; letting them
// differ is what a finite-difference probe of the stop-gradient rule needs.
double averaged_pair_loss_frozen(const ProbMap& pm, const ProbMap& pm_star, const PairSet& ps,
                                 const LossConfig& cfg, int scale = 4);

// Unary background objective over all cells of the map:
//   -(1/N) sum_i [ I_bg ln(t_i0 + d) + (1 - I_bg) ln(sum_{k>=1} t_ik + d) ].
double background_loss(const ProbMap& pm, const InstanceLabelMap& instances_at_pm_res,
                       double clamp = 1e-12);

// Mean over all cells of -ln(p[gt_class] + clamp).
double semantic_ce_loss(const ProbMap& sem_pm, const SemanticLabelMap& sem_at_pm_res,
                        double clamp = 1e-12);

// Mean smooth-L1 (knee 1) over foreground cells and both offset components.
double center_smooth_l1_loss(const CenterOffsetMap& pred, const CenterOffsetMap& gt,
                             const InstanceLabelMap& instances_at_pm_res);

struct NetworkOutputs;  // defined in network.hpp

// Full objective on plain (non-tape) outputs; the training path computes the
// same quantities through the tape.
LossBreakdown total_loss(const NetworkOutputs& outputs, const Scene& scene, const PairSet& ps,
                         const LossConfig& cfg);

}  // namespace pxc
