#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pxc/losses.hpp"
#include "pxc/outputs.hpp"
#include "pxc/sampling.hpp"
#include "pxc/scene.hpp"
#include "pxc/tape.hpp"
#include "pxc/tensor.hpp"

namespace pxc {

struct MiniFpnConfig {
  int height = 64;
  int width = 64;
  int channels = 16;        // c: feature width of every conv
  int n = 8;                // instance indices; the instance head emits n+1
  int semantic_classes = 2; // C; the semantic head emits C+1
  int depth = 3;            // downsampling blocks; output is at 1/4 resolution
  double lr_init = 0.01;
  double lr_decay_factor = 0.1;
  int lr_decay_period_epochs = 20;
  double momentum = 0.9;
  uint64_t seed = 1;

  void validate() const;
};

// Named tensors, name-ordered; the order is the checkpoint layout.
using ParameterStore = std::map<std::string, Tensor>;

int64_t parameter_count(const MiniFpnConfig& cfg);

// Fan-in-scaled uniform init, zero biases, deterministic per cfg.seed.
ParameterStore init_network(const MiniFpnConfig& cfg);

struct ForwardHandles {
  int instance_probs = -1;
  int semantic_probs = -1;
  int center_pred = -1;
  int out_h = 0, out_w = 0;
  std::map<std::string, int> params;  // leaf node per parameter
};

// Records the whole forward pass on the tape. Encoder blocks (3x3 conv, ReLU,
// 2x2 max-pool), 3x3 laterals on every block at <= 1/4 resolution, top-down
// nearest upsampling with element-wise sums down to the 1/4-resolution
// feature map, then three two-layer heads.
ForwardHandles forward_on_tape(Tape& tape, const ParameterStore& params, const Image& image,
                               const MiniFpnConfig& cfg);

NetworkOutputs outputs_from_tape(const Tape& tape, const ForwardHandles& h);

// Convenience: forward pass without keeping the tape.
NetworkOutputs forward(const ParameterStore& params, const Image& image,
                       const MiniFpnConfig& cfg);

struct LossNodes {
  int pair = -1, bg = -1, sem = -1, ctr = -1, total = -1;
  LossBreakdown breakdown;
};

// Appends the full objective to the tape and reports the component values.
LossNodes loss_on_tape(Tape& tape, const ForwardHandles& h, const Scene& scene,
                       const PairSet& ps, const LossConfig& cfg);

// Runs reverse-mode accumulation from `loss_node` and returns gradients keyed
// like the ParameterStore.
ParameterStore backward(Tape& tape, int loss_node, const ForwardHandles& h);

struct SgdState {
  std::map<std::string, Tensor> velocity;
};

// v <- momentum * v + g;  p <- p - lr * v
void sgd_step(ParameterStore& params, const ParameterStore& grads, double lr, double momentum,
              SgdState& state);

struct GradCheckResult {
  double max_rel_error = 0.0;
  int64_t coords_checked = 0;
};

// Central finite differences (h = 1e-4) of the recorded objective versus the
// analytic gradients, over every parameter coordinate (or an evenly strided
// subsample of >= 500 when the model is larger). The probe perturbs one
// coordinate, reruns the forward pass, and re-evaluates the objective with
// the starred pair-loss arguments frozen at the unperturbed probabilities --
// the same expression the backward pass differentiates.
GradCheckResult grad_check(const MiniFpnConfig& cfg, const LossConfig& loss_cfg,
                           const SamplerConfig& sampler_cfg, uint64_t seed);

struct TrainResult {
  ParameterStore params;
  LossBreakdown last;
  int steps_run = 0;
};

// One scene per step, cycling through the dataset in order. The learning rate
// decays by lr_decay_factor every lr_decay_period_epochs epochs (an epoch is
// one pass over the dataset). Throws DivergenceError on a non-finite loss or
// parameter.
TrainResult train(const MiniFpnConfig& cfg, const SamplerConfig& sampler_cfg,
                  const LossConfig& loss_cfg, const std::vector<Scene>& dataset, int steps,
                  const std::function<void(int step, const LossBreakdown&)>& on_step = {});

}  // namespace pxc
