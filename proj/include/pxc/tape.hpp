#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pxc/kernels.hpp"
#include "pxc/scene.hpp"
#include "pxc/tensor.hpp"

namespace pxc {

// Records tensor-granular differentiable operations. Every op appends a node
// holding the forward value; its backward closure reads the output gradient
// and accumulates into the input gradients. Replaying the closures in reverse
// yields gradients for every leaf that participated.
class Tape {
 public:
  int leaf(Tensor t, bool requires_grad);
  int node(std::vector<int> shape, bool requires_grad);

  const std::vector<int>& shape(int id) const { return nodes_[id].shape; }
  std::vector<double>& val(int id) { return nodes_[id].value; }
  const std::vector<double>& val(int id) const { return nodes_[id].value; }
  std::vector<double>& grad(int id) { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void set_backward(int id, std::function<void(Tape&)> fn) { nodes_[id].back = std::move(fn); }

  // Seeds d(loss)/d(loss) = 1 and runs all recorded closures in reverse.
  // `from` must be a scalar node on this tape.
  void backward(int from);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> shape;
    std::vector<double> value, grad;
    std::function<void(Tape&)> back;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

namespace ops {

// x: {h,w,ci}, w: {k,k,ci,co}, b: {co} -> {h,w,co}, same-padding.
int conv2d(Tape& t, int x, int w, int b, int k);
int relu(Tape& t, int x);
int maxpool2(Tape& t, int x);
int upsample2(Tape& t, int x);
int add(Tape& t, int a, int b);
// Softmax over the trailing (channel) dimension of {h,w,c}.
int softmax_channels(Tape& t, int x);

// Mean contrastive pair cost over `refs`, evaluated on the {h,w,c} probability
// node. Starred KL arguments are constants of the recorded expression, so the
// backward pass routes gradients only through the non-starred side.
int averaged_pair_loss(Tape& t, int probs, std::shared_ptr<const std::vector<kernels::PairRef>> refs,
                       double sigma, double clamp);
int background_loss(Tape& t, int probs, std::shared_ptr<const InstanceLabelMap> inst, double clamp);
int semantic_ce_loss(Tape& t, int probs, std::shared_ptr<const SemanticLabelMap> sem, double clamp);
int center_smooth_l1_loss(Tape& t, int pred, std::shared_ptr<const CenterOffsetMap> gt,
                          std::shared_ptr<const InstanceLabelMap> inst);
// Scalar combination sum_i weights[i] * xs[i].
int weighted_sum(Tape& t, const std::vector<int>& xs, const std::vector<double>& weights);

}  // namespace ops

}  // namespace pxc
