#include "pxc/tape.hpp"

#include <cmath>

#include "pxc/error.hpp"

namespace pxc {

int Tape::leaf(Tensor t, bool requires_grad) {
  Node n;
  n.shape = std::move(t.shape);
  n.value = std::move(t.v);
  n.grad.assign(n.value.size(), 0.0);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::node(std::vector<int> shape, bool requires_grad) {
  Node n;
  n.shape = std::move(shape);
  int64_t sz = 1;
  for (int d : n.shape) sz *= d;
  n.value.assign(static_cast<size_t>(sz), 0.0);
  n.grad.assign(static_cast<size_t>(sz), 0.0);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(int from) {
  if (from < 0 || from >= static_cast<int>(nodes_.size()) || nodes_[from].value.size() != 1)
    throw DomainError("backward must start from a scalar node on this tape");
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  nodes_[from].grad[0] = 1.0;
  for (int i = from; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

namespace ops {

namespace {
struct Hwc {
  int h, w, c;
};
Hwc hwc(const Tape& t, int id) {
  const auto& s = t.shape(id);
  if (s.size() != 3) throw ShapeError("expected a {h,w,c} node");
  return {s[0], s[1], s[2]};
}
}  // namespace

int conv2d(Tape& t, int x, int w, int b, int k) {
  const Hwc in = hwc(t, x);
  const auto& ws = t.shape(w);
  if (ws.size() != 4 || ws[0] != k || ws[1] != k || ws[2] != in.c)
    throw ShapeError("conv2d weight shape mismatch");
  const int co = ws[3];
  const bool rg = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(b);
  const int out = t.node({in.h, in.w, co}, rg);
  kernels::conv2d_forward(t.val(x).data(), in.h, in.w, in.c, t.val(w).data(), k,
                          t.val(b).data(), co, t.val(out).data());
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      const double* dy = tp.grad(out).data();
      if (tp.requires_grad(x))
        kernels::conv2d_backward_input(dy, in.h, in.w, co, tp.val(w).data(), k, in.c,
                                       tp.grad(x).data());
      if (tp.requires_grad(w) || tp.requires_grad(b))
        kernels::conv2d_backward_params(tp.val(x).data(), in.h, in.w, in.c, dy, co, k,
                                        tp.grad(w).data(), tp.grad(b).data());
    });
  return out;
}

int relu(Tape& t, int x) {
  const bool rg = t.requires_grad(x);
  const int out = t.node(t.shape(x), rg);
  const int64_t n = static_cast<int64_t>(t.val(x).size());
  kernels::relu_forward(t.val(x).data(), n, t.val(out).data());
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      kernels::relu_backward(tp.val(x).data(), tp.grad(out).data(), n, tp.grad(x).data());
    });
  return out;
}

int maxpool2(Tape& t, int x) {
  const Hwc in = hwc(t, x);
  if (in.h % 2 != 0 || in.w % 2 != 0) throw ShapeError("maxpool2 needs even spatial dims");
  const bool rg = t.requires_grad(x);
  const int out = t.node({in.h / 2, in.w / 2, in.c}, rg);
  auto argmax = std::make_shared<std::vector<int>>(t.val(out).size());
  kernels::maxpool2_forward(t.val(x).data(), in.h, in.w, in.c, t.val(out).data(), argmax->data());
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      kernels::maxpool2_backward(tp.grad(out).data(), static_cast<int64_t>(argmax->size()),
                                 argmax->data(), tp.grad(x).data());
    });
  return out;
}

int upsample2(Tape& t, int x) {
  const Hwc in = hwc(t, x);
  const bool rg = t.requires_grad(x);
  const int out = t.node({in.h * 2, in.w * 2, in.c}, rg);
  kernels::upsample2_forward(t.val(x).data(), in.h, in.w, in.c, t.val(out).data());
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      kernels::upsample2_backward(tp.grad(out).data(), in.h, in.w, in.c, tp.grad(x).data());
    });
  return out;
}

int add(Tape& t, int a, int b) {
  if (t.shape(a) != t.shape(b)) throw ShapeError("add: shapes differ");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int out = t.node(t.shape(a), rg);
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  auto& vo = t.val(out);
  for (size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] + vb[i];
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      const auto& g = tp.grad(out);
      if (tp.requires_grad(a)) {
        auto& ga = tp.grad(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (tp.requires_grad(b)) {
        auto& gb = tp.grad(b);
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  return out;
}

int softmax_channels(Tape& t, int x) {
  const Hwc in = hwc(t, x);
  const bool rg = t.requires_grad(x);
  const int out = t.node(t.shape(x), rg);
  const int64_t pixels = static_cast<int64_t>(in.h) * in.w;
  kernels::softmax_forward(t.val(x).data(), pixels, in.c, t.val(out).data());
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      kernels::softmax_backward(tp.val(out).data(), tp.grad(out).data(), pixels, in.c,
                                tp.grad(x).data());
    });
  return out;
}

int averaged_pair_loss(Tape& t, int probs,
                       std::shared_ptr<const std::vector<kernels::PairRef>> refs, double sigma,
                       double clamp) {
  if (refs->empty()) throw DegenerateBatchError("averaged pair loss over an empty pair set");
  const Hwc in = hwc(t, probs);
  const int cells = in.h * in.w;
  const bool rg = t.requires_grad(probs);
  const int out = t.node({1}, rg);
  const double* p = t.val(probs).data();
  const int64_t count = static_cast<int64_t>(refs->size());
  t.val(out)[0] =
      kernels::pair_loss_forward(p, p, cells, in.c, refs->data(), count, sigma, clamp) /
      static_cast<double>(count);
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      const double scale = tp.grad(out)[0] / static_cast<double>(count);
      kernels::pair_loss_backward(tp.val(probs).data(), cells, in.c, refs->data(), count, sigma,
                                  clamp, scale, tp.grad(probs).data());
    });
  return out;
}

int background_loss(Tape& t, int probs, std::shared_ptr<const InstanceLabelMap> inst,
                    double clamp) {
  const Hwc in = hwc(t, probs);
  if (inst->h != in.h || inst->w != in.w) throw ShapeError("background loss shape mismatch");
  const bool rg = t.requires_grad(probs);
  const int out = t.node({1}, rg);
  const int64_t n_px = static_cast<int64_t>(in.h) * in.w;
  const double* p = t.val(probs).data();
  double acc = 0.0;
  for (int64_t i = 0; i < n_px; ++i) {
    const double* row = p + i * in.c;
    if (inst->id[i] == 0) {
      acc += std::log(row[0] + clamp);
    } else {
      double fg = 0.0;
      for (int k = 1; k < in.c; ++k) fg += row[k];
      acc += std::log(fg + clamp);
    }
  }
  t.val(out)[0] = -acc / static_cast<double>(n_px);
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      const double scale = -tp.grad(out)[0] / static_cast<double>(n_px);
      const double* pv = tp.val(probs).data();
      double* g = tp.grad(probs).data();
      for (int64_t i = 0; i < n_px; ++i) {
        const double* row = pv + i * in.c;
        double* grow = g + i * in.c;
        if (inst->id[i] == 0) {
          grow[0] += scale / (row[0] + clamp);
        } else {
          double fg = 0.0;
          for (int k = 1; k < in.c; ++k) fg += row[k];
          const double d = scale / (fg + clamp);
          for (int k = 1; k < in.c; ++k) grow[k] += d;
        }
      }
    });
  return out;
}

int semantic_ce_loss(Tape& t, int probs, std::shared_ptr<const SemanticLabelMap> sem,
                     double clamp) {
  const Hwc in = hwc(t, probs);
  if (sem->h != in.h || sem->w != in.w) throw ShapeError("semantic loss shape mismatch");
  const bool rg = t.requires_grad(probs);
  const int out = t.node({1}, rg);
  const int64_t n_px = static_cast<int64_t>(in.h) * in.w;
  const double* p = t.val(probs).data();
  double acc = 0.0;
  for (int64_t i = 0; i < n_px; ++i) {
    const int cls = sem->label[i];
    if (cls < 0 || cls >= in.c) throw DomainError("semantic class out of range");
    acc += std::log(p[i * in.c + cls] + clamp);
  }
  t.val(out)[0] = -acc / static_cast<double>(n_px);
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      const double scale = -tp.grad(out)[0] / static_cast<double>(n_px);
      const double* pv = tp.val(probs).data();
      double* g = tp.grad(probs).data();
      for (int64_t i = 0; i < n_px; ++i) {
        const int cls = sem->label[i];
        g[i * in.c + cls] += scale / (pv[i * in.c + cls] + clamp);
      }
    });
  return out;
}

int center_smooth_l1_loss(Tape& t, int pred, std::shared_ptr<const CenterOffsetMap> gt,
                          std::shared_ptr<const InstanceLabelMap> inst) {
  const Hwc in = hwc(t, pred);
  if (in.c != 2 || gt->h != in.h || gt->w != in.w || inst->h != in.h || inst->w != in.w)
    throw ShapeError("center loss shape mismatch");
  const bool rg = t.requires_grad(pred);
  const int out = t.node({1}, rg);
  const int64_t n_px = static_cast<int64_t>(in.h) * in.w;
  const double* p = t.val(pred).data();
  double acc = 0.0;
  int64_t fg = 0;
  for (int64_t i = 0; i < n_px; ++i) {
    if (inst->id[i] == 0) continue;
    ++fg;
    for (int k = 0; k < 2; ++k) {
      const double e = p[i * 2 + k] - gt->v[i * 2 + k];
      const double a = std::abs(e);
      acc += a < 1.0 ? 0.5 * e * e : a - 0.5;
    }
  }
  if (fg == 0) throw DegenerateBatchError("center loss: no foreground cells");
  t.val(out)[0] = acc / static_cast<double>(2 * fg);
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      const double scale = tp.grad(out)[0] / static_cast<double>(2 * fg);
      const double* pv = tp.val(pred).data();
      double* g = tp.grad(pred).data();
      for (int64_t i = 0; i < n_px; ++i) {
        if (inst->id[i] == 0) continue;
        for (int k = 0; k < 2; ++k) {
          const double e = pv[i * 2 + k] - gt->v[i * 2 + k];
          g[i * 2 + k] += scale * (std::abs(e) < 1.0 ? e : (e > 0 ? 1.0 : -1.0));
        }
      }
    });
  return out;
}

int weighted_sum(Tape& t, const std::vector<int>& xs, const std::vector<double>& weights) {
  if (xs.size() != weights.size()) throw ShapeError("weighted_sum: arity mismatch");
  bool rg = false;
  for (int x : xs) {
    if (t.val(x).size() != 1) throw ShapeError("weighted_sum expects scalar nodes");
    rg = rg || t.requires_grad(x);
  }
  const int out = t.node({1}, rg);
  double acc = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) acc += weights[i] * t.val(xs[i])[0];
  t.val(out)[0] = acc;
  if (rg)
    t.set_backward(out, [=](Tape& tp) {
      for (size_t i = 0; i < xs.size(); ++i)
        if (tp.requires_grad(xs[i])) tp.grad(xs[i])[0] += weights[i] * tp.grad(out)[0];
    });
  return out;
}

}  // namespace ops
}  // namespace pxc
