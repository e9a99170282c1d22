#pragma once

#include <cstdint>

namespace pxc::kernels {

// Every kernel exists twice: a plain serial reference and an OpenMP variant.
// Both implement the same summation contract (a fixed reduction order per
// output element; cross-element sums accumulate per kPairBlock-sized block and
// then across blocks in index order), so their results are bit-identical and
// independent of the thread count. The process-wide mode picks the variant
// used by the dispatching entry points.
enum class Mode { serial, parallel };
void set_mode(Mode m);
Mode mode();

inline constexpr int kPairBlock = 4096;

// Activations are H x W x C interleaved; weights are [k][k][ci][co]; pad = k/2.
void conv2d_forward_serial(const double* x, int h, int w, int ci, const double* wgt, int k,
                           const double* bias, int co, double* y);
void conv2d_forward_parallel(const double* x, int h, int w, int ci, const double* wgt, int k,
                             const double* bias, int co, double* y);
void conv2d_forward(const double* x, int h, int w, int ci, const double* wgt, int k,
                    const double* bias, int co, double* y);

// Gradient w.r.t. the input, accumulated into dx.
void conv2d_backward_input_serial(const double* dy, int h, int w, int co, const double* wgt, int k,
                                  int ci, double* dx);
void conv2d_backward_input_parallel(const double* dy, int h, int w, int co, const double* wgt,
                                    int k, int ci, double* dx);
void conv2d_backward_input(const double* dy, int h, int w, int co, const double* wgt, int k,
                           int ci, double* dx);

// Gradients w.r.t. weights and bias, accumulated into dw / db.
void conv2d_backward_params_serial(const double* x, int h, int w, int ci, const double* dy,
                                   int co, int k, double* dw, double* db);
void conv2d_backward_params_parallel(const double* x, int h, int w, int ci, const double* dy,
                                     int co, int k, double* dw, double* db);
void conv2d_backward_params(const double* x, int h, int w, int ci, const double* dy, int co,
                            int k, double* dw, double* db);

void relu_forward(const double* x, int64_t n, double* y);
void relu_backward(const double* x, const double* dy, int64_t n, double* dx);  // accumulates

// 2x2 max pooling with cached argmax (flat input index, first-wins ties).
void maxpool2_forward_serial(const double* x, int h, int w, int c, double* y, int* argmax);
void maxpool2_forward_parallel(const double* x, int h, int w, int c, double* y, int* argmax);
void maxpool2_forward(const double* x, int h, int w, int c, double* y, int* argmax);
void maxpool2_backward(const double* dy, int64_t out_n, const int* argmax, double* dx);

void upsample2_forward_serial(const double* x, int h, int w, int c, double* y);
void upsample2_forward_parallel(const double* x, int h, int w, int c, double* y);
void upsample2_forward(const double* x, int h, int w, int c, double* y);
void upsample2_backward(const double* dy, int h, int w, int c, double* dx);  // dx is h x w x c

// Per-pixel channel softmax, max-subtraction stabilized.
void softmax_forward_serial(const double* x, int64_t pixels, int c, double* y);
void softmax_forward_parallel(const double* x, int64_t pixels, int c, double* y);
void softmax_forward(const double* x, int64_t pixels, int c, double* y);
void softmax_backward(const double* y, const double* dy, int64_t pixels, int c, double* dx);

// One sampled pair, resolved to flat cell indices of the probability grid.
struct PairRef {
  int cell_a = 0, cell_b = 0;
  int relation = 0;
};

// Sum over pairs of the contrastive cost between the distributions at cell_a
// and cell_b: same-instance pairs pay KL(a*||b) + KL(b*||a), different-
// instance pairs pay max(0, sigma - KL(a*||b)) + max(0, sigma - KL(b*||a)),
// every log clamped additively by delta. Starred arguments are read from
// probs_star and are constants of the differentiable expression; the caller
// normally passes the same pointer for both.
double pair_loss_forward_serial(const double* probs_var, const double* probs_star, int cells,
                                int c, const PairRef* pairs, int64_t count, double sigma,
                                double delta);
double pair_loss_forward_parallel(const double* probs_var, const double* probs_star, int cells,
                                  int c, const PairRef* pairs, int64_t count, double sigma,
                                  double delta);
double pair_loss_forward(const double* probs_var, const double* probs_star, int cells, int c,
                         const PairRef* pairs, int64_t count, double sigma, double delta);

// d(pair_loss_forward)/d(probs_var) at probs_star == probs_var == probs,
// times scale, accumulated into dprobs. Serial by contract: the scatter
// accumulation order over pairs is part of the determinism guarantee.
void pair_loss_backward(const double* probs, int cells, int c, const PairRef* pairs,
                        int64_t count, double sigma, double delta, double scale, double* dprobs);

namespace testing {
// Fault-injection switch for the gradient-checker mutation test: when true,
// relu_backward passes gradients through negative inputs.
extern bool corrupt_relu_backward;
}  // namespace testing

}  // namespace pxc::kernels
