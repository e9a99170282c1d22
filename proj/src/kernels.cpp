#include "pxc/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

namespace pxc::kernels {

namespace {
std::atomic<Mode> g_mode{Mode::parallel};
}

void set_mode(Mode m) { g_mode.store(m); }
Mode mode() { return g_mode.load(); }

namespace testing {
bool corrupt_relu_backward = false;
}

// ---------------------------------------------------------------- conv2d ---

void conv2d_forward_serial(const double* x, int h, int w, int ci, const double* wgt, int k,
                           const double* bias, int co, double* y) {
  const int pad = k / 2;
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      double* out = y + (static_cast<int64_t>(yy) * w + xx) * co;
      for (int o = 0; o < co; ++o) out[o] = bias[o];
      for (int ky = 0; ky < k; ++ky) {
        const int sy = yy + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = xx + kx - pad;
          if (sx < 0 || sx >= w) continue;
          const double* in = x + (static_cast<int64_t>(sy) * w + sx) * ci;
          const double* wk = wgt + (static_cast<int64_t>(ky) * k + kx) * ci * co;
          for (int i = 0; i < ci; ++i) {
            const double xv = in[i];
            const double* wrow = wk + static_cast<int64_t>(i) * co;
            for (int o = 0; o < co; ++o) out[o] += xv * wrow[o];
          }
        }
      }
    }
  }
}

void conv2d_forward_parallel(const double* x, int h, int w, int ci, const double* wgt, int k,
                             const double* bias, int co, double* y) {
  const int pad = k / 2;
#pragma omp parallel for schedule(static)
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      double* out = y + (static_cast<int64_t>(yy) * w + xx) * co;
      for (int o = 0; o < co; ++o) out[o] = bias[o];
      for (int ky = 0; ky < k; ++ky) {
        const int sy = yy + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = xx + kx - pad;
          if (sx < 0 || sx >= w) continue;
          const double* in = x + (static_cast<int64_t>(sy) * w + sx) * ci;
          const double* wk = wgt + (static_cast<int64_t>(ky) * k + kx) * ci * co;
          for (int i = 0; i < ci; ++i) {
            const double xv = in[i];
            const double* wrow = wk + static_cast<int64_t>(i) * co;
            for (int o = 0; o < co; ++o) out[o] += xv * wrow[o];
          }
        }
      }
    }
  }
}

void conv2d_forward(const double* x, int h, int w, int ci, const double* wgt, int k,
                    const double* bias, int co, double* y) {
  if (mode() == Mode::parallel)
    conv2d_forward_parallel(x, h, w, ci, wgt, k, bias, co, y);
  else
    conv2d_forward_serial(x, h, w, ci, wgt, k, bias, co, y);
}

void conv2d_backward_input_serial(const double* dy, int h, int w, int co, const double* wgt,
                                  int k, int ci, double* dx) {
  const int pad = k / 2;
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      double* out = dx + (static_cast<int64_t>(yy) * w + xx) * ci;
      // Gather formulation: dx(yy,xx) sums over the outputs whose window
      // covered it, so writes never race.
      for (int ky = 0; ky < k; ++ky) {
        const int oy = yy - ky + pad;
        if (oy < 0 || oy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ox = xx - kx + pad;
          if (ox < 0 || ox >= w) continue;
          const double* g = dy + (static_cast<int64_t>(oy) * w + ox) * co;
          const double* wk = wgt + (static_cast<int64_t>(ky) * k + kx) * ci * co;
          for (int i = 0; i < ci; ++i) {
            double acc = 0.0;
            const double* wrow = wk + static_cast<int64_t>(i) * co;
            for (int o = 0; o < co; ++o) acc += g[o] * wrow[o];
            out[i] += acc;
          }
        }
      }
    }
  }
}

void conv2d_backward_input_parallel(const double* dy, int h, int w, int co, const double* wgt,
                                    int k, int ci, double* dx) {
  const int pad = k / 2;
#pragma omp parallel for schedule(static)
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      double* out = dx + (static_cast<int64_t>(yy) * w + xx) * ci;
      for (int ky = 0; ky < k; ++ky) {
        const int oy = yy - ky + pad;
        if (oy < 0 || oy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ox = xx - kx + pad;
          if (ox < 0 || ox >= w) continue;
          const double* g = dy + (static_cast<int64_t>(oy) * w + ox) * co;
          const double* wk = wgt + (static_cast<int64_t>(ky) * k + kx) * ci * co;
          for (int i = 0; i < ci; ++i) {
            double acc = 0.0;
            const double* wrow = wk + static_cast<int64_t>(i) * co;
            for (int o = 0; o < co; ++o) acc += g[o] * wrow[o];
            out[i] += acc;
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const double* dy, int h, int w, int co, const double* wgt, int k,
                           int ci, double* dx) {
  if (mode() == Mode::parallel)
    conv2d_backward_input_parallel(dy, h, w, co, wgt, k, ci, dx);
  else
    conv2d_backward_input_serial(dy, h, w, co, wgt, k, ci, dx);
}

void conv2d_backward_params_serial(const double* x, int h, int w, int ci, const double* dy,
                                   int co, int k, double* dw, double* db) {
  const int pad = k / 2;
  for (int slot = 0; slot < k * k * ci; ++slot) {
    const int ky = slot / (k * ci);
    const int kx = (slot / ci) % k;
    const int i = slot % ci;
    double* wrow = dw + static_cast<int64_t>(slot) * co;
    for (int yy = 0; yy < h; ++yy) {
      const int sy = yy + ky - pad;
      if (sy < 0 || sy >= h) continue;
      for (int xx = 0; xx < w; ++xx) {
        const int sx = xx + kx - pad;
        if (sx < 0 || sx >= w) continue;
        const double xv = x[(static_cast<int64_t>(sy) * w + sx) * ci + i];
        const double* g = dy + (static_cast<int64_t>(yy) * w + xx) * co;
        for (int o = 0; o < co; ++o) wrow[o] += xv * g[o];
      }
    }
  }
  for (int o = 0; o < co; ++o) {
    double acc = 0.0;
    for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p) acc += dy[p * co + o];
    db[o] += acc;
  }
}

void conv2d_backward_params_parallel(const double* x, int h, int w, int ci, const double* dy,
                                     int co, int k, double* dw, double* db) {
  const int pad = k / 2;
#pragma omp parallel for schedule(static)
  for (int slot = 0; slot < k * k * ci; ++slot) {
    const int ky = slot / (k * ci);
    const int kx = (slot / ci) % k;
    const int i = slot % ci;
    double* wrow = dw + static_cast<int64_t>(slot) * co;
    for (int yy = 0; yy < h; ++yy) {
      const int sy = yy + ky - pad;
      if (sy < 0 || sy >= h) continue;
      for (int xx = 0; xx < w; ++xx) {
        const int sx = xx + kx - pad;
        if (sx < 0 || sx >= w) continue;
        const double xv = x[(static_cast<int64_t>(sy) * w + sx) * ci + i];
        const double* g = dy + (static_cast<int64_t>(yy) * w + xx) * co;
        for (int o = 0; o < co; ++o) wrow[o] += xv * g[o];
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int o = 0; o < co; ++o) {
    double acc = 0.0;
    for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p) acc += dy[p * co + o];
    db[o] += acc;
  }
}

void conv2d_backward_params(const double* x, int h, int w, int ci, const double* dy, int co,
                            int k, double* dw, double* db) {
  if (mode() == Mode::parallel)
    conv2d_backward_params_parallel(x, h, w, ci, dy, co, k, dw, db);
  else
    conv2d_backward_params_serial(x, h, w, ci, dy, co, k, dw, db);
}

// ------------------------------------------------------------------ relu ---

void relu_forward(const double* x, int64_t n, double* y) {
  if (mode() == Mode::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
}

void relu_backward(const double* x, const double* dy, int64_t n, double* dx) {
  if (testing::corrupt_relu_backward) {
    for (int64_t i = 0; i < n; ++i) dx[i] += dy[i];
    return;
  }
  if (mode() == Mode::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
      if (x[i] > 0.0) dx[i] += dy[i];
  } else {
    for (int64_t i = 0; i < n; ++i)
      if (x[i] > 0.0) dx[i] += dy[i];
  }
}

// --------------------------------------------------------------- maxpool ---

namespace {
inline void maxpool2_cell(const double* x, int w, int c, int r, int col, int w2, double* y,
                          int* argmax) {
  for (int ch = 0; ch < c; ++ch) {
    double best = -1e300;
    int best_idx = -1;
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int64_t idx = (static_cast<int64_t>(2 * r + dy) * w + 2 * col + dx) * c + ch;
        if (x[idx] > best) {
          best = x[idx];
          best_idx = static_cast<int>(idx);
        }
      }
    const int64_t out = (static_cast<int64_t>(r) * w2 + col) * c + ch;
    y[out] = best;
    argmax[out] = best_idx;
  }
}
}  // namespace

void maxpool2_forward_serial(const double* x, int h, int w, int c, double* y, int* argmax) {
  const int h2 = h / 2, w2 = w / 2;
  for (int r = 0; r < h2; ++r)
    for (int col = 0; col < w2; ++col) maxpool2_cell(x, w, c, r, col, w2, y, argmax);
}

void maxpool2_forward_parallel(const double* x, int h, int w, int c, double* y, int* argmax) {
  const int h2 = h / 2, w2 = w / 2;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h2; ++r)
    for (int col = 0; col < w2; ++col) maxpool2_cell(x, w, c, r, col, w2, y, argmax);
}

void maxpool2_forward(const double* x, int h, int w, int c, double* y, int* argmax) {
  if (mode() == Mode::parallel)
    maxpool2_forward_parallel(x, h, w, c, y, argmax);
  else
    maxpool2_forward_serial(x, h, w, c, y, argmax);
}

void maxpool2_backward(const double* dy, int64_t out_n, const int* argmax, double* dx) {
  // Disjoint windows: scatter is race-free, order immaterial.
  for (int64_t i = 0; i < out_n; ++i) dx[argmax[i]] += dy[i];
}

// -------------------------------------------------------------- upsample ---

void upsample2_forward_serial(const double* x, int h, int w, int c, double* y) {
  const int h2 = h * 2, w2 = w * 2;
  for (int r = 0; r < h2; ++r)
    for (int col = 0; col < w2; ++col) {
      const double* in = x + (static_cast<int64_t>(r / 2) * w + col / 2) * c;
      double* out = y + (static_cast<int64_t>(r) * w2 + col) * c;
      for (int ch = 0; ch < c; ++ch) out[ch] = in[ch];
    }
}

void upsample2_forward_parallel(const double* x, int h, int w, int c, double* y) {
  const int h2 = h * 2, w2 = w * 2;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h2; ++r)
    for (int col = 0; col < w2; ++col) {
      const double* in = x + (static_cast<int64_t>(r / 2) * w + col / 2) * c;
      double* out = y + (static_cast<int64_t>(r) * w2 + col) * c;
      for (int ch = 0; ch < c; ++ch) out[ch] = in[ch];
    }
}

void upsample2_forward(const double* x, int h, int w, int c, double* y) {
  if (mode() == Mode::parallel)
    upsample2_forward_parallel(x, h, w, c, y);
  else
    upsample2_forward_serial(x, h, w, c, y);
}

void upsample2_backward(const double* dy, int h, int w, int c, double* dx) {
  const int w2 = w * 2;
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) {
      double* out = dx + (static_cast<int64_t>(r) * w + col) * c;
      for (int dyy = 0; dyy < 2; ++dyy)
        for (int dxx = 0; dxx < 2; ++dxx) {
          const double* g = dy + (static_cast<int64_t>(2 * r + dyy) * w2 + 2 * col + dxx) * c;
          for (int ch = 0; ch < c; ++ch) out[ch] += g[ch];
        }
    }
}

// --------------------------------------------------------------- softmax ---

namespace {
inline void softmax_pixel(const double* in, int c, double* out) {
  double mx = in[0];
  for (int k = 1; k < c; ++k) mx = std::max(mx, in[k]);
  double sum = 0.0;
  for (int k = 0; k < c; ++k) {
    out[k] = std::exp(in[k] - mx);
    sum += out[k];
  }
  const double inv = 1.0 / sum;
  for (int k = 0; k < c; ++k) out[k] *= inv;
}
}  // namespace

void softmax_forward_serial(const double* x, int64_t pixels, int c, double* y) {
  for (int64_t p = 0; p < pixels; ++p) softmax_pixel(x + p * c, c, y + p * c);
}

void softmax_forward_parallel(const double* x, int64_t pixels, int c, double* y) {
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < pixels; ++p) softmax_pixel(x + p * c, c, y + p * c);
}

void softmax_forward(const double* x, int64_t pixels, int c, double* y) {
  if (mode() == Mode::parallel)
    softmax_forward_parallel(x, pixels, c, y);
  else
    softmax_forward_serial(x, pixels, c, y);
}

void softmax_backward(const double* y, const double* dy, int64_t pixels, int c, double* dx) {
  for (int64_t p = 0; p < pixels; ++p) {
    const double* yp = y + p * c;
    const double* gp = dy + p * c;
    double dot = 0.0;
    for (int k = 0; k < c; ++k) dot += gp[k] * yp[k];
    double* out = dx + p * c;
    for (int k = 0; k < c; ++k) out[k] += yp[k] * (gp[k] - dot);
  }
}

// ------------------------------------------------------------- pair loss ---

namespace {

// Per-cell ln(p + delta) tables turn each KL evaluation into multiply-adds.
std::vector<double> log_table(const double* probs, int64_t n, double delta) {
  std::vector<double> t(n);
  for (int64_t i = 0; i < n; ++i) t[i] = std::log(probs[i] + delta);
  return t;
}

inline double pair_cost(const double* lv, const double* ps, const double* ls, int c,
                        const PairRef& pr, double sigma) {
  const double* star_a = ps + static_cast<int64_t>(pr.cell_a) * c;
  const double* lstar_a = ls + static_cast<int64_t>(pr.cell_a) * c;
  const double* star_b = ps + static_cast<int64_t>(pr.cell_b) * c;
  const double* lstar_b = ls + static_cast<int64_t>(pr.cell_b) * c;
  const double* lvar_a = lv + static_cast<int64_t>(pr.cell_a) * c;
  const double* lvar_b = lv + static_cast<int64_t>(pr.cell_b) * c;
  double kl_ab = 0.0, kl_ba = 0.0;  // KL(a*||b), KL(b*||a)
  for (int k = 0; k < c; ++k) kl_ab += star_a[k] * (lstar_a[k] - lvar_b[k]);
  for (int k = 0; k < c; ++k) kl_ba += star_b[k] * (lstar_b[k] - lvar_a[k]);
  if (pr.relation == 1) return kl_ab + kl_ba;
  return std::max(0.0, sigma - kl_ab) + std::max(0.0, sigma - kl_ba);
}

}  // namespace

double pair_loss_forward_serial(const double* probs_var, const double* probs_star, int cells,
                                int c, const PairRef* pairs, int64_t count, double sigma,
                                double delta) {
  if (count == 0) return 0.0;
  const int64_t n = static_cast<int64_t>(cells) * c;
  const std::vector<double> lv = log_table(probs_var, n, delta);
  const std::vector<double> ls =
      probs_var == probs_star ? lv : log_table(probs_star, n, delta);
  const int64_t blocks = (count + kPairBlock - 1) / kPairBlock;
  std::vector<double> partial(blocks, 0.0);
  for (int64_t b = 0; b < blocks; ++b) {
    const int64_t end = std::min(count, (b + 1) * static_cast<int64_t>(kPairBlock));
    double acc = 0.0;
    for (int64_t i = b * kPairBlock; i < end; ++i)
      acc += pair_cost(lv.data(), probs_star, ls.data(), c, pairs[i], sigma);
    partial[b] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

double pair_loss_forward_parallel(const double* probs_var, const double* probs_star, int cells,
                                  int c, const PairRef* pairs, int64_t count, double sigma,
                                  double delta) {
  if (count == 0) return 0.0;
  const int64_t n = static_cast<int64_t>(cells) * c;
  const std::vector<double> lv = log_table(probs_var, n, delta);
  const std::vector<double> ls =
      probs_var == probs_star ? lv : log_table(probs_star, n, delta);
  const int64_t blocks = (count + kPairBlock - 1) / kPairBlock;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < blocks; ++b) {
    const int64_t end = std::min(count, (b + 1) * static_cast<int64_t>(kPairBlock));
    double acc = 0.0;
    for (int64_t i = b * kPairBlock; i < end; ++i)
      acc += pair_cost(lv.data(), probs_star, ls.data(), c, pairs[i], sigma);
    partial[b] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

double pair_loss_forward(const double* probs_var, const double* probs_star, int cells, int c,
                         const PairRef* pairs, int64_t count, double sigma, double delta) {
  if (mode() == Mode::parallel)
    return pair_loss_forward_parallel(probs_var, probs_star, cells, c, pairs, count, sigma, delta);
  return pair_loss_forward_serial(probs_var, probs_star, cells, c, pairs, count, sigma, delta);
}

void pair_loss_backward(const double* probs, int cells, int c, const PairRef* pairs,
                        int64_t count, double sigma, double delta, double scale,
                        double* dprobs) {
  // Gradients flow only through the non-starred argument of each KL term:
  //   d KL(a*||b) / d b_k = -a_k / (b_k + delta)
  // and the hinge contributes the opposite sign while it is active.
  const int64_t n = static_cast<int64_t>(cells) * c;
  std::vector<double> lp = log_table(probs, n, delta);
  std::vector<double> inv(n);
  for (int64_t i = 0; i < n; ++i) inv[i] = 1.0 / (probs[i] + delta);
  for (int64_t i = 0; i < count; ++i) {
    const PairRef& pr = pairs[i];
    const double* pa = probs + static_cast<int64_t>(pr.cell_a) * c;
    const double* pb = probs + static_cast<int64_t>(pr.cell_b) * c;
    const double* la = lp.data() + static_cast<int64_t>(pr.cell_a) * c;
    const double* lb = lp.data() + static_cast<int64_t>(pr.cell_b) * c;
    double* da = dprobs + static_cast<int64_t>(pr.cell_a) * c;
    double* db = dprobs + static_cast<int64_t>(pr.cell_b) * c;
    const double* ia = inv.data() + static_cast<int64_t>(pr.cell_a) * c;
    const double* ib = inv.data() + static_cast<int64_t>(pr.cell_b) * c;
    if (pr.relation == 1) {
      for (int k = 0; k < c; ++k) {
        db[k] -= scale * pa[k] * ib[k];
        da[k] -= scale * pb[k] * ia[k];
      }
    } else {
      double kl_ab = 0.0, kl_ba = 0.0;
      for (int k = 0; k < c; ++k) kl_ab += pa[k] * (la[k] - lb[k]);
      for (int k = 0; k < c; ++k) kl_ba += pb[k] * (lb[k] - la[k]);
      if (sigma - kl_ab > 0.0)
        for (int k = 0; k < c; ++k) db[k] += scale * pa[k] * ib[k];
      if (sigma - kl_ba > 0.0)
        for (int k = 0; k < c; ++k) da[k] += scale * pb[k] * ia[k];
    }
  }
}

}  // namespace pxc::kernels
