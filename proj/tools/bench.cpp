// Times the serial reference kernels against the OpenMP variants and checks
// that both produce bit-identical results on the same inputs.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "pxc/kernels.hpp"
#include "pxc/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;
namespace k = pxc::kernels;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count() / reps;
}

std::vector<double> random_vec(size_t n, pxc::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   bit-identical %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms, identical ? "yes" : "NO");
}

}  // namespace

int main() {
  pxc::Rng rng(42);

  {  // conv2d forward + backward, 128x128x16 -> 16 channels
    const int h = 128, w = 128, ci = 16, co = 16, kk = 3;
    const auto x = random_vec(static_cast<size_t>(h) * w * ci, rng);
    const auto wgt = random_vec(static_cast<size_t>(kk) * kk * ci * co, rng);
    const auto bias = random_vec(co, rng);
    std::vector<double> ys(static_cast<size_t>(h) * w * co), yp(ys.size());

    const double ts = time_ms([&] { k::conv2d_forward_serial(x.data(), h, w, ci, wgt.data(), kk, bias.data(), co, ys.data()); }, 3);
    const double tp = time_ms([&] { k::conv2d_forward_parallel(x.data(), h, w, ci, wgt.data(), kk, bias.data(), co, yp.data()); }, 3);
    report("conv2d forward 128x128x16", ts, tp, ys == yp);

    std::vector<double> dxs(x.size(), 0.0), dxp(x.size(), 0.0);
    const double bs = time_ms([&] { std::fill(dxs.begin(), dxs.end(), 0.0);
                                    k::conv2d_backward_input_serial(ys.data(), h, w, co, wgt.data(), kk, ci, dxs.data()); }, 3);
    const double bp = time_ms([&] { std::fill(dxp.begin(), dxp.end(), 0.0);
                                    k::conv2d_backward_input_parallel(ys.data(), h, w, co, wgt.data(), kk, ci, dxp.data()); }, 3);
    report("conv2d backward-input", bs, bp, dxs == dxp);

    std::vector<double> dws(wgt.size(), 0.0), dwp(wgt.size(), 0.0), dbs(co, 0.0), dbp(co, 0.0);
    const double ws = time_ms([&] { std::fill(dws.begin(), dws.end(), 0.0); std::fill(dbs.begin(), dbs.end(), 0.0);
                                    k::conv2d_backward_params_serial(x.data(), h, w, ci, ys.data(), co, kk, dws.data(), dbs.data()); }, 3);
    const double wp = time_ms([&] { std::fill(dwp.begin(), dwp.end(), 0.0); std::fill(dbp.begin(), dbp.end(), 0.0);
                                    k::conv2d_backward_params_parallel(x.data(), h, w, ci, ys.data(), co, kk, dwp.data(), dbp.data()); }, 3);
    report("conv2d backward-params", ws, wp, dws == dwp && dbs == dbp);
  }

  {  // pair loss forward over one million pairs on a 32x32x9 grid
    const int cells = 32 * 32, c = 9;
    auto logits = random_vec(static_cast<size_t>(cells) * c, rng);
    std::vector<double> probs(logits.size());
    k::softmax_forward_serial(logits.data(), cells, c, probs.data());
    std::vector<k::PairRef> pairs(1000000);
    for (auto& p : pairs)
      p = {static_cast<int>(rng.below(cells)), static_cast<int>(rng.below(cells)),
           static_cast<int>(rng.below(2))};

    double vs = 0.0, vp = 0.0;
    const double ts = time_ms([&] { vs = k::pair_loss_forward_serial(probs.data(), probs.data(), cells, c, pairs.data(), pairs.size(), 2.0, 1e-12); }, 5);
    const double tp = time_ms([&] { vp = k::pair_loss_forward_parallel(probs.data(), probs.data(), cells, c, pairs.data(), pairs.size(), 2.0, 1e-12); }, 5);
    report("pair loss forward 1M pairs", ts, tp, vs == vp);
  }

  {  // softmax, 256x256x9
    const int cells = 256 * 256, c = 9;
    const auto x = random_vec(static_cast<size_t>(cells) * c, rng);
    std::vector<double> ys(x.size()), yp(x.size());
    const double ts = time_ms([&] { k::softmax_forward_serial(x.data(), cells, c, ys.data()); }, 5);
    const double tp = time_ms([&] { k::softmax_forward_parallel(x.data(), cells, c, yp.data()); }, 5);
    report("softmax 256x256x9", ts, tp, ys == yp);
  }

  return 0;
}
