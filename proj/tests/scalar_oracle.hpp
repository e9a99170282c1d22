#pragma once

// Independent high-precision evaluator of every scalar loss formula, written
// against the definitions alone (long double, no code shared with src/). The
// test suites compare the production implementation to these routines.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using ld = long double;
inline constexpr ld kClamp = 1e-12L;

inline ld kl(const std::vector<ld>& p, const std::vector<ld>& q, ld clamp = kClamp) {
  ld acc = 0.0L;
  for (size_t k = 0; k < p.size(); ++k) acc += p[k] * std::log((p[k] + clamp) / (q[k] + clamp));
  return acc;
}

inline ld same(const std::vector<ld>& a, const std::vector<ld>& b, ld clamp = kClamp) {
  return kl(a, b, clamp) + kl(b, a, clamp);
}

inline ld diff(const std::vector<ld>& a, const std::vector<ld>& b, ld sigma, ld clamp = kClamp) {
  return std::max(0.0L, sigma - kl(a, b, clamp)) + std::max(0.0L, sigma - kl(b, a, clamp));
}

inline ld pair(const std::vector<ld>& a, const std::vector<ld>& b, int relation, ld sigma,
               ld clamp = kClamp) {
  return relation == 1 ? same(a, b, clamp) : diff(a, b, sigma, clamp);
}

inline ld bg_term_background(ld t0, ld clamp = kClamp) { return -std::log(t0 + clamp); }
inline ld bg_term_foreground(ld fg_sum, ld clamp = kClamp) { return -std::log(fg_sum + clamp); }
inline ld ce_term(ld p_gt, ld clamp = kClamp) { return -std::log(p_gt + clamp); }

inline ld smooth_l1(ld e) {
  const ld a = std::fabs(e);
  return a < 1.0L ? 0.5L * e * e : a - 0.5L;
}

inline ld total(ld l_pair, ld l_bg, ld l_sem, ld l_ctr, ld w_ins, ld w_sem, ld w_ctr) {
  return w_ins * (l_pair + l_bg) + w_sem * l_sem + w_ctr * l_ctr;
}

}  // namespace oracle
