#include <doctest.h>

#include <cmath>
#include <limits>

#include "pxc/error.hpp"
#include "pxc/losses.hpp"
#include "pxc/rng.hpp"
#include "scalar_oracle.hpp"

using namespace pxc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact values, frozen from a 40-digit evaluation of the clamped formulas
// (delta = 1e-12) before the implementation was written.
constexpr double kKlHalfToSkew = 0.51082562376243513;  // KL([.5,.5]* || [.9,.1])
constexpr double kKlSkewToHalf = 0.36806420716849707;  // KL([.9,.1]* || [.5,.5])
constexpr double kSame = 0.87888983093093220;
constexpr double kDiff = 3.12111016906906780;

const std::vector<double> kHalf{0.5, 0.5};
const std::vector<double> kSkew{0.9, 0.1};

ProbMap uniform_map(int h, int w, int channels) {
  return ProbMap{h, w, channels,
                 std::vector<double>(static_cast<size_t>(h) * w * channels, 1.0 / channels)};
}

ProbMap random_softmax_map(int h, int w, int channels, uint64_t seed) {
  Rng rng(seed);
  ProbMap pm{h, w, channels, std::vector<double>(static_cast<size_t>(h) * w * channels)};
  for (int64_t px = 0; px < static_cast<int64_t>(h) * w; ++px) {
    double sum = 0.0;
    for (int k = 0; k < channels; ++k) {
      const double e = std::exp(rng.uniform(-2.0, 2.0));
      pm.p[px * channels + k] = e;
      sum += e;
    }
    for (int k = 0; k < channels; ++k) pm.p[px * channels + k] /= sum;
  }
  return pm;
}

// Two single-pixel instances on a 4x8 grid, quarter cells (0,0) and (0,1).
InstanceLabelMap two_pixel_map() {
  InstanceLabelMap m{4, 8, std::vector<int>(32, 0)};
  m.at(0, 0) = 1;
  m.at(0, 4) = 2;
  return m;
}

void compact_ids(InstanceLabelMap& m) {
  std::vector<int> remap(m.max_id() + 1, 0);
  int next = 0;
  for (int v : m.id)
    if (v && !remap[v]) remap[v] = ++next;
  for (auto& v : m.id) v = remap[v];
}

}  // namespace

TEST_CASE("kl_div matches the independent evaluator and frozen constants") {
  const std::vector<oracle::ld> h{0.5L, 0.5L}, s{0.9L, 0.1L};
  CHECK(kl_div(kHalf, kHalf) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(kl_div(kHalf, kSkew) - static_cast<double>(oracle::kl(h, s))) < 1e-9);
  CHECK(std::abs(kl_div(kSkew, kHalf) - static_cast<double>(oracle::kl(s, h))) < 1e-9);
  CHECK(std::abs(kl_div(kHalf, kSkew) - kKlHalfToSkew) < 1e-9);
  CHECK(std::abs(kl_div(kSkew, kHalf) - kKlSkewToHalf) < 1e-9);
  CHECK_THROWS_AS(kl_div(kHalf, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("loss_same value, symmetry, zero at equality") {
  CHECK(std::abs(loss_same(kHalf, kSkew) - kSame) < 1e-9);
  CHECK(loss_same(kHalf, kSkew) == loss_same(kSkew, kHalf));
  CHECK(std::abs(loss_same(kSkew, kSkew)) < 1e-9);
}

TEST_CASE("loss_diff value and saturation") {
  CHECK(std::abs(loss_diff(kHalf, kHalf, 2.0) - 4.0) < 1e-9);
  CHECK(std::abs(loss_diff(kHalf, kSkew, 2.0) - kDiff) < 1e-9);
  // Clamped KL of opposite one-hots is ~ln(1e12), far beyond the margin.
  CHECK(loss_diff(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}, 2.0) == 0.0);
}

TEST_CASE("pair_loss dispatches on the relation") {
  CHECK(pair_loss(kHalf, kHalf, 1, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(pair_loss(kHalf, kHalf, 0, 2.0) - 4.0) < 1e-9);
  CHECK(std::abs(pair_loss(kHalf, kSkew, 1, 2.0) - kSame) < 1e-9);
  CHECK_THROWS_AS(pair_loss(kHalf, kSkew, 2, 2.0), DomainError);
}

TEST_CASE("six-digit reference values are consistent at 1e-5") {
  CHECK(std::abs(kl_div(kHalf, kSkew) - 0.510826) < 1e-5);
  CHECK(std::abs(kl_div(kSkew, kHalf) - 0.368070) < 1e-5);
  CHECK(std::abs(loss_same(kHalf, kSkew) - 0.878896) < 1e-5);
  CHECK(std::abs(loss_diff(kHalf, kSkew, 2.0) - 3.121104) < 1e-5);
}

TEST_CASE("averaged_pair_loss: two half-half pixels in different instances") {
  const InstanceLabelMap inst = two_pixel_map();
  SamplerConfig scfg;
  scfg.per_instance_count = 1;
  const PairSet ps = build_pair_set(inst, scfg, 7);
  REQUIRE(ps.pairs.size() == 4);  // 2 self + 2 cross

  const ProbMap pm = uniform_map(1, 2, 2);
  LossConfig cfg;
  cfg.sigma = 2.0;
  CHECK(std::abs(averaged_pair_loss(pm, ps, cfg) - 2.0) < 1e-9);  // (0+0+4+4)/4
}

TEST_CASE("averaged_pair_loss: one instance, identical predictions, zero cost") {
  InstanceLabelMap inst{4, 4, std::vector<int>(16, 1)};
  SamplerConfig scfg;
  scfg.per_instance_count = 8;
  const PairSet ps = build_pair_set(inst, scfg, 3);
  const ProbMap pm = uniform_map(1, 1, 3);
  LossConfig cfg;
  CHECK(std::abs(averaged_pair_loss(pm, ps, cfg)) < 1e-9);
}

TEST_CASE("averaged_pair_loss rejects an empty pair set") {
  PairSet ps;
  ps.pixels.push_back({0, 0, 1});
  const ProbMap pm = uniform_map(1, 1, 2);
  LossConfig cfg;
  CHECK_THROWS_AS(averaged_pair_loss(pm, ps, cfg), DegenerateBatchError);
}

TEST_CASE("epsilon = infinity reproduces the unfiltered average bit-exactly") {
  const InstanceLabelMap inst = two_pixel_map();
  SamplerConfig scfg;
  scfg.per_instance_count = 4;
  const PairSet all = build_pair_set(inst, scfg, 99);
  const PairSet filtered = filter_pairs(all, kInf);
  const ProbMap pm = random_softmax_map(1, 2, 5, 11);
  LossConfig cfg;
  CHECK(averaged_pair_loss(pm, all, cfg) == averaged_pair_loss(pm, filtered, cfg));
}

TEST_CASE("background_loss oracle values") {
  SUBCASE("all background, certain") {
    ProbMap pm{1, 4, 3, std::vector<double>(12, 0.0)};
    for (int c = 0; c < 4; ++c) pm.p[c * 3] = 1.0;
    const InstanceLabelMap inst{1, 4, std::vector<int>(4, 0)};
    CHECK(std::abs(background_loss(pm, inst)) < 1e-9);
  }
  SUBCASE("one background pixel with t0 = 0.8") {
    const ProbMap pm{1, 1, 3, {0.8, 0.1, 0.1}};
    const InstanceLabelMap inst{1, 1, {0}};
    CHECK(std::abs(background_loss(pm, inst) -
                   static_cast<double>(oracle::bg_term_background(0.8L))) < 1e-9);
    CHECK(std::abs(background_loss(pm, inst) - 0.22314355131295976) < 1e-9);
  }
  SUBCASE("one foreground pixel with foreground mass 0.8") {
    const ProbMap pm{1, 1, 3, {0.2, 0.5, 0.3}};
    const InstanceLabelMap inst{1, 1, {2}};
    CHECK(std::abs(background_loss(pm, inst) - 0.22314355131295976) < 1e-9);
  }
  SUBCASE("shape mismatch") {
    const ProbMap pm = uniform_map(2, 2, 3);
    const InstanceLabelMap inst{1, 2, {0, 0}};
    CHECK_THROWS_AS(background_loss(pm, inst), ShapeError);
  }
}

TEST_CASE("background_loss equals binary cross-entropy with p = 1 - t0") {
  const ProbMap pm = random_softmax_map(6, 6, 5, 17);
  Rng rng(18);
  InstanceLabelMap inst{6, 6, std::vector<int>(36)};
  for (auto& v : inst.id) v = static_cast<int>(rng.below(3));
  const double ours = background_loss(pm, inst);
  double bce = 0.0;
  for (int i = 0; i < 36; ++i) {
    const double t0 = pm.p[static_cast<size_t>(i) * 5];
    bce += inst.id[i] == 0 ? -std::log(t0 + 1e-12) : -std::log(1.0 - t0 + 1e-12);
  }
  bce /= 36.0;
  CHECK(std::abs(ours - bce) < 1e-9);
}

TEST_CASE("semantic_ce_loss oracle values") {
  SUBCASE("perfect one-hot") {
    const ProbMap pm{1, 2, 3, {1, 0, 0, 0, 0, 1}};
    const SemanticLabelMap sem{1, 2, {0, 2}};
    CHECK(std::abs(semantic_ce_loss(pm, sem)) < 1e-9);
  }
  SUBCASE("uniform over three classes") {
    const ProbMap pm = uniform_map(2, 2, 3);
    const SemanticLabelMap sem{2, 2, {0, 1, 2, 1}};
    CHECK(std::abs(semantic_ce_loss(pm, sem) - std::log(3.0)) < 1e-9);
  }
  SUBCASE("single pixel at p = 0.25") {
    const ProbMap pm{1, 1, 2, {0.75, 0.25}};
    const SemanticLabelMap sem{1, 1, {1}};
    CHECK(std::abs(semantic_ce_loss(pm, sem) - 1.3862943611158906) < 1e-9);
    CHECK(std::abs(semantic_ce_loss(pm, sem) - static_cast<double>(oracle::ce_term(0.25L))) <
          1e-9);
  }
  SUBCASE("class out of range") {
    const ProbMap pm = uniform_map(1, 1, 2);
    const SemanticLabelMap sem{1, 1, {5}};
    CHECK_THROWS_AS(semantic_ce_loss(pm, sem), DomainError);
  }
}

TEST_CASE("center_smooth_l1_loss oracle values") {
  const InstanceLabelMap fg{1, 1, {1}};
  const CenterOffsetMap gt{1, 1, {0.0, 0.0}};
  SUBCASE("exact prediction") {
    const CenterOffsetMap pred{1, 1, {0.0, 0.0}};
    CHECK(center_smooth_l1_loss(pred, gt, fg) == 0.0);
  }
  SUBCASE("error (0.5, 0) inside the quadratic zone") {
    const CenterOffsetMap pred{1, 1, {0.5, 0.0}};
    CHECK(std::abs(center_smooth_l1_loss(pred, gt, fg) - 0.0625) < 1e-12);
  }
  SUBCASE("error (2, 0) in the linear zone") {
    const CenterOffsetMap pred{1, 1, {2.0, 0.0}};
    CHECK(std::abs(center_smooth_l1_loss(pred, gt, fg) - 0.75) < 1e-12);
  }
  SUBCASE("no foreground is degenerate") {
    const InstanceLabelMap bg{1, 1, {0}};
    const CenterOffsetMap pred{1, 1, {0.0, 0.0}};
    CHECK_THROWS_AS(center_smooth_l1_loss(pred, gt, bg), DegenerateBatchError);
  }
}

TEST_CASE("weighted combination arithmetic") {
  CHECK(std::abs(static_cast<double>(oracle::total(2.0L, 0.2L, 1.0L, 0.5L, 1.0L, 0.1L, 0.01L)) -
                 2.305) < 1e-12);
}

TEST_CASE("relabeling ground-truth ids leaves the pair loss unchanged") {
  Rng rng(555);
  for (int trial = 0; trial < 5; ++trial) {
    InstanceLabelMap inst{8, 8, std::vector<int>(64)};
    for (auto& v : inst.id) v = static_cast<int>(rng.below(4));
    if (inst.max_id() == 0) inst.id[0] = 1;
    compact_ids(inst);
    SamplerConfig scfg;
    scfg.per_instance_count = 6;
    const std::vector<Pixel> pixels = sample_pixels(inst, scfg, 1000 + trial);

    const int m = inst.max_id();
    std::vector<int> perm(m + 1);
    for (int i = 0; i <= m; ++i) perm[i] = i;
    for (int i = m; i > 1; --i) std::swap(perm[i], perm[1 + rng.below(i)]);
    InstanceLabelMap permuted = inst;
    for (auto& v : permuted.id) v = perm[v];
    std::vector<Pixel> relabeled = pixels;
    for (auto& px : relabeled) px.instance_id = perm[px.instance_id];

    const PairSet a = enumerate_pairs(pixels, inst);
    const PairSet b = enumerate_pairs(relabeled, permuted);

    const ProbMap pm = random_softmax_map(2, 2, 5, 900 + trial);
    LossConfig cfg;
    CHECK(std::abs(averaged_pair_loss(pm, a, cfg) - averaged_pair_loss(pm, b, cfg)) <= 1e-12);
  }
}

TEST_CASE("permuting non-background output channels leaves losses unchanged") {
  Rng rng(77);
  const int n = 5;
  const ProbMap pm = random_softmax_map(4, 4, n + 1, 31);
  InstanceLabelMap inst{16, 16, std::vector<int>(256)};
  for (auto& v : inst.id) v = static_cast<int>(rng.below(3));
  compact_ids(inst);
  SamplerConfig scfg;
  scfg.per_instance_count = 10;
  const PairSet ps = build_pair_set(inst, scfg, 8);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  ProbMap permuted = pm;
  for (int64_t px = 0; px < 16; ++px)
    for (int k = 0; k < n; ++k)
      permuted.p[px * (n + 1) + 1 + perm[k]] = pm.p[px * (n + 1) + 1 + k];

  LossConfig cfg;
  const InstanceLabelMap inst_q = downsample_labels(inst, 4);
  CHECK(std::abs(averaged_pair_loss(pm, ps, cfg) - averaged_pair_loss(permuted, ps, cfg)) <=
        1e-12);
  CHECK(std::abs(background_loss(pm, inst_q) - background_loss(permuted, inst_q)) <= 1e-12);
}

TEST_CASE("pair loss properties on random distributions") {
  Rng rng(999);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(6));
    std::vector<double> a(c), b(c);
    double sa = 0.0, sb = 0.0;
    for (int k = 0; k < c; ++k) {
      a[k] = std::exp(rng.uniform(-3.0, 3.0));
      b[k] = std::exp(rng.uniform(-3.0, 3.0));
      sa += a[k];
      sb += b[k];
    }
    for (int k = 0; k < c; ++k) {
      a[k] /= sa;
      b[k] /= sb;
    }
    const double sigma = rng.uniform(0.5, 4.0);
    CHECK(loss_same(a, b) >= -1e-9);
    const double d = loss_diff(a, b, sigma);
    CHECK(d >= 0.0);
    CHECK(d <= 2.0 * sigma + 1e-12);
    CHECK(std::abs(loss_diff(a, a, sigma) - 2.0 * sigma) < 1e-9);
    CHECK(pair_loss(a, b, 0, sigma) == pair_loss(b, a, 0, sigma));
    CHECK(pair_loss(a, b, 1, sigma) == pair_loss(b, a, 1, sigma));
  }
}

TEST_CASE("LossConfig validation enforces the index-reuse floor") {
  LossConfig cfg;
  cfg.epsilon = 32.0;
  cfg.n = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.n = 4;
  CHECK_NOTHROW(cfg.validate());
  cfg.epsilon = kInf;
  cfg.n = 2;
  CHECK_NOTHROW(cfg.validate());
}
