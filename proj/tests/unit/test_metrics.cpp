#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sacnet/errors.hpp"
#include "sacnet/metrics.hpp"

using namespace sacnet;

namespace {

Tensor map_of(const std::vector<double>& v, std::size_t h, std::size_t w) { return Tensor({1, h, w}, v); }

std::vector<double> complement(std::vector<double> v) {
  for (double& x : v) x = 1.0 - x;
  return v;
}

}  // namespace

TEST_CASE("mae") {
  CHECK(mae(map_of({0.25, 0.75}, 1, 2), map_of({0, 1}, 1, 2)) == doctest::Approx(0.25));
  CHECK(mae(Tensor(Shape{1, 3, 3}, 0.0), Tensor(Shape{1, 3, 3}, 1.0)) == 1.0);
  std::mt19937_64 rng(71);
  const auto s = oracle::random_values(rng, 36, 0, 1);
  const auto g = oracle::random_mask(rng, 6, 6);
  CHECK(mae(map_of(s, 6, 6), map_of(g, 6, 6)) ==
        doctest::Approx(mae(map_of(complement(s), 6, 6), map_of(complement(g), 6, 6))).epsilon(1e-14));
  auto sp = s, gp = g;
  std::reverse(sp.begin(), sp.end());
  std::reverse(gp.begin(), gp.end());
  CHECK(mae(map_of(sp, 6, 6), map_of(gp, 6, 6)) == doctest::Approx(mae(map_of(s, 6, 6), map_of(g, 6, 6))));
  CHECK_THROWS_AS(mae(map_of(s, 6, 6), map_of(g, 4, 9)), DimensionError);
}

TEST_CASE("metrics match the direct-formula oracles on random 8x8 maps") {
  std::mt19937_64 rng(72);
  for (int it = 0; it < 25; ++it) {
    CAPTURE(it);
    const auto g = oracle::random_mask(rng, 8, 8);
    auto s = oracle::random_values(rng, 64, 0, 1);
    if (it % 3 == 0)
      for (std::size_t i = 0; i < 64; ++i) s[i] = 0.7 * g[i] + 0.3 * s[i];
    const auto sg = oracle::to_grid(s, 8, 8), gg = oracle::to_grid(g, 8, 8);
    const Tensor S = map_of(s, 8, 8), G = map_of(g, 8, 8);
    CHECK(std::abs(mae(S, G) - oracle::mae(sg, gg)) < 1e-12);
    CHECK(std::abs(s_measure(S, G) - oracle::s_measure(sg, gg)) < 1e-6);
    const auto e = e_measure(S, G);
    const auto er = oracle::e_measure(sg, gg);
    CHECK(std::abs(e.mean - er.mean) < 1e-10);
    CHECK(std::abs(e.max - er.max) < 1e-10);
    CHECK(std::abs(weighted_f(S, G).value - oracle::weighted_f(sg, gg)) < 1e-6);
  }
}

TEST_CASE("e-measure on a crafted 4x4 case") {
  const std::vector<double> g{0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0};
  const std::vector<double> s{0.1, 0.2, 0.0, 0.0, 0.3, 0.9, 0.8, 0.1, 0.0, 0.7, 0.6, 0.4, 0.0, 0.1, 0.2, 0.0};
  const auto e = e_measure(map_of(s, 4, 4), map_of(g, 4, 4));
  REQUIRE(e.curve.size() == 256);
  for (int k = 0; k < 256; k += 17)
    CHECK(std::abs(e.curve[static_cast<std::size_t>(k)] -
                   oracle::e_measure_at(oracle::to_grid(s, 4, 4), oracle::to_grid(g, 4, 4), k / 255.0)) < 1e-10);
}

TEST_CASE("perfect and opposite predictions") {
  std::mt19937_64 rng(73);
  for (int it = 0; it < 10; ++it) {
    const std::size_t h = 6 + rng() % 20, w = 6 + rng() % 20;
    const auto g = oracle::random_mask(rng, h, w);
    const Tensor G = map_of(g, h, w);
    CHECK(mae(G, G) == 0.0);
    CHECK(std::abs(s_measure(G, G) - 1.0) < 1e-6);
    CHECK(std::abs(e_measure(G, G).max - 1.0) < 1e-6);
    CHECK(std::abs(weighted_f(G, G).value - 1.0) < 1e-6);
    const Tensor inv = map_of(complement(g), h, w);
    const auto e = e_measure(inv, G);
    CHECK(e.max < 0.5);
  }
  // with foreground away from the border every error is fully propagated
  for (int it = 0; it < 5; ++it) {
    std::vector<double> g(12 * 12, 0.0);
    const std::size_t r0 = 3 + rng() % 3, c0 = 3 + rng() % 3;
    for (std::size_t r = r0; r < r0 + 4; ++r)
      for (std::size_t c = c0; c < c0 + 3; ++c) g[r * 12 + c] = 1.0;
    CHECK(weighted_f(Tensor(Shape{1, 12, 12}, 0.0), map_of(g, 12, 12)).value < 1e-6);
  }
}

TEST_CASE("degenerate ground truth") {
  const Tensor zero(Shape{1, 5, 5}, 0.0);
  CHECK(s_measure(zero, zero) == doctest::Approx(1.0));
  const Tensor some(Shape{1, 5, 5}, 0.2);
  CHECK(s_measure(some, zero) == doctest::Approx(0.8));
  const WeightedFResult f = weighted_f(some, zero);
  CHECK(f.value == 0.0);
  CHECK(f.degenerate);
}

TEST_CASE("pr curve") {
  std::mt19937_64 rng(74);
  const auto g = oracle::random_mask(rng, 9, 9);
  const Tensor G = map_of(g, 9, 9);
  const PrCurve perfect = pr_curve(G, G);
  CHECK(perfect[1].precision == 1.0);
  CHECK(perfect[1].recall == 1.0);
  for (int it = 0; it < 10; ++it) {
    const Tensor S = map_of(oracle::random_values(rng, 81, 0, 1), 9, 9);
    const PrCurve c = pr_curve(S, G);
    for (std::size_t k = 1; k < kThresholds; ++k) CHECK(c[k].recall <= c[k - 1].recall);
  }
}

TEST_CASE("dataset averages on a hand-computed two-image set") {
  // image 1: perfect; image 2: S = 0.5 everywhere on a half-foreground map
  const Tensor g1 = map_of({1, 0, 0, 1}, 2, 2);
  const Tensor g2 = map_of({1, 1, 0, 0}, 2, 2);
  const Tensor s2(Shape{1, 2, 2}, 0.5);
  const MetricReport r = evaluate_dataset({{g1, g1}, {s2, g2}});
  CHECK(r.images == 2);
  CHECK(r.mae == doctest::Approx(0.25));
  // thresholds ≤ 0.5: image 2 predicts everything → precision 0.5, recall 1
  const std::size_t k_half = 127, k_above = 128;
  CHECK(r.pr_curve[k_half].precision == doctest::Approx(0.75));
  CHECK(r.pr_curve[k_half].recall == doctest::Approx(1.0));
  // above 0.5 image 2 predicts nothing → precision 0, recall 0
  CHECK(r.pr_curve[k_above].precision == doctest::Approx(0.5));
  CHECK(r.pr_curve[k_above].recall == doctest::Approx(0.5));
  CHECK_THROWS_AS(evaluate_dataset({}), ParameterError);
}

TEST_CASE("iou") {
  const Tensor g = map_of({1, 1, 0, 0}, 2, 2);
  CHECK(iou(map_of({0.9, 0.2, 0.7, 0.1}, 2, 2), g) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(Tensor(Shape{1, 2, 2}, 0.0), Tensor(Shape{1, 2, 2}, 0.0)) == 1.0);
}

TEST_CASE("helpers") {
  const auto k = gaussian_kernel(5, 5.0);
  double total = 0.0;
  for (double v : k) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(k[12] == *std::max_element(k.begin(), k.end()));

  std::vector<bool> fg(12, false);
  fg[5] = true;
  fg[7] = true;
  const NearestForeground nf = nearest_foreground(fg, 3, 4);
  CHECK(nf.index[5] == 5);
  CHECK(nf.dist2[5] == 0.0);
  CHECK(nf.index[6] == 5);  // equidistant from 5 and 7: lower index wins
  CHECK(nf.dist2[0] == 2.0);
}
