#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cpr/core/autodiff.hpp"
#include "cpr/core/ops.hpp"
#include "cpr/geom/pcgeom.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cpr;
using namespace cpr::geom;
using core::Graph;
using core::ParamScope;
using core::ParamSet;

namespace {

PointSet<double> random_points(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(n * d);
  for (auto& v : c) v = u(rng);
  return PointSet<double>(d, c);
}

}  // namespace

TEST_CASE("farthest point sampling") {
  SUBCASE("collinear points") {
    PointSet<double> p(3, {0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0});
    auto idx = farthest_point_sample(p, 2, 0);
    CHECK(idx == std::vector<std::size_t>{0, 3});
    CHECK(idx == oracle::fps(p, 2, 0));
  }
  SUBCASE("unit square corners") {
    PointSet<double> p(3, {0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0});
    auto idx = farthest_point_sample(p, 3, 0);
    // (1,1) is at sqrt(2); the two remaining corners tie at 1, lowest index wins
    CHECK(idx == std::vector<std::size_t>{0, 3, 1});
    CHECK(idx == oracle::fps(p, 3, 0));
  }
  SUBCASE("m == n is a permutation, even with duplicates") {
    PointSet<double> p(3, {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0.5, 0, 0});
    auto idx = farthest_point_sample(p, 5, 0);
    std::set<std::size_t> seen(idx.begin(), idx.end());
    CHECK(seen.size() == 5);
  }
  SUBCASE("errors") {
    PointSet<double> p(3, {0, 0, 0});
    CHECK_THROWS_AS(farthest_point_sample(p, 2, 0), ShapeError);
    CHECK_THROWS_AS(farthest_point_sample(PointSet<double>{}, 1, 0), ShapeError);
  }
  SUBCASE("seeded random start is reproducible") {
    std::mt19937_64 rng(1);
    auto p = random_points(40, 3, rng);
    std::mt19937_64 a(9);
    std::mt19937_64 b(9);
    CHECK(farthest_point_sample(p, 8, a) == farthest_point_sample(p, 8, b));
  }
  SUBCASE("matches the brute-force greedy oracle") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 30; ++trial) {
      std::size_t n = 1 + rng() % 64;
      auto p = random_points(n, 3, rng);
      std::size_t m = 1 + rng() % n;
      std::size_t start = rng() % n;
      CHECK(farthest_point_sample(p, m, start) == oracle::fps(p, m, start));
    }
  }
}

TEST_CASE("ball query") {
  SUBCASE("self inclusion") {
    PointSet<double> src(3, {0, 0, 0, 1, 1, 1});
    PointSet<double> c(3, {1, 1, 1});
    auto r = ball_query(c, src, 0.1, 1);
    CHECK(r.index(0, 0) == 1);
    CHECK(r.distance(0, 0) == 0.0);
    CHECK(r.valid_counts[0] == 1);
  }
  SUBCASE("underfull rows repeat the nearest hit") {
    PointSet<double> src(3, {0.2, 0, 0, 0.05, 0, 0});
    PointSet<double> c(3, {0, 0, 0});
    auto r = ball_query(c, src, 0.1, 9);
    for (std::size_t j = 0; j < 9; ++j) CHECK(r.index(0, j) == 1);
    CHECK(r.valid_counts[0] == 1);
  }
  SUBCASE("nine sources on a circle") {
    std::vector<double> c;
    for (int i = 0; i < 9; ++i) {
      double a = 2 * M_PI * i / 9;
      c.insert(c.end(), {0.05 * std::cos(a), 0.05 * std::sin(a), 0.0});
    }
    c.insert(c.end(), {0.5, 0.0, 0.0});
    PointSet<double> src(3, c);
    auto r = ball_query(PointSet<double>(3, {0, 0, 0}), src, 0.1, 9);
    CHECK(r.valid_counts[0] == 9);
    std::set<std::size_t> got(r.indices.begin(), r.indices.end());
    CHECK(got.size() == 9);
    CHECK(got.count(9) == 0);
  }
  SUBCASE("no hit falls back to the global nearest") {
    PointSet<double> src(3, {1, 0, 0, 2, 0, 0});
    auto r = ball_query(PointSet<double>(3, {0, 0, 0}), src, 0.1, 3);
    CHECK(r.valid_counts[0] == 1);
    CHECK(r.index(0, 2) == 0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ball_query(PointSet<double>(3, {0, 0, 0}), PointSet<double>{}, 0.1, 1), ShapeError);
  }
}

TEST_CASE("knn") {
  SUBCASE("exact hit") {
    PointSet<double> src(3, {0, 0, 0, 1, 2, 3});
    auto r = knn(PointSet<double>(3, {1, 2, 3}), src, 1);
    CHECK(r.index(0, 0) == 1);
    CHECK(r.distance(0, 0) == 0.0);
  }
  SUBCASE("1D hand computation") {
    PointSet<double> src(1, {0, 1, 10});
    auto r = knn(PointSet<double>(1, {0.6}), src, 2);
    CHECK(r.index(0, 0) == 1);
    CHECK(r.index(0, 1) == 0);
    CHECK(r.distance(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r.distance(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
  }
  SUBCASE("duplicates resolve to the lower index") {
    PointSet<double> src(3, {5, 5, 5, 1, 1, 1, 1, 1, 1});
    auto r = knn(PointSet<double>(3, {1, 1, 1}), src, 2);
    CHECK(r.index(0, 0) == 1);
    CHECK(r.index(0, 1) == 2);
  }
  SUBCASE("k larger than source") {
    CHECK_THROWS_AS(knn(PointSet<double>(3, {0, 0, 0}), PointSet<double>(3, {1, 1, 1}), 2), ShapeError);
  }
}

TEST_CASE("interpolate features") {
  auto run = [](const PointSet<double>& q, const PointSet<double>& s, Tensor<double> feats) {
    ParamSet<double> p;
    p.add("f", std::move(feats));
    return core::forward<double>(
        [&](ParamScope<double>& scope) { return interpolate_features(q, s, scope("f"), 3); }, p);
  };
  SUBCASE("exact hit returns the hit feature") {
    PointSet<double> s(3, {0, 0, 0, 1, 0, 0, 0, 1, 0});
    auto out = run(PointSet<double>(3, {1, 0, 0}), s, Tensor<double>({3, 2}, {1, 2, 3, 4, 5, 6}));
    CHECK(out[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(out[1] == doctest::Approx(4.0).epsilon(1e-6));
  }
  SUBCASE("equidistant sources average") {
    PointSet<double> s(3, {1, 0, 0, -1, 0, 0, 0, 1, 0});
    auto out = run(PointSet<double>(3, {0, 0, 0}), s, Tensor<double>({3, 1}, {3, 6, 9}));
    CHECK(out[0] == doctest::Approx(6.0).epsilon(1e-12));
  }
  SUBCASE("1D inverse distance weights") {
    PointSet<double> s(1, {0, 1, 2});
    auto out = run(PointSet<double>(1, {0.5}), s, Tensor<double>({3, 1}, {0, 10, 20}));
    // w proportional to {2, 2, 2/3}: (0*2 + 10*2 + 20*2/3) / (14/3) = 50/7
    CHECK(out[0] == doctest::Approx(oracle::idw_1d({0, 1, 2}, {0, 10, 20}, 0.5)).epsilon(1e-12));
    CHECK(out[0] == doctest::Approx(50.0 / 7.0).epsilon(1e-6));
  }
  SUBCASE("weights are a partition of unity") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      auto s = random_points(3 + rng() % 30, 3, rng);
      auto q = random_points(1 + rng() % 10, 3, rng);
      auto w = interpolation_weights(q, s, 3);
      for (std::size_t i = 0; i < w.queries; ++i) {
        double total = w.weights[i * 3] + w.weights[i * 3 + 1] + w.weights[i * 3 + 2];
        CHECK(std::abs(total - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("chamfer distance") {
  SUBCASE("identical sets") {
    PointSet<double> a(3, {0, 1, 2, 3, 4, 5});
    CHECK(chamfer_distance(a, a) == 0.0);
  }
  SUBCASE("single points") {
    CHECK(chamfer_distance(PointSet<double>(3, {0, 0, 0}), PointSet<double>(3, {1, 0, 0})) == 2.0);
  }
  SUBCASE("2D brute force") {
    PointSet<double> a(2, {0, 0, 2, 0});
    PointSet<double> b(2, {1, 0});
    CHECK(chamfer_distance(a, b) == 2.0);
    CHECK(chamfer_distance(a, b) == oracle::chamfer(a, b));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(chamfer_distance(PointSet<double>(2, {0, 0}), PointSet<double>(3, {0, 0, 0})),
                    ShapeError);
    CHECK_THROWS_AS(chamfer_distance(PointSet<double>(3, {0, 0, 0}), PointSet<double>{}), ShapeError);
  }
  SUBCASE("graph op agrees with the plain version, batched and not") {
    std::mt19937_64 rng(3);
    auto a = random_points(7, 6, rng);
    auto b = random_points(5, 6, rng);
    Graph<double> g;
    auto va = g.constant(Tensor<double>({7, 6}, a.coords));
    auto vb = g.constant(Tensor<double>({5, 6}, b.coords));
    CHECK(chamfer_distance(va, vb).value().item() == chamfer_distance(a, b));
    std::vector<double> aa = a.coords;
    aa.insert(aa.end(), a.coords.begin(), a.coords.end());
    std::vector<double> bb = b.coords;
    bb.insert(bb.end(), a.coords.begin(), a.coords.begin() + 30);
    auto batched = chamfer_distance(g.constant(Tensor<double>({2, 7, 6}, aa)),
                                    g.constant(Tensor<double>({2, 5, 6}, bb)));
    CHECK(batched.value()[0] == chamfer_distance(a, b));
  }
  SUBCASE("gradient matches finite differences on two 2-point sets") {
    ParamSet<double> p;
    p.add("a", Tensor<double>({2, 3}, {0.1, 0.2, -0.3, 0.9, -0.4, 0.5}));
    p.add("b", Tensor<double>({2, 3}, {0.0, 0.5, 0.1, 1.2, -0.1, 0.2}));
    auto r = core::finite_difference_check(
        [](ParamScope<double>& s) { return chamfer_distance(s("a"), s("b")); }, p);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("colorize segment") {
  auto seg = Tensor<double>({4, 2, 3}, std::vector<double>(24, 0.25));
  auto out = colorize_segment(seg);
  REQUIRE(out.shape() == core::Shape{4, 2, 6});
  const double expected[4][3] = {{1, 0, 0}, {1.0 / 3, 2.0 / 3, 0}, {0, 2.0 / 3, 1.0 / 3}, {0, 0, 1}};
  for (std::size_t f = 0; f < 4; ++f) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (int k = 0; k < 3; ++k) {
        CHECK(out[(f * 2 + i) * 6 + k] == 0.25);
        CHECK(std::abs(out[(f * 2 + i) * 6 + 3 + k] - expected[f][k]) <= 1e-12);
      }
    }
  }
  CHECK(out[3] == 1.0);
  CHECK(out[(3 * 2) * 6 + 5] == 1.0);
  auto single = colorize_segment(Tensor<double>({1, 1, 3}, {1, 2, 3}));
  CHECK(single[3] == 1.0);
  CHECK(single[4] == 0.0);
  CHECK(single[5] == 0.0);
  CHECK_THROWS_AS(colorize_segment(Tensor<double>({2, 3})), ShapeError);
}

TEST_CASE("normalize sequence") {
  SUBCASE("idempotent on normalized input") {
    std::mt19937_64 rng(4);
    Tensor<double> seq({3, 10, 3});
    std::uniform_real_distribution<double> u(-2, 3);
    for (auto& v : seq.values()) v = u(rng);
    auto once = normalize_sequence(seq);
    auto twice = normalize_sequence(once.frames);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      CHECK(std::abs(once.frames[i] - twice.frames[i]) <= 1e-6);
    }
  }
  SUBCASE("degenerate input") {
    auto seq = Tensor<double>::full({2, 4, 3}, 5.0);
    auto out = normalize_sequence(seq);
    CHECK(out.degenerate);
    for (double v : out.frames.values()) CHECK(v == 0.0);
  }
  SUBCASE("translation between frames survives") {
    Tensor<double> seq({2, 3, 3}, {0, 0, 0, 1, 0, 0, 0, 1, 0,  //
                                   2, 0, 0, 3, 0, 0, 2, 1, 0});
    auto out = normalize_sequence(seq);
    // centroid (4/3, 1/3, 0); displacement (2, 0, 0) scaled by 1/scale
    CHECK(out.centroid[0] == doctest::Approx(4.0 / 3.0));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(out.frames[9 + i * 3] - out.frames[i * 3] - 2.0 / out.scale) < 1e-12);
      CHECK(std::abs(out.frames[9 + i * 3 + 1] - out.frames[i * 3 + 1]) < 1e-12);
    }
    double max_norm = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      max_norm = std::max(max_norm, std::hypot(out.frames[i * 3], out.frames[i * 3 + 1], out.frames[i * 3 + 2]));
    }
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}
