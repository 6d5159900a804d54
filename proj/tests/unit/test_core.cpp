#include <cmath>
#include <random>

#include "cpr/core/autodiff.hpp"
#include "cpr/core/ops.hpp"
#include "doctest.h"

using namespace cpr;
using namespace cpr::core;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

ParamSet<double> single(const std::string& name, Tensor<double> t) {
  ParamSet<double> p;
  p.add(name, std::move(t));
  return p;
}

}  // namespace

TEST_CASE("forward examples") {
  SUBCASE("softmax of zeros is uniform") {
    auto out = forward<double>([](ParamScope<double>& s) { return softmax(s("v")); },
                               single("v", Tensor<double>({2}, {0.0, 0.0})));
    CHECK(out[0] == 0.5);
    CHECK(out[1] == 0.5);
  }
  SUBCASE("1x1 matmul") {
    ParamSet<double> p;
    p.add("a", Tensor<double>({1, 1}, {2.0}));
    p.add("b", Tensor<double>({1, 1}, {3.0}));
    auto out = forward<double>([](ParamScope<double>& s) { return matmul(s("a"), s("b")); }, p);
    CHECK(out.item() == 6.0);
  }
  SUBCASE("layer norm of [1, 3]") {
    auto out = forward<double>([](ParamScope<double>& s) { return layer_norm(s("x"), 1e-5); },
                               single("x", Tensor<double>({2}, {1.0, 3.0})));
    // mean 2, biased variance 1
    const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(out[0] == doctest::Approx(-expected).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(out[0] + 1.0) < 1e-5);
  }
}

TEST_CASE("gradient examples") {
  SUBCASE("d/dx x*x at 3") {
    auto g = gradient<double>([](ParamScope<double>& s) { return sum_all(mul(s("x"), s("x"))); },
                              single("x", Tensor<double>::scalar(3.0)), {"x"});
    CHECK(g.at("x").item() == 6.0);
  }
  SUBCASE("sum of softmax has zero gradient") {
    std::mt19937_64 rng(7);
    auto g = gradient<double>([](ParamScope<double>& s) { return sum_all(softmax(s("v"))); },
                              single("v", random_tensor({5}, rng)), {"v"});
    for (double v : g.at("v").values()) CHECK(std::abs(v) < 1e-15);
  }
  SUBCASE("untouched names get zero gradients") {
    ParamSet<double> p;
    p.add("x", Tensor<double>::scalar(2.0));
    p.add("unused", Tensor<double>({3}));
    auto g = gradient<double>([](ParamScope<double>& s) { return sum_all(s("x")); }, p);
    CHECK(g.at("unused").shape() == Shape{3});
    CHECK(g.at("unused")[2] == 0.0);
  }
}

TEST_CASE("finite difference check examples") {
  SUBCASE("quadratic is exact under central differences") {
    auto r = finite_difference_check([](ParamScope<double>& s) { return mul(s("x"), s("x")); },
                                     single("x", Tensor<double>::scalar(3.0)));
    CHECK(r.max_rel_error < 1e-9);
    CHECK(r.worst_name == "x");
  }
  SUBCASE("frozen entries are excluded") {
    ParamSet<double> p;
    p.add("x", Tensor<double>::scalar(3.0));
    p.add("frozen", Tensor<double>::scalar(2.0), false);
    auto r = finite_difference_check(
        [](ParamScope<double>& s) { return mul(mul(s("x"), s("x")), s("frozen")); }, p);
    CHECK(r.worst_name == "x");
    CHECK(r.checked == 1);
    CHECK(r.max_rel_error < 1e-9);
  }
}

TEST_CASE("errors") {
  SUBCASE("shape mismatch names the operands") {
    ParamSet<double> p;
    p.add("left", Tensor<double>({2, 3}));
    p.add("right", Tensor<double>({2, 3}));
    try {
      forward<double>([](ParamScope<double>& s) { return matmul(s("left"), s("right")); }, p);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      std::string msg = e.what();
      CHECK(msg.find("'left'") != std::string::npos);
      CHECK(msg.find("'right'") != std::string::npos);
    }
    p.add("bad", Tensor<double>({4}));
    CHECK_THROWS_AS(
        forward<double>([](ParamScope<double>& s) { return add(s("left"), s("bad")); }, p),
        ShapeError);
  }
  SUBCASE("unknown names") {
    CHECK_THROWS_AS(
        forward<double>([](ParamScope<double>& s) { return s("missing"); }, ParamSet<double>{}),
        UnknownNameError);
    CHECK_THROWS_AS(gradient<double>([](ParamScope<double>& s) { return sum_all(s("x")); },
                                     single("x", Tensor<double>::scalar(1.0)), {"y"}),
                    UnknownNameError);
  }
  SUBCASE("domain errors") {
    CHECK_THROWS_AS(forward<double>([](ParamScope<double>& s) { return log(s("x")); },
                                    single("x", Tensor<double>({2}, {1.0, 0.0}))),
                    DomainError);
    ParamSet<double> p;
    p.add("a", Tensor<double>::scalar(1.0));
    p.add("b", Tensor<double>::scalar(0.0));
    CHECK_THROWS_AS(
        forward<double>([](ParamScope<double>& s) { return divide(s("a"), s("b")); }, p),
        DomainError);
  }
  SUBCASE("non-scalar gradient") {
    CHECK_THROWS_AS(gradient<double>([](ParamScope<double>& s) { return s("x"); },
                                     single("x", Tensor<double>({2}))),
                    NonScalarError);
  }
}

TEST_CASE("broadcasting") {
  ParamSet<double> p;
  p.add("a", Tensor<double>({2, 1, 3}, {1, 2, 3, 4, 5, 6}));
  p.add("b", Tensor<double>({4, 3}, {0, 0, 0, 10, 10, 10, 20, 20, 20, 30, 30, 30}));
  auto out = forward<double>([](ParamScope<double>& s) { return add(s("a"), s("b")); }, p);
  REQUIRE(out.shape() == Shape{2, 4, 3});
  CHECK(out[0] == 1);
  CHECK(out[3] == 11);
  CHECK(out[12 + 11] == 36);
  auto g = gradient<double>([](ParamScope<double>& s) { return sum_all(add(s("a"), s("b"))); }, p);
  CHECK(g.at("a")[0] == 4.0);
  CHECK(g.at("b")[0] == 2.0);
}

TEST_CASE("softmax invariants") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({3, 7}, rng, -30.0, 30.0);
    auto y = forward<double>([](ParamScope<double>& s) { return softmax(s("x")); }, single("x", x));
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        double v = y[r * 7 + j];
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
  // large logits do not overflow
  auto y = forward<double>([](ParamScope<double>& s) { return softmax(s("x")); },
                           single("x", Tensor<double>({2}, {1000.0, 1000.0})));
  CHECK(y[0] == 0.5);
}

TEST_CASE("forward is bitwise deterministic") {
  std::mt19937_64 rng(3);
  ParamSet<double> p;
  p.add("x", random_tensor({4, 6}, rng));
  p.add("w", random_tensor({6, 5}, rng));
  Expr<double> expr = [](ParamScope<double>& s) {
    return softmax(layer_norm(gelu(matmul(s("x"), s("w")))));
  };
  CHECK(forward(expr, p) == forward(expr, p));
  auto pf = p.cast<float>();
  Expr<float> exprf = [](ParamScope<float>& s) {
    return softmax(layer_norm(gelu(matmul(s("x"), s("w")))));
  };
  CHECK(forward(exprf, pf) == forward(exprf, pf));
}

// Every primitive, on its smallest nontrivial shapes, against central
// differences. A random weighting makes each output coordinate matter.
TEST_CASE("primitive gradients match finite differences") {
  std::mt19937_64 rng(2024);
  struct Case {
    const char* name;
    std::vector<std::pair<std::string, Shape>> inputs;
    std::function<Var<double>(ParamScope<double>&)> body;
    double lo = -1.0;
    double hi = 1.0;
  };
  std::vector<Case> cases = {
      {"add", {{"a", {2, 3}}, {"b", {3}}}, [](auto& s) { return add(s("a"), s("b")); }},
      {"sub", {{"a", {2, 1}}, {"b", {2, 3}}}, [](auto& s) { return sub(s("a"), s("b")); }},
      {"mul", {{"a", {2, 3}}, {"b", {2, 3}}}, [](auto& s) { return mul(s("a"), s("b")); }},
      {"divide", {{"a", {2, 3}}, {"b", {3}}}, [](auto& s) { return divide(s("a"), s("b")); }, 0.5, 2.0},
      {"matmul", {{"a", {2, 3}}, {"b", {3, 2}}}, [](auto& s) { return matmul(s("a"), s("b")); }},
      {"bmm", {{"a", {2, 2, 3}}, {"b", {2, 3, 2}}}, [](auto& s) { return matmul(s("a"), s("b")); }},
      {"exp", {{"a", {2, 3}}}, [](auto& s) { return exp(s("a")); }},
      {"log", {{"a", {2, 3}}}, [](auto& s) { return log(s("a")); }, 0.5, 2.0},
      {"sqrt", {{"a", {2, 3}}}, [](auto& s) { return sqrt(s("a")); }, 0.5, 2.0},
      {"relu", {{"a", {2, 3}}}, [](auto& s) { return relu(s("a")); }},
      {"gelu", {{"a", {2, 3}}}, [](auto& s) { return gelu(s("a")); }},
      {"layer_norm", {{"a", {2, 4}}}, [](auto& s) { return layer_norm(s("a"), 1e-5); }},
      {"softmax", {{"a", {2, 4}}}, [](auto& s) { return softmax(s("a")); }},
      {"max_reduce", {{"a", {2, 3, 2}}}, [](auto& s) { return max_reduce(s("a"), 1); }},
      {"mean_reduce", {{"a", {2, 3}}}, [](auto& s) { return mean_reduce(s("a"), 0); }},
      {"sum_reduce", {{"a", {2, 3}}}, [](auto& s) { return sum_reduce(s("a"), 1); }},
      {"concat", {{"a", {2, 2}}, {"b", {2, 3}}}, [](auto& s) { return concat<double>({s("a"), s("b")}, 1); }},
      {"gather", {{"a", {3, 2}}}, [](auto& s) { return gather(s("a"), {2, 0, 2}, 0); }},
      {"transpose", {{"a", {2, 3}}}, [](auto& s) { return transpose(s("a")); }},
      {"permute", {{"a", {2, 3, 2}}}, [](auto& s) { return permute(s("a"), {2, 0, 1}); }},
      {"broadcast", {{"a", {1, 3}}}, [](auto& s) { return broadcast_to(s("a"), {2, 2, 3}); }},
      {"l2_normalize", {{"a", {2, 3}}}, [](auto& s) { return l2_normalize(s("a")); }},
  };
  for (auto& c : cases) {
    CAPTURE(c.name);
    ParamSet<double> p;
    for (auto& [name, shape] : c.inputs) p.add(name, random_tensor(shape, rng, c.lo, c.hi));
    // Fixed random weighting so the scalar depends on every output entry.
    auto probe = c.body;
    Graph<double> tmp;
    ParamScope<double> tmp_scope(tmp, p);
    Tensor<double> weights = random_tensor(probe(tmp_scope).shape(), rng);
    auto report = finite_difference_check(
        [&](ParamScope<double>& s) { return sum_all(mul(probe(s), s.constant(weights))); }, p);
    CHECK(report.max_rel_error < 1e-6);
  }
}

TEST_CASE("corrupted backward rule is detected") {
  testing::set_corrupted_op("gelu");
  std::mt19937_64 rng(5);
  auto report = finite_difference_check(
      [](ParamScope<double>& s) { return sum_all(gelu(s("x"))); },
      single("x", random_tensor({3}, rng)));
  testing::set_corrupted_op("");
  CHECK(report.max_rel_error > 0.1);
}
