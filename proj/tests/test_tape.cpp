#include <cmath>
#include <vector>

#include "doctest.h"
#include "fairnvt/errors.hpp"
#include "fairnvt/tape.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using fairnvt::Tensor;
using fairnvt::ad::Gradients;
using fairnvt::ad::ParamStore;
using fairnvt::ad::Tape;
using fairnvt::ad::Var;
using test_util::random_tensor;
using test_util::random_tensor_away_from;

namespace {

// Reduces a tensor-valued op to a scalar with fixed random weights so every
// output coordinate contributes a generic gradient.
Var weighted_sum(Tape& t, Var v, std::uint64_t seed) {
  Tensor w = random_tensor(t.value(v).shape(), seed);
  return t.sum(t.mul(v, t.constant(w)));
}

}  // namespace

TEST_CASE("matmul forward matches hand-computed 2x3 * 3x2") {
  Tape t;
  Var a = t.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = t.constant(Tensor({3, 2}, {7, 8, 9, 10, 11, 12}));
  Var c = t.matmul(a, b);
  const Tensor& v = t.value(c);
  CHECK(v.shape() == std::vector<std::size_t>{2, 2});
  CHECK(v[0] == doctest::Approx(58).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(64).epsilon(1e-15));
  CHECK(v[2] == doctest::Approx(139).epsilon(1e-15));
  CHECK(v[3] == doctest::Approx(154).epsilon(1e-15));
}

TEST_CASE("matmul rejects mismatched and non rank-2 operands") {
  Tape t;
  Var a = t.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  CHECK_THROWS_AS(t.matmul(a, b), fairnvt::ShapeError);
  Var v1 = t.constant(Tensor({3}, {1, 2, 3}));
  CHECK_THROWS_AS(t.matmul(a, v1), fairnvt::ShapeError);
}

TEST_CASE("matmul backward matches finite differences over 5 seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [](Tape& t, const std::vector<Var>& p) { return t.sum(t.matmul(p[0], p[1])); },
        {random_tensor({2, 3}, seed), random_tensor({3, 2}, seed + 100)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("elementwise add/sub/mul/scale backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& t, const std::vector<Var>& p) {
          Var mixed = t.mul(t.add(p[0], p[1]), t.sub(p[0], t.scale(p[1], 0.7)));
          return weighted_sum(t, mixed, seed + 50);
        },
        {random_tensor({3, 4}, seed), random_tensor({3, 4}, seed + 10)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("add_bias broadcasts over rows and matches finite differences") {
  Tape t;
  Var x = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = t.constant(Tensor({2}, {10, 20}));
  const Tensor& y = t.value(t.add_bias(x, b));
  CHECK(y[0] == 11);
  CHECK(y[1] == 22);
  CHECK(y[2] == 13);
  CHECK(y[3] == 24);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& tp, const std::vector<Var>& p) {
          return weighted_sum(tp, tp.add_bias(p[0], p[1]), seed + 7);
        },
        {random_tensor({4, 3}, seed), random_tensor({3}, seed + 20)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("tanh/relu/log/abs/square backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& t, const std::vector<Var>& p) {
          return weighted_sum(t, t.tanh(p[0]), seed + 1);
        },
        {random_tensor({3, 3}, seed)});
    CHECK_MESSAGE(res.ok, res.detail);

    res = gradcheck::check(
        [seed](Tape& t, const std::vector<Var>& p) {
          return weighted_sum(t, t.relu(p[0]), seed + 2);
        },
        {random_tensor_away_from({3, 3}, seed + 30, 1e-3)});
    CHECK_MESSAGE(res.ok, res.detail);

    res = gradcheck::check(
        [seed](Tape& t, const std::vector<Var>& p) {
          return weighted_sum(t, t.log(t.square(p[0])), seed + 3);
        },
        {random_tensor_away_from({2, 4}, seed + 60, 0.1)});
    CHECK_MESSAGE(res.ok, res.detail);

    res = gradcheck::check(
        [seed](Tape& t, const std::vector<Var>& p) {
          return weighted_sum(t, t.abs(p[0]), seed + 4);
        },
        {random_tensor_away_from({5}, seed + 90, 1e-3)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("abs has subgradient 0 at 0") {
  Tape t;
  ParamStore store;
  store.add("x", Tensor({3}, {0.0, -2.0, 3.0}), true);
  Var x = t.leaf(store, "x");
  Gradients g = t.backward(t.sum(t.abs(x)), store);
  CHECK(g.at("x")[0] == 0.0);
  CHECK(g.at("x")[1] == -1.0);
  CHECK(g.at("x")[2] == 1.0);
}

TEST_CASE("softmax rows sum to one and backward matches finite differences") {
  Tape t;
  Var x = t.constant(random_tensor({4, 3}, 11));
  const Tensor& p = t.value(t.softmax_rows(x));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += p.at(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& tp, const std::vector<Var>& pr) {
          return weighted_sum(tp, tp.softmax_rows(pr[0]), seed + 5);
        },
        {random_tensor({3, 4}, seed + 200)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("log_softmax stays finite for widely spread logits") {
  Tape t;
  Var x = t.constant(Tensor({1, 2}, {1000.0, -1000.0}));
  const Tensor& ls = t.value(t.log_softmax_rows(x));
  CHECK(ls[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ls[1] == doctest::Approx(-2000.0).epsilon(1e-12));

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& tp, const std::vector<Var>& pr) {
          return weighted_sum(tp, tp.log_softmax_rows(pr[0]), seed + 6);
        },
        {random_tensor({3, 4}, seed + 300)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("sum and mean backward match finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [](Tape& t, const std::vector<Var>& p) { return t.mean(t.square(p[0])); },
        {random_tensor({4, 2}, seed + 400)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("cosine_rows value, degenerate-row rule, and gradient") {
  Tape t;
  Var a = t.constant(Tensor({2, 2}, {1, 0, 0, 0}));  // second row is zero
  Var b = t.constant(Tensor({2, 2}, {0, 1, 1, 1}));
  const Tensor& c = t.value(t.cosine_rows(a, b));
  CHECK(c[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(c[1] == 0.0);  // degenerate row contributes exactly zero

  // Degenerate rows are excluded from the gradient.
  Tape t2;
  ParamStore store;
  store.add("a", Tensor({2, 2}, {1.0, 2.0, 0.0, 0.0}), true);
  Var av = t2.leaf(store, "a");
  Var bv = t2.constant(Tensor({2, 2}, {3.0, -1.0, 2.0, 2.0}));
  Gradients g = t2.backward(t2.sum(t2.cosine_rows(av, bv)), store);
  CHECK(g.at("a")[2] == 0.0);
  CHECK(g.at("a")[3] == 0.0);
  CHECK(g.at("a")[0] != 0.0);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& tp, const std::vector<Var>& p) {
          return weighted_sum(tp, tp.cosine_rows(p[0], p[1]), seed + 8);
        },
        {random_tensor({3, 4}, seed + 500), random_tensor({3, 4}, seed + 600)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("l2_clip rescales (6,8) with bound 5 to (3,4)") {
  Tape t;
  Var e = t.constant(Tensor({2}, {6.0, 8.0}));
  const Tensor& c = t.value(t.l2_clip(e, 5.0));
  CHECK(c[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("l2_clip identity inside the ball, at the boundary, and at zero") {
  Tape t;
  Var inside = t.constant(Tensor({2}, {0.6, 0.8}));
  const Tensor& ci = t.value(t.l2_clip(inside, 5.0));
  CHECK(ci[0] == 0.6);
  CHECK(ci[1] == 0.8);

  // Boundary: |e| == bound exactly takes the identity branch bit-exactly.
  Var boundary = t.constant(Tensor({2}, {3.0, 4.0}));
  const Tensor& cb = t.value(t.l2_clip(boundary, 5.0));
  CHECK(cb[0] == 3.0);
  CHECK(cb[1] == 4.0);

  Var zero = t.constant(Tensor({2}, {0.0, 0.0}));
  const Tensor& cz = t.value(t.l2_clip(zero, 5.0));
  CHECK(cz[0] == 0.0);
  CHECK(cz[1] == 0.0);
}

TEST_CASE("l2_clip is bit-exact idempotent and norm-bounded on random rows") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Tensor e = random_tensor({6, 8}, seed + 700);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] *= 40.0;  // force clipping
    const double bound = 1.0 + static_cast<double>(seed % 7);
    Tape t;
    Var once = t.l2_clip(t.constant(e), bound);
    Var twice = t.l2_clip(once, bound);
    const Tensor& v1 = t.value(once);
    const Tensor& v2 = t.value(twice);
    for (std::size_t i = 0; i < v1.size(); ++i) CHECK(v1[i] == v2[i]);
    for (std::size_t r = 0; r < v1.rows(); ++r) {
      double ss = 0.0;
      for (std::size_t c = 0; c < v1.cols(); ++c) ss += v1.at(r, c) * v1.at(r, c);
      CHECK(ss <= bound * bound);
    }
  }
}

TEST_CASE("l2_clip backward matches finite differences on both branches") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Tensor big = random_tensor({3, 4}, seed + 800);
    for (std::size_t i = 0; i < big.size(); ++i) big[i] = big[i] * 3.0 + (big[i] < 0 ? -2.0 : 2.0);
    auto res = gradcheck::check(
        [seed](Tape& t, const std::vector<Var>& p) {
          return weighted_sum(t, t.l2_clip(p[0], 1.5), seed + 9);
        },
        {big});
    CHECK_MESSAGE(res.ok, res.detail);

    Tensor small = random_tensor({2, 3}, seed + 900);
    for (std::size_t i = 0; i < small.size(); ++i) small[i] *= 0.1;
    res = gradcheck::check(
        [seed](Tape& t, const std::vector<Var>& p) {
          return weighted_sum(t, t.l2_clip(p[0], 1.5), seed + 10);
        },
        {small});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("l2_clip rejects non-positive bounds") {
  Tape t;
  Var e = t.constant(Tensor({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(t.l2_clip(e, 0.0), fairnvt::ValueError);
  CHECK_THROWS_AS(t.l2_clip(e, -1.0), fairnvt::ValueError);
}

TEST_CASE("stop_gradient is a forward identity with an exact-zero backward") {
  Tape t;
  ParamStore store;
  store.add("a", Tensor({3}, {1.0, -2.0, 0.5}), true);
  store.add("b", Tensor({3}, {2.0, 1.0, -1.0}), true);
  Var a = t.leaf(store, "a");
  Var b = t.leaf(store, "b");
  Var sg = t.stop_gradient(b);
  const Tensor& sv = t.value(sg);
  for (std::size_t i = 0; i < 3; ++i) CHECK(sv[i] == store.value("b")[i]);

  Gradients g = t.backward(t.sum(t.mul(a, sg)), store);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(g.at("b")[i] == 0.0);
    CHECK(g.at("a")[i] == store.value("b")[i]);
  }
}

TEST_CASE("concat joins rank-1 and rank-2 values and splits gradients") {
  Tape t;
  Var a = t.constant(Tensor({2}, {1, 2}));
  Var b = t.constant(Tensor({3}, {3, 4, 5}));
  const Tensor& v = t.value(t.concat(a, b));
  CHECK(v.shape() == std::vector<std::size_t>{5});
  for (std::size_t i = 0; i < 5; ++i) CHECK(v[i] == static_cast<double>(i + 1));

  Tape t2;
  Var m = t2.constant(Tensor({2, 1}, {1, 2}));
  Var n = t2.constant(Tensor({2, 2}, {3, 4, 5, 6}));
  const Tensor& w = t2.value(t2.concat(m, n));
  CHECK(w.shape() == std::vector<std::size_t>{2, 3});
  CHECK(w[0] == 1);
  CHECK(w[1] == 3);
  CHECK(w[2] == 4);
  CHECK(w[3] == 2);
  CHECK(w[4] == 5);
  CHECK(w[5] == 6);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& tp, const std::vector<Var>& p) {
          return weighted_sum(tp, tp.concat(p[0], p[1]), seed + 11);
        },
        {random_tensor({3, 2}, seed + 1000), random_tensor({3, 4}, seed + 1100)});
    CHECK_MESSAGE(res.ok, res.detail);
  }

  Tape t3;
  Var bad = t3.constant(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
  Var other = t3.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  CHECK_THROWS_AS(t3.concat(bad, other), fairnvt::ShapeError);
}

TEST_CASE("take_per_row picks label entries and scatters gradients") {
  Tape t;
  Var x = t.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  const Tensor& v = t.value(t.take_per_row(x, {2, 0}));
  CHECK(v[0] == 3);
  CHECK(v[1] == 4);

  CHECK_THROWS_AS(t.take_per_row(x, {3, 0}), fairnvt::ShapeError);
  CHECK_THROWS_AS(t.take_per_row(x, {0}), fairnvt::ShapeError);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto res = gradcheck::check(
        [seed](Tape& tp, const std::vector<Var>& p) {
          return weighted_sum(tp, tp.take_per_row(p[0], {1, 0, 2}), seed + 12);
        },
        {random_tensor({3, 3}, seed + 1200)});
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("gradient accumulates over fan-out: d(x + x)/dx == 2 exactly") {
  Tape t;
  ParamStore store;
  store.add("x", Tensor({2}, {0.3, -0.7}), true);
  Var x = t.leaf(store, "x");
  Gradients g = t.backward(t.sum(t.add(x, x)), store);
  CHECK(g.at("x")[0] == 2.0);
  CHECK(g.at("x")[1] == 2.0);
}

TEST_CASE("untouched parameters receive zero gradients of the right shape") {
  Tape t;
  ParamStore store;
  store.add("used", Tensor({2}, {1.0, 2.0}), true);
  store.add("unused", Tensor({3, 2}, {1, 2, 3, 4, 5, 6}), true);
  Var u = t.leaf(store, "used");
  Gradients g = t.backward(t.sum(u), store);
  CHECK(g.at("unused").shape() == std::vector<std::size_t>{3, 2});
  for (std::size_t i = 0; i < 6; ++i) CHECK(g.at("unused")[i] == 0.0);
}

TEST_CASE("frozen parameters never appear in the gradient map") {
  Tape t;
  ParamStore store;
  store.add("w", Tensor({2}, {1.0, 2.0}), true);
  store.add("frozen", Tensor({2}, {3.0, 4.0}), false);
  Var w = t.leaf(store, "w");
  Var f = t.leaf(store, "frozen");
  Gradients g = t.backward(t.sum(t.mul(w, f)), store);
  CHECK(g.by_name.count("frozen") == 0);
  CHECK(g.by_name.size() == 1);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape t;
  ParamStore store;
  store.add("x", Tensor({3}, {1, 2, 3}), true);
  Var x = t.leaf(store, "x");
  CHECK_THROWS_AS(t.backward(t.square(x), store), fairnvt::ShapeError);
}

TEST_CASE("tape grows by the op count and non-finite outputs abort") {
  Tape t;
  Var a = t.constant(Tensor({2}, {1.0, 2.0}));
  const std::size_t before = t.node_count();
  Var b = t.square(a);
  Var c = t.sum(b);
  (void)c;
  CHECK(t.node_count() == before + 2);

  Var neg = t.constant(Tensor({1}, {-1.0}));
  CHECK_THROWS_AS(t.log(neg), fairnvt::NumericAbort);
}

TEST_CASE("tensor construction rejects NaN and infinity") {
  CHECK_THROWS_AS(Tensor({1}, {std::nan("")}), fairnvt::ValueError);
  CHECK_THROWS_AS(Tensor({1}, {INFINITY}), fairnvt::ValueError);
}
