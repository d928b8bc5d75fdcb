#include <doctest.h>

#include <cmath>
#include <numeric>

#include "inrv/adam.hpp"
#include "inrv/errors.hpp"
#include "inrv/graph.hpp"
#include "inrv/kernels.hpp"
#include "inrv/rng.hpp"
#include "support.hpp"

using namespace inrv;
using inrv::testing::check_gradients;
using inrv::testing::random_tensor;

namespace {

std::vector<double> triple_loop(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a.at(i, p) * b.at(p, j);
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

}  // namespace

TEST_CASE("tensor construction and invariants") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
  CHECK_THROWS_AS((void)t.reshaped({4}), ShapeError);
}

TEST_CASE("relu forward") {
  Graph g;
  const auto x = g.leaf(Tensor::vector({-1.0, 0.0, 2.0}));
  const auto& y = g.evaluate(g.relu(x));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);
}

TEST_CASE("matmul by identity returns the input") {
  const Tensor a = random_tensor({4, 4}, 3);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  Graph g;
  const auto& c = g.evaluate(g.matmul(g.leaf(a), g.leaf(eye)));
  CHECK(c.bit_equal(a));
}

TEST_CASE("matmul matches a triple loop") {
  const Tensor a = random_tensor({5, 5}, 11);
  const Tensor b = random_tensor({5, 5}, 12);
  Graph g;
  const auto& c = g.evaluate(g.matmul(g.leaf(a), g.leaf(b)));
  const auto ref = triple_loop(a, b);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-14));
}

TEST_CASE("parallel kernels are bit-identical to the serial loops") {
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {5, 7, 3}, {37, 24, 64}, {130, 64, 17}, {10, 128, 200},
                         {3, 300, 40}, {257, 33, 9}}) {
    CAPTURE(m);
    CAPTURE(k);
    CAPTURE(n);
    const Tensor a = random_tensor({m, k}, m * 100 + k);
    const Tensor b = random_tensor({k, n}, n * 7 + 1);
    const Tensor at = transpose(a);
    const Tensor bt = transpose(b);
    const Tensor g = random_tensor({m, n}, 99);

    std::vector<double> c1(m * n), c2(m * n);
    kernels::matmul(a.data(), b.data(), c1, m, k, n);
    kernels::serial::matmul(a.data(), b.data(), c2, m, k, n);
    CHECK(c1 == c2);
    const auto ref = triple_loop(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(c1[i] == doctest::Approx(ref[i]).epsilon(1e-13));

    kernels::matmul_nt(a.data(), bt.data(), c1, m, k, n);
    kernels::serial::matmul_nt(a.data(), bt.data(), c2, m, k, n);
    CHECK(c1 == c2);

    std::vector<double> d1(k * n), d2(k * n);
    kernels::matmul_tn(a.data(), g.data(), d1, m, k, n);
    kernels::serial::matmul_tn(a.data(), g.data(), d2, m, k, n);
    CHECK(d1 == d2);
    const auto dref = triple_loop(at, g);
    for (std::size_t i = 0; i < dref.size(); ++i) REQUIRE(d1[i] == doctest::Approx(dref[i]).epsilon(1e-13));

    std::vector<double> s1(n), s2(n);
    kernels::column_sum(g.data(), s1, m, n);
    kernels::serial::column_sum(g.data(), s2, m, n);
    CHECK(s1 == s2);

    std::vector<double> r1(m * n), r2(m * n);
    kernels::add_row(g.data(), b.row(0), r1, m, n);
    kernels::serial::add_row(g.data(), b.row(0), r2, m, n);
    CHECK(r1 == r2);
  }
}

TEST_CASE("thread count does not change kernel results") {
  const Tensor a = random_tensor({300, 64}, 1);
  const Tensor b = random_tensor({64, 64}, 2);
  std::vector<double> c1(300 * 64), c2(300 * 64);
  const int before = kernels::max_threads();
  kernels::set_max_threads(1);
  kernels::matmul(a.data(), b.data(), c1, 300, 64, 64);
  kernels::set_max_threads(4);
  kernels::matmul(a.data(), b.data(), c2, 300, 64, 64);
  kernels::set_max_threads(before);
  CHECK(c1 == c2);
}

TEST_CASE("backward of mean(x^2) at x = 3 is 6") {
  Graph g;
  const auto x = g.leaf(Tensor::vector({3.0}).set_requires_grad(true));
  const auto loss = g.reduce_mean(g.square(x));
  g.evaluate(loss);
  const auto grads = g.backward(loss);
  CHECK(grads.at(x)[0] == 6.0);
}

TEST_CASE("relu blocks gradient for negative inputs") {
  Graph g;
  const auto x = g.leaf(Tensor::vector({-1.0, 2.0}).set_requires_grad(true));
  const auto loss = g.reduce_sum(g.relu(x));
  g.evaluate(loss);
  const auto grads = g.backward(loss);
  CHECK(grads.at(x)[0] == 0.0);
  CHECK(grads.at(x)[1] == 1.0);
}

TEST_CASE("backward contract errors") {
  Graph g;
  const auto x = g.leaf(Tensor::vector({1.0, 2.0}).set_requires_grad(true));
  const auto s = g.reduce_sum(x);
  CHECK_THROWS_AS(g.backward(s), Error);
  g.evaluate(x);
  CHECK_THROWS_AS(g.backward(x), ShapeError);
  g.evaluate(s);
  CHECK_NOTHROW(g.backward(s));
}

TEST_CASE("leaves without requires_grad get no gradient") {
  Graph g;
  const auto x = g.leaf(Tensor::vector({1.0, 2.0}).set_requires_grad(true));
  const auto c = g.leaf(Tensor::vector({5.0, 6.0}));
  const auto loss = g.reduce_sum(g.mul(x, c));
  g.evaluate(loss);
  const auto grads = g.backward(loss);
  CHECK(grads.contains(x));
  CHECK_FALSE(grads.contains(c));
  CHECK(grads.at(x)[0] == 5.0);
}

TEST_CASE("fan-out gradients sum branch contributions") {
  // loss = sum(x * x) + sum(3 x): d/dx = 2x + 3
  Graph g;
  const auto x = g.leaf(Tensor::vector({1.0, -2.0}).set_requires_grad(true));
  const auto loss = g.add(g.reduce_sum(g.mul(x, x)), g.reduce_sum(g.scale(x, 3.0)));
  g.evaluate(loss);
  const auto grads = g.backward(loss);
  CHECK(grads.at(x)[0] == 5.0);
  CHECK(grads.at(x)[1] == -1.0);
}

TEST_CASE("shape errors name the node") {
  Graph g;
  const auto a = g.leaf(Tensor({2, 3}));
  const auto b = g.leaf(Tensor({2, 3}));
  try {
    g.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("#2") != std::string::npos);
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(g.add(a, g.leaf(Tensor({3, 2}))), ShapeError);
}

TEST_CASE("non-finite values are reported at evaluation") {
  Graph g;
  const auto x = g.leaf(Tensor::vector({-1.0}));
  const auto y = g.log(x);
  try {
    g.evaluate(y);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
  CHECK_THROWS_AS(g.leaf(Tensor::vector({std::nan("")})), NumericError);
}

TEST_CASE("every primitive matches central differences") {
  using B = testing::LossBuilder;
  const Tensor a = random_tensor({3, 4}, 1);
  const Tensor b = random_tensor({4, 2}, 2);
  const Tensor c = random_tensor({3, 4}, 3);
  const Tensor pos = random_tensor({3, 4}, 4, 0.5, 2.0);
  const Tensor row = random_tensor({4}, 5);
  // Weighting every output by a fixed random tensor exercises all entries of
  // the incoming gradient.
  auto weighted = [](Graph& g, NodeId y, std::uint64_t seed) {
    const Tensor w = random_tensor(g.shape(y), seed);
    return g.reduce_sum(g.mul(y, g.leaf(w)));
  };
  struct Case {
    const char* name;
    std::vector<Tensor> inputs;
    B build;
  };
  const std::vector<Case> cases = {
      {"matmul", {a, b}, [&](Graph& g, auto ids) { return weighted(g, g.matmul(ids[0], ids[1]), 10); }},
      {"add", {a, c}, [&](Graph& g, auto ids) { return weighted(g, g.add(ids[0], ids[1]), 11); }},
      {"sub", {a, c}, [&](Graph& g, auto ids) { return weighted(g, g.sub(ids[0], ids[1]), 12); }},
      {"mul", {a, c}, [&](Graph& g, auto ids) { return weighted(g, g.mul(ids[0], ids[1]), 13); }},
      {"div", {a, pos}, [&](Graph& g, auto ids) { return weighted(g, g.div(ids[0], ids[1]), 14); }},
      {"add_row", {a, row}, [&](Graph& g, auto ids) { return weighted(g, g.add_row(ids[0], ids[1]), 15); }},
      {"relu", {a}, [&](Graph& g, auto ids) { return weighted(g, g.relu(ids[0]), 16); }},
      {"sin", {a}, [&](Graph& g, auto ids) { return weighted(g, g.sin(ids[0]), 17); }},
      {"cos", {a}, [&](Graph& g, auto ids) { return weighted(g, g.cos(ids[0]), 18); }},
      {"square", {a}, [&](Graph& g, auto ids) { return weighted(g, g.square(ids[0]), 19); }},
      {"sqrt", {pos}, [&](Graph& g, auto ids) { return weighted(g, g.sqrt(ids[0]), 20); }},
      {"log", {pos}, [&](Graph& g, auto ids) { return weighted(g, g.log(ids[0]), 21); }},
      {"scale", {a}, [&](Graph& g, auto ids) { return weighted(g, g.scale(ids[0], -2.5), 22); }},
      {"add_scalar", {a}, [&](Graph& g, auto ids) { return weighted(g, g.add_scalar(ids[0], 0.7), 23); }},
      {"clamp_min", {a}, [&](Graph& g, auto ids) { return weighted(g, g.clamp_min(ids[0], 0.1), 24); }},
      {"concat0", {a, c}, [&](Graph& g, auto ids) { return weighted(g, g.concat({ids[0], ids[1]}, 0), 25); }},
      {"concat1", {a, b}, [&](Graph& g, auto ids) {
         return weighted(g, g.concat({g.reshape(ids[0], {4, 3}), ids[1]}, 1), 26);
       }},
      {"slice", {a}, [&](Graph& g, auto ids) { return weighted(g, g.slice(ids[0], 3, 5), 27); }},
      {"reshape", {a}, [&](Graph& g, auto ids) { return weighted(g, g.reshape(ids[0], {2, 6}), 28); }},
      {"reduce_sum", {a}, [&](Graph& g, auto ids) { return g.scale(g.reduce_sum(ids[0]), 1.3); }},
      {"reduce_mean", {a}, [&](Graph& g, auto ids) { return g.scale(g.reduce_mean(ids[0]), 1.3); }},
      {"column_sum", {a}, [&](Graph& g, auto ids) { return weighted(g, g.reduce_sum(ids[0], 0), 29); }},
      {"column_mean", {a}, [&](Graph& g, auto ids) { return weighted(g, g.reduce_mean(ids[0], 0), 30); }},
  };
  for (const auto& tc : cases) {
    CAPTURE(tc.name);
    const auto r = check_gradients(tc.inputs, tc.build);
    CHECK(r.max_rel <= 1e-6);
  }
}

TEST_CASE("evaluate and backward are deterministic") {
  const Tensor a = random_tensor({16, 24}, 1);
  const Tensor w = random_tensor({24, 20}, 2);
  auto run = [&] {
    Graph g;
    const auto x = g.leaf(a);
    const auto wn = g.leaf(Tensor(w).set_requires_grad(true));
    const auto loss = g.reduce_mean(g.square(g.sin(g.relu(g.matmul(x, wn)))));
    g.evaluate(loss);
    return std::make_pair(g.value(loss), g.backward(loss).at(wn));
  };
  const auto [l1, g1] = run();
  const auto [l2, g2] = run();
  CHECK(l1.bit_equal(l2));
  CHECK(g1.bit_equal(g2));
}

TEST_CASE("activation signature tracks relu sign pattern") {
  auto sig = [](double v) {
    Graph g;
    const auto r = g.relu(g.leaf(Tensor::vector({v, 1.0})));
    g.evaluate(r);
    return g.activation_signature();
  };
  CHECK(sig(0.5) == sig(0.7));
  CHECK(sig(0.5) != sig(-0.5));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::vector({1.0, -2.0});
  const Tensor before = p;
  AdamState s;
  adam_step(p, Tensor({2}), s, AdamConfig{});
  CHECK(p.bit_equal(before));
  CHECK(s.t == 1);
}

TEST_CASE("adam: first step moves by the learning rate") {
  Tensor p = Tensor::vector({0.0});
  AdamState s;
  adam_step(p, Tensor::vector({1.0}), s, AdamConfig{0.01});
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam: three steps on a quadratic match a hand-stepped recurrence") {
  // f(x) = (x - 2)^2, x0 = 0, lr = 0.1. Reference values stepped by hand
  // through m, v, and the bias corrections.
  const double expected[3] = {0.09999999975000008, 0.199833513884299, 0.29937660795353505};
  // Independent recurrence for cross-checking the literals above.
  double x = 0.0, m = 0.0, v = 0.0;
  Tensor p = Tensor::vector({0.0});
  AdamState s;
  for (int t = 1; t <= 3; ++t) {
    const double grad = 2.0 * (p[0] - 2.0);
    adam_step(p, Tensor::vector({grad}), s, AdamConfig{0.1});
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(expected[t - 1]).epsilon(1e-14));
  }
  CHECK(s.t == 3);
}

TEST_CASE("adam errors") {
  Tensor p = Tensor::vector({0.0, 1.0});
  AdamState s;
  CHECK_THROWS_AS(adam_step(p, Tensor::vector({1.0}), s, AdamConfig{}), ShapeError);
  CHECK_THROWS_AS(adam_step(p, Tensor::vector({1.0, std::nan("")}), s, AdamConfig{}), NumericError);
}

TEST_CASE("philox known answer") {
  const auto out = Philox::block({0, 0, 0, 0}, {0, 0});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
  const auto ones = Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(ones[0] == 0x408f276du);
  CHECK(ones[1] == 0x41c83b0eu);
  CHECK(ones[2] == 0xa20bc7c6u);
  CHECK(ones[3] == 0x6d5451fdu);
  const auto pi = Philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  CHECK(pi[0] == 0xd16cfe09u);
  CHECK(pi[1] == 0x94fdccebu);
  CHECK(pi[2] == 0x5001e420u);
  CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("split streams are independent of consumption order") {
  Philox root(42);
  Philox a = root.split(3);
  root.next_u64();
  Philox b = root.split(3);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(Philox(42).split(1).next_u64() != Philox(42).split(2).next_u64());
}

TEST_CASE("seeded_init determinism and degenerate gaussian") {
  const auto s = InitScheme::parse("gaussian(1)");
  CHECK(seeded_init({7, 3}, s, 5).bit_equal(seeded_init({7, 3}, s, 5)));
  CHECK_FALSE(seeded_init({7, 3}, s, 5).bit_equal(seeded_init({7, 3}, s, 6)));
  const Tensor z = seeded_init({10}, InitScheme::gaussian(0.0), 5);
  for (double v : z.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(InitScheme::parse("xavier"), UsageError);
}

TEST_CASE("gaussian init moments") {
  const Tensor t = seeded_init({10000}, InitScheme::gaussian(1.0), 2024);
  const double mean = std::accumulate(t.data().begin(), t.data().end(), 0.0) / 1e4;
  double var = 0.0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (1e4 - 1));
  CHECK(std::abs(mean) <= 0.05);
  CHECK(std::abs(sd - 1.0) <= 0.05);
}

TEST_CASE("uniform fan-in init bounds") {
  const Tensor t = seeded_init({16, 8}, InitScheme::uniform_fan_in(), 9);
  for (double v : t.data()) CHECK(std::abs(v) <= 0.25);
}
