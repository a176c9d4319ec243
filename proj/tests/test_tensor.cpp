#include <cmath>
#include <functional>
#include <random>

#include "dingdate/error.hpp"
#include "dingdate/tensor.hpp"
#include "doctest.h"

using namespace dingdate;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Central differences of a scalar function of one input tensor.
Tensor numeric_grad(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

void check_close(const Tensor& analytic, const Tensor& numeric, double rel = 1e-4) {
  REQUIRE(analytic.size() == numeric.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    CHECK(diff / scale <= rel);
  }
}

}  // namespace

TEST_CASE("tensor construction validates value counts") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), Error);
  Tensor t({2, 3}, 1.5);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.size() == 6);
}

TEST_CASE("linear: identity weights reproduce the input") {
  Tape tape;
  auto x = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  auto w = tape.leaf(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  auto b = tape.leaf(Tensor::vector({0, 0}));
  auto y = tape.linear(x, w, b);
  CHECK(tape.value(y) == tape.value(x));
}

TEST_CASE("linear: hand product") {
  Tape tape;
  auto y = tape.linear(tape.leaf(Tensor::matrix(1, 2, {1, 2})), tape.leaf(Tensor::matrix(2, 1, {1, 1})),
                       tape.leaf(Tensor::vector({1})));
  CHECK(tape.value(y)[0] == 4.0);
}

TEST_CASE("linear: shape mismatch") {
  Tape tape;
  auto x = tape.leaf(Tensor({2, 3}));
  auto w = tape.leaf(Tensor({2, 2}));
  auto b = tape.leaf(Tensor({2}));
  try {
    tape.linear(x, w, b);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ShapeMismatch);
  }
}

TEST_CASE("linear gradients match finite differences on a 4x3x2 instance") {
  std::mt19937_64 rng(42);
  const Tensor x0 = random_tensor(rng, {4, 3});
  const Tensor w0 = random_tensor(rng, {3, 2});
  const Tensor b0 = random_tensor(rng, {2});
  const Tensor probe = random_tensor(rng, {4, 2});  // loss = sum(probe * y)

  auto loss_of = [&](const Tensor& x, const Tensor& w, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 2; ++c) {
        double y = b[c];
        for (std::size_t k = 0; k < 3; ++k) y += x.at(r, k) * w.at(k, c);
        acc += probe.at(r, c) * y;
      }
    return acc;
  };

  Tape tape;
  auto x = tape.leaf(x0), w = tape.leaf(w0), b = tape.leaf(b0);
  auto y = tape.linear(x, w, b);
  auto loss = tape.custom({y}, Tensor({1}, 0.0), [&](const Tensor& up, std::span<Tensor* const> g) {
    for (std::size_t i = 0; i < probe.size(); ++i) (*g[0])[i] += up[0] * probe[i];
  });
  const Gradients grads = tape.backward(loss);
  check_close(grads[x], numeric_grad([&](const Tensor& t) { return loss_of(t, w0, b0); }, x0));
  check_close(grads[w], numeric_grad([&](const Tensor& t) { return loss_of(x0, t, b0); }, w0));
  check_close(grads[b], numeric_grad([&](const Tensor& t) { return loss_of(x0, w0, t); }, b0));
}

TEST_CASE("elementwise ops") {
  Tape tape;
  auto z = tape.leaf(Tensor::vector({0.0}));
  CHECK(tape.value(tape.sigmoid(z))[0] == 0.5);

  auto logits = tape.leaf(Tensor({1, 11}, 0.3));
  auto sm = tape.softmax_rows(logits);
  for (double v : tape.value(sm).values()) CHECK(v == doctest::Approx(1.0 / 11.0).epsilon(1e-15));

  auto neg = tape.leaf(Tensor::vector({-3.0}));
  auto r = tape.relu(neg);
  CHECK(tape.value(r)[0] == 0.0);
  const Gradients g = tape.backward(tape.sum(r));
  CHECK(g[neg][0] == 0.0);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(5);
  Tape tape;
  auto sm = tape.softmax_rows(tape.leaf(random_tensor(rng, {6, 9})));
  const Tensor& v = tape.value(sm);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (double x : v.row(r)) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("add and stop_grad_add") {
  Tape tape;
  auto a = tape.leaf(Tensor::vector({1, 2}));
  auto b = tape.leaf(Tensor::vector({3, 4}));
  auto plain = tape.add(a, b);
  auto cut = tape.stop_grad_add(a, b);
  CHECK(tape.value(plain) == Tensor::vector({4, 6}));
  CHECK(tape.value(cut) == tape.value(plain));  // bit-identical forward

  auto zero = tape.leaf(Tensor::vector({0, 0}));
  CHECK(tape.value(tape.add(a, zero)) == tape.value(a));

  const Gradients gp = tape.backward(tape.sum(plain));
  CHECK(gp[a] == Tensor::vector({1, 1}));
  CHECK(gp[b] == Tensor::vector({1, 1}));

  const Gradients gc = tape.backward(tape.sum(cut));
  CHECK(gc[a] == Tensor::vector({1, 1}));
  CHECK(gc[b] == Tensor::vector({0, 0}));
}

TEST_CASE("stop_grad_add cuts everything upstream of the detached operand") {
  // w feeds only the detached side: with the edge its gradient is zero; with a
  // plain add it is not.
  std::mt19937_64 rng(9);
  const Tensor x0 = random_tensor(rng, {3, 4});
  const Tensor w0 = random_tensor(rng, {4, 4});
  const Tensor b0 = random_tensor(rng, {4});
  const Tensor a0 = random_tensor(rng, {3, 4});
  for (bool truncated : {true, false}) {
    Tape tape;
    auto x = tape.leaf(x0), w = tape.leaf(w0), b = tape.leaf(b0), a = tape.leaf(a0);
    auto h = tape.sigmoid(tape.linear(x, w, b));
    auto fused = truncated ? tape.stop_grad_add(a, h) : tape.add(a, h);
    const Gradients g = tape.backward(tape.sum(tape.sigmoid(fused)));
    double norm = 0.0;
    for (double v : g[w].values()) norm += std::abs(v);
    if (truncated) {
      CHECK(norm == 0.0);
    } else {
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("add shape mismatch") {
  Tape tape;
  CHECK_THROWS_AS(tape.add(tape.leaf(Tensor({2})), tape.leaf(Tensor({3}))), Error);
  CHECK_THROWS_AS(tape.stop_grad_add(tape.leaf(Tensor({2})), tape.leaf(Tensor({3}))), Error);
}

TEST_CASE("backward: sum gives all-ones, non-scalar is rejected, repeat calls agree") {
  Tape tape;
  auto x = tape.leaf(Tensor({2, 3}, 0.7));
  auto s = tape.sum(x);
  const Gradients g1 = tape.backward(s);
  for (double v : g1[x].values()) CHECK(v == 1.0);

  try {
    tape.backward(x);
    FAIL("expected NotScalar");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotScalar);
  }

  const Gradients g2 = tape.backward(s);
  CHECK(g1[x] == g2[x]);
}

TEST_CASE("sigmoid(linear) composite matches finite differences") {
  std::mt19937_64 rng(17);
  const Tensor x0 = random_tensor(rng, {3, 5});
  const Tensor w0 = random_tensor(rng, {5, 4});
  const Tensor b0 = random_tensor(rng, {4});
  Tape tape;
  auto w = tape.leaf(w0);
  auto y = tape.sigmoid(tape.linear(tape.leaf(x0), w, tape.leaf(b0)));
  auto sm = tape.softmax_rows(y);
  // Weight the concat so softmax gradients do not cancel trivially.
  auto cat_parts = std::vector<Var>{y, sm};
  auto cat = tape.concat_cols(cat_parts);
  const Tensor probe = random_tensor(rng, tape.value(cat).shape());
  auto loss = tape.custom({cat}, Tensor({1}), [&](const Tensor& up, std::span<Tensor* const> g) {
    for (std::size_t i = 0; i < probe.size(); ++i) (*g[0])[i] += up[0] * probe[i];
  });
  const Gradients grads = tape.backward(loss);
  auto numeric = numeric_grad(
      [&](const Tensor& wv) {
        Tape t;
        auto yy = t.sigmoid(t.linear(t.leaf(x0), t.leaf(wv), t.leaf(b0)));
        auto ss = t.softmax_rows(yy);
        auto parts = std::vector<Var>{yy, ss};
        const Tensor& c = t.value(t.concat_cols(parts));
        double acc = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) acc += probe[i] * c[i];
        return acc;
      },
      w0);
  check_close(grads[w], numeric);
}

TEST_CASE("weighted_sum") {
  Tape tape;
  auto a = tape.leaf(Tensor({1}, 2.0));
  auto b = tape.leaf(Tensor({1}, 3.0));
  std::vector<Var> terms{a, b};
  std::vector<double> weights{0.5, 4.0};
  auto s = tape.weighted_sum(terms, weights);
  CHECK(tape.value(s)[0] == 13.0);
  const Gradients g = tape.backward(s);
  CHECK(g[a][0] == 0.5);
  CHECK(g[b][0] == 4.0);
}
