#include <cmath>
#include <random>

#include "dingdate/error.hpp"
#include "dingdate/losses.hpp"
#include "dingdate/random_graph.hpp"
#include "doctest.h"

using namespace dingdate;

namespace {

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

// A graph with attributes under every period, so all three views are used.
RelationGraph attribute_graph(std::mt19937_64& rng) {
  RandomGraphOptions opts;
  opts.max_view_nodes = 14;
  for (;;) {
    GraphSpec spec = random_graph_spec(rng, opts);
    std::size_t shapes = 0, chars = 0;
    for (const auto& n : spec.nodes) {
      shapes += n.kind == NodeKind::Shape;
      chars += n.kind == NodeKind::Characteristic;
    }
    if (shapes < 2 || chars < 2) continue;
    RelationGraph g = build_graph(spec);
    // Every period needs an admissible shape for target sampling.
    bool ok = true;
    for (NodeIndex p : g.of_kind(NodeKind::Period)) {
      bool any = false;
      for (NodeIndex a : g.children(p))
        any |= g.node(a).kind == NodeKind::Shape && !g.excludes(a, p) && !g.excludes(a, g.dynasty_of(p));
      ok &= any && !g.excludes(p, g.dynasty_of(p));
    }
    if (ok) return g;
  }
}

struct Instance {
  std::array<Tensor, 4> logits;
  std::vector<SampleTargets> targets;
};

// Targets are drawn among legal combinations: the shape and characteristics
// hang under the chosen period and are not excluded from it.
Instance random_instance(std::mt19937_64& rng, const RelationGraph& g, std::size_t batch) {
  Instance in;
  std::normal_distribution<double> dist(0.0, 1.5);
  for (std::size_t k = 0; k < 4; ++k) {
    in.logits[k] = Tensor({batch, g.count(static_cast<NodeKind>(k))});
    for (double& x : in.logits[k].values()) x = dist(rng);
  }
  auto pick = [&](const std::vector<NodeIndex>& xs) {
    return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
  };
  for (std::size_t l = 0; l < batch; ++l) {
    for (;;) {
      SampleTargets t;
      t.period = pick(g.of_kind(NodeKind::Period));
      const NodeIndex d = g.dynasty_of(t.period);
      std::vector<NodeIndex> shapes, chars;
      for (NodeIndex a : g.children(t.period)) {
        if (g.excludes(a, t.period) || g.excludes(a, d)) continue;
        (g.node(a).kind == NodeKind::Shape ? shapes : chars).push_back(a);
      }
      if (shapes.empty()) continue;
      t.shape = pick(shapes);
      for (NodeIndex c : chars)
        if (std::bernoulli_distribution(0.6)(rng)) t.characteristics.push_back(c);
      in.targets.push_back(t);
      break;
    }
  }
  return in;
}

double eval_total(const GraphLoss& loss, const Instance& in, const GraphLossOptions& opts) {
  return loss
      .evaluate({&in.logits[0], &in.logits[1], &in.logits[2], &in.logits[3]}, in.targets, 2.0, 3.0, 0.5, opts)
      .total;
}

}  // namespace

TEST_CASE("era loss examples") {
  CHECK(loss_era(v({1.0, 1.0})).value == 0.0);
  CHECK(loss_era(v({std::exp(-1.0)})).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(loss_era(v({0.5, 0.25})).value == doctest::Approx(1.0397).epsilon(1e-4));
  CHECK_THROWS_AS(loss_era({}), Error);
}

TEST_CASE("era-shape loss examples") {
  CHECK(loss_era_shape(v({1.0}), v({0.3}), 2.0).value == 0.0);
  CHECK(loss_era_shape(v({0.5}), v({0.5}), 2.0).value == doctest::Approx(0.1733).epsilon(1e-3));
  CHECK(loss_era_shape(v({0.5}), v({0.5}), 0.0).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("era-characteristic loss examples") {
  CHECK(loss_era_char(v({1.0}), {{0.2}}, 3.0) == 0.0);
  CHECK(loss_era_char(v({0.5}), {{0.5}}, 3.0) == doctest::Approx(0.0866).epsilon(1e-3));
  CHECK(loss_era_char(v({0.5}), {{}}, 3.0) == 0.0);
}

TEST_CASE("graph and total loss arithmetic") {
  CHECK(loss_graph(1, 2, 3, 0.001) == doctest::Approx(1.005).epsilon(1e-12));
  CHECK(loss_graph(1, 2, 3, 0.0) == 1.0);
  CHECK(loss_graph(0, 0, 0, 0.001) == 0.0);
  CHECK(total_loss(1, 2, 3, 4, 0.1) == doctest::Approx(3.7).epsilon(1e-12));
  CHECK(total_loss(1, 2, 3, 4, 0.0) == 3.0);
  CHECK(total_loss(0, 0, 0, 0, 0.1) == 0.0);
}

TEST_CASE("cross entropy and focal examples") {
  std::vector<std::size_t> label0{0};
  CHECK(cross_entropy(Tensor::matrix(1, 3, {1, 0, 0}), label0).value == 0.0);
  CHECK(cross_entropy(Tensor({1, 11}, 1.0 / 11.0), label0).value == doctest::Approx(std::log(11.0)).epsilon(1e-12));
  CHECK(cross_entropy(Tensor::matrix(1, 2, {0.5, 0.5}), label0).value == doctest::Approx(0.693147).epsilon(1e-6));

  CHECK(focal_loss(Tensor::matrix(1, 2, {1, 0}), label0, 2, 0.25).value == 0.0);
  const Tensor p = Tensor::matrix(2, 3, {0.2, 0.5, 0.3, 0.6, 0.1, 0.3});
  std::vector<std::size_t> labels{1, 2};
  CHECK(focal_loss(p, labels, 0, 1).value == doctest::Approx(cross_entropy(p, labels).value).epsilon(1e-15));
  CHECK(focal_loss(Tensor::matrix(1, 2, {0.5, 0.5}), label0, 2, 0.25).value ==
        doctest::Approx(0.0433).epsilon(1e-3));

  std::vector<std::size_t> wrong{0, 0, 0};
  CHECK_THROWS_AS(cross_entropy(p, wrong), Error);
}

TEST_CASE("multilabel focal examples") {
  CHECK(ml_focal_loss(Tensor::matrix(1, 3, {1, 0, 1}), Tensor::matrix(1, 3, {1, 0, 1}), 2, 0.25).value == 0.0);
  CHECK(ml_focal_loss(Tensor::matrix(1, 1, {0.5}), Tensor::matrix(1, 1, {1}), 2, 0.25).value ==
        doctest::Approx(0.0433).epsilon(1e-3));
  CHECK(ml_focal_loss(Tensor({2, 3}, 0.0), Tensor({2, 3}, 0.0), 2, 0.25).value == 0.0);
  CHECK_THROWS_AS(ml_focal_loss(Tensor({2, 3}), Tensor({3, 2}), 2, 0.25), Error);
}

TEST_CASE("probability-space gradients match finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Tensor probs({3, 4}), labels({3, 4});
  for (double& x : probs.values()) x = u(rng);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (i % 3 == 0) ? 1.0 : 0.0;
  std::vector<std::size_t> cls{1, 3, 0};
  const double h = 1e-6;
  for (int which = 0; which < 2; ++which) {
    auto f = [&](const Tensor& p) {
      return which == 0 ? focal_loss(p, cls, 2, 0.25).value : ml_focal_loss(p, labels, 2, 0.25).value;
    };
    const Tensor grad = which == 0 ? focal_loss(probs, cls, 2, 0.25).grad : ml_focal_loss(probs, labels, 2, 0.25).grad;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      Tensor up = probs, down = probs;
      up[i] += h;
      down[i] -= h;
      CHECK(grad[i] == doctest::Approx((f(up) - f(down)) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("era-shape term is non-increasing in Pr_e") {
  double prev = 1e9;
  for (double pe = 0.0; pe <= 1.0; pe += 0.01) {
    const double term = loss_era_shape(v({pe}), v({0.3}), 2.0).value;
    CHECK(term <= prev);
    prev = term;
  }
}

TEST_CASE("graph loss agrees with the probability-space equations") {
  std::mt19937_64 rng(21);
  const RelationGraph g = attribute_graph(rng);
  const GraphLoss loss(g);
  const Instance in = random_instance(rng, g, 4);
  const GraphLossResult r =
      loss.evaluate({&in.logits[0], &in.logits[1], &in.logits[2], &in.logits[3]}, in.targets, 2.0, 3.0, 0.01);

  const GraphView era(g, Scope::Era), es(g, Scope::EraShape), ec(g, Scope::EraCharacteristic);
  std::vector<double> pe, pes;
  std::vector<std::vector<double>> pec;
  for (std::size_t l = 0; l < 4; ++l) {
    std::vector<double> z(g.size());
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& cols = g.of_kind(static_cast<NodeKind>(k));
      for (std::size_t c = 0; c < cols.size(); ++c) z[cols[c]] = in.logits[k].at(l, c);
    }
    const auto acts = NodeActivations::from_logits(z);
    pe.push_back(marginal(era, acts, in.targets[l].period));
    pes.push_back(marginal(es, acts, in.targets[l].shape));
    pec.emplace_back();
    for (NodeIndex c : in.targets[l].characteristics) pec.back().push_back(marginal(ec, acts, c));
  }
  CHECK(r.era == doctest::Approx(loss_era(pe).value).epsilon(1e-12));
  CHECK(r.stage1 == doctest::Approx(loss_era_shape(pe, pes, 2.0).value).epsilon(1e-12));
  CHECK(r.stage2 == doctest::Approx(loss_era_char(pes, pec, 3.0)).epsilon(1e-12));
  CHECK(r.total == doctest::Approx(loss_graph(r.era, r.stage1, r.stage2, 0.01)).epsilon(1e-15));
}

TEST_CASE("graph loss gradient: full mode against plain finite differences") {
  std::mt19937_64 rng(22);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const RelationGraph g = attribute_graph(rng);
    const GraphLoss loss(g);
    Instance in = random_instance(rng, g, 3);
    for (EmbedOrder order : {EmbedOrder::Esc, EmbedOrder::Ecs}) {
      GraphLossOptions opts;
      opts.full_gradient = true;
      opts.order = order;
      const GraphLossResult r =
          loss.evaluate({&in.logits[0], &in.logits[1], &in.logits[2], &in.logits[3]}, in.targets, 2.0, 3.0, 0.5, opts);
      for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t i = 0; i < in.logits[k].size(); ++i) {
          const double saved = in.logits[k][i];
          in.logits[k][i] = saved + h;
          const double up = eval_total(loss, in, opts);
          in.logits[k][i] = saved - h;
          const double down = eval_total(loss, in, opts);
          in.logits[k][i] = saved;
          const double numeric = (up - down) / (2 * h);
          CHECK(std::abs(r.grad[k][i] - numeric) <= 1e-6 + 1e-4 * std::abs(numeric));
        }
      }
    }
  }
}

TEST_CASE("graph loss gradient: detached weights against frozen-weight differences") {
  std::mt19937_64 rng(23);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const RelationGraph g = attribute_graph(rng);
    const GraphLoss loss(g);
    Instance in = random_instance(rng, g, 3);
    GraphLossOptions opts;
    const GraphLossResult r =
        loss.evaluate({&in.logits[0], &in.logits[1], &in.logits[2], &in.logits[3]}, in.targets, 2.0, 3.0, 0.5, opts);
    GraphLossOptions frozen = opts;
    frozen.frozen_weights = &r.weights;
    CHECK(eval_total(loss, in, frozen) == r.total);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t i = 0; i < in.logits[k].size(); ++i) {
        const double saved = in.logits[k][i];
        in.logits[k][i] = saved + h;
        const double up = eval_total(loss, in, frozen);
        in.logits[k][i] = saved - h;
        const double down = eval_total(loss, in, frozen);
        in.logits[k][i] = saved;
        const double numeric = (up - down) / (2 * h);
        CHECK(std::abs(r.grad[k][i] - numeric) <= 1e-6 + 1e-4 * std::abs(numeric));
      }
    }
  }
}

TEST_CASE("swapping the attribute order changes the loss") {
  std::mt19937_64 rng(24);
  const RelationGraph g = attribute_graph(rng);
  const GraphLoss loss(g);
  const Instance in = random_instance(rng, g, 4);
  GraphLossOptions esc, ecs;
  ecs.order = EmbedOrder::Ecs;
  CHECK(eval_total(loss, in, esc) != eval_total(loss, in, ecs));
}

TEST_CASE("graph loss does not depend on the thread count") {
  std::mt19937_64 rng(25);
  const RelationGraph g = attribute_graph(rng);
  const GraphLoss loss(g);
  const Instance in = random_instance(rng, g, 9);
  GraphLossOptions one, four;
  four.threads = 4;
  const auto a = loss.evaluate({&in.logits[0], &in.logits[1], &in.logits[2], &in.logits[3]}, in.targets, 2, 3, 0.5, one);
  const auto b = loss.evaluate({&in.logits[0], &in.logits[1], &in.logits[2], &in.logits[3]}, in.targets, 2, 3, 0.5, four);
  CHECK(a.total == b.total);
  for (std::size_t k = 0; k < 4; ++k) CHECK(a.grad[k] == b.grad[k]);
}

TEST_CASE("losses are finite and non-negative under saturated logits") {
  std::mt19937_64 rng(26);
  const RelationGraph g = attribute_graph(rng);
  const GraphLoss loss(g);
  Instance in = random_instance(rng, g, 3);
  for (auto& t : in.logits)
    for (double& x : t.values()) x = x > 0 ? 60.0 : -60.0;
  const auto r = loss.evaluate({&in.logits[0], &in.logits[1], &in.logits[2], &in.logits[3]}, in.targets, 2, 3, 0.5);
  CHECK(std::isfinite(r.total));
  CHECK(r.total >= 0.0);
  CHECK(r.stage1 >= 0.0);
  CHECK(r.stage2 >= 0.0);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams h;
  CHECK_NOTHROW(h.validate());
  h.focal_alpha = 0.0;
  CHECK_THROWS_AS(h.validate(), Error);
  h = {};
  h.alpha1 = -1;
  CHECK_THROWS_AS(h.validate(), Error);
}
