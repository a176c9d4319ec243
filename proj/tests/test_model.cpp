#include <cmath>
#include <filesystem>
#include <random>

#include "dingdate/error.hpp"
#include "dingdate/gradcheck.hpp"
#include "dingdate/model.hpp"
#include "dingdate/random_graph.hpp"
#include "doctest.h"

using namespace dingdate;

namespace {

// 4 dynasties, 11 periods, 29 shapes, 96 characteristics.
RelationGraph full_sized_graph() {
  GraphSpec spec = ding_era_spec();
  std::vector<std::string> periods;
  for (const auto& n : spec.nodes)
    if (n.kind == NodeKind::Period) periods.push_back(n.name);
  for (int s = 0; s < 29; ++s) {
    const std::string name = "shape" + std::to_string(s);
    spec.nodes.push_back({name, NodeKind::Shape});
    spec.subsumption.emplace_back(periods[s % periods.size()], name);
  }
  for (int c = 0; c < 96; ++c) {
    const std::string name = "char" + std::to_string(c);
    spec.nodes.push_back({name, NodeKind::Characteristic});
    spec.subsumption.emplace_back(periods[c % periods.size()], name);
  }
  return build_graph(spec);
}

Tensor random_features(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  Tensor t({rows, cols});
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& x : t.values()) x = n(rng);
  return t;
}

}  // namespace

TEST_CASE("init is deterministic and validated") {
  const RelationGraph g = full_sized_graph();
  const ModelConfig cfg = ModelConfig::for_graph(g, 16, 8, 7);
  CHECK(init_model(cfg).tensors == init_model(cfg).tensors);
  ModelConfig other = cfg;
  other.seed = 8;
  CHECK(init_model(other).tensors != init_model(cfg).tensors);
  ModelConfig bad = cfg;
  bad.feature_dim = 0;
  try {
    init_model(bad);
    FAIL("expected BadConfig");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadConfig);
  }
}

TEST_CASE("full-sized heads: batch 32, feature 128") {
  const RelationGraph g = full_sized_graph();
  const Parameters p = init_model(ModelConfig::for_graph(g, 128, 32, 1));
  std::mt19937_64 rng(1);
  const HeadOutputs out = forward(p, random_features(rng, 32, 128));
  CHECK(out.dynasty_sigmoid.shape() == std::vector<std::size_t>{32, 4});
  CHECK(out.period_softmax.shape() == std::vector<std::size_t>{32, 11});
  CHECK(out.period_sigmoid.shape() == std::vector<std::size_t>{32, 11});
  CHECK(out.shape_softmax.shape() == std::vector<std::size_t>{32, 29});
  CHECK(out.shape_sigmoid.shape() == std::vector<std::size_t>{32, 29});
  CHECK(out.char_sigmoid.shape() == std::vector<std::size_t>{32, 96});
  CHECK_THROWS_AS(forward(p, random_features(rng, 2, 127)), Error);
}

TEST_CASE("zero weights give sigmoid 0.5 and uniform softmax") {
  const RelationGraph g = full_sized_graph();
  Parameters p = init_model(ModelConfig::for_graph(g, 6, 4, 1));
  for (Tensor& t : p.tensors)
    for (double& x : t.values()) x = 0.0;
  std::mt19937_64 rng(2);
  const HeadOutputs out = forward(p, random_features(rng, 3, 6));
  for (double x : out.dynasty_sigmoid.values()) CHECK(x == 0.5);
  for (double x : out.char_sigmoid.values()) CHECK(x == 0.5);
  for (double x : out.period_softmax.values()) CHECK(x == doctest::Approx(1.0 / 11).epsilon(1e-15));
  for (double x : out.shape_softmax.values()) CHECK(x == doctest::Approx(1.0 / 29).epsilon(1e-15));
}

TEST_CASE("the reverse edge does not change period outputs") {
  const RelationGraph g = full_sized_graph();
  std::mt19937_64 rng(3);
  const Tensor x = random_features(rng, 5, 10);
  Parameters with = init_model(ModelConfig::for_graph(g, 10, 8, 4));
  Parameters without = with;
  without.config.ablation.reverse_edge = ReverseEdge::Absent;
  const HeadOutputs a = forward(with, x), b = forward(without, x);
  CHECK(a.period_softmax == b.period_softmax);
  CHECK(a.period_sigmoid == b.period_sigmoid);
  CHECK(a.dynasty_sigmoid != b.dynasty_sigmoid);
}

TEST_CASE("predict") {
  const RelationGraph g = build_graph(ding_era_spec());
  HeadOutputs out;
  out.dynasty_sigmoid = Tensor::matrix(2, 4, {0.9, 0.2, 0.1, 0.3, 0.1, 0.1, 0.1, 0.1});
  out.period_softmax = Tensor({2, 11}, 1.0 / 11.0);
  out.period_softmax.at(0, 4) = 0.5;
  const auto plain = predict(out, g);
  CHECK(plain[0].dynasty == 0);
  CHECK(plain[0].period == 4);
  CHECK(plain[1].period == 0);   // uniform: lowest index
  CHECK(plain[1].dynasty == 0);
  const auto consistent = predict(out, g, true);
  // period column 4 is the second Western Zhou period
  CHECK(g.node(g.of_kind(NodeKind::Dynasty)[consistent[0].dynasty]).name ==
        g.node(g.dynasty_of(g.of_kind(NodeKind::Period)[4])).name);
  CHECK(consistent[0].dynasty == 1);
}

TEST_CASE("ablation flags") {
  const Ablation d = Ablation::parse("");
  CHECK(d.str() == "reverse=truncated,shape=embed,char=embed,order=esc");
  const Ablation a = Ablation::parse("no-truncation,shape=concat,char=off,order=ecs");
  CHECK(a.reverse_edge == ReverseEdge::Plain);
  CHECK(a.shape == AttributeMode::Concat);
  CHECK(a.characteristic == AttributeMode::Off);
  CHECK(a.order == EmbedOrder::Ecs);
  CHECK(Ablation::parse(a.str()).str() == a.str());
  const Ablation n = Ablation::parse("no-akg");
  CHECK(n.shape == AttributeMode::Head);
  CHECK(Ablation::parse("ce-only").str() == Ablation::ce_only().str());
  CHECK_THROWS_AS(Ablation::parse("sideways"), Error);
  CHECK_THROWS_AS(Ablation::parse("shape=maybe"), Error);
}

TEST_CASE("concat mode widens the period classifier") {
  const RelationGraph g = full_sized_graph();
  const Parameters p = init_model(ModelConfig::for_graph(g, 6, 4, 1, Ablation::parse("shape=concat,char=concat")));
  CHECK(p.w2(kPeriod).rows() == 12);
  std::mt19937_64 rng(5);
  CHECK(forward(p, random_features(rng, 2, 6)).period_softmax.cols() == 11);
}

TEST_CASE("checkpoint round trip") {
  const RelationGraph g = full_sized_graph();
  const Parameters p = init_model(ModelConfig::for_graph(g, 6, 4, 9, Ablation::parse("order=ecs,char=head")));
  const auto path = std::filesystem::temp_directory_path() / "dingdate_ckpt_test.json";
  p.save(path);
  const Parameters q = Parameters::load(path);
  CHECK(q.tensors == p.tensors);
  CHECK(q.config.ablation.str() == p.config.ablation.str());
  CHECK(q.config.seed == 9);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Parameters::from_json(nlohmann::json{{"format", "other"}}), Error);
}

TEST_CASE("truncated edge: period-head gradients equal those with the edge cut") {
  std::mt19937_64 rng(6);
  RandomGraphOptions go;
  go.max_view_nodes = 12;
  const RelationGraph g = random_attribute_graph(rng, go);
  const GraphLoss gl(g);
  const Parameters p = init_model(ModelConfig::for_graph(g, 6, 5, 11));
  const Tensor x = random_features(rng, 4, 6);
  std::vector<SampleTargets> t;
  for (int i = 0; i < 4; ++i) t.push_back(random_targets(rng, g));
  const BatchLabels labels = labels_from_targets(g, t);
  const Hyperparams hp;

  auto grads_with = [&](const ForwardOptions& fo, std::vector<Tensor>& out, const Parameters& params) {
    Tape tape;
    const ForwardVars v = forward(tape, params, x, fo);
    const Gradients gr = tape.backward(objective(tape, v, params, gl, labels, hp, {}));
    out.clear();
    for (Var pv : v.params) out.push_back(gr[pv]);
  };
  Tape probe;
  const Tensor hp_value = probe.value(forward(probe, p, x).hidden[kPeriod]);

  std::vector<Tensor> truncated, injected, plain;
  grads_with({}, truncated, p);
  ForwardOptions inject;
  inject.frozen_period_hidden = &hp_value;
  grads_with(inject, injected, p);
  Parameters p_plain = p;
  p_plain.config.ablation.reverse_edge = ReverseEdge::Plain;
  grads_with({}, plain, p_plain);

  for (std::size_t slot = 0; slot < 4; ++slot) {
    const std::size_t i = Parameters::index(kPeriod, slot);
    CHECK(truncated[i] == injected[i]);
  }
  double diff = 0.0;
  for (std::size_t slot = 0; slot < 2; ++slot) {
    const std::size_t i = Parameters::index(kPeriod, slot);
    for (std::size_t k = 0; k < truncated[i].size(); ++k) diff += std::abs(truncated[i][k] - plain[i][k]);
  }
  CHECK(diff > 0.0);
}

TEST_CASE("gradient check on a few instances") {
  for (GradcheckMode mode : {GradcheckMode::Full, GradcheckMode::Detached}) {
    GradcheckOptions o;
    o.seed = 5;
    o.instances = 6;
    o.mode = mode;
    const GradcheckReport r = gradcheck(o);
    CHECK(r.instances == 6);
    CHECK(r.entries > 0);
    CHECK(r.failures == 0);
    MESSAGE(r.to_json().dump());
  }
}
