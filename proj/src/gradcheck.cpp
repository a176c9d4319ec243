#include "dingdate/gradcheck.hpp"

#include <cmath>
#include <random>

#include "dingdate/model.hpp"
#include "dingdate/random_graph.hpp"

namespace dingdate {
namespace {

constexpr double kReluMargin = 1e-3;
constexpr double kRelFloor = 1e-4;  // entries smaller than this only count toward the absolute error

struct Instance {
  RelationGraph graph;
  Parameters params;
  Tensor features;
  std::vector<SampleTargets> targets;
};

bool near_kink(const Parameters& params, const Tensor& features) {
  Tape tape;
  const ForwardVars v = forward(tape, params, features);
  for (Var pre : v.pre_hidden)
    for (double x : tape.value(pre).values())
      if (std::abs(x) < kReluMargin) return true;
  return false;
}

Instance make_instance(std::mt19937_64& rng, const GradcheckOptions& o) {
  RandomGraphOptions go;
  go.max_view_nodes = 12;
  go.max_periods = 4;
  RelationGraph graph = random_attribute_graph(rng, go);
  Ablation ab;
  ab.order = std::bernoulli_distribution(0.5)(rng) ? EmbedOrder::Esc : EmbedOrder::Ecs;
  ab.reverse_edge = o.mode == GradcheckMode::Full ? ReverseEdge::Plain : ReverseEdge::Truncated;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    const ModelConfig cfg = ModelConfig::for_graph(graph, o.feature_dim, o.hidden_dim, rng(), ab);
    Parameters params = init_model(cfg);
    // Non-zero biases so every term of the gradient is exercised.
    for (std::size_t i = 1; i < params.tensors.size(); i += 2)
      for (double& b : params.tensors[i].values()) b = 0.3 * normal(rng);
    Tensor features({o.batch, o.feature_dim});
    for (double& x : features.values()) x = normal(rng);
    if (near_kink(params, features)) continue;
    std::vector<SampleTargets> targets;
    for (std::size_t l = 0; l < o.batch; ++l) targets.push_back(random_targets(rng, graph));
    return {std::move(graph), std::move(params), std::move(features), std::move(targets)};
  }
}

struct Frozen {
  Tensor period_hidden;
  std::vector<std::array<double, 2>> stage_weights;
};

class Checker {
 public:
  Checker(const GradcheckOptions& o, GradcheckReport& r) : o_(o), r_(r) {}

  void compare(double analytic, double numeric) {
    ++r_.entries;
    const double diff = std::abs(analytic - numeric);
    const double rel = diff / std::max(std::abs(analytic), std::abs(numeric));
    r_.max_abs_error = std::max(r_.max_abs_error, diff);
    if (std::max(std::abs(analytic), std::abs(numeric)) >= kRelFloor) r_.max_rel_error = std::max(r_.max_rel_error, rel);
    if (diff > o_.abs_tol && rel > o_.rel_tol) ++r_.failures;
  }

 private:
  const GradcheckOptions& o_;
  GradcheckReport& r_;
};

}  // namespace

nlohmann::json GradcheckReport::to_json() const {
  return {{"mode", mode == GradcheckMode::Full ? "full" : "detached"},
          {"instances", instances},
          {"entries", entries},
          {"failures", failures},
          {"max_rel_error", max_rel_error},
          {"max_abs_error", max_abs_error},
          {"passed", passed()}};
}

GradcheckReport gradcheck(const GradcheckOptions& o) {
  GradcheckReport report;
  report.mode = o.mode;
  Checker check(o, report);
  std::mt19937_64 rng(o.seed);
  const Hyperparams& hp = o.hyper;
  const bool detached = o.mode == GradcheckMode::Detached;

  for (std::size_t n = 0; n < o.instances; ++n) {
    Instance in = make_instance(rng, o);
    const GraphLoss graph_loss(in.graph);
    const BatchLabels labels = labels_from_targets(in.graph, in.targets);
    ObjectiveOptions base_opts;
    base_opts.full_gradient = !detached;

    Tape tape;
    const ForwardVars vars = forward(tape, in.params, in.features);
    LossBreakdown breakdown;
    const Var loss = objective(tape, vars, in.params, graph_loss, labels, hp, base_opts, &breakdown);
    const Gradients grads = tape.backward(loss);

    Frozen frozen{tape.value(vars.hidden[kPeriod]), breakdown.stage_weights};
    ObjectiveOptions fd_opts = base_opts;
    ForwardOptions fwd_opts;
    if (detached) {
      fd_opts.frozen_stage_weights = &frozen.stage_weights;
      fwd_opts.frozen_period_hidden = &frozen.period_hidden;
    }

    auto loss_of_params = [&](const Parameters& p) {
      Tape t;
      const ForwardVars v = forward(t, p, in.features, fwd_opts);
      return t.value(objective(t, v, p, graph_loss, labels, hp, fd_opts))[0];
    };
    for (std::size_t i = 0; i < in.params.tensors.size(); ++i) {
      for (std::size_t k = 0; k < in.params.tensors[i].size(); ++k) {
        Parameters p = in.params;
        const double saved = p.tensors[i][k];
        p.tensors[i][k] = saved + o.step;
        const double up = loss_of_params(p);
        p.tensors[i][k] = saved - o.step;
        const double down = loss_of_params(p);
        check.compare(grads[vars.params[i]][k], (up - down) / (2 * o.step));
      }
    }

    std::array<Tensor, 4> logits;
    for (std::size_t h = 0; h < 4; ++h) logits[h] = tape.value(vars.logits[h]);
    auto loss_of_logits = [&](const std::array<Tensor, 4>& z) {
      Tape t;
      const ForwardVars v = project_logits(t, z);
      return t.value(objective(t, v, in.params, graph_loss, labels, hp, fd_opts))[0];
    };
    for (std::size_t h = 0; h < 4; ++h) {
      for (std::size_t k = 0; k < logits[h].size(); ++k) {
        const double saved = logits[h][k];
        logits[h][k] = saved + o.step;
        const double up = loss_of_logits(logits);
        logits[h][k] = saved - o.step;
        const double down = loss_of_logits(logits);
        logits[h][k] = saved;
        check.compare(grads[vars.logits[h]][k], (up - down) / (2 * o.step));
      }
    }
    ++report.instances;
  }
  return report;
}

}  // namespace dingdate
