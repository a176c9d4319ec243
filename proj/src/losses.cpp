#include "dingdate/losses.hpp"

#include <cmath>
#include <memory>

#include "dingdate/error.hpp"
#include "dingdate/kernels.hpp"
#include "dingdate/parallel.hpp"

namespace dingdate {
namespace {

double clamped_log(double p) { return std::log(std::max(p, kLogFloor)); }

void require_batch(std::size_t m) {
  if (m == 0) throw Error(Errc::EmptyBatch, "loss over an empty batch");
}

void check_labels(const Tensor& probs, std::span<const std::size_t> labels) {
  if (probs.rank() != 2 || probs.rows() != labels.size()) {
    throw Error(Errc::ShapeMismatch, "probabilities " + shape_string(probs.shape()) + " vs " +
                                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t l : labels) {
    if (l >= probs.cols()) throw Error(Errc::ShapeMismatch, "label " + std::to_string(l) + " out of range");
  }
}

// -alpha (1 - p)^gamma ln p and its derivative in p.
std::pair<double, double> focal_term(double p, double gamma, double alpha) {
  const double q = 1.0 - p;
  const double lp = clamped_log(p);
  const double w = std::pow(q, gamma);
  double d = p > kLogFloor ? -w / p : 0.0;
  if (gamma != 0.0 && q > 0.0) d += gamma * std::pow(q, gamma - 1.0) * lp;
  return {-alpha * w * lp, alpha * d};
}

Var loss_node(Tape& tape, Var probs, LossValue lv) {
  auto grad = std::make_shared<Tensor>(std::move(lv.grad));
  return tape.custom({probs}, Tensor({1}, lv.value),
                     [grad](const Tensor& up, std::span<Tensor* const> g) {
                       kernels::axpy(up[0], grad->values(), g[0]->values());
                     });
}

}  // namespace

void Hyperparams::validate() const {
  auto bad = [](const char* what) { throw Error(Errc::BadConfig, what); };
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) bad("alpha1 and alpha2 must be >= 0");
  if (!(beta >= 0.0) || !(lambda >= 0.0)) bad("beta and lambda must be >= 0");
  if (!(focal_gamma >= 0.0)) bad("focal_gamma must be >= 0");
  if (!(focal_alpha > 0.0 && focal_alpha <= 1.0)) bad("focal_alpha must lie in (0, 1]");
}

LossValue loss_era(std::span<const double> pr_e) {
  require_batch(pr_e.size());
  const double m = static_cast<double>(pr_e.size());
  LossValue out{0.0, Tensor({pr_e.size()})};
  std::vector<double> terms(pr_e.size());
  for (std::size_t l = 0; l < pr_e.size(); ++l) {
    terms[l] = -clamped_log(pr_e[l]);
    out.grad[l] = pr_e[l] > kLogFloor ? -1.0 / (m * pr_e[l]) : 0.0;
  }
  out.value = kernels::pairwise_sum(terms) / m;
  return out;
}

LossValue loss_era_shape(std::span<const double> pr_e, std::span<const double> pr_es, double alpha1) {
  require_batch(pr_e.size());
  if (pr_e.size() != pr_es.size()) throw Error(Errc::ShapeMismatch, "Pr_e and Pr_es lengths differ");
  const double m = static_cast<double>(pr_e.size());
  LossValue out{0.0, Tensor({pr_e.size()})};
  std::vector<double> terms(pr_e.size());
  for (std::size_t l = 0; l < pr_e.size(); ++l) {
    const double w = std::pow(1.0 - pr_e[l], alpha1);
    terms[l] = -w * clamped_log(pr_es[l]);
    out.grad[l] = pr_es[l] > kLogFloor ? -w / (m * pr_es[l]) : 0.0;
  }
  out.value = kernels::pairwise_sum(terms) / m;
  return out;
}

double loss_era_char(std::span<const double> pr_es, const std::vector<std::vector<double>>& pr_ec,
                     double alpha2) {
  require_batch(pr_es.size());
  if (pr_es.size() != pr_ec.size()) throw Error(Errc::ShapeMismatch, "Pr_es and Pr_ec lengths differ");
  std::vector<double> terms(pr_es.size(), 0.0);
  for (std::size_t l = 0; l < pr_es.size(); ++l) {
    if (pr_ec[l].empty()) continue;
    double mean = 0.0;
    for (double p : pr_ec[l]) mean += clamped_log(p);
    mean /= static_cast<double>(pr_ec[l].size());
    terms[l] = -std::pow(1.0 - pr_es[l], alpha2) * mean;
  }
  return kernels::pairwise_sum(terms) / static_cast<double>(pr_es.size());
}

double loss_graph(double l_e, double l_es, double l_esc, double beta) { return l_e + beta * (l_es + l_esc); }

double total_loss(double l_graph, double l_ce, double l_focal, double l_ml, double lambda) {
  return l_graph + l_ce + lambda * (l_focal + l_ml);
}

LossValue cross_entropy(const Tensor& probs, std::span<const std::size_t> labels) {
  return focal_loss(probs, labels, 0.0, 1.0);
}

LossValue focal_loss(const Tensor& probs, std::span<const std::size_t> labels, double gamma, double alpha) {
  check_labels(probs, labels);
  require_batch(labels.size());
  const double m = static_cast<double>(labels.size());
  LossValue out{0.0, Tensor(probs.shape())};
  std::vector<double> terms(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto [v, d] = focal_term(probs.at(r, labels[r]), gamma, alpha);
    terms[r] = v;
    out.grad.at(r, labels[r]) = d / m;
  }
  out.value = kernels::pairwise_sum(terms) / m;
  return out;
}

LossValue ml_focal_loss(const Tensor& probs, const Tensor& labels, double gamma, double alpha) {
  if (!probs.same_shape(labels)) {
    throw Error(Errc::ShapeMismatch,
                "probabilities " + shape_string(probs.shape()) + " vs labels " + shape_string(labels.shape()));
  }
  require_batch(probs.size());
  const double cells = static_cast<double>(probs.size());
  LossValue out{0.0, Tensor(probs.shape())};
  std::vector<double> terms(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool positive = labels[i] > 0.5;
    const double pt = positive ? probs[i] : 1.0 - probs[i];
    const auto [v, d] = focal_term(pt, gamma, positive ? alpha : 1.0 - alpha);
    terms[i] = v;
    out.grad[i] = (positive ? d : -d) / cells;
  }
  out.value = kernels::pairwise_sum(terms) / cells;
  return out;
}

Var cross_entropy_node(Tape& tape, Var probs, std::vector<std::size_t> labels) {
  return loss_node(tape, probs, cross_entropy(tape.value(probs), labels));
}

Var focal_node(Tape& tape, Var probs, std::vector<std::size_t> labels, double gamma, double alpha) {
  return loss_node(tape, probs, focal_loss(tape.value(probs), labels, gamma, alpha));
}

Var ml_focal_node(Tape& tape, Var probs, Tensor labels, double gamma, double alpha) {
  return loss_node(tape, probs, ml_focal_loss(tape.value(probs), labels, gamma, alpha));
}

// ---------------------------------------------------------------------------
// GraphLoss

GraphLoss::GraphLoss(const RelationGraph& graph)
    : graph_(&graph),
      era_(graph, Scope::Era),
      era_shape_(graph, Scope::EraShape),
      era_char_(graph, Scope::EraCharacteristic),
      f_era_(era_),
      f_shape_(era_shape_),
      f_char_(era_char_) {
  for (NodeKind k : {NodeKind::Dynasty, NodeKind::Period, NodeKind::Shape, NodeKind::Characteristic}) {
    columns_[static_cast<std::size_t>(k)] = graph.of_kind(k);
  }
}

namespace {

// log Pr(target) with the 1e-12 floor, and its gradient over graph nodes.
struct LogMarginal {
  double value = 0.0;
  double marginal = 0.0;
  std::vector<double> grad;
};

LogMarginal log_marginal(const FactorizedView& fv, const NodeActivations& acts, NodeIndex target,
                         const InferenceResult& base, std::size_t n) {
  const LogMarginalGrad lg = fv.log_marginal_grad(acts, target, base);
  LogMarginal out;
  out.marginal = lg.marginal;
  out.grad.assign(n, 0.0);
  if (lg.marginal < kLogFloor) {
    out.value = std::log(kLogFloor);
    return out;
  }
  out.value = lg.log_marginal;
  const auto& nodes = fv.view().nodes();
  for (std::size_t j = 0; j < nodes.size(); ++j) out.grad[nodes[j]] = lg.grad[j];
  return out;
}

struct SampleResult {
  double era = 0.0;
  std::array<double, 2> stage{0.0, 0.0};
  std::array<double, 2> weight{0.0, 0.0};
  std::vector<double> grad;  // d(per-sample L_graph)/dz over graph nodes
};

}  // namespace

GraphLossResult GraphLoss::evaluate(const std::array<const Tensor*, 4>& logits,
                                    std::span<const SampleTargets> targets, double alpha1,
                                    double alpha2, double beta, const GraphLossOptions& options) const {
  const std::size_t m = targets.size();
  require_batch(m);
  for (std::size_t k = 0; k < 4; ++k) {
    const Tensor& t = *logits[k];
    if (t.rank() != 2 || t.rows() != m || t.cols() != columns_[k].size()) {
      throw Error(Errc::ShapeMismatch, "logits " + shape_string(t.shape()) + " for kind " +
                                           std::to_string(k) + ", expected [" + std::to_string(m) +
                                           " x " + std::to_string(columns_[k].size()) + "]");
    }
  }
  if (options.frozen_weights && options.frozen_weights->size() != m) {
    throw Error(Errc::ShapeMismatch, "frozen weights do not cover the batch");
  }
  const std::size_t n = graph_->size();

  enum class Stage { Shape, Characteristic };
  std::vector<Stage> stages;
  const std::array<Stage, 2> order = options.order == EmbedOrder::Esc
                                         ? std::array{Stage::Shape, Stage::Characteristic}
                                         : std::array{Stage::Characteristic, Stage::Shape};
  for (Stage s : order) {
    if ((s == Stage::Shape && options.use_shape) || (s == Stage::Characteristic && options.use_characteristic))
      stages.push_back(s);
  }

  std::vector<SampleResult> samples(m);
  parallel_for(m, options.threads, [&](std::size_t l) {
    std::vector<double> z(n);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto row = logits[k]->row(l);
      for (std::size_t c = 0; c < columns_[k].size(); ++c) z[columns_[k][c]] = row[c];
    }
    const NodeActivations acts = NodeActivations::from_logits(z);
    const SampleTargets& t = targets[l];
    SampleResult& r = samples[l];

    const LogMarginal e = log_marginal(f_era_, acts, t.period, f_era_.infer(acts), n);
    r.era = -e.value;
    r.grad.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) r.grad[j] = -e.grad[j];

    // Confidence of the preceding stage and d log(confidence) / dz.
    double conf = e.marginal;
    std::vector<double> dlog_conf = e.grad;

    for (std::size_t k = 0; k < stages.size(); ++k) {
      const double alpha = k == 0 ? alpha1 : alpha2;
      double value = 0.0;  // log-likelihood of this stage
      std::vector<double> dvalue(n, 0.0);
      bool empty = false;
      if (stages[k] == Stage::Shape) {
        const LogMarginal s = log_marginal(f_shape_, acts, t.shape, f_shape_.infer(acts), n);
        value = s.value;
        dvalue = s.grad;
      } else if (t.characteristics.empty()) {
        empty = true;
      } else {
        const InferenceResult base = f_char_.infer(acts);
        const double inv = 1.0 / static_cast<double>(t.characteristics.size());
        for (NodeIndex c : t.characteristics) {
          const LogMarginal lc = log_marginal(f_char_, acts, c, base, n);
          value += lc.value * inv;
          for (std::size_t j = 0; j < n; ++j) dvalue[j] += lc.grad[j] * inv;
        }
      }

      const double w = options.frozen_weights ? (*options.frozen_weights)[l][k] : std::pow(1.0 - conf, alpha);
      r.weight[k] = w;
      if (!empty) {
        r.stage[k] = -w * value;
        for (std::size_t j = 0; j < n; ++j) r.grad[j] -= beta * w * dvalue[j];
        if (options.full_gradient && alpha != 0.0 && conf < 1.0) {
          // dw/dz = -alpha (1 - c)^(alpha - 1) c dlog(c)/dz
          const double dw = -alpha * std::pow(1.0 - conf, alpha - 1.0) * conf;
          for (std::size_t j = 0; j < n; ++j) r.grad[j] -= beta * value * dw * dlog_conf[j];
        }
        conf = std::exp(value);
        dlog_conf = std::move(dvalue);
      }
    }
  });

  GraphLossResult out;
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> era(m), s1(m), s2(m);
  out.weights.resize(m);
  for (std::size_t k = 0; k < 4; ++k) out.grad[k] = Tensor({m, columns_[k].size()});
  for (std::size_t l = 0; l < m; ++l) {
    era[l] = samples[l].era;
    s1[l] = samples[l].stage[0];
    s2[l] = samples[l].stage[1];
    out.weights[l] = samples[l].weight;
    for (std::size_t k = 0; k < 4; ++k) {
      auto row = out.grad[k].row(l);
      for (std::size_t c = 0; c < columns_[k].size(); ++c) row[c] = samples[l].grad[columns_[k][c]] * inv_m;
    }
  }
  out.era = kernels::pairwise_sum(era) * inv_m;
  out.stage1 = kernels::pairwise_sum(s1) * inv_m;
  out.stage2 = kernels::pairwise_sum(s2) * inv_m;
  out.total = loss_graph(out.era, out.stage1, out.stage2, beta);
  return out;
}

Var GraphLoss::node(Tape& tape, const std::array<Var, 4>& logits, std::vector<SampleTargets> targets,
                    double alpha1, double alpha2, double beta, const GraphLossOptions& options,
                    GraphLossResult* out) const {
  auto result = std::make_shared<GraphLossResult>(
      evaluate({&tape.value(logits[0]), &tape.value(logits[1]), &tape.value(logits[2]), &tape.value(logits[3])},
               targets, alpha1, alpha2, beta, options));
  if (out) *out = *result;
  return tape.custom({logits[0], logits[1], logits[2], logits[3]}, Tensor({1}, result->total),
                     [result](const Tensor& up, std::span<Tensor* const> g) {
                       for (std::size_t k = 0; k < 4; ++k) kernels::axpy(up[0], result->grad[k].values(), g[k]->values());
                     });
}

}  // namespace dingdate
