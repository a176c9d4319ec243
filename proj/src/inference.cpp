#include "dingdate/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dingdate/error.hpp"

namespace dingdate {
namespace {

const double kMaxLogit = std::log((1.0 - kActivationEpsilon) / kActivationEpsilon);

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

// ---------------------------------------------------------------------------
// NodeActivations

NodeActivations NodeActivations::from_probabilities(std::span<const double> p) {
  NodeActivations acts;
  acts.logits_.reserve(p.size());
  acts.in_range_.reserve(p.size());
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::BadConfig, "activation outside [0, 1]");
    const double c = std::clamp(v, kActivationEpsilon, 1.0 - kActivationEpsilon);
    acts.logits_.push_back(std::clamp(std::log(c) - std::log1p(-c), -kMaxLogit, kMaxLogit));
    acts.in_range_.push_back(c == v ? 1 : 0);
  }
  return acts;
}

NodeActivations NodeActivations::from_logits(std::span<const double> z) {
  NodeActivations acts;
  acts.logits_.reserve(z.size());
  acts.in_range_.reserve(z.size());
  for (double v : z) {
    const double c = std::clamp(v, -kMaxLogit, kMaxLogit);
    acts.logits_.push_back(c);
    acts.in_range_.push_back(c == v ? 1 : 0);
  }
  return acts;
}

double NodeActivations::probability(NodeIndex i) const { return sigmoid(logits_.at(i)); }

// ---------------------------------------------------------------------------
// Closed forms

FactorizedView::FactorizedView(const GraphView& view) : view_(&view) {
  const RelationGraph& g = view.graph();
  kind_.reserve(view.size());
  for (NodeIndex n : view.nodes()) kind_.push_back(g.node(n).kind);
  for (NodeIndex d : g.of_kind(NodeKind::Dynasty)) dynasty_pos_.push_back(*view.position(d));
  for (NodeIndex p : g.of_kind(NodeKind::Period)) {
    const NodeIndex d = g.dynasty_of(p);
    if (g.excludes(d, p)) continue;
    Branch b{*view.position(d), *view.position(p), {}};
    for (NodeIndex a : g.children(p)) {
      auto pos = view.position(a);
      if (!pos || g.excludes(a, p) || g.excludes(a, d)) continue;
      b.attribute_pos.push_back(*pos);
    }
    branches_.push_back(std::move(b));
  }
}

InferenceResult FactorizedView::run(const NodeActivations& acts,
                                    std::optional<std::size_t> given) const {
  const GraphView& view = *view_;
  if (acts.size() != view.graph().size()) {
    throw Error(Errc::LengthMismatch, "activations cover " + std::to_string(acts.size()) +
                                          " nodes, graph has " + std::to_string(view.graph().size()));
  }
  const std::size_t n = view.size();
  std::vector<double> z(n);
  double base = 0.0;  // log prod_i (1 - p_i)
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = acts.logit(view.nodes()[i]);
    base -= softplus(z[i]);
  }
  const Scope scope = view.scope();
  const std::optional<NodeKind> given_kind =
      given ? std::optional<NodeKind>(kind_[*given]) : std::nullopt;
  const bool forced_attr =
      given && (kind_[*given] == NodeKind::Shape || kind_[*given] == NodeKind::Characteristic);

  // Log mass of each branch's attribute sub-sum (0 for the era view).
  auto attribute_mass = [&](const Branch& b, bool& admissible) {
    admissible = true;
    if (scope == Scope::Era) return 0.0;
    if (forced_attr) {
      admissible = std::find(b.attribute_pos.begin(), b.attribute_pos.end(), *given) !=
                   b.attribute_pos.end();
      if (!admissible) return 0.0;
    }
    if (scope == Scope::EraShape) {
      if (forced_attr) return z[*given];
      double mx = 0.0;
      for (std::size_t s : b.attribute_pos) mx = std::max(mx, z[s]);
      double acc = std::exp(-mx);
      for (std::size_t s : b.attribute_pos) acc += std::exp(z[s] - mx);
      return mx + std::log(acc);
    }
    double acc = 0.0;
    for (std::size_t c : b.attribute_pos) {
      acc += (forced_attr && c == *given) ? z[c] : softplus(z[c]);
    }
    return acc;
  };

  struct Term {
    enum class Kind { Empty, Dynasty, Branch } kind;
    std::size_t index;
    double log_weight;
    double attr_mass;
  };
  std::vector<Term> terms;
  terms.reserve(1 + dynasty_pos_.size() + branches_.size());

  if (!given) terms.push_back({Term::Kind::Empty, 0, 0.0, 0.0});
  for (std::size_t k = 0; k < dynasty_pos_.size(); ++k) {
    const std::size_t d = dynasty_pos_[k];
    if (!given || (*given_kind == NodeKind::Dynasty && *given == d)) {
      terms.push_back({Term::Kind::Dynasty, k, z[d], 0.0});
    }
  }
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const Branch& b = branches_[k];
    if (given_kind == NodeKind::Dynasty && b.dynasty_pos != *given) continue;
    if (given_kind == NodeKind::Period && b.period_pos != *given) continue;
    bool admissible = true;
    const double mass = attribute_mass(b, admissible);
    if (!admissible) continue;
    terms.push_back({Term::Kind::Branch, k, z[b.dynasty_pos] + z[b.period_pos] + mass, mass});
  }

  std::vector<double> lw;
  lw.reserve(terms.size());
  for (const Term& t : terms) lw.push_back(t.log_weight);
  const double log_total = log_sum_exp(lw);

  InferenceResult result;
  result.log_z = base + log_total;
  result.marginals.assign(n, 0.0);
  if (!std::isfinite(log_total)) return result;  // nothing admissible: mass 0

  auto& m = result.marginals;
  for (const Term& t : terms) {
    const double w = std::exp(t.log_weight - log_total);
    switch (t.kind) {
      case Term::Kind::Empty:
        break;
      case Term::Kind::Dynasty:
        m[dynasty_pos_[t.index]] += w;
        break;
      case Term::Kind::Branch: {
        const Branch& b = branches_[t.index];
        m[b.dynasty_pos] += w;
        m[b.period_pos] += w;
        if (scope == Scope::Era) break;
        if (scope == Scope::EraShape) {
          if (forced_attr) {
            m[*given] += w;
          } else {
            for (std::size_t s : b.attribute_pos) m[s] += w * std::exp(z[s] - t.attr_mass);
          }
        } else {
          for (std::size_t c : b.attribute_pos) {
            m[c] += (forced_attr && c == *given) ? w : w * sigmoid(z[c]);
          }
        }
        break;
      }
    }
  }
  for (double& v : m) v = std::clamp(v, 0.0, 1.0);
  return result;
}

InferenceResult FactorizedView::infer(const NodeActivations& acts) const { return run(acts, std::nullopt); }

InferenceResult FactorizedView::infer_given(const NodeActivations& acts, NodeIndex given) const {
  auto pos = view_->position(given);
  if (!pos) throw Error(Errc::NodeNotInView, view_->graph().node(given).name);
  return run(acts, *pos);
}

LogMarginalGrad FactorizedView::log_marginal_grad(const NodeActivations& acts, NodeIndex target,
                                                  const InferenceResult& unconditioned) const {
  const InferenceResult cond = infer_given(acts, target);
  LogMarginalGrad out;
  out.log_marginal = cond.log_z - unconditioned.log_z;
  out.marginal = std::exp(out.log_marginal);
  out.grad.resize(view_->size());
  for (std::size_t j = 0; j < view_->size(); ++j) {
    out.grad[j] = acts.in_range(view_->nodes()[j])
                      ? cond.marginals[j] - unconditioned.marginals[j]
                      : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free-function API

double log_joint_probability(const GraphView& view, const NodeActivations& acts, const Assignment& a) {
  if (!is_legal(view, a)) throw Error(Errc::IllegalAssignment, a.str());
  double acc = 0.0;
  for (std::size_t i = 0; i < view.size(); ++i) {
    const double z = acts.logit(view.nodes()[i]);
    // log p = -softplus(-z); log(1 - p) = -softplus(z)
    acc -= a.bits[i] ? softplus(-z) : softplus(z);
  }
  return acc;
}

double joint_probability(const GraphView& view, const NodeActivations& acts, const Assignment& a) {
  return std::exp(log_joint_probability(view, acts, a));
}

double partition_function(const GraphView& view, const NodeActivations& acts) {
  return FactorizedView(view).infer(acts).log_z;
}

InferenceResult infer(const GraphView& view, const NodeActivations& acts) {
  return FactorizedView(view).infer(acts);
}

double marginal(const GraphView& view, const NodeActivations& acts, NodeIndex node) {
  auto pos = view.position(node);
  if (!pos) throw Error(Errc::NodeNotInView, node < view.graph().size() ? view.graph().node(node).name
                                                                         : std::to_string(node));
  return FactorizedView(view).infer(acts).marginals[*pos];
}

InferenceResult infer_given(const GraphView& view, const NodeActivations& acts, NodeIndex given) {
  return FactorizedView(view).infer_given(acts, given);
}

LogMarginalGrad log_marginal_grad(const GraphView& view, const NodeActivations& acts,
                                  NodeIndex target, const InferenceResult& unconditioned) {
  return FactorizedView(view).log_marginal_grad(acts, target, unconditioned);
}

InferenceResult oracle_inference(const GraphView& view, const NodeActivations& acts, std::size_t cap) {
  const std::vector<Assignment> legal = enumerate_legal(view, cap);
  std::vector<double> lw;
  lw.reserve(legal.size());
  for (const Assignment& a : legal) lw.push_back(log_joint_probability(view, acts, a));
  InferenceResult r;
  r.log_z = log_sum_exp(lw);
  r.marginals.assign(view.size(), 0.0);
  for (std::size_t k = 0; k < legal.size(); ++k) {
    const double w = std::exp(lw[k] - r.log_z);
    for (std::size_t i = 0; i < view.size(); ++i) {
      if (legal[k].bits[i]) r.marginals[i] += w;
    }
  }
  return r;
}

}  // namespace dingdate
