#pragma once
// Exact inference over the legal assignments of a GraphView.
//
// The unnormalized joint of an assignment a is the Bernoulli product
//   prod_{a_i = 1} p_i * prod_{a_i = 0} (1 - p_i)
// restricted to legal a. Writing odds_i = p_i / (1 - p_i) = exp(z_i), every
// legal assignment is either empty, a lone dynasty, or a (dynasty, period)
// branch with some attributes switched on, which gives the closed forms
//
//   Era:               S = 1 + sum_d o_d + sum_p o_d(p) o_p
//   EraShape:          S = 1 + sum_d o_d + sum_p o_d(p) o_p (1 + sum_{s in p} o_s)
//   EraCharacteristic: S = 1 + sum_d o_d + sum_p o_d(p) o_p prod_{c in p} (1 + o_c)
//
// with Z = S * prod_i (1 - p_i). Everything is evaluated in log space.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dingdate/graph.hpp"

namespace dingdate {

inline constexpr double kActivationEpsilon = 1e-7;

/// Per-node sigmoid activations over the whole graph, indexed by NodeIndex.
/// Stored as logits clamped to [logit(eps), logit(1 - eps)].
class NodeActivations {
 public:
  static NodeActivations from_probabilities(std::span<const double> p);
  static NodeActivations from_logits(std::span<const double> z);

  std::size_t size() const noexcept { return logits_.size(); }
  double probability(NodeIndex i) const;
  /// Clamped logit, i.e. log odds.
  double logit(NodeIndex i) const { return logits_.at(i); }
  /// False where the clamp is active (the activation carries no gradient there).
  bool in_range(NodeIndex i) const { return in_range_.at(i) != 0; }

 private:
  std::vector<double> logits_;
  std::vector<std::uint8_t> in_range_;
};

struct InferenceResult {
  double log_z = 0.0;
  /// Marginal Pr(node = 1), by view position.
  std::vector<double> marginals;
};

/// Log of the unnormalized joint of a legal assignment. Throws IllegalAssignment.
double log_joint_probability(const GraphView& view, const NodeActivations& acts,
                             const Assignment& a);
double joint_probability(const GraphView& view, const NodeActivations& acts, const Assignment& a);

/// log Z via the factorized closed form.
double partition_function(const GraphView& view, const NodeActivations& acts);

/// log Z and every marginal via the closed form.
InferenceResult infer(const GraphView& view, const NodeActivations& acts);

/// Pr(node = 1). Throws NodeNotInView.
double marginal(const GraphView& view, const NodeActivations& acts, NodeIndex node);

/// Restricts the sum to assignments with `given` active: `log_z` is the log of
/// that restricted mass (so log Pr(given) = log_z - partition_function) and the
/// marginals are Pr(j = 1 | given = 1).
InferenceResult infer_given(const GraphView& view, const NodeActivations& acts, NodeIndex given);

/// Gradient of log Pr(target = 1) with respect to the logits of the view's
/// nodes (by view position): Pr(j | target) - Pr(j), zero where clamped.
/// Also returns log Pr(target = 1).
struct LogMarginalGrad {
  double log_marginal = 0.0;
  double marginal = 0.0;
  std::vector<double> grad;
};
/// Precomputed branch structure of a view; reuse it across many evaluations.
class FactorizedView {
 public:
  explicit FactorizedView(const GraphView& view);

  const GraphView& view() const noexcept { return *view_; }
  InferenceResult infer(const NodeActivations& acts) const;
  InferenceResult infer_given(const NodeActivations& acts, NodeIndex given) const;
  LogMarginalGrad log_marginal_grad(const NodeActivations& acts, NodeIndex target,
                                    const InferenceResult& unconditioned) const;

 private:
  struct Branch {
    std::size_t dynasty_pos;
    std::size_t period_pos;
    std::vector<std::size_t> attribute_pos;
  };

  InferenceResult run(const NodeActivations& acts, std::optional<std::size_t> given) const;

  const GraphView* view_;
  std::vector<std::size_t> dynasty_pos_;
  std::vector<Branch> branches_;
  std::vector<NodeKind> kind_;  // by view position
};

/// Brute-force summation over enumerate_legal. Throws TooLarge above `cap`.
InferenceResult oracle_inference(const GraphView& view, const NodeActivations& acts,
                                 std::size_t cap = kDefaultEnumerationCap);

LogMarginalGrad log_marginal_grad(const GraphView& view, const NodeActivations& acts,
                                  NodeIndex target, const InferenceResult& unconditioned);

}  // namespace dingdate
