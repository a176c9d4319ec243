#pragma once
// Classification losses and the relation-graph losses of the era, era-shape
// and era-characteristic views.
//
// Value functions take probabilities and return the loss plus its gradient
// with respect to those probabilities. GraphLoss works on head logits, where
// the gradient of a log marginal has the closed form Pr(j | i) - Pr(j).

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dingdate/graph.hpp"
#include "dingdate/inference.hpp"
#include "dingdate/tensor.hpp"

namespace dingdate {

inline constexpr double kLogFloor = 1e-12;

struct Hyperparams {
  double alpha1 = 2.0;
  double alpha2 = 3.0;
  double beta = 0.001;
  double lambda = 0.1;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;

  /// Throws BadConfig.
  void validate() const;
};

struct LossValue {
  double value = 0.0;
  Tensor grad;  // same shape as the probabilities passed in
};

// Era loss: -(1/m) sum ln Pr_e.
LossValue loss_era(std::span<const double> pr_e);
// Era-shape loss: -(1/m) sum (1 - Pr_e)^a1 ln Pr_es. grad covers Pr_es only (detached factor).
LossValue loss_era_shape(std::span<const double> pr_e, std::span<const double> pr_es, double alpha1);
// Era-characteristic loss with the observed characteristic set: mean of ln Pr_ec over the set,
// empty sets contribute 0. grad is not produced (ragged input).
double loss_era_char(std::span<const double> pr_es, const std::vector<std::vector<double>>& pr_ec,
                     double alpha2);
// Graph loss: l_e + beta (l_es + l_esc).
double loss_graph(double l_e, double l_es, double l_esc, double beta);
// Total: graph + ce + lambda (focal + ml_focal).
double total_loss(double l_graph, double l_ce, double l_focal, double l_ml, double lambda);

/// Mean -ln p[label] over rows of `probs`.
LossValue cross_entropy(const Tensor& probs, std::span<const std::size_t> labels);
/// Mean -alpha (1 - p_t)^gamma ln p_t over rows.
LossValue focal_loss(const Tensor& probs, std::span<const std::size_t> labels, double gamma,
                     double alpha);
/// Binary focal loss averaged over every (sample, class) cell. Positives are
/// weighted by alpha, negatives by 1 - alpha.
LossValue ml_focal_loss(const Tensor& probs, const Tensor& labels, double gamma, double alpha);

// Tape nodes chaining the losses above onto probability outputs.
Var cross_entropy_node(Tape& tape, Var probs, std::vector<std::size_t> labels);
Var focal_node(Tape& tape, Var probs, std::vector<std::size_t> labels, double gamma, double alpha);
Var ml_focal_node(Tape& tape, Var probs, Tensor labels, double gamma, double alpha);

// ---------------------------------------------------------------------------
// Graph loss

/// Which attribute view follows the era view. Esc: era -> shape -> characteristic.
enum class EmbedOrder : std::uint8_t { Esc, Ecs };

/// Observed labels of one sample as graph node indices.
struct SampleTargets {
  NodeIndex period = 0;
  NodeIndex shape = 0;
  std::vector<NodeIndex> characteristics;
};

struct GraphLossOptions {
  bool use_shape = true;           // include the era-shape stage
  bool use_characteristic = true;  // include the era-characteristic stage
  EmbedOrder order = EmbedOrder::Esc;
  /// Differentiate through the (1 - Pr)^alpha stage weights as well.
  bool full_gradient = false;
  /// Per-sample stage weights to use instead of computing them. Only
  /// meaningful with full_gradient off; used for surrogate finite differences.
  const std::vector<std::array<double, 2>>* frozen_weights = nullptr;
  std::size_t threads = 1;
};

struct GraphLossResult {
  double era = 0.0;     // L_e
  double stage1 = 0.0;  // first attribute stage (L_es under Esc)
  double stage2 = 0.0;  // second attribute stage (L_esc under Esc)
  double total = 0.0;   // L_e + beta (stage1 + stage2)
  std::vector<std::array<double, 2>> weights;  // per-sample stage weights
  // d total / d logits, one [batch x count] tensor per node kind.
  std::array<Tensor, 4> grad;
};

/// Evaluates the era, stage and graph losses from per-kind head logits. Logit columns follow
/// RelationGraph::of_kind order.
class GraphLoss {
 public:
  explicit GraphLoss(const RelationGraph& graph);
  // The factorized views point into this object.
  GraphLoss(const GraphLoss&) = delete;
  GraphLoss& operator=(const GraphLoss&) = delete;

  const RelationGraph& graph() const noexcept { return *graph_; }

  /// logits: dynasty, period, shape, characteristic, each [batch x count].
  GraphLossResult evaluate(const std::array<const Tensor*, 4>& logits,
                           std::span<const SampleTargets> targets, double alpha1, double alpha2,
                           double beta, const GraphLossOptions& options = {}) const;

  /// Records the loss on a tape as a scalar node over the four logit vars.
  Var node(Tape& tape, const std::array<Var, 4>& logits, std::vector<SampleTargets> targets,
           double alpha1, double alpha2, double beta, const GraphLossOptions& options,
           GraphLossResult* out = nullptr) const;

 private:
  const RelationGraph* graph_;
  GraphView era_, era_shape_, era_char_;
  FactorizedView f_era_, f_shape_, f_char_;
  std::array<std::vector<NodeIndex>, 4> columns_;  // kind -> graph indices
};

}  // namespace dingdate
