#pragma once
// Adam with cosine annealing, early stopping on validation period OA, and
// evaluation metrics (OA, macro AU(PRC), per-class precision/recall).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dingdate/data.hpp"
#include "dingdate/losses.hpp"
#include "dingdate/model.hpp"
#include "dingdate/tensor.hpp"
#include "json.hpp"

namespace dingdate {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 64;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  AdamOptions adam;
  std::size_t patience = 10;  // epochs without a better validation period OA
  Hyperparams hyper;
  std::size_t hidden_dim = 64;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool full_gradient = false;       // through the graph-loss stage weights
  bool consistent_dynasty = false;  // dynasty from the predicted period

  /// Throws ConfigError.
  void validate() const;
  /// Missing keys keep their defaults. Throws ConfigError.
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update. State is lazily sized on the first call.
/// Throws ShapeMismatch.
void adam_step(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& state, double lr,
               const AdamOptions& options = {});

/// 0.5 lr_max (1 + cos(pi t / T)), clamped to [0, lr_max].
double lr_schedule(double t, double total, double lr_max);

struct ClassMetrics {
  std::string name;
  std::size_t support = 0;
  std::size_t predicted = 0;
  double precision = 0.0;  // 0 when nothing was predicted
  double recall = 0.0;     // 0 when support is 0
};

struct Metrics {
  std::size_t samples = 0;
  double dynasty_oa = 0.0;
  double period_oa = 0.0;
  double auprc_dynasty = 0.0;
  double auprc_period = 0.0;
  std::vector<ClassMetrics> dynasty_classes;
  std::vector<ClassMetrics> period_classes;

  nlohmann::ordered_json to_json() const;
  /// One row per class: level,class,support,predicted,precision,recall.
  std::string classes_csv() const;
};

/// Macro AU(PRC): per class with positives, the one-vs-rest curve over
/// distinct score thresholds, precision interpolated as the best precision
/// at recall >= r on the grid r = 0, 0.01, ..., 1, averaged over classes and
/// integrated with the trapezoid rule. Classes without positives are skipped.
double auprc_macro(const Tensor& scores, std::span<const std::size_t> labels);

/// Per-class precision and recall of hard predictions.
std::vector<ClassMetrics> class_metrics(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                                        const std::vector<std::string>& names);

/// Rows of `indices` stacked into [n x feature_dim].
Tensor feature_matrix(const Dataset& dataset, std::span<const std::size_t> indices);

/// Throws EmptySplit.
Metrics evaluate(const Parameters& params, const Dataset& dataset, std::span<const std::size_t> indices,
                 bool consistent_dynasty = false);
Metrics evaluate(const Parameters& params, const Dataset& dataset, Split split, bool consistent_dynasty = false);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;  // sample-weighted means over the epoch
  Metrics val;
};

struct TrainResult {
  Parameters params;  // best validation epoch
  std::size_t best_epoch = 0;
  double best_val_period_oa = -1.0;
  bool early_stopped = false;
  std::vector<EpochRecord> history;

  /// epoch,lr,loss_total,loss_graph,loss_era,loss_stage1,loss_stage2,
  /// loss_ce,loss_focal,loss_ml_focal,val_dynasty_oa,val_period_oa,
  /// val_auprc_dynasty,val_auprc_period
  std::string history_csv() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains a fresh model on the Train split, early-stopping on Val. Throws
/// ConfigError, EmptySplit, BadConfig.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const Ablation& ablation,
                  const EpochCallback& on_epoch = {});

/// Same, starting from given parameters.
TrainResult train(const Dataset& dataset, Parameters init, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Fixed-format number for CSV output.
std::string format_number(double x);

}  // namespace dingdate
