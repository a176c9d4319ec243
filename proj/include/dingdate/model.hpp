#pragma once
// The four-head network. Dynasty and period heads exchange hidden features
// between their two layers; shape and characteristic heads are independent.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dingdate/graph.hpp"
#include "dingdate/losses.hpp"
#include "dingdate/tensor.hpp"
#include "json.hpp"

namespace dingdate {

/// How dynasty features receive period features after layer 1.
enum class ReverseEdge : std::uint8_t {
  Truncated,  // h_d + stop_grad(h_p)
  Plain,      // h_d + h_p
  Absent,     // h_d
};

/// Role of an attribute head. Off: unused. Head: trained on its own loss.
/// Concat: head features also feed the period classifier. Embed: head
/// activations also enter the relation-graph loss.
enum class AttributeMode : std::uint8_t { Off, Head, Concat, Embed };

struct Ablation {
  bool fusion = true;  // period features receive dynasty features
  ReverseEdge reverse_edge = ReverseEdge::Truncated;
  bool akg = true;
  AttributeMode shape = AttributeMode::Embed;
  AttributeMode characteristic = AttributeMode::Embed;
  EmbedOrder order = EmbedOrder::Esc;

  /// Applies a comma-separated flag list to the defaults, left to right:
  /// full, ce-only, no-fusion, no-truncation (same as reverse=plain),
  /// reverse=truncated|plain|absent, no-akg, shape=MODE, char=MODE,
  /// order=esc|ecs. Without the graph loss, embed modes act as head.
  /// Throws ConfigError.
  static Ablation parse(std::string_view flags);
  /// Period classifier trained with cross entropy alone.
  static Ablation ce_only();
  std::string str() const;
};

std::string_view to_string(ReverseEdge e) noexcept;
std::string_view to_string(AttributeMode m) noexcept;
std::string_view to_string(EmbedOrder o) noexcept;

struct ModelConfig {
  std::size_t feature_dim = 0;
  std::size_t hidden_dim = 64;
  std::size_t n_dynasties = 0;
  std::size_t n_periods = 0;
  std::size_t n_shapes = 0;
  std::size_t n_characteristics = 0;
  std::uint64_t seed = 0;
  Ablation ablation;

  /// Counts taken from the graph.
  static ModelConfig for_graph(const RelationGraph& graph, std::size_t feature_dim,
                               std::size_t hidden_dim, std::uint64_t seed, Ablation ablation = {});
  /// Throws BadConfig.
  void validate() const;
  /// Throws BadConfig when the counts disagree with the graph.
  void check_graph(const RelationGraph& graph) const;
};

enum Head : std::size_t { kDynasty = 0, kPeriod = 1, kShape = 2, kCharacteristic = 3 };

/// Flat list of parameter tensors in a fixed order: for each head
/// (dynasty, period, shape, characteristic) W1, b1, W2, b2.
struct Parameters {
  ModelConfig config;
  std::vector<Tensor> tensors;

  static std::size_t index(Head head, std::size_t slot) { return 4 * head + slot; }
  const Tensor& w1(Head h) const { return tensors[index(h, 0)]; }
  const Tensor& w2(Head h) const { return tensors[index(h, 2)]; }
  std::size_t count() const;
  static std::vector<std::string> names();

  nlohmann::json to_json() const;
  static Parameters from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Parameters load(const std::filesystem::path& path);
};

/// Xavier-uniform weights, zero biases. Throws BadConfig.
Parameters init_model(const ModelConfig& config);

struct HeadOutputs {
  Tensor dynasty_sigmoid;
  Tensor period_sigmoid;
  Tensor period_softmax;
  Tensor shape_sigmoid;
  Tensor shape_softmax;
  Tensor char_sigmoid;
};

/// Vars recorded by a forward pass.
struct ForwardVars {
  std::vector<Var> params;     // same order as Parameters::tensors
  std::array<Var, 4> pre_hidden;  // layer-1 pre-activations
  std::array<Var, 4> hidden;      // layer-1 activations before fusion
  std::array<Var, 4> logits;   // layer-2 outputs
  Var dynasty_sigmoid, period_sigmoid, period_softmax, shape_sigmoid, shape_softmax, char_sigmoid;
};

struct ForwardOptions {
  /// Replaces the period features added into the dynasty head with this
  /// constant (no edge on the tape). Used to check the truncated edge and
  /// for surrogate finite differences.
  const Tensor* frozen_period_hidden = nullptr;
};

ForwardVars forward(Tape& tape, const Parameters& params, const Tensor& features,
                    const ForwardOptions& options = {});
HeadOutputs forward(const Parameters& params, const Tensor& features);
/// Records only the projections on top of given logits (params and hidden
/// vars are left empty). Lets the objective be differentiated in the logits.
ForwardVars project_logits(Tape& tape, const std::array<Tensor, 4>& logits);
HeadOutputs outputs_of(const Tape& tape, const ForwardVars& vars);

struct Prediction {
  std::size_t dynasty = 0;  // column in the dynasty head
  std::size_t period = 0;
};

/// Argmax per head, lowest index on ties. In consistency mode the dynasty is
/// the parent of the predicted period.
std::vector<Prediction> predict(const HeadOutputs& outputs, const RelationGraph& graph,
                                bool consistent = false);

/// Labels of a batch, as head columns.
struct BatchLabels {
  std::vector<std::size_t> period;
  std::vector<std::size_t> shape;
  Tensor characteristics;           // [batch x k] 0/1
  std::vector<SampleTargets> graph; // graph node indices
};

/// Head columns derived from graph targets.
BatchLabels labels_from_targets(const RelationGraph& graph, std::vector<SampleTargets> targets);

struct LossBreakdown {
  double graph = 0.0;
  double era = 0.0, stage1 = 0.0, stage2 = 0.0;
  double ce = 0.0, focal = 0.0, ml_focal = 0.0;
  double total = 0.0;
  std::vector<std::array<double, 2>> stage_weights;
};

struct ObjectiveOptions {
  bool full_gradient = false;  // through the graph-loss stage weights
  const std::vector<std::array<double, 2>>* frozen_stage_weights = nullptr;
  std::size_t threads = 1;
};

/// Records the total objective under the model's ablation on `tape`; returns the scalar.
Var objective(Tape& tape, const ForwardVars& vars, const Parameters& params,
              const GraphLoss& graph_loss, const BatchLabels& labels, const Hyperparams& hp,
              const ObjectiveOptions& options, LossBreakdown* breakdown = nullptr);

}  // namespace dingdate
