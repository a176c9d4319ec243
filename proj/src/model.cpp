#include "dingdate/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dingdate/error.hpp"

namespace dingdate {
namespace {

constexpr const char* kCheckpointFormat = "dingdate-checkpoint";
constexpr int kCheckpointVersion = 1;

std::vector<std::string> split_flags(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

AttributeMode parse_mode(const std::string& v) {
  if (v == "off") return AttributeMode::Off;
  if (v == "head") return AttributeMode::Head;
  if (v == "concat") return AttributeMode::Concat;
  if (v == "embed") return AttributeMode::Embed;
  throw Error(Errc::ConfigError, "unknown attribute mode '" + v + "'");
}

std::size_t concat_width(const ModelConfig& c) {
  std::size_t parts = 1;
  parts += c.ablation.shape == AttributeMode::Concat;
  parts += c.ablation.characteristic == AttributeMode::Concat;
  return parts * c.hidden_dim;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

nlohmann::json config_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim},
          {"hidden_dim", c.hidden_dim},
          {"n_dynasties", c.n_dynasties},
          {"n_periods", c.n_periods},
          {"n_shapes", c.n_shapes},
          {"n_characteristics", c.n_characteristics},
          {"seed", c.seed},
          {"ablation", c.ablation.str()}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Ablation

std::string_view to_string(ReverseEdge e) noexcept {
  switch (e) {
    case ReverseEdge::Truncated: return "truncated";
    case ReverseEdge::Plain: return "plain";
    case ReverseEdge::Absent: return "absent";
  }
  return "?";
}

std::string_view to_string(AttributeMode m) noexcept {
  switch (m) {
    case AttributeMode::Off: return "off";
    case AttributeMode::Head: return "head";
    case AttributeMode::Concat: return "concat";
    case AttributeMode::Embed: return "embed";
  }
  return "?";
}

std::string_view to_string(EmbedOrder o) noexcept { return o == EmbedOrder::Esc ? "esc" : "ecs"; }

Ablation Ablation::ce_only() {
  Ablation a;
  a.fusion = false;
  a.reverse_edge = ReverseEdge::Absent;
  a.akg = false;
  a.shape = AttributeMode::Off;
  a.characteristic = AttributeMode::Off;
  return a;
}

Ablation Ablation::parse(std::string_view flags) {
  Ablation a;
  for (const std::string& f : split_flags(flags)) {
    const auto eq = f.find('=');
    const std::string key = f.substr(0, eq);
    const std::string val = eq == std::string::npos ? "" : f.substr(eq + 1);
    if (f == "full") {
      a = Ablation{};
    } else if (f == "ce-only") {
      a = ce_only();
    } else if (f == "no-fusion") {
      a.fusion = false;
    } else if (f == "no-truncation") {
      a.reverse_edge = ReverseEdge::Plain;
    } else if (key == "reverse") {
      if (val == "truncated") a.reverse_edge = ReverseEdge::Truncated;
      else if (val == "plain") a.reverse_edge = ReverseEdge::Plain;
      else if (val == "absent") a.reverse_edge = ReverseEdge::Absent;
      else throw Error(Errc::ConfigError, "unknown reverse edge '" + val + "'");
    } else if (f == "no-akg") {
      a.akg = false;
    } else if (key == "shape") {
      a.shape = parse_mode(val);
    } else if (key == "char") {
      a.characteristic = parse_mode(val);
    } else if (key == "order") {
      if (val == "esc") a.order = EmbedOrder::Esc;
      else if (val == "ecs") a.order = EmbedOrder::Ecs;
      else throw Error(Errc::ConfigError, "unknown order '" + val + "'");
    } else {
      throw Error(Errc::ConfigError, "unknown ablation flag '" + f + "'");
    }
  }
  if (!a.akg) {
    if (a.shape == AttributeMode::Embed) a.shape = AttributeMode::Head;
    if (a.characteristic == AttributeMode::Embed) a.characteristic = AttributeMode::Head;
  }
  return a;
}

std::string Ablation::str() const {
  std::ostringstream os;
  if (!fusion) os << "no-fusion,";
  os << "reverse=" << to_string(reverse_edge) << ',';
  if (!akg) os << "no-akg,";
  os << "shape=" << to_string(shape) << ",char=" << to_string(characteristic)
     << ",order=" << to_string(order);
  return os.str();
}

// ---------------------------------------------------------------------------
// Config and parameters

ModelConfig ModelConfig::for_graph(const RelationGraph& graph, std::size_t feature_dim,
                                   std::size_t hidden_dim, std::uint64_t seed, Ablation ablation) {
  ModelConfig c;
  c.feature_dim = feature_dim;
  c.hidden_dim = hidden_dim;
  c.n_dynasties = graph.count(NodeKind::Dynasty);
  c.n_periods = graph.count(NodeKind::Period);
  c.n_shapes = graph.count(NodeKind::Shape);
  c.n_characteristics = graph.count(NodeKind::Characteristic);
  c.seed = seed;
  c.ablation = ablation;
  return c;
}

void ModelConfig::validate() const {
  if (feature_dim == 0) throw Error(Errc::BadConfig, "feature_dim must be > 0");
  if (hidden_dim == 0) throw Error(Errc::BadConfig, "hidden_dim must be > 0");
  if (n_dynasties == 0 || n_periods == 0) throw Error(Errc::BadConfig, "dynasty and period counts must be > 0");
  if (n_shapes == 0 && ablation.shape != AttributeMode::Off)
    throw Error(Errc::BadConfig, "shape head enabled with no shapes");
  if (n_characteristics == 0 && ablation.characteristic != AttributeMode::Off)
    throw Error(Errc::BadConfig, "characteristic head enabled with no characteristics");
}

void ModelConfig::check_graph(const RelationGraph& graph) const {
  if (n_dynasties != graph.count(NodeKind::Dynasty) || n_periods != graph.count(NodeKind::Period) ||
      n_shapes != graph.count(NodeKind::Shape) || n_characteristics != graph.count(NodeKind::Characteristic)) {
    throw Error(Errc::BadConfig, "model head sizes do not match the graph");
  }
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.size();
  return n;
}

std::vector<std::string> Parameters::names() {
  std::vector<std::string> out;
  for (const char* head : {"dynasty", "period", "shape", "characteristic"})
    for (const char* slot : {"w1", "b1", "w2", "b2"}) out.push_back(std::string(head) + "." + slot);
  return out;
}

Parameters init_model(const ModelConfig& config) {
  config.validate();
  Parameters p;
  p.config = config;
  std::mt19937_64 rng(config.seed);
  const std::array<std::size_t, 4> outs{config.n_dynasties, config.n_periods, config.n_shapes,
                                        config.n_characteristics};
  for (std::size_t h = 0; h < 4; ++h) {
    const std::size_t in2 = h == kPeriod ? concat_width(config) : config.hidden_dim;
    auto xavier = [&](std::size_t fan_in, std::size_t fan_out) {
      Tensor w({fan_in, fan_out});
      const double bound = fan_out == 0 ? 0.0 : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& v : w.values()) v = u(rng);
      return w;
    };
    p.tensors.push_back(xavier(config.feature_dim, config.hidden_dim));
    p.tensors.push_back(Tensor({config.hidden_dim}));
    p.tensors.push_back(xavier(in2, outs[h]));
    p.tensors.push_back(Tensor({outs[h]}));
  }
  return p;
}

nlohmann::json Parameters::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  const auto n = names();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    params.push_back({{"name", n[i]}, {"shape", tensors[i].shape()}, {"values", std::vector<double>(tensors[i].values().begin(), tensors[i].values().end())}});
  }
  return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"config", config_json(config)},
          {"parameters", params}};
}

Parameters Parameters::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != kCheckpointFormat) throw Error(Errc::ParseError, "not a checkpoint");
    if (j.at("version") != kCheckpointVersion) throw Error(Errc::ParseError, "unsupported checkpoint version");
    const auto& c = j.at("config");
    Parameters p;
    p.config.feature_dim = c.at("feature_dim");
    p.config.hidden_dim = c.at("hidden_dim");
    p.config.n_dynasties = c.at("n_dynasties");
    p.config.n_periods = c.at("n_periods");
    p.config.n_shapes = c.at("n_shapes");
    p.config.n_characteristics = c.at("n_characteristics");
    p.config.seed = c.at("seed");
    p.config.ablation = Ablation::parse(c.at("ablation").get<std::string>());
    p.config.validate();
    const Parameters shapes = init_model(p.config);
    const auto& arr = j.at("parameters");
    if (arr.size() != shapes.tensors.size()) throw Error(Errc::ParseError, "wrong parameter count");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Tensor t(arr[i].at("shape").get<std::vector<std::size_t>>(), arr[i].at("values").get<std::vector<double>>());
      if (!t.same_shape(shapes.tensors[i]))
        throw Error(Errc::ParseError, "parameter " + names()[i] + " has shape " + shape_string(t.shape()));
      p.tensors.push_back(std::move(t));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("checkpoint: ") + e.what());
  }
}

void Parameters::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_json().dump() << '\n';
}

Parameters Parameters::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Forward

namespace {

void project(Tape& tape, ForwardVars& v) {
  v.dynasty_sigmoid = tape.sigmoid(v.logits[kDynasty]);
  v.period_sigmoid = tape.sigmoid(v.logits[kPeriod]);
  v.period_softmax = tape.softmax_rows(v.logits[kPeriod]);
  v.shape_sigmoid = tape.sigmoid(v.logits[kShape]);
  v.shape_softmax = tape.softmax_rows(v.logits[kShape]);
  v.char_sigmoid = tape.sigmoid(v.logits[kCharacteristic]);
}

}  // namespace

ForwardVars forward(Tape& tape, const Parameters& params, const Tensor& features, const ForwardOptions& options) {
  const ModelConfig& c = params.config;
  if (features.rank() != 2 || features.cols() != c.feature_dim) {
    throw Error(Errc::ShapeMismatch, "features " + shape_string(features.shape()) + ", expected width " +
                                         std::to_string(c.feature_dim));
  }
  ForwardVars v;
  for (const Tensor& t : params.tensors) v.params.push_back(tape.leaf(t));
  auto p = [&](std::size_t h, std::size_t slot) { return v.params[Parameters::index(static_cast<Head>(h), slot)]; };

  const Var x = tape.leaf(features);
  for (std::size_t h = 0; h < 4; ++h) {
    v.pre_hidden[h] = tape.linear(x, p(h, 0), p(h, 1));
    v.hidden[h] = tape.relu(v.pre_hidden[h]);
  }

  const Var hd = v.hidden[kDynasty], hp = v.hidden[kPeriod];
  const Var hp_fused = c.ablation.fusion ? tape.add(hp, hd) : hp;
  Var hd_fused = hd;
  switch (c.ablation.reverse_edge) {
    case ReverseEdge::Truncated:
      if (options.frozen_period_hidden) {
        hd_fused = tape.add(hd, tape.leaf(*options.frozen_period_hidden));
      } else {
        hd_fused = tape.stop_grad_add(hd, hp);
      }
      break;
    case ReverseEdge::Plain:
      hd_fused = tape.add(hd, hp);
      break;
    case ReverseEdge::Absent:
      break;
  }

  std::vector<Var> period_in{hp_fused};
  if (c.ablation.shape == AttributeMode::Concat) period_in.push_back(v.hidden[kShape]);
  if (c.ablation.characteristic == AttributeMode::Concat) period_in.push_back(v.hidden[kCharacteristic]);
  const Var period_x = period_in.size() == 1 ? hp_fused : tape.concat_cols(period_in);

  v.logits[kDynasty] = tape.linear(hd_fused, p(kDynasty, 2), p(kDynasty, 3));
  v.logits[kPeriod] = tape.linear(period_x, p(kPeriod, 2), p(kPeriod, 3));
  v.logits[kShape] = tape.linear(v.hidden[kShape], p(kShape, 2), p(kShape, 3));
  v.logits[kCharacteristic] = tape.linear(v.hidden[kCharacteristic], p(kCharacteristic, 2), p(kCharacteristic, 3));

  project(tape, v);
  return v;
}

ForwardVars project_logits(Tape& tape, const std::array<Tensor, 4>& logits) {
  ForwardVars v;
  for (std::size_t h = 0; h < 4; ++h) v.logits[h] = tape.leaf(logits[h]);
  project(tape, v);
  return v;
}

HeadOutputs outputs_of(const Tape& tape, const ForwardVars& v) {
  return {tape.value(v.dynasty_sigmoid), tape.value(v.period_sigmoid), tape.value(v.period_softmax),
          tape.value(v.shape_sigmoid),   tape.value(v.shape_softmax),  tape.value(v.char_sigmoid)};
}

HeadOutputs forward(const Parameters& params, const Tensor& features) {
  Tape tape;
  const ForwardVars v = forward(tape, params, features);
  return outputs_of(tape, v);
}

std::vector<Prediction> predict(const HeadOutputs& outputs, const RelationGraph& graph, bool consistent) {
  const auto& dynasties = graph.of_kind(NodeKind::Dynasty);
  const auto& periods = graph.of_kind(NodeKind::Period);
  std::vector<Prediction> out(outputs.period_softmax.rows());
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r].period = argmax(outputs.period_softmax.row(r));
    if (consistent) {
      const NodeIndex d = graph.dynasty_of(periods.at(out[r].period));
      out[r].dynasty = static_cast<std::size_t>(std::find(dynasties.begin(), dynasties.end(), d) - dynasties.begin());
    } else {
      out[r].dynasty = argmax(outputs.dynasty_sigmoid.row(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective

BatchLabels labels_from_targets(const RelationGraph& graph, std::vector<SampleTargets> targets) {
  auto column = [&](NodeKind kind, NodeIndex n) {
    const auto& xs = graph.of_kind(kind);
    const auto it = std::find(xs.begin(), xs.end(), n);
    if (it == xs.end()) throw Error(Errc::UnknownNode, graph.node(n).name + " has the wrong kind");
    return static_cast<std::size_t>(it - xs.begin());
  };
  BatchLabels b;
  b.characteristics = Tensor({targets.size(), graph.count(NodeKind::Characteristic)});
  for (std::size_t l = 0; l < targets.size(); ++l) {
    b.period.push_back(column(NodeKind::Period, targets[l].period));
    b.shape.push_back(column(NodeKind::Shape, targets[l].shape));
    for (NodeIndex c : targets[l].characteristics) b.characteristics.at(l, column(NodeKind::Characteristic, c)) = 1.0;
  }
  b.graph = std::move(targets);
  return b;
}

Var objective(Tape& tape, const ForwardVars& vars, const Parameters& params, const GraphLoss& graph_loss,
              const BatchLabels& labels, const Hyperparams& hp, const ObjectiveOptions& options,
              LossBreakdown* breakdown) {
  const Ablation& a = params.config.ablation;
  std::vector<Var> terms;
  std::vector<double> weights;
  LossBreakdown b;

  const Var ce = cross_entropy_node(tape, vars.period_softmax, labels.period);
  b.ce = tape.value(ce)[0];
  terms.push_back(ce);
  weights.push_back(1.0);

  if (a.shape != AttributeMode::Off) {
    const Var f = focal_node(tape, vars.shape_softmax, labels.shape, hp.focal_gamma, hp.focal_alpha);
    b.focal = tape.value(f)[0];
    terms.push_back(f);
    weights.push_back(hp.lambda);
  }
  if (a.characteristic != AttributeMode::Off) {
    const Var f = ml_focal_node(tape, vars.char_sigmoid, labels.characteristics, hp.focal_gamma, hp.focal_alpha);
    b.ml_focal = tape.value(f)[0];
    terms.push_back(f);
    weights.push_back(hp.lambda);
  }
  if (a.akg) {
    GraphLossOptions go;
    go.use_shape = a.shape == AttributeMode::Embed;
    go.use_characteristic = a.characteristic == AttributeMode::Embed;
    go.order = a.order;
    go.full_gradient = options.full_gradient;
    go.frozen_weights = options.frozen_stage_weights;
    go.threads = options.threads;
    GraphLossResult r;
    const Var g = graph_loss.node(tape, vars.logits, labels.graph, hp.alpha1, hp.alpha2, hp.beta, go, &r);
    b.graph = r.total;
    b.era = r.era;
    b.stage1 = r.stage1;
    b.stage2 = r.stage2;
    b.stage_weights = std::move(r.weights);
    terms.push_back(g);
    weights.push_back(1.0);
  }
  const Var total = tape.weighted_sum(terms, weights);
  b.total = tape.value(total)[0];
  if (breakdown) *breakdown = std::move(b);
  return total;
}

}  // namespace dingdate
