#include "dingdate/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dingdate/error.hpp"

namespace dingdate {
namespace {

std::size_t column_of(const RelationGraph& g, NodeKind kind, NodeIndex n) {
  const auto& xs = g.of_kind(kind);
  return static_cast<std::size_t>(std::find(xs.begin(), xs.end(), n) - xs.begin());
}

std::vector<std::string> names_of(const RelationGraph& g, NodeKind kind) {
  std::vector<std::string> out;
  for (NodeIndex n : g.of_kind(kind)) out.push_back(g.node(n).name);
  return out;
}

nlohmann::ordered_json classes_json(const std::vector<ClassMetrics>& cs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : cs) {
    arr.push_back({{"class", c.name},
                   {"support", c.support},
                   {"predicted", c.predicted},
                   {"precision", c.precision},
                   {"recall", c.recall}});
  }
  return arr;
}

void add_scaled(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.total += w * b.total;
  acc.graph += w * b.graph;
  acc.era += w * b.era;
  acc.stage1 += w * b.stage1;
  acc.stage2 += w * b.stage2;
  acc.ce += w * b.ce;
  acc.focal += w * b.focal;
  acc.ml_focal += w * b.ml_focal;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::ConfigError, what); };
  if (epochs == 0) fail("epochs must be > 0");
  if (batch_size == 0) fail("batch_size must be > 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) fail("adam betas must be in [0, 1)");
  if (!(adam.eps > 0.0)) fail("adam eps must be > 0");
  if (patience > epochs) fail("patience must not exceed epochs");
  if (hidden_dim == 0) fail("hidden_dim must be > 0");
  if (threads == 0) fail("threads must be > 0");
  try {
    hyper.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"epochs", "batch_size", "lr", "adam_beta1", "adam_beta2", "adam_eps",
                                              "patience", "alpha1", "alpha2", "beta", "lambda", "focal_gamma",
                                              "focal_alpha", "hidden_dim", "seed", "threads", "full_gradient",
                                              "consistent_dynasty"};
  if (!j.is_object()) throw Error(Errc::ConfigError, "train config must be an object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw Error(Errc::ConfigError, "unknown train config key '" + key + "'");
    }
    auto read = [&](const char* key, auto& out) {
      if (auto it = j.find(key); it != j.end()) out = it->get<std::remove_reference_t<decltype(out)>>();
    };
    read("epochs", c.epochs);
    read("batch_size", c.batch_size);
    read("lr", c.lr);
    read("adam_beta1", c.adam.beta1);
    read("adam_beta2", c.adam.beta2);
    read("adam_eps", c.adam.eps);
    read("patience", c.patience);
    read("alpha1", c.hyper.alpha1);
    read("alpha2", c.hyper.alpha2);
    read("beta", c.hyper.beta);
    read("lambda", c.hyper.lambda);
    read("focal_gamma", c.hyper.focal_gamma);
    read("focal_alpha", c.hyper.focal_alpha);
    read("hidden_dim", c.hidden_dim);
    read("seed", c.seed);
    read("threads", c.threads);
    read("full_gradient", c.full_gradient);
    read("consistent_dynasty", c.consistent_dynasty);
    if (!j.contains("patience")) c.patience = std::min(c.patience, c.epochs);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"adam_beta1", adam.beta1},
          {"adam_beta2", adam.beta2},
          {"adam_eps", adam.eps},
          {"patience", patience},
          {"alpha1", hyper.alpha1},
          {"alpha2", hyper.alpha2},
          {"beta", hyper.beta},
          {"lambda", hyper.lambda},
          {"focal_gamma", hyper.focal_gamma},
          {"focal_alpha", hyper.focal_alpha},
          {"hidden_dim", hidden_dim},
          {"seed", seed},
          {"threads", threads},
          {"full_gradient", full_gradient},
          {"consistent_dynasty", consistent_dynasty}};
}

// ---------------------------------------------------------------------------
// Optimizer

void adam_step(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& state, double lr,
               const AdamOptions& o) {
  if (grads.size() != params.size()) throw Error(Errc::ShapeMismatch, "one gradient per parameter expected");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape());
      state.v.emplace_back(p.shape());
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m[i])) {
      throw Error(Errc::ShapeMismatch, "parameter " + std::to_string(i) + " is " + shape_string(params[i].shape()) +
                                           ", gradient is " + shape_string(grads[i].shape()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    const auto g = grads[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + o.eps);
    }
  }
}

double lr_schedule(double t, double total, double lr_max) {
  if (total <= 0.0) return lr_max;
  const double x = std::clamp(t / total, 0.0, 1.0);
  return std::clamp(0.5 * lr_max * (1.0 + std::cos(std::numbers::pi * x)), 0.0, lr_max);
}

// ---------------------------------------------------------------------------
// Metrics

double auprc_macro(const Tensor& scores, std::span<const std::size_t> labels) {
  const std::size_t n = scores.rows(), k = scores.cols();
  if (labels.size() != n) throw Error(Errc::LengthMismatch, "one label per score row expected");
  constexpr std::size_t kGrid = 101;
  std::vector<double> mean(kGrid, 0.0);
  std::size_t classes = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < k; ++c) {
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
    if (positives == 0) continue;
    ++classes;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores.at(a, c) > scores.at(b, c); });
    // (recall, precision) at each distinct threshold
    std::vector<std::pair<double, double>> curve;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += labels[order[i]] == c;
      if (i + 1 < n && scores.at(order[i + 1], c) == scores.at(order[i], c)) continue;
      curve.emplace_back(static_cast<double>(tp) / positives, static_cast<double>(tp) / static_cast<double>(i + 1));
    }
    // best precision at recall >= r, scanning from high recall down
    std::size_t j = curve.size();
    double best = 0.0;
    for (std::size_t g = kGrid; g-- > 0;) {
      const double r = static_cast<double>(g) / (kGrid - 1);
      while (j > 0 && curve[j - 1].first >= r - 1e-12) best = std::max(best, curve[--j].second);
      mean[g] += best;
    }
  }
  if (classes == 0) return 0.0;
  double area = 0.0;
  for (std::size_t g = 0; g + 1 < kGrid; ++g) area += 0.5 * (mean[g] + mean[g + 1]) / classes / (kGrid - 1);
  return area;
}

std::vector<ClassMetrics> class_metrics(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                                        const std::vector<std::string>& names) {
  std::vector<ClassMetrics> out(names.size());
  std::vector<std::size_t> tp(names.size(), 0);
  for (std::size_t c = 0; c < names.size(); ++c) out[c].name = names[c];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++out.at(labels[i]).support;
    ++out.at(predicted[i]).predicted;
    if (predicted[i] == labels[i]) ++tp[labels[i]];
  }
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (out[c].predicted > 0) out[c].precision = static_cast<double>(tp[c]) / static_cast<double>(out[c].predicted);
    if (out[c].support > 0) out[c].recall = static_cast<double>(tp[c]) / static_cast<double>(out[c].support);
  }
  return out;
}

nlohmann::ordered_json Metrics::to_json() const {
  return {{"samples", samples},
          {"dynasty_oa", dynasty_oa},
          {"period_oa", period_oa},
          {"auprc_dynasty", auprc_dynasty},
          {"auprc_period", auprc_period},
          {"dynasty_classes", classes_json(dynasty_classes)},
          {"period_classes", classes_json(period_classes)}};
}

std::string Metrics::classes_csv() const {
  std::string out = "level,class,support,predicted,precision,recall\n";
  auto rows = [&](const char* level, const std::vector<ClassMetrics>& cs) {
    for (const auto& c : cs) {
      out += std::string(level) + ",\"" + c.name + "\"," + std::to_string(c.support) + "," +
             std::to_string(c.predicted) + "," + format_number(c.precision) + "," + format_number(c.recall) + "\n";
    }
  };
  rows("dynasty", dynasty_classes);
  rows("period", period_classes);
  return out;
}

Tensor feature_matrix(const Dataset& dataset, std::span<const std::size_t> indices) {
  const std::size_t d = dataset.feature_dim();
  Tensor x({indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& f = dataset.records().at(indices[r]).features;
    std::copy(f.begin(), f.end(), x.row(r).begin());
  }
  return x;
}

Metrics evaluate(const Parameters& params, const Dataset& dataset, std::span<const std::size_t> indices,
                 bool consistent_dynasty) {
  if (indices.empty()) throw Error(Errc::EmptySplit, "nothing to evaluate");
  const RelationGraph& g = dataset.graph();
  params.config.check_graph(g);
  const HeadOutputs out = forward(params, feature_matrix(dataset, indices));
  const std::vector<Prediction> pred = predict(out, g, consistent_dynasty);

  std::vector<std::size_t> period(indices.size()), dynasty(indices.size());
  std::vector<std::size_t> pred_period(indices.size()), pred_dynasty(indices.size());
  std::size_t period_hits = 0, dynasty_hits = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const NodeIndex p = dataset.targets(indices[i]).period;
    period[i] = column_of(g, NodeKind::Period, p);
    dynasty[i] = column_of(g, NodeKind::Dynasty, g.dynasty_of(p));
    pred_period[i] = pred[i].period;
    pred_dynasty[i] = pred[i].dynasty;
    period_hits += pred_period[i] == period[i];
    dynasty_hits += pred_dynasty[i] == dynasty[i];
  }
  Metrics m;
  m.samples = indices.size();
  m.period_oa = static_cast<double>(period_hits) / static_cast<double>(indices.size());
  m.dynasty_oa = static_cast<double>(dynasty_hits) / static_cast<double>(indices.size());
  m.auprc_period = auprc_macro(out.period_softmax, period);
  m.auprc_dynasty = auprc_macro(out.dynasty_sigmoid, dynasty);
  m.period_classes = class_metrics(pred_period, period, names_of(g, NodeKind::Period));
  m.dynasty_classes = class_metrics(pred_dynasty, dynasty, names_of(g, NodeKind::Dynasty));
  return m;
}

Metrics evaluate(const Parameters& params, const Dataset& dataset, Split split, bool consistent_dynasty) {
  const auto idx = dataset.indices(split);
  if (idx.empty()) throw Error(Errc::EmptySplit, "split '" + std::string(to_string(split)) + "' is empty");
  return evaluate(params, dataset, idx, consistent_dynasty);
}

// ---------------------------------------------------------------------------
// Training

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string TrainResult::history_csv() const {
  std::ostringstream os;
  os << "epoch,lr,loss_total,loss_graph,loss_era,loss_stage1,loss_stage2,loss_ce,loss_focal,loss_ml_focal,"
        "val_dynasty_oa,val_period_oa,val_auprc_dynasty,val_auprc_period\n";
  for (const auto& e : history) {
    const double cols[] = {e.lr,         e.loss.total,      e.loss.graph,      e.loss.era,
                           e.loss.stage1, e.loss.stage2,    e.loss.ce,         e.loss.focal,
                           e.loss.ml_focal, e.val.dynasty_oa, e.val.period_oa, e.val.auprc_dynasty,
                           e.val.auprc_period};
    os << e.epoch;
    for (double c : cols) os << ',' << format_number(c);
    os << '\n';
  }
  return os.str();
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const Ablation& ablation,
                  const EpochCallback& on_epoch) {
  config.validate();
  const ModelConfig mc = ModelConfig::for_graph(dataset.graph(), dataset.feature_dim(), config.hidden_dim,
                                                config.seed, ablation);
  return train(dataset, init_model(mc), config, on_epoch);
}

TrainResult train(const Dataset& dataset, Parameters params, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const RelationGraph& g = dataset.graph();
  params.config.check_graph(g);
  if (params.config.feature_dim != dataset.feature_dim()) {
    throw Error(Errc::ConfigError, "model expects " + std::to_string(params.config.feature_dim) +
                                       " features, data has " + std::to_string(dataset.feature_dim()));
  }
  std::vector<std::size_t> train_idx = dataset.indices(Split::Train);
  const std::vector<std::size_t> val_idx = dataset.indices(Split::Val);
  if (train_idx.empty()) throw Error(Errc::EmptySplit, "train split is empty");
  if (val_idx.empty()) throw Error(Errc::EmptySplit, "val split is empty");

  const GraphLoss graph_loss(g);
  ObjectiveOptions opts;
  opts.full_gradient = config.full_gradient;
  opts.threads = config.threads;
  std::mt19937_64 rng(config.seed ^ 0x5eedULL);
  AdamState adam;
  std::size_t wait = 0;

  TrainResult result;
  result.params = params;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr_schedule(static_cast<double>(epoch), static_cast<double>(config.epochs), config.lr);
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      const std::span<const std::size_t> batch(train_idx.data() + start,
                                               std::min(config.batch_size, train_idx.size() - start));
      std::vector<SampleTargets> targets;
      for (std::size_t i : batch) targets.push_back(dataset.targets(i));
      const BatchLabels labels = labels_from_targets(g, std::move(targets));

      Tape tape;
      const ForwardVars vars = forward(tape, params, feature_matrix(dataset, batch));
      LossBreakdown b;
      const Var loss = objective(tape, vars, params, graph_loss, labels, config.hyper, opts, &b);
      const Gradients grads = tape.backward(loss);
      std::vector<Tensor> gs;
      gs.reserve(vars.params.size());
      for (Var v : vars.params) gs.push_back(grads[v]);
      adam_step(params.tensors, gs, adam, rec.lr, config.adam);
      add_scaled(rec.loss, b, static_cast<double>(batch.size()) / static_cast<double>(train_idx.size()));
    }
    rec.val = evaluate(params, dataset, val_idx, config.consistent_dynasty);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val.period_oa > result.best_val_period_oa) {
      result.best_val_period_oa = rec.val.period_oa;
      result.best_epoch = rec.epoch;
      result.params = params;
      wait = 0;
    } else if (++wait > config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace dingdate
