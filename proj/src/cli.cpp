#include "dingdate/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "dingdate/data.hpp"
#include "dingdate/error.hpp"
#include "dingdate/gradcheck.hpp"
#include "dingdate/inference.hpp"
#include "dingdate/kernels.hpp"
#include "dingdate/parallel.hpp"
#include "dingdate/train.hpp"

namespace dingdate::cli {
namespace {

enum class Level { Error, Warn, Info, Debug };

Level level_from_env() {
  const char* v = std::getenv("DINGDATE_LOG");
  if (!v) return Level::Warn;
  const std::string s(v);
  if (s == "error" || s == "quiet") return Level::Error;
  if (s == "info") return Level::Info;
  if (s == "debug") return Level::Debug;
  return Level::Warn;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(level_from_env()) {}
  bool on(Level l) const { return l <= level_; }
  void info(const std::string& msg) { emit(Level::Info, "info", msg); }
  void debug(const std::string& msg) { emit(Level::Debug, "debug", msg); }

 private:
  void emit(Level l, const char* tag, const std::string& msg) {
    if (on(l)) err_ << "[" << tag << "] " << msg << '\n';
  }
  std::ostream& err_;
  Level level_;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(Errc::Io, "write failed: " + path);
}

std::shared_ptr<const RelationGraph> load_graph(const std::string& path) {
  return std::make_shared<const RelationGraph>(build_graph(GraphSpec::load(path)));
}

SplitRatios parse_ratios(const std::string& s) {
  SplitRatios r;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> r.train >> c1 >> r.val >> c2 >> r.test) || c1 != ':' || c2 != ':' || !in.eof()) {
    throw Error(Errc::ConfigError, "split ratios look like 4:1:5, got '" + s + "'");
  }
  return r;
}

std::vector<std::size_t> split_indices(const Dataset& ds, const std::string& split) {
  if (split == "all") {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  const auto idx = ds.indices(parse_split(split));
  if (idx.empty()) throw Error(Errc::EmptySplit, "split '" + split + "' is empty");
  return idx;
}

std::string metrics_csv(const std::string& split, const Metrics& m) {
  return "split,samples,dynasty_oa,period_oa,auprc_dynasty,auprc_period\n" + split + "," +
         std::to_string(m.samples) + "," + format_number(m.dynasty_oa) + "," + format_number(m.period_oa) + "," +
         format_number(m.auprc_dynasty) + "," + format_number(m.auprc_period) + "\n";
}

// Full-graph activations for one sample from the four head logits.
std::vector<double> node_logits(const RelationGraph& g, const std::array<Tensor, 4>& logits, std::size_t row) {
  std::vector<double> z(g.size(), 0.0);
  const NodeKind kinds[] = {NodeKind::Dynasty, NodeKind::Period, NodeKind::Shape, NodeKind::Characteristic};
  for (std::size_t h = 0; h < 4; ++h) {
    const auto& nodes = g.of_kind(kinds[h]);
    for (std::size_t c = 0; c < nodes.size(); ++c) z[nodes[c]] = logits[h].at(row, c);
  }
  return z;
}

struct Options {
  std::size_t threads = 1;

  // synth
  std::string synth_config, synth_out, synth_schema, synth_split = "4:1:5";
  std::uint64_t synth_seed = 0;
  bool synth_seed_set = false, no_split = false, benchmark = false;

  // train
  std::string data, graph, train_config, ckpt, ablation = "full", history;
  std::uint64_t train_seed = 0;

  // eval / infer
  std::string split = "test", format = "json", out_path, classes_csv, features;
  bool consistent = false;

  // stats
  std::string attribute = "shape";

  // gradcheck
  std::uint64_t gc_seed = 0;
  std::size_t gc_instances = 60;
  std::string gc_mode = "both";
};

int cmd_synth(const Options& o, std::ostream& out, Log& log) {
  SynthConfig c = o.benchmark ? benchmark_config(0) : SynthConfig{};
  if (!o.synth_config.empty()) {
    const std::uint64_t keep = c.seed;
    c = SynthConfig::from_json(read_json(o.synth_config));
    if (o.benchmark && !read_json(o.synth_config).contains("seed")) c.seed = keep;
  }
  if (o.synth_seed_set) c.seed = o.synth_seed;
  Dataset ds = synth_generate(c);
  if (!o.no_split) split_dataset(ds, parse_ratios(o.synth_split), c.seed);
  const std::string schema =
      o.synth_schema.empty() ? std::filesystem::path(o.synth_out).replace_extension(".schema.json").string() : o.synth_schema;
  ds.save(o.synth_out);
  write_text(schema, ds.graph().to_json().dump(2) + "\n");
  log.info("wrote " + std::to_string(ds.size()) + " records to " + o.synth_out);
  nlohmann::ordered_json j;
  j["records"] = ds.size();
  j["train"] = ds.indices(Split::Train).size();
  j["val"] = ds.indices(Split::Val).size();
  j["test"] = ds.indices(Split::Test).size();
  j["data"] = o.synth_out;
  j["schema"] = schema;
  j["seed"] = c.seed;
  out << j.dump() << '\n';
  return 0;
}

int cmd_train(const Options& o, bool seed_set, bool threads_set, std::ostream& out, Log& log) {
  TrainConfig tc = o.train_config.empty() ? TrainConfig{} : TrainConfig::from_json(read_json(o.train_config));
  if (seed_set) tc.seed = o.train_seed;
  if (threads_set) tc.threads = o.threads;
  tc.validate();
  const Ablation ab = Ablation::parse(o.ablation);
  const Dataset ds = Dataset::load(o.data, load_graph(o.graph));
  log.info("training " + ab.str() + " on " + std::to_string(ds.indices(Split::Train).size()) + " records");
  const TrainResult r = train(ds, tc, ab, [&](const EpochRecord& e) {
    if (log.on(Level::Info)) {
      log.info("epoch " + std::to_string(e.epoch) + " loss " + format_number(e.loss.total) + " val period OA " +
               format_number(e.val.period_oa));
    }
  });
  r.params.save(o.ckpt);
  const std::string history = o.history.empty() ? o.ckpt + ".history.csv" : o.history;
  write_text(history, r.history_csv());
  nlohmann::ordered_json j;
  j["checkpoint"] = o.ckpt;
  j["history"] = history;
  j["ablation"] = ab.str();
  j["epochs_run"] = r.history.size();
  j["best_epoch"] = r.best_epoch;
  j["best_val_period_oa"] = r.best_val_period_oa;
  j["early_stopped"] = r.early_stopped;
  out << j.dump() << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Parameters p = Parameters::load(o.ckpt);
  const Dataset ds = Dataset::load(o.data, load_graph(o.graph));
  const Metrics m = evaluate(p, ds, split_indices(ds, o.split), o.consistent);
  std::string text;
  if (o.format == "csv") {
    text = metrics_csv(o.split, m);
  } else {
    nlohmann::ordered_json j;
    j["split"] = o.split;
    j["dynasty_rule"] = o.consistent ? "period-parent" : "dynasty-head";
    j["metrics"] = m.to_json();
    text = j.dump(2) + "\n";
  }
  if (!o.classes_csv.empty()) write_text(o.classes_csv, m.classes_csv());
  if (o.out_path.empty()) {
    out << text;
  } else {
    write_text(o.out_path, text);
  }
  return 0;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const Parameters p = Parameters::load(o.ckpt);
  const auto graph = load_graph(o.graph);
  p.config.check_graph(*graph);

  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::ifstream in(o.features);
  if (!in) throw Error(Errc::Io, "cannot read " + o.features);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& f = j.is_array() ? j : j.at("features");
      rows.push_back(f.get<std::vector<double>>());
      ids.push_back(j.is_object() && j.contains("id") ? j.at("id").get<std::string>() : std::to_string(n));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, o.features + " line " + std::to_string(n) + ": " + e.what());
    }
    if (rows.back().size() != p.config.feature_dim) {
      throw Error(Errc::SchemaViolation, o.features + " line " + std::to_string(n) + ": expected " +
                                             std::to_string(p.config.feature_dim) + " features");
    }
  }
  Tensor x({rows.size(), p.config.feature_dim});
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), x.row(r).begin());

  Tape tape;
  const ForwardVars vars = forward(tape, p, x);
  std::array<Tensor, 4> logits;
  for (std::size_t h = 0; h < 4; ++h) logits[h] = tape.value(vars.logits[h]);
  const std::vector<Prediction> pred = predict(outputs_of(tape, vars), *graph, o.consistent);

  const RelationGraph& g = *graph;
  const GraphView era(g, Scope::Era), shape(g, Scope::EraShape), chr(g, Scope::EraCharacteristic);
  const FactorizedView f_era(era), f_shape(shape), f_chr(chr);
  std::vector<std::string> lines(rows.size());
  parallel_for(rows.size(), o.threads, [&](std::size_t r) {
    const NodeActivations acts = NodeActivations::from_logits(node_logits(g, logits, r));
    std::vector<double> marg(g.size(), 0.0);
    for (const auto* fv : {&f_era, &f_shape, &f_chr}) {
      const InferenceResult res = fv->infer(acts);
      for (std::size_t k = 0; k < fv->view().size(); ++k) marg[fv->view().nodes()[k]] = res.marginals[k];
    }
    nlohmann::ordered_json j;
    j["id"] = ids[r];
    j["dynasty"] = g.node(g.of_kind(NodeKind::Dynasty)[pred[r].dynasty]).name;
    j["period"] = g.node(g.of_kind(NodeKind::Period)[pred[r].period]).name;
    auto& m = j["marginals"] = nlohmann::ordered_json::object();
    for (NodeIndex n = 0; n < g.size(); ++n) m[g.node(n).name] = marg[n];
    lines[r] = j.dump() + "\n";
  });
  std::string text;
  for (const auto& l : lines) text += l;
  if (o.out_path.empty()) {
    out << text;
  } else {
    write_text(o.out_path, text);
  }
  return 0;
}

int cmd_stats(const Options& o, std::ostream& out) {
  const Dataset ds = Dataset::load(o.data, load_graph(o.graph));
  const Attribute a = o.attribute == "shape" ? Attribute::Shape : Attribute::Characteristic;
  const DatasetStats s = dataset_stats(ds, a);
  if (o.format == "text") {
    out << s.table();
  } else {
    out << s.to_json().dump(2) << '\n';
  }
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out, Log& log) {
  std::vector<GradcheckMode> modes;
  if (o.gc_mode != "detached") modes.push_back(GradcheckMode::Full);
  if (o.gc_mode != "full") modes.push_back(GradcheckMode::Detached);
  nlohmann::ordered_json j;
  j["seed"] = o.gc_seed;
  auto& reports = j["reports"] = nlohmann::ordered_json::array();
  bool passed = true;
  double max_rel = 0.0;
  for (GradcheckMode mode : modes) {
    GradcheckOptions go;
    go.seed = o.gc_seed;
    go.instances = o.gc_instances;
    go.mode = mode;
    const GradcheckReport r = gradcheck(go);
    log.info(r.to_json().dump());
    reports.push_back(nlohmann::ordered_json::parse(r.to_json().dump()));
    passed = passed && r.passed();
    max_rel = std::max(max_rel, r.max_rel_error);
  }
  j["max_rel_error"] = max_rel;
  j["passed"] = passed;
  out << j.dump(2) << '\n';
  return passed ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app("Relation-graph era classifier for bronze ding records", "dingdate");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");
  auto* threads = app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and its schema");
  synth->add_option("--config", o.synth_config, "Generator config (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--out", o.synth_out, "Output dataset (JSON Lines)")->required();
  synth->add_option("--schema", o.synth_schema, "Output schema (default: <out>.schema.json)");
  synth->add_option("--seed", o.synth_seed, "Seed (overrides the config)");
  synth->add_option("--split", o.synth_split, "train:val:test ratios")->capture_default_str();
  synth->add_flag("--no-split", o.no_split, "Leave records untagged");
  synth->add_flag("--benchmark", o.benchmark, "Start from the trend benchmark config");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--data", o.data, "Dataset (JSON Lines)")->required()->check(CLI::ExistingFile);
  tr->add_option("--graph", o.graph, "Schema (JSON)")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", o.train_config, "Training config (JSON)")->check(CLI::ExistingFile);
  tr->add_option("--out", o.ckpt, "Checkpoint path")->required();
  tr->add_option("--ablation", o.ablation, "Comma-separated ablation flags")->capture_default_str();
  tr->add_option("--history", o.history, "Metric history CSV (default: <out>.history.csv)");
  auto* train_seed = tr->add_option("--seed", o.train_seed, "Seed (overrides the config)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--ckpt", o.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", o.data, "Dataset (JSON Lines)")->required()->check(CLI::ExistingFile);
  ev->add_option("--graph", o.graph, "Schema (JSON)")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", o.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  ev->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  ev->add_option("--out", o.out_path, "Write metrics here instead of stdout");
  ev->add_option("--classes-csv", o.classes_csv, "Per-class precision/recall CSV");
  ev->add_flag("--consistent", o.consistent, "Dynasty from the predicted period");

  auto* inf = app.add_subcommand("infer", "Predict eras and node marginals");
  inf->add_option("--ckpt", o.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--graph", o.graph, "Schema (JSON)")->required()->check(CLI::ExistingFile);
  inf->add_option("--features", o.features, "JSON Lines of {id, features} or arrays")->required()->check(CLI::ExistingFile);
  inf->add_option("--out", o.out_path, "Write predictions here instead of stdout");
  inf->add_flag("--consistent", o.consistent, "Dynasty from the predicted period");

  auto* st = app.add_subcommand("stats", "Entropy and information gain of an attribute");
  st->add_option("--data", o.data, "Dataset (JSON Lines)")->required()->check(CLI::ExistingFile);
  st->add_option("--graph", o.graph, "Schema (JSON)")->required()->check(CLI::ExistingFile);
  st->add_option("--attribute", o.attribute, "shape or characteristic")
      ->check(CLI::IsMember({"shape", "characteristic"}))
      ->capture_default_str();
  st->add_option("--format", o.format, "json or text")->check(CLI::IsMember({"json", "text"}))->capture_default_str();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the objective's gradients");
  gc->add_option("--seed", o.gc_seed, "Seed")->capture_default_str();
  gc->add_option("--instances", o.gc_instances, "Random instances per mode")->check(CLI::PositiveNumber)->capture_default_str();
  gc->add_option("--mode", o.gc_mode, "full, detached or both")
      ->check(CLI::IsMember({"full", "detached", "both"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }
  o.synth_seed_set = synth->get_option("--seed")->count() > 0;

  Log log(err);
  log.debug(std::string("kernels: ") + std::string(kernels::isa_name(kernels::active_isa())));
  try {
    if (synth->parsed()) return cmd_synth(o, out, log);
    if (tr->parsed()) return cmd_train(o, train_seed->count() > 0, threads->count() > 0, out, log);
    if (ev->parsed()) return cmd_eval(o, out);
    if (inf->parsed()) return cmd_infer(o, out);
    if (st->parsed()) return cmd_stats(o, out);
    if (gc->parsed()) return cmd_gradcheck(o, out, log);
  } catch (const Error& e) {
    err << "dingdate: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "dingdate: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace dingdate::cli
