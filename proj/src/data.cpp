#include "dingdate/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dingdate/error.hpp"

namespace dingdate {
namespace {

const std::set<std::string, std::less<>> kSources = {"literature", "excavation", "museum"};

[[noreturn]] void violation(const DingRecord& r, const std::string& what) {
  throw Error(Errc::SchemaViolation, "record '" + r.id + "': " + what);
}

NodeIndex node_of_kind(const RelationGraph& g, const DingRecord& r, const std::string& name, NodeKind kind) {
  const auto i = g.find(name);
  if (!i || g.node(*i).kind != kind) {
    violation(r, "unknown " + std::string(to_string(kind)) + " '" + name + "'");
  }
  return *i;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

std::string numbered(const char* prefix, std::size_t i, std::size_t total) {
  const int width = static_cast<int>(std::to_string(total).size());
  std::ostringstream os;
  os << prefix << std::setw(width) << std::setfill('0') << i + 1;
  return os.str();
}

}  // namespace

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::None: return "none";
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(Errc::ConfigError, "unknown split '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Records

void validate_record(const RelationGraph& g, const DingRecord& r) {
  if (r.id.empty()) violation(r, "empty id");
  const NodeIndex d = node_of_kind(g, r, r.dynasty, NodeKind::Dynasty);
  const NodeIndex p = node_of_kind(g, r, r.period, NodeKind::Period);
  if (g.dynasty_of(p) != d) {
    violation(r, "period '" + r.period + "' belongs to '" + g.node(g.dynasty_of(p)).name + "', not '" +
                     r.dynasty + "'");
  }
  if (r.shape.empty()) violation(r, "missing shape");
  node_of_kind(g, r, r.shape, NodeKind::Shape);
  std::set<std::string_view> seen;
  for (const auto& c : r.characteristics) {
    node_of_kind(g, r, c, NodeKind::Characteristic);
    if (!seen.insert(c).second) violation(r, "characteristic '" + c + "' listed twice");
  }
  for (const auto& b : r.bboxes) node_of_kind(g, r, b.characteristic, NodeKind::Characteristic);
  if (r.source && !kSources.contains(*r.source)) violation(r, "unknown source '" + *r.source + "'");
}

nlohmann::ordered_json record_to_json(const DingRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["dynasty"] = r.dynasty;
  j["period"] = r.period;
  j["shape"] = r.shape;
  j["characteristics"] = r.characteristics;
  if (!r.bboxes.empty()) {
    auto& arr = j["bboxes"] = nlohmann::ordered_json::array();
    for (const auto& b : r.bboxes) {
      arr.push_back({{"characteristic", b.characteristic}, {"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}});
    }
  }
  if (r.source) j["source"] = *r.source;
  if (r.split != Split::None) j["split"] = std::string(to_string(r.split));
  if (!r.features.empty()) j["features"] = r.features;
  return j;
}

DingRecord record_from_json(const nlohmann::json& j) {
  DingRecord r;
  if (!j.is_object()) throw Error(Errc::SchemaViolation, "record is not an object");
  auto text = [&](const char* key, std::string& out) {
    const auto it = j.find(key);
    if (it == j.end()) violation(r, std::string("missing `") + key + "`");
    if (!it->is_string()) violation(r, std::string("`") + key + "` is not a string");
    out = it->get<std::string>();
  };
  text("id", r.id);
  text("dynasty", r.dynasty);
  text("period", r.period);
  text("shape", r.shape);
  try {
    if (auto it = j.find("characteristics"); it != j.end()) r.characteristics = it->get<std::vector<std::string>>();
    if (auto it = j.find("bboxes"); it != j.end()) {
      for (const auto& b : *it) {
        r.bboxes.push_back({b.at("characteristic").get<std::string>(), b.at("x").get<double>(),
                            b.at("y").get<double>(), b.at("w").get<double>(), b.at("h").get<double>()});
      }
    }
    if (auto it = j.find("source"); it != j.end()) r.source = it->get<std::string>();
    if (auto it = j.find("split"); it != j.end()) r.split = parse_split(it->get<std::string>());
    if (auto it = j.find("features"); it != j.end()) r.features = it->get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    violation(r, e.what());
  } catch (const Error& e) {
    violation(r, e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::shared_ptr<const RelationGraph> graph, std::vector<DingRecord> records)
    : graph_(std::move(graph)), records_(std::move(records)) {
  for (const auto& r : records_) validate_record(*graph_, r);
}

Dataset Dataset::parse(std::istream& in, std::shared_ptr<const RelationGraph> graph) {
  std::vector<DingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      DingRecord r = record_from_json(j);
      validate_record(*graph, r);
      records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  Dataset ds(std::move(graph), {});
  ds.records_ = std::move(records);
  ds.feature_dim();
  return ds;
}

Dataset Dataset::load(const std::filesystem::path& path, std::shared_ptr<const RelationGraph> graph) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  return parse(in, std::move(graph));
}

std::string Dataset::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void Dataset::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_jsonl();
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].split == split) out.push_back(i);
  return out;
}

std::size_t Dataset::feature_dim() const {
  if (records_.empty()) return 0;
  const std::size_t d = records_.front().features.size();
  for (const auto& r : records_) {
    if (r.features.size() != d) violation(r, "feature width " + std::to_string(r.features.size()) +
                                                  " differs from " + std::to_string(d));
  }
  return d;
}

SampleTargets Dataset::targets(std::size_t i) const {
  const DingRecord& r = records_.at(i);
  SampleTargets t;
  t.period = graph_->index_of(r.period);
  t.shape = graph_->index_of(r.shape);
  for (const auto& c : r.characteristics) t.characteristics.push_back(graph_->index_of(c));
  std::sort(t.characteristics.begin(), t.characteristics.end());
  return t;
}

// ---------------------------------------------------------------------------
// Splitting

std::array<std::size_t, 3> split_counts(std::size_t n, SplitRatios ratios, SplitRule rule) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) || !std::isfinite(total)) {
    throw Error(Errc::ConfigError, "split ratios must be positive");
  }
  const std::array<double, 3> quota{n * ratios.train / total, n * ratios.val / total, n * ratios.test / total};
  std::array<std::size_t, 3> counts{};
  for (std::size_t k = 0; k < 3; ++k) counts[k] = static_cast<std::size_t>(std::floor(quota[k]));
  if (rule == SplitRule::FloorRemainder) {
    counts[2] = n - counts[0] - counts[1];
    return counts;
  }
  std::size_t left = n - counts[0] - counts[1] - counts[2];
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
  });
  for (std::size_t k = 0; left > 0; ++k, --left) ++counts[order[k]];
  return counts;
}

void split_dataset(Dataset& dataset, SplitRatios ratios, std::uint64_t seed, SplitRule rule) {
  if (dataset.size() == 0) throw Error(Errc::EmptyDataset, "nothing to split");
  const RelationGraph& g = dataset.graph();
  std::vector<std::vector<std::size_t>> strata(g.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) strata[g.index_of(dataset.records()[i].period)].push_back(i);
  std::mt19937_64 rng(seed);
  for (NodeIndex p : g.of_kind(NodeKind::Period)) {
    auto& members = strata[p];
    std::shuffle(members.begin(), members.end(), rng);
    const auto counts = split_counts(members.size(), ratios, rule);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const Split s = k < counts[0] ? Split::Train : k < counts[0] + counts[1] ? Split::Val : Split::Test;
      dataset.records()[members[k]].split = s;
    }
  }
}

// ---------------------------------------------------------------------------
// Statistics

double entropy_bits(std::span<const std::size_t> counts) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

DatasetStats dataset_stats(const Dataset& dataset, Attribute attribute) {
  if (dataset.size() == 0) throw Error(Errc::EmptyDataset, "no records");
  const RelationGraph& g = dataset.graph();
  // (attribute value, period) observations
  std::vector<std::pair<NodeIndex, NodeIndex>> obs;
  for (const auto& r : dataset.records()) {
    const NodeIndex p = g.index_of(r.period);
    if (attribute == Attribute::Shape) {
      obs.emplace_back(g.index_of(r.shape), p);
    } else {
      for (const auto& c : r.characteristics) obs.emplace_back(g.index_of(c), p);
    }
  }
  if (obs.empty()) throw Error(Errc::EmptyDataset, "no characteristic annotations");

  std::vector<std::size_t> period_counts(g.size(), 0);
  std::vector<std::vector<std::size_t>> joint(g.size());
  for (const auto& [a, p] : obs) {
    ++period_counts[p];
    if (joint[a].empty()) joint[a].assign(g.size(), 0);
    ++joint[a][p];
  }
  DatasetStats s;
  s.attribute = attribute;
  s.observations = obs.size();
  s.classes = static_cast<std::size_t>(std::count_if(period_counts.begin(), period_counts.end(),
                                                     [](std::size_t c) { return c > 0; }));
  s.entropy = entropy_bits(period_counts);
  const double n = static_cast<double>(obs.size());
  for (const auto& row : joint) {
    if (row.empty()) continue;
    const double na = static_cast<double>(std::accumulate(row.begin(), row.end(), std::size_t{0}));
    s.conditional += na / n * entropy_bits(row);
  }
  s.gain = s.entropy - s.conditional;
  return s;
}

nlohmann::ordered_json DatasetStats::to_json() const {
  nlohmann::ordered_json j;
  j["attribute"] = attribute == Attribute::Shape ? "shape" : "characteristic";
  j["classes"] = classes;
  j["observations"] = observations;
  j["entropy_bits"] = entropy;
  j["conditional_entropy_bits"] = conditional;
  j["information_gain_bits"] = gain;
  return j;
}

std::string DatasetStats::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(16) << "attribute" << (attribute == Attribute::Shape ? "shape" : "characteristic")
     << '\n'
     << std::setw(16) << "classes" << classes << '\n'
     << std::setw(16) << "observations" << observations << '\n'
     << std::setw(16) << "H(D)" << entropy << '\n'
     << std::setw(16) << "H(D|A)" << conditional << '\n'
     << std::setw(16) << "g(D,A)" << gain << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

std::vector<std::pair<std::string, std::vector<std::string>>> default_eras() {
  const RelationGraph g = build_graph(ding_era_spec());
  std::vector<std::pair<std::string, std::vector<std::string>>> eras;
  for (NodeIndex d : g.of_kind(NodeKind::Dynasty)) {
    std::vector<std::string> periods;
    for (NodeIndex p : g.children(d)) periods.push_back(g.node(p).name);
    eras.emplace_back(g.node(d).name, periods);
  }
  return eras;
}

std::size_t period_total(const SynthConfig& c) {
  std::size_t n = 0;
  for (const auto& [_, ps] : c.eras) n += ps.size();
  return n;
}

// Support of row i: `width` consecutive columns centred on the row's
// position, spread evenly over the columns.
std::vector<std::size_t> window(std::size_t i, std::size_t rows, std::size_t cols, std::size_t width) {
  width = std::min(width, cols);
  const double centre = rows > 1 ? static_cast<double>(i) * static_cast<double>(cols - 1) / static_cast<double>(rows - 1) : 0.0;
  long start = std::lround(centre - static_cast<double>(width - 1) / 2.0);
  start = std::clamp<long>(start, 0, static_cast<long>(cols - width));
  std::vector<std::size_t> out(width);
  std::iota(out.begin(), out.end(), static_cast<std::size_t>(start));
  return out;
}

// Gives every uncovered column a small entry in its nearest row.
void cover_columns(std::vector<std::vector<double>>& table, double value) {
  const std::size_t rows = table.size(), cols = table.front().size();
  for (std::size_t c = 0; c < cols; ++c) {
    bool covered = false;
    for (const auto& row : table) covered |= row[c] > 0.0;
    if (covered) continue;
    const std::size_t r = cols > 1 ? static_cast<std::size_t>(std::lround(static_cast<double>(c) * (rows - 1) / (cols - 1))) : 0;
    table[r][c] = value;
  }
}

void check_table(const std::vector<std::vector<double>>& t, std::size_t rows, std::size_t cols, const char* name,
                 bool stochastic) {
  if (t.size() != rows) throw Error(Errc::BadConfig, std::string(name) + " needs one row per period");
  for (const auto& row : t) {
    if (row.size() != cols) throw Error(Errc::BadConfig, std::string(name) + " row has the wrong width");
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::BadConfig, std::string(name) + " entry outside [0, 1]");
      sum += v;
    }
    if (stochastic && std::abs(sum - 1.0) > 1e-9) throw Error(Errc::BadConfig, std::string(name) + " row does not sum to 1");
  }
  for (std::size_t c = 0; c < cols; ++c) {
    bool covered = false;
    for (const auto& row : t) covered |= row[c] > 0.0;
    if (!covered) throw Error(Errc::BadConfig, std::string(name) + " column " + std::to_string(c) + " is never used");
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    if (auto it = j.find("eras"); it != j.end()) {
      for (const auto& e : *it) c.eras.emplace_back(e.at("dynasty").get<std::string>(), e.at("periods").get<std::vector<std::string>>());
    }
    read(j, "shapes", c.shapes);
    read(j, "characteristics", c.characteristics);
    read(j, "period_counts", c.period_counts);
    read(j, "period_prior", c.period_prior);
    read(j, "samples", c.samples);
    read(j, "shape_table", c.shape_table);
    read(j, "char_table", c.char_table);
    read(j, "shapes_per_period", c.shapes_per_period);
    read(j, "chars_per_period", c.chars_per_period);
    read(j, "feature_dim", c.feature_dim);
    read(j, "period_scale", c.period_scale);
    read(j, "shape_scale", c.shape_scale);
    read(j, "char_scale", c.char_scale);
    read(j, "noise", c.noise);
    read(j, "bboxes", c.bboxes);
    read(j, "seed", c.seed);
    for (const auto& [key, _] : j.items()) {
      static const std::set<std::string> known = {
          "eras", "shapes", "characteristics", "period_counts", "period_prior", "samples", "shape_table",
          "char_table", "shapes_per_period", "chars_per_period", "feature_dim", "period_scale", "shape_scale",
          "char_scale", "noise", "bboxes", "seed"};
      if (!known.contains(key)) throw Error(Errc::BadConfig, "unknown synth config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("synth config: ") + e.what());
  }
  return c;
}

nlohmann::ordered_json SynthConfig::to_json() const {
  nlohmann::ordered_json j;
  auto& eras_json = j["eras"] = nlohmann::ordered_json::array();
  for (const auto& [d, ps] : eras) eras_json.push_back({{"dynasty", d}, {"periods", ps}});
  j["shapes"] = shapes;
  j["characteristics"] = characteristics;
  if (!period_counts.empty()) j["period_counts"] = period_counts;
  if (!period_prior.empty()) j["period_prior"] = period_prior;
  j["samples"] = samples;
  if (!shape_table.empty()) j["shape_table"] = shape_table;
  if (!char_table.empty()) j["char_table"] = char_table;
  j["shapes_per_period"] = shapes_per_period;
  j["chars_per_period"] = chars_per_period;
  j["feature_dim"] = feature_dim;
  j["period_scale"] = period_scale;
  j["shape_scale"] = shape_scale;
  j["char_scale"] = char_scale;
  j["noise"] = noise;
  j["bboxes"] = bboxes;
  j["seed"] = seed;
  return j;
}

SynthConfig resolve_synth_config(SynthConfig c) {
  if (c.eras.empty()) c.eras = default_eras();
  const std::size_t np = period_total(c);
  if (np == 0) throw Error(Errc::BadConfig, "no periods");
  if (c.shapes == 0) throw Error(Errc::BadConfig, "at least one shape is required");
  if (c.feature_dim == 0) throw Error(Errc::BadConfig, "feature_dim must be > 0");
  if (!(c.noise >= 0.0)) throw Error(Errc::BadConfig, "noise must be >= 0");
  if (!c.period_counts.empty()) {
    if (c.period_counts.size() != np) throw Error(Errc::BadConfig, "period_counts needs one entry per period");
    c.samples = std::accumulate(c.period_counts.begin(), c.period_counts.end(), std::size_t{0});
  }
  if (!c.period_prior.empty()) {
    if (c.period_prior.size() != np) throw Error(Errc::BadConfig, "period_prior needs one entry per period");
    double sum = 0.0;
    for (double v : c.period_prior) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::BadConfig, "period_prior entry outside [0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::BadConfig, "period_prior does not sum to 1");
  }

  std::mt19937_64 rng = stream(c.seed, 1);
  std::uniform_real_distribution<double> weight(0.5, 1.5), prob(0.3, 0.9);
  if (c.shape_table.empty()) {
    c.shape_table.assign(np, std::vector<double>(c.shapes, 0.0));
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t s : window(p, np, c.shapes, c.shapes_per_period)) c.shape_table[p][s] = weight(rng);
    cover_columns(c.shape_table, 0.5);
    for (auto& row : c.shape_table) {
      const double sum = std::accumulate(row.begin(), row.end(), 0.0);
      for (double& v : row) v /= sum;
    }
  }
  if (c.char_table.empty() && c.characteristics > 0) {
    c.char_table.assign(np, std::vector<double>(c.characteristics, 0.0));
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t k : window(p, np, c.characteristics, c.chars_per_period)) c.char_table[p][k] = prob(rng);
    cover_columns(c.char_table, 0.3);
  }
  check_table(c.shape_table, np, c.shapes, "shape_table", true);
  if (c.characteristics > 0) check_table(c.char_table, np, c.characteristics, "char_table", false);
  return c;
}

GraphSpec synth_graph_spec(const SynthConfig& c) {
  GraphSpec spec;
  std::vector<std::string> periods;
  for (const auto& [d, ps] : c.eras) spec.nodes.push_back({d, NodeKind::Dynasty});
  for (const auto& [d, ps] : c.eras) {
    for (const auto& p : ps) {
      spec.nodes.push_back({p, NodeKind::Period});
      spec.subsumption.emplace_back(d, p);
      periods.push_back(p);
    }
  }
  for (std::size_t s = 0; s < c.shapes; ++s) {
    const std::string name = numbered("shape-", s, c.shapes);
    spec.nodes.push_back({name, NodeKind::Shape});
    for (std::size_t p = 0; p < periods.size(); ++p)
      if (c.shape_table[p][s] > 0.0) spec.subsumption.emplace_back(periods[p], name);
  }
  for (std::size_t k = 0; k < c.characteristics; ++k) {
    const std::string name = numbered("char-", k, c.characteristics);
    spec.nodes.push_back({name, NodeKind::Characteristic});
    for (std::size_t p = 0; p < periods.size(); ++p)
      if (c.char_table[p][k] > 0.0) spec.subsumption.emplace_back(periods[p], name);
  }
  return spec;
}

Dataset synth_generate(const SynthConfig& config) {
  const SynthConfig c = resolve_synth_config(config);
  auto graph = std::make_shared<const RelationGraph>(build_graph(synth_graph_spec(c)));
  const auto& periods = graph->of_kind(NodeKind::Period);
  const auto& shapes = graph->of_kind(NodeKind::Shape);
  const auto& chars = graph->of_kind(NodeKind::Characteristic);
  const std::size_t np = periods.size(), dim = c.feature_dim;

  std::mt19937_64 embed_rng = stream(c.seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto embeddings = [&](std::size_t rows) {
    std::vector<std::vector<double>> e(rows, std::vector<double>(dim));
    for (auto& row : e)
      for (double& v : row) v = normal(embed_rng);
    return e;
  };
  const auto e_period = embeddings(np);
  const auto e_shape = embeddings(c.shapes);
  const auto e_char = embeddings(c.characteristics);

  std::mt19937_64 rng = stream(c.seed, 3);
  std::vector<std::size_t> labels;
  if (!c.period_counts.empty()) {
    for (std::size_t p = 0; p < np; ++p) labels.insert(labels.end(), c.period_counts[p], p);
    std::shuffle(labels.begin(), labels.end(), rng);
  } else {
    std::vector<double> prior = c.period_prior.empty() ? std::vector<double>(np, 1.0) : c.period_prior;
    std::discrete_distribution<std::size_t> pick(prior.begin(), prior.end());
    for (std::size_t i = 0; i < c.samples; ++i) labels.push_back(pick(rng));
  }

  std::vector<DingRecord> records;
  records.reserve(labels.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t p = labels[i];
    DingRecord r;
    r.id = numbered("syn-", i, labels.size());
    r.period = graph->node(periods[p]).name;
    r.dynasty = graph->node(graph->dynasty_of(periods[p])).name;
    std::discrete_distribution<std::size_t> shape_pick(c.shape_table[p].begin(), c.shape_table[p].end());
    const std::size_t s = shape_pick(rng);
    r.shape = graph->node(shapes[s]).name;
    r.features.assign(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) r.features[d] = c.period_scale * e_period[p][d] + c.shape_scale * e_shape[s][d];
    for (std::size_t k = 0; k < c.characteristics; ++k) {
      if (c.char_table[p][k] <= 0.0 || unit(rng) >= c.char_table[p][k]) continue;
      r.characteristics.push_back(graph->node(chars[k]).name);
      for (std::size_t d = 0; d < dim; ++d) r.features[d] += c.char_scale * e_char[k][d];
      if (c.bboxes) {
        r.bboxes.push_back({r.characteristics.back(), std::floor(unit(rng) * 448), std::floor(unit(rng) * 448),
                            16 + std::floor(unit(rng) * 112), 16 + std::floor(unit(rng) * 112)});
      }
    }
    for (double& v : r.features) v += c.noise * normal(rng);
    records.push_back(std::move(r));
  }
  return Dataset(std::move(graph), std::move(records));
}

SynthConfig benchmark_config(std::uint64_t seed) {
  SynthConfig c;
  c.shapes = 8;
  c.characteristics = 16;
  c.samples = 3000;
  // Mildly imbalanced, peaking in Western Zhou.
  c.period_prior = {0.06, 0.12, 0.16, 0.12, 0.09, 0.08, 0.09, 0.07, 0.08, 0.07, 0.06};
  c.feature_dim = 32;
  c.period_scale = 0.5;
  c.shape_scale = 1.0;
  c.char_scale = 1.0;
  c.noise = 1.5;
  c.seed = seed;
  return c;
}

}  // namespace dingdate
