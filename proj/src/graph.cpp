#include "dingdate/graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <unordered_map>

#include "dingdate/error.hpp"

namespace dingdate {

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::Dynasty: return "dynasty";
    case NodeKind::Period: return "period";
    case NodeKind::Shape: return "shape";
    case NodeKind::Characteristic: return "characteristic";
  }
  return "?";
}

std::string_view to_string(Scope scope) noexcept {
  switch (scope) {
    case Scope::Era: return "era";
    case Scope::EraShape: return "era-shape";
    case Scope::EraCharacteristic: return "era-characteristic";
  }
  return "?";
}

std::string Assignment::str() const {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

// ---------------------------------------------------------------------------
// GraphSpec

namespace {

std::string name_field(const nlohmann::json& entry) {
  if (entry.is_string()) return entry.get<std::string>();
  if (entry.is_object() && entry.contains("name")) return entry.at("name").get<std::string>();
  throw Error(Errc::ParseError, "graph entry without a name: " + entry.dump());
}

}  // namespace

GraphSpec GraphSpec::from_json(const nlohmann::json& j) {
  GraphSpec spec;
  try {
    for (const auto& d : j.value("dynasties", nlohmann::json::array())) {
      spec.nodes.push_back({name_field(d), NodeKind::Dynasty});
    }
    for (const auto& p : j.value("periods", nlohmann::json::array())) {
      const std::string name = name_field(p);
      spec.nodes.push_back({name, NodeKind::Period});
      if (p.is_object() && p.contains("parent")) {
        const auto& parent = p.at("parent");
        if (parent.is_array()) {
          for (const auto& x : parent) spec.subsumption.emplace_back(x.get<std::string>(), name);
        } else {
          spec.subsumption.emplace_back(parent.get<std::string>(), name);
        }
      }
    }
    auto attributes = [&](const char* key, NodeKind kind) {
      for (const auto& a : j.value(key, nlohmann::json::array())) {
        const std::string name = name_field(a);
        spec.nodes.push_back({name, kind});
        if (a.is_object() && a.contains("parent_periods")) {
          for (const auto& x : a.at("parent_periods")) {
            spec.subsumption.emplace_back(x.get<std::string>(), name);
          }
        }
      }
    };
    attributes("shapes", NodeKind::Shape);
    attributes("characteristics", NodeKind::Characteristic);
    for (const auto& e : j.value("exclusions", nlohmann::json::array())) {
      spec.exclusion.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ParseError, std::string("graph schema: ") + ex.what());
  }
  return spec;
}

GraphSpec GraphSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open graph schema " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ParseError, path.string() + ": " + ex.what());
  }
  return from_json(j);
}

GraphSpec ding_era_spec() {
  GraphSpec spec;
  const std::vector<std::pair<std::string, std::vector<std::string>>> eras = {
      {"Shang", {"Early", "Late"}},
      {"Western Zhou", {"Early", "Mid", "Late"}},
      {"Spring and Autumn", {"Early", "Mid", "Late"}},
      {"Warring States", {"Early", "Mid", "Late"}},
  };
  for (const auto& [dynasty, _] : eras) spec.nodes.push_back({dynasty, NodeKind::Dynasty});
  for (const auto& [dynasty, phases] : eras) {
    for (const auto& phase : phases) {
      const std::string name = phase + " " + dynasty;
      spec.nodes.push_back({name, NodeKind::Period});
      spec.subsumption.emplace_back(dynasty, name);
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// RelationGraph

std::optional<NodeIndex> RelationGraph::find(std::string_view name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

NodeIndex RelationGraph::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error(Errc::UnknownNode, std::string(name));
}

bool RelationGraph::excludes(NodeIndex a, NodeIndex b) const {
  return exclusion_matrix_.at(a * nodes_.size() + b) != 0;
}

nlohmann::json RelationGraph::to_json() const {
  nlohmann::json j;
  j["dynasties"] = nlohmann::json::array();
  for (NodeIndex d : of_kind(NodeKind::Dynasty)) j["dynasties"].push_back(nodes_[d].name);
  j["periods"] = nlohmann::json::array();
  for (NodeIndex p : of_kind(NodeKind::Period)) {
    j["periods"].push_back({{"name", nodes_[p].name}, {"parent", nodes_[dynasty_of(p)].name}});
  }
  auto attributes = [&](NodeKind kind) {
    nlohmann::json arr = nlohmann::json::array();
    for (NodeIndex a : of_kind(kind)) {
      nlohmann::json parents = nlohmann::json::array();
      for (NodeIndex p : parents_[a]) parents.push_back(nodes_[p].name);
      arr.push_back({{"name", nodes_[a].name}, {"parent_periods", parents}});
    }
    return arr;
  };
  j["shapes"] = attributes(NodeKind::Shape);
  j["characteristics"] = attributes(NodeKind::Characteristic);

  // Only non-mandated exclusions need to be written back.
  nlohmann::json extra = nlohmann::json::array();
  for (auto [a, b] : exclusion_) {
    const NodeKind ka = nodes_[a].kind;
    if (ka == nodes_[b].kind && ka != NodeKind::Characteristic) continue;
    extra.push_back({nodes_[a].name, nodes_[b].name});
  }
  if (!extra.empty()) j["exclusions"] = extra;
  return j;
}

namespace {

bool allowed_subsumption(NodeKind parent, NodeKind child) {
  if (parent == NodeKind::Dynasty) return child == NodeKind::Period;
  if (parent == NodeKind::Period) return child == NodeKind::Shape || child == NodeKind::Characteristic;
  return false;
}

}  // namespace

RelationGraph build_graph(const GraphSpec& spec) {
  RelationGraph g;
  const std::size_t n = spec.nodes.size();
  std::unordered_map<std::string, NodeIndex> by_name;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = spec.nodes[i];
    if (!by_name.emplace(node.name, i).second) throw Error(Errc::DuplicateNode, node.name);
    g.nodes_.push_back({i, node.kind, node.name});
    g.by_name_.emplace(node.name, i);
    g.by_kind_[static_cast<std::size_t>(node.kind)].push_back(i);
  }
  auto lookup = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(Errc::UnknownNode, "edge references unknown node '" + name + "'");
    return it->second;
  };

  g.parents_.assign(n, {});
  g.children_.assign(n, {});
  for (const auto& [parent_name, child_name] : spec.subsumption) {
    const NodeIndex parent = lookup(parent_name);
    const NodeIndex child = lookup(child_name);
    if (parent == child) throw Error(Errc::Cycle, "self-subsumption on '" + parent_name + "'");
    auto& ps = g.parents_[child];
    if (std::find(ps.begin(), ps.end(), parent) != ps.end()) continue;
    ps.push_back(parent);
    g.children_[parent].push_back(child);
  }

  // Cycle check before kind rules, so a reversed edge pair reports as a cycle.
  {
    enum class Mark : std::uint8_t { White, Grey, Black };
    std::vector<Mark> mark(n, Mark::White);
    std::function<void(NodeIndex)> visit = [&](NodeIndex u) {
      mark[u] = Mark::Grey;
      for (NodeIndex v : g.children_[u]) {
        if (mark[v] == Mark::Grey) {
          throw Error(Errc::Cycle, "subsumption cycle through '" + g.nodes_[v].name + "'");
        }
        if (mark[v] == Mark::White) visit(v);
      }
      mark[u] = Mark::Black;
    };
    for (NodeIndex u = 0; u < n; ++u) {
      if (mark[u] == Mark::White) visit(u);
    }
  }

  for (NodeIndex child = 0; child < n; ++child) {
    for (NodeIndex parent : g.parents_[child]) {
      if (!allowed_subsumption(g.nodes_[parent].kind, g.nodes_[child].kind)) {
        throw Error(Errc::InvalidEdge, std::string(to_string(g.nodes_[parent].kind)) + " '" +
                                           g.nodes_[parent].name + "' cannot subsume " +
                                           std::string(to_string(g.nodes_[child].kind)) + " '" +
                                           g.nodes_[child].name + "'");
      }
    }
  }

  for (NodeIndex i = 0; i < n; ++i) {
    const NodeId& node = g.nodes_[i];
    const std::size_t parents = g.parents_[i].size();
    switch (node.kind) {
      case NodeKind::Dynasty:
        break;
      case NodeKind::Period:
        if (parents == 0) throw Error(Errc::Orphan, "period '" + node.name + "' has no dynasty parent");
        if (parents > 1) {
          throw Error(Errc::MultipleDynastyParents, "period '" + node.name + "' has multiple dynasty parents");
        }
        break;
      case NodeKind::Shape:
      case NodeKind::Characteristic:
        if (parents == 0) {
          throw Error(Errc::Orphan, std::string(to_string(node.kind)) + " '" + node.name +
                                        "' has no period parent");
        }
        std::sort(g.parents_[i].begin(), g.parents_[i].end());
        break;
    }
  }
  for (auto& c : g.children_) std::sort(c.begin(), c.end());

  g.exclusion_matrix_.assign(n * n, 0);
  auto exclude = [&](NodeIndex a, NodeIndex b) {
    g.exclusion_matrix_[a * n + b] = 1;
    g.exclusion_matrix_[b * n + a] = 1;
  };
  for (const auto& [a_name, b_name] : spec.exclusion) {
    const NodeIndex a = lookup(a_name);
    const NodeIndex b = lookup(b_name);
    if (a == b) throw Error(Errc::InvalidEdge, "self-exclusion on '" + a_name + "'");
    if (g.nodes_[a].kind == NodeKind::Characteristic && g.nodes_[b].kind == NodeKind::Characteristic) {
      throw Error(Errc::InvalidEdge, "characteristics may not exclude each other ('" + a_name +
                                         "', '" + b_name + "')");
    }
    exclude(a, b);
  }
  for (NodeKind kind : {NodeKind::Dynasty, NodeKind::Period, NodeKind::Shape}) {
    const auto& group = g.of_kind(kind);
    for (std::size_t x = 0; x < group.size(); ++x) {
      for (std::size_t y = x + 1; y < group.size(); ++y) exclude(group[x], group[y]);
    }
  }
  for (NodeIndex a = 0; a < n; ++a) {
    for (NodeIndex b = a + 1; b < n; ++b) {
      if (g.exclusion_matrix_[a * n + b]) g.exclusion_.emplace_back(a, b);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Views and legality

GraphView::GraphView(const RelationGraph& graph, Scope scope)
    : graph_(&graph), scope_(scope), position_(graph.size(), -1) {
  for (const NodeId& node : graph.nodes()) {
    bool in = node.kind == NodeKind::Dynasty || node.kind == NodeKind::Period;
    in = in || (scope == Scope::EraShape && node.kind == NodeKind::Shape);
    in = in || (scope == Scope::EraCharacteristic && node.kind == NodeKind::Characteristic);
    if (in) {
      position_[node.index] = static_cast<std::ptrdiff_t>(nodes_.size());
      nodes_.push_back(node.index);
    }
  }
}

std::optional<std::size_t> GraphView::position(NodeIndex node) const {
  if (node >= position_.size() || position_[node] < 0) return std::nullopt;
  return static_cast<std::size_t>(position_[node]);
}

namespace {

struct LocalStructure {
  std::vector<std::vector<std::size_t>> parents;   // view positions
  std::vector<std::vector<std::size_t>> excluded;  // view positions with smaller index
};

LocalStructure local_structure(const GraphView& view) {
  const RelationGraph& g = view.graph();
  LocalStructure s;
  s.parents.resize(view.size());
  s.excluded.resize(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    for (NodeIndex p : g.parents(view.nodes()[i])) {
      if (auto pos = view.position(p)) s.parents[i].push_back(*pos);
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (g.excludes(view.nodes()[i], view.nodes()[j])) s.excluded[i].push_back(j);
    }
  }
  return s;
}

bool subsumption_ok(const LocalStructure& s, const std::vector<std::uint8_t>& bits) {
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i] || s.parents[i].empty()) continue;
    const bool any = std::any_of(s.parents[i].begin(), s.parents[i].end(),
                                 [&](std::size_t p) { return bits[p] != 0; });
    if (!any) return false;
  }
  return true;
}

}  // namespace

bool is_legal(const GraphView& view, const Assignment& a) {
  if (a.bits.size() != view.size()) {
    throw Error(Errc::LengthMismatch, "assignment has " + std::to_string(a.bits.size()) +
                                          " bits, view has " + std::to_string(view.size()) + " nodes");
  }
  const LocalStructure s = local_structure(view);
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (!a.bits[i]) continue;
    for (std::size_t j : s.excluded[i]) {
      if (a.bits[j]) return false;
    }
  }
  return subsumption_ok(s, a.bits);
}

std::vector<Assignment> enumerate_legal(const GraphView& view, std::size_t cap) {
  if (view.size() > cap) {
    throw Error(Errc::TooLarge, "view has " + std::to_string(view.size()) +
                                    " nodes, enumeration cap is " + std::to_string(cap));
  }
  const LocalStructure s = local_structure(view);
  std::vector<Assignment> out;
  std::vector<std::uint8_t> bits(view.size(), 0);
  // Depth-first, 0 before 1: emits in lexicographic order. Exclusions prune
  // eagerly; subsumption is checked at the leaves.
  std::function<void(std::size_t)> descend = [&](std::size_t i) {
    if (i == bits.size()) {
      if (subsumption_ok(s, bits)) out.push_back({bits});
      return;
    }
    bits[i] = 0;
    descend(i + 1);
    const bool blocked = std::any_of(s.excluded[i].begin(), s.excluded[i].end(),
                                     [&](std::size_t j) { return bits[j] != 0; });
    if (!blocked) {
      bits[i] = 1;
      descend(i + 1);
      bits[i] = 0;
    }
  };
  descend(0);
  return out;
}

}  // namespace dingdate
