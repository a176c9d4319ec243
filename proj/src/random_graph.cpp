#include "dingdate/random_graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace dingdate {
namespace {

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::string label(char prefix, std::size_t i) { return std::string(1, prefix) + std::to_string(i); }

}  // namespace

GraphSpec random_era_spec(std::mt19937_64& rng, std::size_t dynasties, std::size_t periods) {
  GraphSpec spec;
  for (std::size_t d = 0; d < dynasties; ++d) spec.nodes.push_back({label('D', d), NodeKind::Dynasty});
  for (std::size_t p = 0; p < periods; ++p) {
    spec.nodes.push_back({label('P', p), NodeKind::Period});
    spec.subsumption.emplace_back(label('D', uniform(rng, 0, dynasties - 1)), label('P', p));
  }
  return spec;
}

GraphSpec random_graph_spec(std::mt19937_64& rng, const RandomGraphOptions& options) {
  const std::size_t dynasties = uniform(rng, 1, options.max_dynasties);
  const std::size_t max_periods =
      std::max<std::size_t>(1, std::min(options.max_periods, options.max_view_nodes - dynasties - 1));
  const std::size_t periods = uniform(rng, 1, max_periods);
  GraphSpec spec = random_era_spec(rng, dynasties, periods);

  const std::size_t room = options.max_view_nodes - dynasties - periods;
  const std::size_t shapes = uniform(rng, 0, room);
  const std::size_t characteristics = uniform(rng, 0, room);

  std::vector<std::size_t> order(periods);
  std::iota(order.begin(), order.end(), 0);
  auto attach = [&](char prefix, std::size_t count, NodeKind kind) {
    for (std::size_t a = 0; a < count; ++a) {
      spec.nodes.push_back({label(prefix, a), kind});
      std::shuffle(order.begin(), order.end(), rng);
      const std::size_t parents = uniform(rng, 1, std::min(periods, options.max_attribute_parents));
      for (std::size_t k = 0; k < parents; ++k) {
        spec.subsumption.emplace_back(label('P', order[k]), label(prefix, a));
      }
    }
  };
  attach('S', shapes, NodeKind::Shape);
  attach('C', characteristics, NodeKind::Characteristic);

  // Occasional cross-kind exclusions exercise the general legality rules.
  std::bernoulli_distribution coin(options.extra_exclusion_probability);
  for (std::size_t e = 0; e < options.max_extra_exclusions; ++e) {
    if (!coin(rng)) continue;
    const std::string era = (uniform(rng, 0, 1) == 0) ? label('D', uniform(rng, 0, dynasties - 1))
                                                       : label('P', uniform(rng, 0, periods - 1));
    if (shapes > 0 && uniform(rng, 0, 1) == 0) {
      spec.exclusion.emplace_back(era, label('S', uniform(rng, 0, shapes - 1)));
    } else if (characteristics > 0) {
      spec.exclusion.emplace_back(era, label('C', uniform(rng, 0, characteristics - 1)));
    }
  }
  return spec;
}

namespace {

// Attributes of `kind` under period p that may be active together with it.
std::vector<NodeIndex> admissible(const RelationGraph& g, NodeIndex p, NodeKind kind) {
  std::vector<NodeIndex> out;
  const NodeIndex d = g.dynasty_of(p);
  for (NodeIndex a : g.children(p)) {
    if (g.node(a).kind == kind && !g.excludes(a, p) && !g.excludes(a, d)) out.push_back(a);
  }
  return out;
}

}  // namespace

RelationGraph random_attribute_graph(std::mt19937_64& rng, const RandomGraphOptions& options) {
  for (;;) {
    const GraphSpec spec = random_graph_spec(rng, options);
    std::size_t shapes = 0, chars = 0;
    for (const auto& n : spec.nodes) {
      shapes += n.kind == NodeKind::Shape;
      chars += n.kind == NodeKind::Characteristic;
    }
    if (shapes < 2 || chars < 2) continue;
    RelationGraph g = build_graph(spec);
    bool ok = true;
    for (NodeIndex p : g.of_kind(NodeKind::Period)) {
      ok = ok && !g.excludes(p, g.dynasty_of(p)) && !admissible(g, p, NodeKind::Shape).empty();
    }
    if (ok) return g;
  }
}

SampleTargets random_targets(std::mt19937_64& rng, const RelationGraph& graph) {
  const auto& periods = graph.of_kind(NodeKind::Period);
  for (;;) {
    SampleTargets t;
    t.period = periods[uniform(rng, 0, periods.size() - 1)];
    const auto shapes = admissible(graph, t.period, NodeKind::Shape);
    if (shapes.empty()) continue;
    t.shape = shapes[uniform(rng, 0, shapes.size() - 1)];
    std::bernoulli_distribution coin(0.6);
    for (NodeIndex c : admissible(graph, t.period, NodeKind::Characteristic))
      if (coin(rng)) t.characteristics.push_back(c);
    return t;
  }
}

}  // namespace dingdate
