#pragma once
// Seeded random relation graphs for property tests and the gradcheck command.

#include <cstddef>
#include <random>

#include "dingdate/graph.hpp"
#include "dingdate/losses.hpp"

namespace dingdate {

struct RandomGraphOptions {
  std::size_t max_view_nodes = 16;   // bound on |era| + max(|shapes|, |characteristics|)
  std::size_t max_dynasties = 3;
  std::size_t max_periods = 6;
  std::size_t max_attribute_parents = 3;
  double extra_exclusion_probability = 0.15;  // chance of each extra cross-kind exclusion
  std::size_t max_extra_exclusions = 3;
};

GraphSpec random_graph_spec(std::mt19937_64& rng, const RandomGraphOptions& options = {});

/// A pure era hierarchy: `dynasties` dynasties and `periods` periods, each
/// period under a random dynasty.
GraphSpec random_era_spec(std::mt19937_64& rng, std::size_t dynasties, std::size_t periods);

/// Like random_graph_spec, but at least two shapes and two characteristics,
/// and every period keeps an admissible shape.
RelationGraph random_attribute_graph(std::mt19937_64& rng, const RandomGraphOptions& options = {});

/// A legal label set: a period, a shape under it and a random subset of its
/// characteristics. Requires a period with an admissible shape.
SampleTargets random_targets(std::mt19937_64& rng, const RelationGraph& graph);

}  // namespace dingdate
