#pragma once
// Label relation graph over dynasties, periods, shapes and characteristics.
//
// Subsumption edges run parent -> child: an active child needs at least one
// active parent. Exclusion edges forbid two nodes being active together.
// Dynasties, periods and shapes are pairwise exclusive within their kind;
// characteristics never exclude each other.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace dingdate {

enum class NodeKind : std::uint8_t { Dynasty, Period, Shape, Characteristic };

std::string_view to_string(NodeKind kind) noexcept;

using NodeIndex = std::size_t;

struct NodeId {
  NodeIndex index = 0;
  NodeKind kind = NodeKind::Dynasty;
  std::string name;
};

/// Input to build_graph. Edges refer to nodes by name.
struct GraphSpec {
  struct Node {
    std::string name;
    NodeKind kind;
  };
  std::vector<Node> nodes;
  std::vector<std::pair<std::string, std::string>> subsumption;  // (parent, child)
  std::vector<std::pair<std::string, std::string>> exclusion;

  /// Convenience: the JSON schema layout as a spec.
  static GraphSpec from_json(const nlohmann::json& j);
  static GraphSpec load(const std::filesystem::path& path);
};

class RelationGraph {
 public:
  const std::vector<NodeId>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const NodeId& node(NodeIndex i) const { return nodes_.at(i); }
  std::optional<NodeIndex> find(std::string_view name) const;
  NodeIndex index_of(std::string_view name) const;  // throws UnknownNode

  /// Nodes of one kind, in index order.
  const std::vector<NodeIndex>& of_kind(NodeKind kind) const noexcept {
    return by_kind_[static_cast<std::size_t>(kind)];
  }
  std::size_t count(NodeKind kind) const noexcept { return of_kind(kind).size(); }
  std::size_t era_count() const noexcept { return count(NodeKind::Dynasty) + count(NodeKind::Period); }

  const std::vector<NodeIndex>& parents(NodeIndex i) const { return parents_.at(i); }
  const std::vector<NodeIndex>& children(NodeIndex i) const { return children_.at(i); }
  /// The single dynasty parent of a period.
  NodeIndex dynasty_of(NodeIndex period) const { return parents_.at(period).front(); }

  bool excludes(NodeIndex a, NodeIndex b) const;
  const std::vector<std::pair<NodeIndex, NodeIndex>>& exclusion_edges() const noexcept {
    return exclusion_;
  }

  /// Serializes to the schema JSON layout (dynasties, periods, shapes, characteristics).
  nlohmann::json to_json() const;

 private:
  friend RelationGraph build_graph(const GraphSpec& spec);

  std::vector<NodeId> nodes_;
  std::vector<std::vector<NodeIndex>> by_kind_ = std::vector<std::vector<NodeIndex>>(4);
  std::vector<std::vector<NodeIndex>> parents_;
  std::vector<std::vector<NodeIndex>> children_;
  std::vector<std::pair<NodeIndex, NodeIndex>> exclusion_;  // (lo, hi), sorted, unique
  std::vector<std::uint8_t> exclusion_matrix_;
  std::map<std::string, NodeIndex, std::less<>> by_name_;
};

/// The era hierarchy of the bronze-ding corpus: Shang (Early, Late), Western
/// Zhou, Spring and Autumn and Warring States (Early, Mid, Late each).
GraphSpec ding_era_spec();

/// Validates the spec and inserts the mandatory exclusion edges.
/// Errors: DuplicateNode, UnknownNode, Cycle, InvalidEdge, Orphan,
/// MultipleDynastyParents.
RelationGraph build_graph(const GraphSpec& spec);

enum class Scope : std::uint8_t { Era, EraShape, EraCharacteristic };

std::string_view to_string(Scope scope) noexcept;

/// Binary labelling of a view's nodes, in view order.
struct Assignment {
  std::vector<std::uint8_t> bits;

  friend bool operator==(const Assignment&, const Assignment&) = default;
  std::string str() const;
};

/// The node subset a scope selects: era nodes, plus shapes or characteristics.
class GraphView {
 public:
  GraphView(const RelationGraph& graph, Scope scope);

  const RelationGraph& graph() const noexcept { return *graph_; }
  Scope scope() const noexcept { return scope_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Graph indices of the view's nodes, ascending.
  const std::vector<NodeIndex>& nodes() const noexcept { return nodes_; }
  /// View position of a graph node, if it belongs to the view.
  std::optional<std::size_t> position(NodeIndex node) const;
  bool contains(NodeIndex node) const { return position(node).has_value(); }

 private:
  const RelationGraph* graph_;
  Scope scope_;
  std::vector<NodeIndex> nodes_;
  std::vector<std::ptrdiff_t> position_;
};

inline constexpr std::size_t kDefaultEnumerationCap = 20;

/// Exclusion pairs inactive and every active child has an active parent in the view.
bool is_legal(const GraphView& view, const Assignment& a);

/// All legal assignments in lexicographic order (bit 0 most significant, 0 < 1).
std::vector<Assignment> enumerate_legal(const GraphView& view,
                                        std::size_t cap = kDefaultEnumerationCap);

}  // namespace dingdate
