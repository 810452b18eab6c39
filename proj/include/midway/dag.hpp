#pragma once

// Causal DAGs: construction, the text DSL, d-separation and the back-door
// identification machinery.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace midway {

// A node label. Letters, digits, '_' and '-', not starting with a digit.
class NodeId {
 public:
  NodeId() = default;
  explicit NodeId(std::string name);
  NodeId(const char* name) : NodeId(std::string(name)) {}  // NOLINT: literal convenience

  static bool is_valid(std::string_view name);

  const std::string& str() const noexcept { return name_; }

  auto operator<=>(const NodeId&) const = default;

 private:
  std::string name_;
};

using NodeSet = std::set<NodeId>;

struct Edge {
  NodeId parent;
  NodeId child;
  auto operator<=>(const Edge&) const = default;
};

enum class Step : std::uint8_t { Forward, Backward };

// A simple path in the skeleton. steps[i] says whether the edge between
// nodes[i] and nodes[i+1] points forward (nodes[i] -> nodes[i+1]).
struct Path {
  std::vector<NodeId> nodes;
  std::vector<Step> steps;

  std::string to_string() const;
  bool is_directed() const;
  bool operator==(const Path&) const = default;
};

class Dag {
 public:
  using Index = std::uint32_t;

  Dag() = default;

  // Validates every invariant: endpoints declared, no self-loops, no
  // duplicate edges, acyclic. Throws midway::Error otherwise.
  static Dag create(std::vector<NodeId> nodes, std::vector<Edge> edges);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  // Sorted lexicographically; node indices follow this order.
  const std::vector<NodeId>& nodes() const noexcept { return names_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool contains(const NodeId& node) const { return index_of(node).has_value(); }
  std::optional<Index> index_of(const NodeId& node) const;
  Index require(const NodeId& node) const;
  const NodeId& name(Index i) const { return names_[i]; }

  const std::vector<Index>& parents(Index i) const { return parents_[i]; }
  const std::vector<Index>& children(Index i) const { return children_[i]; }
  // Union of parents and children, ascending.
  const std::vector<Index>& neighbours(Index i) const { return neighbours_[i]; }

  bool has_edge(Index from, Index to) const;
  // Proper descendants (the node itself excluded).
  bool is_descendant(Index node, Index of) const { return descendant_[of][node]; }

  NodeSet parents_of(const NodeId& node) const;
  NodeSet children_of(const NodeId& node) const;
  NodeSet descendants_of(const NodeId& node) const;
  NodeSet ancestors_of(const NodeId& node) const;

  const std::vector<Index>& topological_order() const noexcept { return topo_; }

  bool operator==(const Dag& other) const {
    return names_ == other.names_ && edges_ == other.edges_;
  }

 private:
  std::vector<NodeId> names_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Index>> parents_;
  std::vector<std::vector<Index>> children_;
  std::vector<std::vector<Index>> neighbours_;
  std::vector<std::vector<bool>> descendant_;
  std::vector<Index> topo_;
};

// DAG DSL: `A -> B;` edges (chains `A -> B -> C` allowed), `node A;` for
// isolated nodes, `#` comments. The trailing ';' of a statement is optional.
Dag parse_dag(std::string_view text);

// Emits `node X;` for every node in sorted order, then the sorted edges.
std::string serialize(const Dag& g);

struct SeparationQuery {
  NodeSet set_a;
  NodeSet set_b;
  NodeSet given;
};

bool d_separated(const Dag& g, const SeparationQuery& q);

// Blocking rule on one path: blocked iff some non-collider is in `given`, or
// some collider is outside `given` and has no descendant in it.
bool path_blocked(const Dag& g, const Path& path, const NodeSet& given);

// All simple paths from x to y, in lexicographic order of node sequence.
std::vector<Path> simple_paths(const Dag& g, const NodeId& x, const NodeId& y);

// Simple paths from x to y whose first edge points into x.
std::vector<Path> backdoor_paths(const Dag& g, const NodeId& x, const NodeId& y);

// Admissibility of `z` for the effect of x on y. `forced` holds nodes that
// are conditioned on by study design (sample selection such as
// Admitted = TRUE); they always join the conditioning set and are exempt
// from the non-descendant requirement. Every non-causal path between x and y
// (any path that is not directed x -> ... -> y) must be blocked by z ∪ forced.
// With no forced descendants of x this is exactly the back-door criterion.
bool is_backdoor_admissible(const Dag& g, const NodeId& x, const NodeId& y,
                            const NodeSet& z, const NodeSet& forced = {});

enum class Identification { Identified, NotIdentified };

struct IdentifyResult {
  Identification status = Identification::NotIdentified;
  std::vector<NodeSet> admissible_sets;  // minimal sets, forced members included
  std::vector<Path> witness_paths;
  std::vector<NodeSet> witness_sets;  // conditioning set each witness survives
};

struct AdjustmentOptions {
  std::size_t max_candidates = 20;  // non-forced observed candidates
  std::size_t max_paths = 2'000'000;
};

// Exhaustive search over forced ⊆ z ⊆ observed \ {x, y}. Candidates exclude
// descendants of forced nodes (post-selection variables). Returns all
// minimal admissible sets ordered by size, then lexicographically.
IdentifyResult find_adjustment_sets(const Dag& g, const NodeId& x, const NodeId& y,
                                    const NodeSet& observed, const NodeSet& forced,
                                    const AdjustmentOptions& options = {});

// Every admissible set within the same search space (not only minimal ones).
std::vector<NodeSet> all_adjustment_sets(const Dag& g, const NodeId& x, const NodeId& y,
                                         const NodeSet& observed, const NodeSet& forced,
                                         const AdjustmentOptions& options = {});

std::string to_string(Identification status);
std::string to_string(const NodeSet& set);

}  // namespace midway
