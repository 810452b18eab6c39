#include "midway/dag.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <deque>
#include <map>
#include <sstream>

#include "midway/error.hpp"

namespace midway {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Data: return "data";
    case ErrorKind::Cycle: return "cycle";
    case ErrorKind::NotConverged: return "not-converged";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::Limit: return "limit";
    case ErrorKind::Numeric: return "numeric";
  }
  return "unknown";
}

bool NodeId::is_valid(std::string_view name) {
  if (name.empty()) return false;
  if (std::isdigit(static_cast<unsigned char>(name.front()))) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

NodeId::NodeId(std::string name) : name_(std::move(name)) {
  if (!is_valid(name_)) {
    throw Error(ErrorKind::InvalidArgument, "invalid node identifier '" + name_ + "'");
  }
}

std::string Path::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0) out += steps[i - 1] == Step::Forward ? " -> " : " <- ";
    out += nodes[i].str();
  }
  return out;
}

bool Path::is_directed() const {
  return std::all_of(steps.begin(), steps.end(), [](Step s) { return s == Step::Forward; });
}

namespace {

std::string describe_cycle(const std::vector<NodeId>& names,
                           const std::vector<std::vector<Dag::Index>>& children,
                           const std::vector<bool>& remaining) {
  // Walk forward inside the residual subgraph (every residual node has a
  // residual parent, hence a residual predecessor chain) until a repeat.
  const std::size_t n = names.size();
  std::vector<std::vector<Dag::Index>> residual_parents(n);
  for (std::size_t u = 0; u < n; ++u) {
    if (!remaining[u]) continue;
    for (auto v : children[u]) {
      if (remaining[v]) residual_parents[v].push_back(static_cast<Dag::Index>(u));
    }
  }
  Dag::Index start = 0;
  while (!remaining[start]) ++start;
  std::vector<int> seen_at(n, -1);
  std::vector<Dag::Index> walk;
  Dag::Index cur = start;
  while (seen_at[cur] < 0) {
    seen_at[cur] = static_cast<int>(walk.size());
    walk.push_back(cur);
    cur = residual_parents[cur].front();
  }
  // walk[seen_at[cur]..] traversed child -> parent; reverse into edge order.
  std::vector<Dag::Index> cycle(walk.begin() + seen_at[cur], walk.end());
  std::reverse(cycle.begin(), cycle.end());
  std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
  std::string out;
  for (auto v : cycle) out += names[v].str() + " -> ";
  out += names[cycle.front()].str();
  return out;
}

}  // namespace

Dag Dag::create(std::vector<NodeId> nodes, std::vector<Edge> edges) {
  Dag g;
  std::sort(nodes.begin(), nodes.end());
  if (auto dup = std::adjacent_find(nodes.begin(), nodes.end()); dup != nodes.end()) {
    throw Error(ErrorKind::InvalidArgument, "duplicate node '" + dup->str() + "'");
  }
  g.names_ = std::move(nodes);
  const std::size_t n = g.names_.size();
  g.parents_.assign(n, {});
  g.children_.assign(n, {});
  g.neighbours_.assign(n, {});

  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw Error(ErrorKind::InvalidArgument,
                "duplicate edge " + dup->parent.str() + " -> " + dup->child.str());
  }
  for (const auto& e : edges) {
    auto from = g.index_of(e.parent);
    auto to = g.index_of(e.child);
    if (!from || !to) {
      throw Error(ErrorKind::InvalidArgument,
                  "unknown endpoint in edge " + e.parent.str() + " -> " + e.child.str());
    }
    if (*from == *to) {
      throw Error(ErrorKind::Cycle, "cycle detected: " + e.parent.str() + " -> " + e.child.str());
    }
    g.children_[*from].push_back(*to);
    g.parents_[*to].push_back(*from);
  }
  g.edges_ = std::move(edges);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(g.parents_[i].begin(), g.parents_[i].end());
    std::sort(g.children_[i].begin(), g.children_[i].end());
    auto& nb = g.neighbours_[i];
    nb = g.parents_[i];
    nb.insert(nb.end(), g.children_[i].begin(), g.children_[i].end());
    std::sort(nb.begin(), nb.end());
  }

  // Kahn's algorithm, smallest index first so the order is canonical.
  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = g.parents_[i].size();
  std::set<Index> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(static_cast<Index>(i));
  }
  while (!ready.empty()) {
    const Index u = *ready.begin();
    ready.erase(ready.begin());
    g.topo_.push_back(u);
    for (auto v : g.children_[u]) {
      if (--indegree[v] == 0) ready.insert(v);
    }
  }
  if (g.topo_.size() != n) {
    std::vector<bool> remaining(n, true);
    for (auto v : g.topo_) remaining[v] = false;
    throw Error(ErrorKind::Cycle,
                "cycle detected: " + describe_cycle(g.names_, g.children_, remaining));
  }

  // Descendant closure, children before parents.
  g.descendant_.assign(n, std::vector<bool>(n, false));
  for (auto it = g.topo_.rbegin(); it != g.topo_.rend(); ++it) {
    auto& row = g.descendant_[*it];
    for (auto c : g.children_[*it]) {
      row[c] = true;
      const auto& sub = g.descendant_[c];
      for (std::size_t k = 0; k < n; ++k) {
        if (sub[k]) row[k] = true;
      }
    }
  }
  return g;
}

std::optional<Dag::Index> Dag::index_of(const NodeId& node) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), node);
  if (it == names_.end() || *it != node) return std::nullopt;
  return static_cast<Index>(it - names_.begin());
}

Dag::Index Dag::require(const NodeId& node) const {
  auto idx = index_of(node);
  if (!idx) throw Error(ErrorKind::InvalidArgument, "unknown node '" + node.str() + "'");
  return *idx;
}

bool Dag::has_edge(Index from, Index to) const {
  return std::binary_search(children_[from].begin(), children_[from].end(), to);
}

NodeSet Dag::parents_of(const NodeId& node) const {
  NodeSet out;
  for (auto p : parents_[require(node)]) out.insert(names_[p]);
  return out;
}

NodeSet Dag::children_of(const NodeId& node) const {
  NodeSet out;
  for (auto c : children_[require(node)]) out.insert(names_[c]);
  return out;
}

NodeSet Dag::descendants_of(const NodeId& node) const {
  const Index i = require(node);
  NodeSet out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (descendant_[i][k]) out.insert(names_[k]);
  }
  return out;
}

NodeSet Dag::ancestors_of(const NodeId& node) const {
  const Index i = require(node);
  NodeSet out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (descendant_[k][i]) out.insert(names_[k]);
  }
  return out;
}

std::string serialize(const Dag& g) {
  std::ostringstream out;
  for (const auto& n : g.nodes()) out << "node " << n.str() << ";\n";
  for (const auto& e : g.edges()) out << e.parent.str() << " -> " << e.child.str() << ";\n";
  return out.str();
}

std::string to_string(Identification status) {
  return status == Identification::Identified ? "Identified" : "NotIdentified";
}

std::string to_string(const NodeSet& set) {
  std::string out = "{";
  bool first = true;
  for (const auto& n : set) {
    if (!first) out += ", ";
    out += n.str();
    first = false;
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// DSL

namespace {

enum class Tok { Ident, Arrow, Semi, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_trivia();
    const int line = line_;
    const int col = col_;
    if (pos_ >= src_.size()) return {Tok::End, "", line, col};
    const char c = src_[pos_];
    if (c == ';') {
      advance();
      return {Tok::Semi, ";", line, col};
    }
    if (c == '-' && peek(1) == '>') {
      advance();
      advance();
      return {Tok::Arrow, "->", line, col};
    }
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      std::string text;
      while (pos_ < src_.size()) {
        const char d = src_[pos_];
        if (d == '-' && peek(1) == '>') break;
        if (!(std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '-')) break;
        text += d;
        advance();
      }
      if (!NodeId::is_valid(text)) {
        throw SyntaxError("invalid identifier '" + text + "'", line, col);
      }
      return {Tok::Ident, text, line, col};
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", line, col);
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

Dag parse_dag(std::string_view text) {
  Lexer lex(text);
  std::vector<NodeId> order;
  std::set<NodeId> known;
  std::set<NodeId> declared;
  std::vector<Edge> edges;
  std::set<Edge> edge_set;

  auto note = [&](const NodeId& id) {
    if (known.insert(id).second) order.push_back(id);
  };

  Token tok = lex.next();
  while (tok.kind != Tok::End) {
    if (tok.kind == Tok::Semi) {
      tok = lex.next();
      continue;
    }
    if (tok.kind != Tok::Ident) {
      throw SyntaxError("expected a statement, found '" + tok.text + "'", tok.line, tok.column);
    }
    Token after = lex.next();
    if (tok.text == "node" && after.kind == Tok::Ident) {
      NodeId id(after.text);
      if (!declared.insert(id).second) {
        throw SyntaxError("duplicate node '" + after.text + "'", after.line, after.column);
      }
      note(id);
      tok = lex.next();
      continue;
    }
    if (after.kind != Tok::Arrow) {
      throw SyntaxError("expected '->' after '" + tok.text + "'", after.line, after.column);
    }
    NodeId from(tok.text);
    note(from);
    while (after.kind == Tok::Arrow) {
      Token target = lex.next();
      if (target.kind != Tok::Ident) {
        throw SyntaxError("expected a node after '->'", target.line, target.column);
      }
      NodeId to(target.text);
      note(to);
      Edge e{from, to};
      if (from == to) {
        throw Error(ErrorKind::Cycle, "cycle detected: " + from.str() + " -> " + to.str());
      }
      if (!edge_set.insert(e).second) {
        throw SyntaxError("duplicate edge " + from.str() + " -> " + to.str(), target.line,
                          target.column);
      }
      edges.push_back(e);
      from = to;
      after = lex.next();
    }
    tok = after;
  }
  return Dag::create(std::move(order), std::move(edges));
}

// ---------------------------------------------------------------------------
// d-separation (reachability over (node, direction) states)

namespace {

void validate_members(const Dag& g, const NodeSet& set, const char* what) {
  for (const auto& n : set) {
    if (!g.contains(n)) {
      throw Error(ErrorKind::InvalidArgument,
                  std::string("unknown node '") + n.str() + "' in " + what);
    }
  }
}

bool disjoint(const NodeSet& a, const NodeSet& b) {
  return std::none_of(a.begin(), a.end(), [&](const NodeId& n) { return b.count(n) > 0; });
}

}  // namespace

bool d_separated(const Dag& g, const SeparationQuery& q) {
  if (q.set_a.empty() || q.set_b.empty()) {
    throw Error(ErrorKind::InvalidArgument, "separation query sets must be non-empty");
  }
  validate_members(g, q.set_a, "set_a");
  validate_members(g, q.set_b, "set_b");
  validate_members(g, q.given, "conditioning set");
  if (!disjoint(q.set_a, q.set_b) || !disjoint(q.set_a, q.given) ||
      !disjoint(q.set_b, q.given)) {
    throw Error(ErrorKind::InvalidArgument, "separation query sets must be disjoint");
  }

  const std::size_t n = g.size();
  std::vector<bool> in_given(n, false);
  for (const auto& z : q.given) in_given[g.require(z)] = true;

  // Nodes that are in `given` or have a descendant in it.
  std::vector<bool> opens_collider(n, false);
  for (std::size_t v = 0; v < n; ++v) {
    if (!in_given[v]) continue;
    opens_collider[v] = true;
    for (std::size_t u = 0; u < n; ++u) {
      if (g.is_descendant(static_cast<Dag::Index>(v), static_cast<Dag::Index>(u))) {
        opens_collider[u] = true;
      }
    }
  }

  // up = arrived from a child (or the start), down = arrived from a parent.
  enum Dir : int { Up = 0, Down = 1 };
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::deque<std::pair<Dag::Index, Dir>> queue;
  for (const auto& a : q.set_a) queue.emplace_back(g.require(a), Up);

  std::vector<bool> in_b(n, false);
  for (const auto& b : q.set_b) in_b[g.require(b)] = true;

  while (!queue.empty()) {
    auto [v, dir] = queue.front();
    queue.pop_front();
    if (visited[v][dir]) continue;
    visited[v][dir] = true;
    if (!in_given[v] && in_b[v]) return false;

    if (dir == Up && !in_given[v]) {
      for (auto p : g.parents(v)) queue.emplace_back(p, Up);
      for (auto c : g.children(v)) queue.emplace_back(c, Down);
    } else if (dir == Down) {
      if (!in_given[v]) {
        for (auto c : g.children(v)) queue.emplace_back(c, Down);
      }
      if (opens_collider[v]) {
        for (auto p : g.parents(v)) queue.emplace_back(p, Up);
      }
    }
  }
  return true;
}

}  // namespace midway
