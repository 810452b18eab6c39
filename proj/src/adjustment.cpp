#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>

#include "midway/dag.hpp"
#include "midway/error.hpp"

namespace midway {
namespace {

using Index = Dag::Index;

struct RawPath {
  std::vector<Index> nodes;
  std::vector<Step> steps;
};

// Depth-first enumeration of simple paths from x to y. Neighbours are
// visited in ascending index order, and indices follow name order, so paths
// come out in lexicographic order of their node sequence. `visit` returns
// false to stop early.
void for_each_simple_path(const Dag& g, Index x, Index y,
                          const std::function<bool(const RawPath&)>& visit) {
  RawPath cur;
  std::vector<bool> on_path(g.size(), false);
  bool stop = false;
  std::function<void(Index)> dfs = [&](Index v) {
    if (v == y) {
      if (!visit(cur)) stop = true;
      return;
    }
    for (Index w : g.neighbours(v)) {
      if (stop) return;
      if (on_path[w]) continue;
      on_path[w] = true;
      cur.nodes.push_back(w);
      cur.steps.push_back(g.has_edge(v, w) ? Step::Forward : Step::Backward);
      dfs(w);
      cur.nodes.pop_back();
      cur.steps.pop_back();
      on_path[w] = false;
    }
  };
  on_path[x] = true;
  cur.nodes.push_back(x);
  dfs(x);
}

Path to_path(const Dag& g, const RawPath& raw) {
  Path p;
  p.nodes.reserve(raw.nodes.size());
  for (auto v : raw.nodes) p.nodes.push_back(g.name(v));
  p.steps = raw.steps;
  return p;
}

bool is_collider(const std::vector<Step>& steps, std::size_t interior) {
  return steps[interior - 1] == Step::Forward && steps[interior] == Step::Backward;
}

bool directed(const RawPath& p) {
  return std::all_of(p.steps.begin(), p.steps.end(), [](Step s) { return s == Step::Forward; });
}

bool raw_blocked(const Dag& g, const RawPath& p, const std::vector<bool>& given) {
  for (std::size_t i = 1; i + 1 < p.nodes.size(); ++i) {
    const Index v = p.nodes[i];
    if (is_collider(p.steps, i)) {
      bool open = given[v];
      for (std::size_t u = 0; !open && u < g.size(); ++u) {
        open = given[u] && g.is_descendant(static_cast<Index>(u), v);
      }
      if (!open) return true;
    } else if (given[v]) {
      return true;
    }
  }
  return false;
}

std::vector<bool> membership(const Dag& g, const NodeSet& set) {
  std::vector<bool> out(g.size(), false);
  for (const auto& n : set) out[g.require(n)] = true;
  return out;
}

// Bitmask form of a path for repeated blocking checks (graphs of <= 64
// nodes). A path is blocked by conditioning mask c iff
// (noncolliders & c) != 0, or some collider closure (collider plus its
// descendants) misses c entirely.
struct MaskedPath {
  RawPath raw;
  std::uint64_t noncolliders = 0;
  std::vector<std::uint64_t> collider_closures;
  bool through_unobserved = false;

  bool blocked(std::uint64_t cond) const {
    if ((noncolliders & cond) != 0) return true;
    return std::any_of(collider_closures.begin(), collider_closures.end(),
                       [cond](std::uint64_t c) { return (c & cond) == 0; });
  }
};

std::uint64_t bit(Index v) { return std::uint64_t{1} << v; }

struct SearchSpace {
  Index x = 0;
  Index y = 0;
  std::uint64_t forced = 0;
  std::vector<Index> eligible;  // non-descendants of x, ascending
  std::vector<Index> pool;      // includes descendants of x
  std::vector<MaskedPath> paths;
};

SearchSpace build_search(const Dag& g, const NodeId& x, const NodeId& y,
                         const NodeSet& observed, const NodeSet& forced,
                         const AdjustmentOptions& options) {
  if (g.size() > 64) {
    throw Error(ErrorKind::Limit, "adjustment search supports graphs of at most 64 nodes");
  }
  for (const auto& n : observed) g.require(n);
  SearchSpace s;
  s.x = g.require(x);
  s.y = g.require(y);
  if (s.x == s.y) throw Error(ErrorKind::InvalidArgument, "exposure and outcome must differ");
  if (!observed.count(x)) {
    throw Error(ErrorKind::InvalidArgument, "exposure '" + x.str() + "' is not observed");
  }
  if (!observed.count(y)) {
    throw Error(ErrorKind::InvalidArgument, "outcome '" + y.str() + "' is not observed");
  }
  std::uint64_t post_selection = 0;
  for (const auto& f : forced) {
    if (!observed.count(f)) {
      throw Error(ErrorKind::InvalidArgument, "forced node '" + f.str() + "' is not observed");
    }
    const Index fi = g.require(f);
    if (fi == s.x || fi == s.y) {
      throw Error(ErrorKind::InvalidArgument, "exposure/outcome cannot be forced");
    }
    s.forced |= bit(fi);
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (g.is_descendant(static_cast<Index>(v), fi)) post_selection |= bit(static_cast<Index>(v));
    }
  }

  std::uint64_t observed_mask = 0;
  for (const auto& n : observed) observed_mask |= bit(g.require(n));

  for (const auto& n : observed) {
    const Index v = g.require(n);
    if (v == s.x || v == s.y || (s.forced & bit(v)) || (post_selection & bit(v))) continue;
    s.pool.push_back(v);
    if (!g.is_descendant(v, s.x)) s.eligible.push_back(v);
  }
  std::sort(s.pool.begin(), s.pool.end());
  std::sort(s.eligible.begin(), s.eligible.end());
  if (s.eligible.size() > options.max_candidates) {
    throw Error(ErrorKind::Limit, "adjustment search has " + std::to_string(s.eligible.size()) +
                                      " candidates; the limit is " +
                                      std::to_string(options.max_candidates));
  }

  std::vector<std::uint64_t> closure(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    closure[v] = bit(static_cast<Index>(v));
    for (std::size_t u = 0; u < g.size(); ++u) {
      if (g.is_descendant(static_cast<Index>(u), static_cast<Index>(v))) {
        closure[v] |= bit(static_cast<Index>(u));
      }
    }
  }

  for_each_simple_path(g, s.x, s.y, [&](const RawPath& p) {
    if (directed(p)) return true;
    MaskedPath m;
    m.raw = p;
    for (std::size_t i = 1; i + 1 < p.nodes.size(); ++i) {
      const Index v = p.nodes[i];
      if (is_collider(p.steps, i)) {
        m.collider_closures.push_back(closure[v]);
      } else {
        m.noncolliders |= bit(v);
      }
      if (!(observed_mask & bit(v))) m.through_unobserved = true;
    }
    s.paths.push_back(std::move(m));
    if (s.paths.size() > options.max_paths) {
      throw Error(ErrorKind::Limit, "non-causal path enumeration exceeded " +
                                        std::to_string(options.max_paths) + " paths");
    }
    return true;
  });
  return s;
}

bool admissible_mask(const SearchSpace& s, std::uint64_t cond) {
  return std::all_of(s.paths.begin(), s.paths.end(),
                     [cond](const MaskedPath& p) { return p.blocked(cond); });
}

NodeSet to_set(const Dag& g, std::uint64_t mask) {
  NodeSet out;
  while (mask) {
    const int v = std::countr_zero(mask);
    out.insert(g.name(static_cast<Index>(v)));
    mask &= mask - 1;
  }
  return out;
}

// Calls visit(mask) for every subset of `items` by increasing size, each
// size in lexicographic order.
void for_each_subset(const std::vector<Index>& items,
                     const std::function<void(std::uint64_t)>& visit) {
  const std::size_t m = items.size();
  for (std::size_t k = 0; k <= m; ++k) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      std::uint64_t mask = 0;
      for (auto i : idx) mask |= bit(items[i]);
      visit(mask);
      // Advance to the next k-combination.
      std::size_t pos = k;
      while (pos > 0 && idx[pos - 1] == m - k + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
}

bool set_order(const NodeSet& a, const NodeSet& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

bool path_blocked(const Dag& g, const Path& path, const NodeSet& given) {
  RawPath raw;
  for (const auto& n : path.nodes) raw.nodes.push_back(g.require(n));
  raw.steps = path.steps;
  if (raw.steps.size() + 1 != raw.nodes.size()) {
    throw Error(ErrorKind::InvalidArgument, "malformed path");
  }
  return raw_blocked(g, raw, membership(g, given));
}

std::vector<Path> simple_paths(const Dag& g, const NodeId& x, const NodeId& y) {
  const Index xi = g.require(x);
  const Index yi = g.require(y);
  if (xi == yi) throw Error(ErrorKind::InvalidArgument, "path endpoints must differ");
  std::vector<Path> out;
  for_each_simple_path(g, xi, yi, [&](const RawPath& p) {
    out.push_back(to_path(g, p));
    return true;
  });
  return out;
}

std::vector<Path> backdoor_paths(const Dag& g, const NodeId& x, const NodeId& y) {
  const Index xi = g.require(x);
  const Index yi = g.require(y);
  if (xi == yi) throw Error(ErrorKind::InvalidArgument, "exposure and outcome must differ");
  std::vector<Path> out;
  for_each_simple_path(g, xi, yi, [&](const RawPath& p) {
    if (p.steps.front() == Step::Backward) out.push_back(to_path(g, p));
    return true;
  });
  return out;
}

bool is_backdoor_admissible(const Dag& g, const NodeId& x, const NodeId& y, const NodeSet& z,
                            const NodeSet& forced) {
  const Index xi = g.require(x);
  const Index yi = g.require(y);
  if (xi == yi) throw Error(ErrorKind::InvalidArgument, "exposure and outcome must differ");
  NodeSet cond = z;
  cond.insert(forced.begin(), forced.end());
  if (cond.count(x) || cond.count(y)) {
    throw Error(ErrorKind::InvalidArgument, "exposure and outcome cannot be conditioned on");
  }
  for (const auto& v : z) {
    if (forced.count(v)) continue;
    if (g.is_descendant(g.require(v), xi)) return false;
  }
  const auto given = membership(g, cond);
  bool all_blocked = true;
  for_each_simple_path(g, xi, yi, [&](const RawPath& p) {
    if (directed(p)) return true;
    if (!raw_blocked(g, p, given)) all_blocked = false;
    return all_blocked;
  });
  return all_blocked;
}

IdentifyResult find_adjustment_sets(const Dag& g, const NodeId& x, const NodeId& y,
                                    const NodeSet& observed, const NodeSet& forced,
                                    const AdjustmentOptions& options) {
  const SearchSpace s = build_search(g, x, y, observed, forced, options);
  IdentifyResult result;

  std::vector<std::uint64_t> minimal;
  for_each_subset(s.eligible, [&](std::uint64_t subset) {
    for (auto m : minimal) {
      if ((m & subset) == m) return;  // superset of a known minimal set
    }
    if (admissible_mask(s, s.forced | subset)) minimal.push_back(subset);
  });

  if (!minimal.empty()) {
    result.status = Identification::Identified;
    for (auto m : minimal) result.admissible_sets.push_back(to_set(g, s.forced | m));
    std::sort(result.admissible_sets.begin(), result.admissible_sets.end(), set_order);
    return result;
  }

  // Not identified: explain with the largest descendant-free candidate set
  // and, when the pool also holds descendants of x, the full pool.
  result.status = Identification::NotIdentified;
  std::uint64_t eligible_mask = 0;
  for (auto v : s.eligible) eligible_mask |= bit(v);
  std::uint64_t pool_mask = 0;
  for (auto v : s.pool) pool_mask |= bit(v);
  std::vector<std::uint64_t> tried{s.forced | eligible_mask};
  if (pool_mask != eligible_mask) tried.push_back(s.forced | pool_mask);

  for (auto cond : tried) {
    // Paths through an unobserved node come first (they show the latent
    // confounding that no observed set can remove), then lexicographic.
    const MaskedPath* best = nullptr;
    for (const auto& p : s.paths) {
      if (p.blocked(cond)) continue;
      if (best == nullptr || (p.through_unobserved && !best->through_unobserved)) best = &p;
      if (best->through_unobserved) break;
    }
    if (best == nullptr) continue;
    Path w = to_path(g, best->raw);
    if (std::find(result.witness_paths.begin(), result.witness_paths.end(), w) !=
        result.witness_paths.end()) {
      continue;
    }
    result.witness_paths.push_back(std::move(w));
    result.witness_sets.push_back(to_set(g, cond));
  }
  return result;
}

std::vector<NodeSet> all_adjustment_sets(const Dag& g, const NodeId& x, const NodeId& y,
                                         const NodeSet& observed, const NodeSet& forced,
                                         const AdjustmentOptions& options) {
  const SearchSpace s = build_search(g, x, y, observed, forced, options);
  std::vector<NodeSet> out;
  for_each_subset(s.eligible, [&](std::uint64_t subset) {
    if (admissible_mask(s, s.forced | subset)) out.push_back(to_set(g, s.forced | subset));
  });
  std::sort(out.begin(), out.end(), set_order);
  return out;
}

}  // namespace midway
