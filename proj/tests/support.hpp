#pragma once

// Shared helpers for the unit and acceptance suites: fixture loading, random
// graph generation and oracles that are deliberately independent of the
// library code paths they check.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <algorithm>
#include <functional>
#include <map>
#include <numbers>
#include <utility>
#include <sstream>
#include <string>
#include <vector>

#include "midway/dag.hpp"
#include "midway/rng.hpp"
#include "midway/scm.hpp"

#ifndef MIDWAY_DATA_DIR
#error "MIDWAY_DATA_DIR must point at the repository data/ directory"
#endif

namespace midway::testing {

inline std::string data_path(const std::string& rel) {
  return std::string(MIDWAY_DATA_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Dag load_graph(const std::string& name) {
  return parse_dag(read_file(data_path("graphs/" + name)));
}

// Plain adjacency-matrix DAG used by the oracles below.
struct MatrixDag {
  int n = 0;
  std::vector<std::vector<bool>> edge;  // edge[u][v]: u -> v
  std::vector<std::string> names;
};

// Random DAG over nodes V0..V{n-1}: a random permutation fixes a causal
// order and each forward pair becomes an edge with probability p.
inline MatrixDag random_matrix_dag(Rng& rng, int n, double p) {
  MatrixDag m;
  m.n = n;
  m.edge.assign(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) m.names.push_back("V" + std::to_string(i));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < p) m.edge[order[i]][order[j]] = true;
    }
  }
  return m;
}

inline Dag to_dag(const MatrixDag& m) {
  std::vector<NodeId> nodes;
  std::vector<Edge> edges;
  for (int i = 0; i < m.n; ++i) nodes.emplace_back(m.names[i]);
  for (int u = 0; u < m.n; ++u) {
    for (int v = 0; v < m.n; ++v) {
      if (m.edge[u][v]) edges.push_back({NodeId(m.names[u]), NodeId(m.names[v])});
    }
  }
  return Dag::create(std::move(nodes), std::move(edges));
}

// Brute-force d-separation: enumerate every simple path between every
// a in A and b in B and apply the blocking rule path by path.
class BruteForceSeparation {
 public:
  explicit BruteForceSeparation(const MatrixDag& m) : m_(m) {
    desc_.assign(m.n, std::vector<bool>(m.n, false));
    for (int s = 0; s < m.n; ++s) {
      std::vector<int> stack{s};
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < m.n; ++v) {
          if (m.edge[u][v] && !desc_[s][v]) {
            desc_[s][v] = true;
            stack.push_back(v);
          }
        }
      }
    }
  }

  bool separated(const std::vector<int>& a, const std::vector<int>& b,
                 const std::vector<int>& given) const {
    std::vector<bool> z(m_.n, false);
    for (int g : given) z[g] = true;
    for (int x : a) {
      for (int y : b) {
        bool connected = false;
        std::vector<int> path{x};
        std::vector<bool> used(m_.n, false);
        used[x] = true;
        walk(x, y, z, path, used, connected);
        if (connected) return false;
      }
    }
    return true;
  }

  // Whether a concrete node sequence is blocked given z.
  bool blocked(const std::vector<int>& path, const std::vector<bool>& z) const {
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      const int prev = path[i - 1];
      const int v = path[i];
      const int next = path[i + 1];
      const bool collider = m_.edge[prev][v] && m_.edge[next][v];
      if (collider) {
        bool open = z[v];
        for (int d = 0; d < m_.n && !open; ++d) open = z[d] && desc_[v][d];
        if (!open) return true;
      } else if (z[v]) {
        return true;
      }
    }
    return false;
  }

  // Every simple path from x to y as node sequences.
  std::vector<std::vector<int>> all_paths(int x, int y) const {
    std::vector<std::vector<int>> out;
    std::vector<int> path{x};
    std::vector<bool> used(m_.n, false);
    used[x] = true;
    collect(x, y, path, used, out);
    return out;
  }

  bool is_descendant(int node, int of) const { return desc_[of][node]; }

 private:
  bool adjacent(int u, int v) const { return m_.edge[u][v] || m_.edge[v][u]; }

  void walk(int u, int y, const std::vector<bool>& z, std::vector<int>& path,
            std::vector<bool>& used, bool& connected) const {
    if (connected) return;
    if (u == y) {
      if (!blocked(path, z)) connected = true;
      return;
    }
    for (int v = 0; v < m_.n; ++v) {
      if (used[v] || !adjacent(u, v)) continue;
      used[v] = true;
      path.push_back(v);
      walk(v, y, z, path, used, connected);
      path.pop_back();
      used[v] = false;
    }
  }

  void collect(int u, int y, std::vector<int>& path, std::vector<bool>& used,
               std::vector<std::vector<int>>& out) const {
    if (u == y) {
      out.push_back(path);
      return;
    }
    for (int v = 0; v < m_.n; ++v) {
      if (used[v] || !adjacent(u, v)) continue;
      used[v] = true;
      path.push_back(v);
      collect(v, y, path, used, out);
      path.pop_back();
      used[v] = false;
    }
  }

  const MatrixDag& m_;
  std::vector<std::vector<bool>> desc_;
};

inline NodeSet names_of(const MatrixDag& m, const std::vector<int>& idx) {
  NodeSet out;
  for (int i : idx) out.insert(NodeId(m.names[i]));
  return out;
}

// Random separation query with non-empty disjoint A, B and a random
// conditioning set from the remaining nodes.
struct RandomQuery {
  std::vector<int> a, b, given;
};

inline RandomQuery random_query(Rng& rng, int n) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  RandomQuery q;
  const int na = 1 + static_cast<int>(rng.below(std::min(2, n - 1)));
  const int nb = 1 + static_cast<int>(rng.below(std::min(2, n - na)));
  int k = 0;
  for (int i = 0; i < na; ++i) q.a.push_back(perm[k++]);
  for (int i = 0; i < nb; ++i) q.b.push_back(perm[k++]);
  for (; k < n; ++k) {
    if (rng.uniform() < 0.35) q.given.push_back(perm[k]);
  }
  return q;
}


// Logit MAP oracle.
// Log-posterior written out directly, independent of the library.
inline double log_post(const std::vector<double>& x, const std::vector<double>& y, double sd0,
                double sd1, double b0, double b1) {
  double s = -0.5 * (b0 * b0 / (sd0 * sd0) + b1 * b1 / (sd1 * sd1));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = b0 + b1 * x[i];
    s += y[i] * eta - (eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)));
  }
  return s;
}

// Grid search: step 1e-2 over [-5, 5]^2, then step 1e-3 and 1e-5 in
// shrinking windows around the incumbent.
inline std::pair<double, double> grid_mode(const std::vector<double>& x, const std::vector<double>& y,
                                    double sd0, double sd1) {
  double best = -1e300, b0 = 0, b1 = 0;
  auto scan = [&](double c0, double c1, double half, double step) {
    const int k = static_cast<int>(std::lround(half / step));
    double nb0 = b0, nb1 = b1;
    for (int i = -k; i <= k; ++i) {
      for (int j = -k; j <= k; ++j) {
        const double a = c0 + i * step, b = c1 + j * step;
        const double v = log_post(x, y, sd0, sd1, a, b);
        if (v > best) {
          best = v;
          nb0 = a;
          nb1 = b;
        }
      }
    }
    b0 = nb0;
    b1 = nb1;
  };
  scan(0, 0, 5.0, 1e-2);
  scan(b0, b1, 0.02, 1e-3);
  scan(b0, b1, 0.002, 1e-5);
  return {b0, b1};
}

struct SmallSet {
  std::vector<double> x, y;
};

inline std::vector<SmallSet> small_sets() {
  return {
      {{0, 0, 0, 1, 1, 1}, {0, 0, 1, 0, 1, 1}},
      {{-1, -0.5, 0, 0.5, 1, 1.5, 2}, {0, 0, 1, 0, 1, 1, 1}},
      {{0, 1}, {0, 1}},
      {{1, 2, 3, 4, 5, 6, 7, 8}, {1, 0, 1, 1, 0, 1, 1, 1}},
      {{-2, -1, 0, 1, 2}, {1, 1, 0, 0, 0}},
      {{0.3, 0.1, 0.9, 0.4, 0.7, 0.2, 0.8, 0.6, 0.5}, {0, 0, 1, 1, 1, 0, 1, 0, 1}},
  };
}


// Reference densities for the positivity checks.
// Beta(a, b) draw via two gamma variates built from exponentials (integer
// shapes only), independent of the library.
inline double beta_int(Rng& rng, int a, int b) {
  auto gamma_int = [&](int k) {
    double s = 0;
    for (int i = 0; i < k; ++i) s -= std::log(1.0 - rng.uniform());
    return s;
  };
  const double x = gamma_int(a);
  const double y = gamma_int(b);
  return x / (x + y);
}

inline double truncated_normal(Rng& rng, double mu, double sd) {
  for (;;) {
    const double v = rng.normal(mu, sd);
    if (v > 0 && v < 1) return v;
  }
}

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }
inline double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double trunc_pdf(double x, double mu, double sd) {
  return phi((x - mu) / sd) / sd / (Phi((1 - mu) / sd) - Phi(-mu / sd));
}

// Numerically integrated overlap of two normals truncated to (0, 1).
inline double truncated_overlap(double mu_a, double mu_b, double sd, int steps = 200000) {
  double total = 0;
  for (int i = 0; i <= steps; ++i) {
    const double x = static_cast<double>(i) / steps;
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    total += w * std::min(trunc_pdf(x, mu_a, sd), trunc_pdf(x, mu_b, sd)) / steps;
  }
  return total;
}

// Binary SCM over a random DAG; every CPT entry lies in [0.1, 0.9] so all
// strata have positive probability.
inline Scm random_binary_scm(Rng& rng, int n, double p) {
  const auto m = random_matrix_dag(rng, n, p);
  Dag g = to_dag(m);
  std::map<NodeId, Variable> vars;
  for (Dag::Index i = 0; i < g.size(); ++i) {
    Variable v;
    v.levels = {"0", "1"};
    const std::size_t rows = std::size_t{1} << g.parents(i).size();
    for (std::size_t r = 0; r < rows; ++r) {
      const double q = rng.uniform(0.1, 0.9);
      v.cpt.push_back(1.0 - q);
      v.cpt.push_back(q);
    }
    vars.emplace(g.name(i), std::move(v));
  }
  return Scm::create(std::move(g), std::move(vars));
}

}  // namespace midway::testing
