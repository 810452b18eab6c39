#include "midway/scm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "json.hpp"
#include "midway/error.hpp"
#include "midway/rng.hpp"

namespace midway {

namespace {

bool is_binary_domain(const Variable& v) {
  return v.levels.size() == 2 && v.levels[0] == "0" && v.levels[1] == "1";
}

ColumnType column_type(const Variable& v) {
  if (is_binary_domain(v)) return ColumnType::Binary;
  if (v.role == Role::Centre) return ColumnType::Categorical;
  return ColumnType::Ordered;
}

std::string zero_padded(std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

Role parse_role(const std::string& s) {
  static const std::map<std::string, Role> m{{"none", Role::None},         {"treatment", Role::Treatment},
                                             {"outcome", Role::Outcome},   {"centre", Role::Centre},
                                             {"covariate", Role::Covariate}, {"scan", Role::Scan}};
  auto it = m.find(s);
  if (it == m.end()) throw Error(ErrorKind::Schema, "unknown role '" + s + "'");
  return it->second;
}

std::vector<std::uint32_t> resolve(const Scm& scm, const InterventionSpec& intervention) {
  // UINT32_MAX marks "not intervened".
  std::vector<std::uint32_t> fixed(scm.graph().size(), UINT32_MAX);
  for (const auto& [node, level] : intervention) {
    const auto i = scm.graph().index_of(node);
    if (!i) throw Error(ErrorKind::InvalidArgument, "intervention on unknown node '" + node.str() + "'");
    fixed[*i] = static_cast<std::uint32_t>(scm.level_index(*i, level));
  }
  return fixed;
}

}  // namespace

Scm Scm::create(Dag graph, std::map<NodeId, Variable> variables) {
  Scm s;
  for (const auto& [name, v] : variables) {
    if (!graph.contains(name)) {
      throw Error(ErrorKind::InvalidArgument, "variable '" + name.str() + "' is not a graph node");
    }
  }
  s.vars_.resize(graph.size());
  for (Dag::Index i = 0; i < graph.size(); ++i) {
    const auto& name = graph.name(i);
    auto it = variables.find(name);
    if (it == variables.end()) {
      throw Error(ErrorKind::InvalidArgument, "no table for node '" + name.str() + "'");
    }
    Variable v = it->second;
    if (v.levels.empty()) throw Error(ErrorKind::InvalidArgument, "node '" + name.str() + "' has an empty domain");
    if (std::set<std::string>(v.levels.begin(), v.levels.end()).size() != v.levels.size()) {
      throw Error(ErrorKind::InvalidArgument, "node '" + name.str() + "' has duplicate levels");
    }
    std::size_t rows = 1;
    for (auto p : graph.parents(i)) {
      auto pit = variables.find(graph.name(p));
      rows *= pit == variables.end() ? 1 : std::max<std::size_t>(1, pit->second.levels.size());
    }
    const std::size_t k = v.levels.size();
    if (v.cpt.size() != rows * k) {
      throw Error(ErrorKind::InvalidArgument, "table of '" + name.str() + "' has " + std::to_string(v.cpt.size()) +
                                                  " entries, expected " + std::to_string(rows) + " rows x " +
                                                  std::to_string(k) + " levels");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0;
      for (std::size_t l = 0; l < k; ++l) {
        const double p = v.cpt[r * k + l];
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
          throw Error(ErrorKind::InvalidArgument, "table of '" + name.str() + "' has an invalid probability in row " +
                                                      std::to_string(r));
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        throw Error(ErrorKind::InvalidArgument, "row " + std::to_string(r) + " of '" + name.str() +
                                                    "' sums to " + std::to_string(sum));
      }
    }
    s.vars_[i] = std::move(v);
  }
  s.graph_ = std::move(graph);
  return s;
}

std::size_t Scm::level_index(Dag::Index i, std::string_view label) const {
  const auto& lv = vars_[i].levels;
  auto it = std::find(lv.begin(), lv.end(), label);
  if (it == lv.end()) {
    throw Error(ErrorKind::InvalidArgument, "'" + std::string(label) + "' is not a level of '" +
                                                graph_.name(i).str() + "'");
  }
  return static_cast<std::size_t>(it - lv.begin());
}

std::size_t Scm::cpt_row(Dag::Index i, const std::vector<std::uint32_t>& assignment) const {
  std::size_t row = 0;
  for (auto p : graph_.parents(i)) row = row * vars_[p].levels.size() + assignment[p];
  return row;
}

bool Scm::operator==(const Scm& o) const {
  if (!(graph_ == o.graph_) || vars_.size() != o.vars_.size()) return false;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto& a = vars_[i];
    const auto& b = o.vars_[i];
    if (a.levels != b.levels || a.cpt != b.cpt || a.role != b.role || a.observed != b.observed) return false;
  }
  return true;
}

Scm parse_scm(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Schema, std::string("SCM is not valid JSON: ") + e.what());
  }
  try {
    Dag g = parse_dag(doc.at("graph").get<std::string>());
    std::map<NodeId, Variable> vars;
    for (const auto& [name, spec] : doc.at("variables").items()) {
      Variable v;
      v.levels = spec.at("levels").get<std::vector<std::string>>();
      for (const auto& row : spec.at("cpt")) {
        for (const auto& p : row) v.cpt.push_back(p.get<double>());
      }
      if (spec.contains("role")) v.role = parse_role(spec["role"].get<std::string>());
      if (spec.contains("observed")) v.observed = spec["observed"].get<bool>();
      vars.emplace(NodeId(name), std::move(v));
    }
    return Scm::create(std::move(g), std::move(vars));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("malformed SCM document: ") + e.what());
  }
}

std::string scm_to_json(const Scm& scm, int indent) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["graph"] = serialize(scm.graph());
  auto& vars = doc["variables"] = ordered_json::object();
  for (Dag::Index i = 0; i < scm.graph().size(); ++i) {
    const auto& v = scm.variable(i);
    ordered_json j;
    j["levels"] = v.levels;
    auto& rows = j["cpt"] = ordered_json::array();
    const std::size_t k = v.levels.size();
    for (std::size_t r = 0; r * k < v.cpt.size(); ++r) {
      rows.push_back(std::vector<double>(v.cpt.begin() + static_cast<std::ptrdiff_t>(r * k),
                                         v.cpt.begin() + static_cast<std::ptrdiff_t>((r + 1) * k)));
    }
    if (v.role != Role::None) j["role"] = to_string(v.role);
    if (!v.observed) j["observed"] = false;
    vars[scm.graph().name(i).str()] = std::move(j);
  }
  return doc.dump(indent);
}

Scm mutilate(const Scm& scm, const InterventionSpec& intervention) {
  const auto fixed = resolve(scm, intervention);
  const Dag& g = scm.graph();
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    if (fixed[g.require(e.child)] == UINT32_MAX) edges.push_back(e);
  }
  std::map<NodeId, Variable> vars;
  for (Dag::Index i = 0; i < g.size(); ++i) {
    Variable v = scm.variable(i);
    if (fixed[i] != UINT32_MAX) {
      v.cpt.assign(v.levels.size(), 0.0);
      v.cpt[fixed[i]] = 1.0;
    }
    vars.emplace(g.name(i), std::move(v));
  }
  return Scm::create(Dag::create(g.nodes(), std::move(edges)), std::move(vars));
}

PatientTable sample(const Scm& scm, std::size_t n, std::uint64_t seed, const InterventionSpec& intervention,
                    const SampleOptions& options) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "sample size must be at least 1");
  const auto fixed = resolve(scm, intervention);
  const Dag& g = scm.graph();
  const std::size_t m = g.size();

  std::vector<ColumnSpec> cols{{"id", ColumnType::Id, Role::None, {}, {}}};
  std::vector<Dag::Index> emitted;
  for (Dag::Index i = 0; i < m; ++i) {
    const auto& v = scm.variable(i);
    if (!v.observed && !options.include_latent) continue;
    if (g.name(i).str() == "id") throw Error(ErrorKind::Schema, "node name 'id' clashes with the identifier column");
    ColumnSpec c;
    c.name = g.name(i).str();
    c.type = column_type(v);
    c.role = v.observed ? v.role : Role::None;
    if (c.type != ColumnType::Binary) c.levels = v.levels;
    cols.push_back(std::move(c));
    emitted.push_back(i);
  }
  Schema schema(std::move(cols));

  std::vector<std::vector<std::uint32_t>> values(m, std::vector<std::uint32_t>(n));
  const std::size_t block = std::max<std::size_t>(1, options.block_size);
  const std::size_t blocks = (n + block - 1) / block;
  auto run_block = [&](std::size_t b) {
    Rng rng(mix_seed(seed, b));
    std::vector<std::uint32_t> a(m, 0);
    const std::size_t end = std::min(n, (b + 1) * block);
    for (std::size_t r = b * block; r < end; ++r) {
      for (auto i : g.topological_order()) {
        if (fixed[i] != UINT32_MAX) {
          a[i] = fixed[i];
        } else {
          const auto& v = scm.variable(i);
          const std::size_t k = v.levels.size();
          const double* row = v.cpt.data() + scm.cpt_row(i, a) * k;
          const double u = rng.uniform();
          double cum = 0;
          std::uint32_t level = static_cast<std::uint32_t>(k - 1);
          for (std::size_t l = 0; l + 1 < k; ++l) {
            cum += row[l];
            if (u < cum) {
              level = static_cast<std::uint32_t>(l);
              break;
            }
          }
          a[i] = level;
        }
        values[i][r] = a[i];
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
  if (threads <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += threads) run_block(b);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<std::string> ids(n);
  const std::size_t width = std::to_string(n).size();
  for (std::size_t r = 0; r < n; ++r) ids[r] = options.id_prefix + zero_padded(r + 1, width);
  std::vector<std::vector<double>> cells(schema.size());
  cells[0].assign(n, 0.0);
  for (std::size_t k = 0; k < emitted.size(); ++k) {
    cells[k + 1].assign(values[emitted[k]].begin(), values[emitted[k]].end());
  }
  return PatientTable(std::move(schema), std::move(ids), std::move(cells));
}

std::vector<double> exact_interventional(const Scm& scm, const InterventionSpec& intervention, const NodeId& target) {
  const Scm m = mutilate(scm, intervention);
  const Dag& g = m.graph();
  const auto t = g.require(target);
  std::vector<Dag::Index> order;
  for (auto i : g.topological_order()) {
    if (i == t || g.is_descendant(t, i)) order.push_back(i);
  }
  double states = 1;
  for (auto i : order) states *= static_cast<double>(m.level_count(i));
  if (states > static_cast<double>(kMaxExactStates)) {
    throw Error(ErrorKind::Limit, "exact enumeration needs " + std::to_string(static_cast<long long>(states)) +
                                      " states, above the limit of " + std::to_string(kMaxExactStates));
  }
  std::vector<double> out(m.level_count(t), 0.0);
  std::vector<std::uint32_t> a(g.size(), 0);
  // Odometer over `order`; the last node varies fastest.
  for (;;) {
    double p = 1;
    for (auto i : order) {
      p *= m.probability(i, a[i], a);
      if (p == 0.0) break;
    }
    out[a[t]] += p;
    std::size_t k = order.size();
    while (k > 0) {
      const auto i = order[k - 1];
      if (++a[i] < m.level_count(i)) break;
      a[i] = 0;
      --k;
    }
    if (k == 0) break;
  }
  return out;
}

double adjusted_probability(const PatientTable& t, const std::string& x, const std::string& x_level,
                            const std::string& y, const std::string& y_level, const std::vector<std::string>& z) {
  const auto& s = t.schema();
  const auto xc = s.require(x);
  const auto yc = s.require(y);
  std::vector<std::size_t> zc;
  for (const auto& name : z) zc.push_back(s.require(name));
  struct Counts {
    double n = 0, nx = 0, nxy = 0;
  };
  std::map<std::vector<double>, Counts> strata;
  double total = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    bool skip = t.missing(r, xc) || t.missing(r, yc);
    for (auto c : zc) skip = skip || t.missing(r, c);
    if (skip) continue;
    std::vector<double> key;
    for (auto c : zc) key.push_back(t.cell(r, c));
    auto& k = strata[key];
    k.n += 1;
    total += 1;
    if (t.text(r, xc) == x_level) {
      k.nx += 1;
      if (t.text(r, yc) == y_level) k.nxy += 1;
    }
  }
  if (total == 0) throw Error(ErrorKind::Data, "no complete rows for the adjusted estimate");
  double est = 0;
  for (const auto& [key, k] : strata) {
    if (k.nx == 0) {
      throw Error(ErrorKind::Data, "positivity violation: a covariate stratum has no rows with " + x + " = " + x_level);
    }
    est += (k.n / total) * (k.nxy / k.nx);
  }
  return est;
}

Scm multicentre_scm(const MulticentreConfig& cfg) {
  if (cfg.centres < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 centres");
  const auto K = static_cast<std::size_t>(cfg.centres);
  std::vector<double> shift = cfg.propensity_shift;
  if (shift.empty()) {
    for (std::size_t c = 0; c < K; ++c) shift.push_back(-0.15 + 0.30 * static_cast<double>(c) / static_cast<double>(K - 1));
  }
  std::vector<double> direct = cfg.outcome_shift;
  if (direct.empty()) direct.assign(K, 0.0);
  if (shift.size() != K || direct.size() != K) {
    throw Error(ErrorKind::InvalidArgument, "centre shift vectors must have one entry per centre");
  }
  auto bernoulli_row = [](std::vector<double>& cpt, double p, const std::string& where) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, where + " probability " + std::to_string(p) + " outside [0, 1]");
    }
    cpt.push_back(1.0 - p);
    cpt.push_back(p);
  };

  std::map<NodeId, Variable> vars;
  Variable centre;
  centre.role = Role::Centre;
  for (std::size_t c = 0; c < K; ++c) {
    centre.levels.push_back("C" + zero_padded(c + 1, std::max<std::size_t>(2, std::to_string(K).size())));
  }
  centre.cpt.assign(K, 1.0 / static_cast<double>(K));
  double residual = 1.0;
  for (std::size_t c = 0; c + 1 < K; ++c) residual -= centre.cpt[c];
  centre.cpt.back() = residual;

  Variable age;
  age.levels = {"45", "60", "75"};
  age.cpt = {0.3, 0.4, 0.3};
  age.role = Role::Covariate;

  Variable u;
  u.levels = {"0", "1"};
  u.observed = false;
  bernoulli_row(u.cpt, 0.5, "U");

  Variable htn;  // parents: U
  htn.levels = {"0", "1"};
  htn.role = Role::Covariate;
  for (int uu = 0; uu < 2; ++uu) bernoulli_row(htn.cpt, 0.25 + cfg.u_on_hypertension * uu, "Hypertension");

  Variable evd;  // parents: Age, Centre, Hypertension
  evd.levels = {"0", "1"};
  evd.role = Role::Treatment;
  for (int a = 0; a < 3; ++a)
    for (std::size_t c = 0; c < K; ++c)
      for (int h = 0; h < 2; ++h)
        bernoulli_row(evd.cpt,
                      cfg.base_treatment + shift[c] + cfg.age_on_treatment * (a - 1) + cfg.hypertension_on_treatment * h,
                      "EVD");

  Variable outcome;  // parents: Age, Centre, EVD, Hypertension, U
  outcome.levels = {"0", "1"};
  outcome.role = Role::Outcome;
  for (int a = 0; a < 3; ++a)
    for (std::size_t c = 0; c < K; ++c)
      for (int e = 0; e < 2; ++e)
        for (int h = 0; h < 2; ++h)
          for (int uu = 0; uu < 2; ++uu)
            bernoulli_row(outcome.cpt,
                          cfg.base_outcome + cfg.tau * e + direct[c] + cfg.age_on_outcome * (a - 1) +
                              cfg.hypertension_on_outcome * h + cfg.u_on_outcome * uu,
                          "Outcome");

  vars.emplace("Centre", std::move(centre));
  vars.emplace("Age", std::move(age));
  vars.emplace("U", std::move(u));
  vars.emplace("Hypertension", std::move(htn));
  vars.emplace("EVD", std::move(evd));
  vars.emplace("Outcome", std::move(outcome));
  return Scm::create(parse_dag("Centre -> EVD; Centre -> Outcome; Age -> EVD; Age -> Outcome;"
                               "U -> Hypertension; U -> Outcome; Hypertension -> EVD;"
                               "Hypertension -> Outcome; EVD -> Outcome"),
                     std::move(vars));
}

PatientTable generate_multicentre(const MulticentreConfig& cfg) {
  const Scm scm = multicentre_scm(cfg);
  const auto& centre = scm.variable("Centre");
  std::vector<std::string> ids;
  std::vector<std::vector<double>> cells;
  std::optional<Schema> schema;
  for (std::size_t c = 0; c < centre.levels.size(); ++c) {
    SampleOptions opt;
    opt.id_prefix = centre.levels[c] + "-";
    const auto part = sample(scm, cfg.n_per_centre, mix_seed(cfg.seed, c), {{"Centre", centre.levels[c]}}, opt);
    if (!schema) {
      schema = part.schema();
      cells.resize(schema->size());
    }
    ids.insert(ids.end(), part.ids().begin(), part.ids().end());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      cells[k].insert(cells[k].end(), part.column(k).begin(), part.column(k).end());
    }
  }
  return PatientTable(std::move(*schema), std::move(ids), std::move(cells));
}

}  // namespace midway
