#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "midway/app.hpp"
#include "midway/estimators.hpp"
#include "midway/filter.hpp"
#include "midway/hash.hpp"
#include "midway/matching.hpp"
#include "midway/monitoring.hpp"
#include "midway/positivity.hpp"
#include "midway/scm.hpp"

#ifndef MIDWAY_VERSION
#define MIDWAY_VERSION "0.0.0"
#endif

namespace midway::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json embed(const std::string& json_text) { return ordered_json::parse(json_text); }

ordered_json to_json(const NodeSet& s) {
  auto a = ordered_json::array();
  for (const auto& n : s) a.push_back(n.str());
  return a;
}

// Typed, whitelisted view of a request object.
class Request {
 public:
  Request(const json& j, std::initializer_list<const char*> allowed) : j_(j) {
    if (j_.is_null()) return;
    if (!j_.is_object()) throw Error(ErrorKind::InvalidArgument, "request must be a JSON object");
    for (const auto& [key, value] : j_.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        throw Error(ErrorKind::InvalidArgument, "unknown request field '" + key + "'");
      }
    }
  }

  bool has(const char* k) const { return j_.is_object() && j_.contains(k) && !j_[k].is_null(); }

  template <class T>
  std::optional<T> get(const char* k) const {
    if (!has(k)) return std::nullopt;
    try {
      return j_[k].get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::InvalidArgument, std::string("request field '") + k + "' has the wrong type");
    }
  }

  const json& raw(const char* k) const { return j_.at(k); }

 private:
  const json& j_;
};

std::string role_column(const Schema& s, Role r, const std::optional<std::string>& given, const char* what) {
  if (given) {
    s.require(*given);
    return *given;
  }
  if (auto c = s.with_role(r)) return s.columns()[*c].name;
  throw Error(ErrorKind::InvalidArgument, std::string("no ") + what + " column given and none tagged in the schema");
}

std::vector<std::string> default_covariates(const Schema& s, const std::optional<std::vector<std::string>>& given) {
  if (given) {
    for (const auto& c : *given) s.require(c);
    return *given;
  }
  std::vector<std::string> out;
  for (const auto& c : s.columns()) {
    if (c.role == Role::Covariate) out.push_back(c.name);
  }
  return out;
}

struct Stratum {
  PatientTable table;
  ordered_json report;
};

Stratum select_stratum(const PatientTable& t, const std::optional<std::string>& filter,
                       const std::vector<std::string>& columns) {
  ordered_json rep;
  rep["filter"] = filter ? ordered_json(*filter) : ordered_json(nullptr);
  rep["input_rows"] = t.rows();
  PatientTable rows = t;
  std::size_t not_matching = 0, excluded = 0;
  if (filter) {
    auto s = apply_stratum(t, parse_filter(*filter, t.schema()));
    not_matching = s.not_matching;
    excluded = s.excluded_missing;
    rows = std::move(s.table);
  }
  auto cc = complete_cases(rows, columns);
  excluded += cc.excluded;
  rep["not_matching"] = not_matching;
  rep["excluded_missing"] = excluded;
  rep["rows"] = cc.table.rows();
  if (cc.table.rows() == 0) {
    throw Error(ErrorKind::Data, fmt("stratum is empty: %zu of %zu rows do not match the filter, %zu excluded for "
                                     "missing values",
                                     not_matching, t.rows(), excluded));
  }
  return {std::move(cc.table), std::move(rep)};
}

bool is_constant(const PatientTable& t, const std::string& column) {
  const auto& col = t.column(column);
  return std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
}

struct Propensity {
  PatientTable table;
  std::string treatment;
  std::vector<std::string> covariates, dropped;
  FitResult fit;
  std::vector<double> scores;
  ordered_json stratum;
  ordered_json fit_json;
};

Propensity fit_propensity(const Workspace& ws, const Request& r) {
  const auto& t = ws.require_table();
  Propensity p;
  p.treatment = role_column(t.schema(), Role::Treatment, r.get<std::string>("treatment"), "treatment");
  auto covariates = default_covariates(t.schema(), r.get<std::vector<std::string>>("covariates"));
  auto columns = covariates;
  columns.push_back(p.treatment);
  auto st = select_stratum(t, r.get<std::string>("filter"), columns);
  p.table = std::move(st.table);
  p.stratum = std::move(st.report);
  for (const auto& c : covariates) (is_constant(p.table, c) ? p.dropped : p.covariates).push_back(c);

  const auto tc = p.table.schema().require(p.treatment);
  Eigen::VectorXd y(static_cast<Eigen::Index>(p.table.rows()));
  std::size_t treated = 0;
  for (std::size_t i = 0; i < p.table.rows(); ++i) {
    y[static_cast<Eigen::Index>(i)] = p.table.binary(i, tc);
    treated += y[static_cast<Eigen::Index>(i)] == 1.0;
  }
  if (treated == 0 || treated == p.table.rows()) {
    throw Error(ErrorKind::Data, "stratum has no " + std::string(treated == 0 ? "treated" : "control") + " patients");
  }
  Prior prior;
  if (auto sd = r.get<double>("prior_sd")) prior.sd = *sd;
  const auto encoder = DesignEncoder::fit(p.table, p.covariates);
  const auto x = encoder.encode(p.table);
  p.fit = fit_logit_map(x, y, prior);
  p.fit.encoder = encoder;
  const Eigen::VectorXd s = predict_propensity(p.fit, x);
  p.scores.assign(s.data(), s.data() + s.size());
  p.fit_json = embed(forest_to_json(forest_export(p.fit, 0.95), 0.95));
  return p;
}

void split_scores(const Propensity& p, std::vector<double>& treated, std::vector<double>& control) {
  const auto tc = p.table.schema().require(p.treatment);
  for (std::size_t i = 0; i < p.table.rows(); ++i) (p.table.binary(i, tc) == 1.0 ? treated : control).push_back(p.scores[i]);
}

std::string stratum_line(const ordered_json& s) {
  return fmt("stratum: %zu patients (%zu not matching, %zu excluded for missing values)\n", s["rows"].get<std::size_t>(),
             s["not_matching"].get<std::size_t>(), s["excluded_missing"].get<std::size_t>());
}

std::uint64_t request_seed(const Request& r) { return r.get<std::uint64_t>("seed").value_or(kDefaultSeed); }

}  // namespace

std::string version() { return MIDWAY_VERSION; }

Workspace Workspace::load(const InputPaths& paths) {
  Workspace ws;
  auto stamp = [&](const char* key, const std::string& path, const std::string& text) {
    ws.fingerprint_[key] = {{"path", path}, {"fnv1a", hex64(fnv1a(text))}};
  };
  if (!paths.data.empty() || !paths.schema.empty()) {
    if (paths.data.empty() || paths.schema.empty()) {
      throw Error(ErrorKind::InvalidArgument, "--data and --schema must be given together");
    }
    const auto schema_text = read_file(paths.schema);
    const auto data_text = read_file(paths.data);
    ws.table_ = ingest_csv(data_text, parse_schema(schema_text));
    stamp("data", paths.data, data_text);
    stamp("schema", paths.schema, schema_text);
  }
  if (!paths.dag.empty()) {
    const auto dag_text = read_file(paths.dag);
    ws.dag_ = parse_dag(dag_text);
    stamp("dag", paths.dag, dag_text);
  }
  return ws;
}

Workspace Workspace::from_memory(std::optional<PatientTable> table, std::optional<Dag> dag) {
  Workspace ws;
  ws.table_ = std::move(table);
  ws.dag_ = std::move(dag);
  if (ws.table_) ws.fingerprint_["data"] = {{"path", nullptr}, {"fnv1a", hex64(fnv1a(write_csv(*ws.table_)))}};
  if (ws.dag_) ws.fingerprint_["dag"] = {{"path", nullptr}, {"fnv1a", hex64(fnv1a(serialize(*ws.dag_)))}};
  return ws;
}

const PatientTable& Workspace::require_table() const {
  if (!table_) throw Error(ErrorKind::InvalidArgument, "this command needs a dataset (--data and --schema)");
  return *table_;
}

const Dag& Workspace::require_dag() const {
  if (!dag_) throw Error(ErrorKind::InvalidArgument, "this command needs a causal graph (--dag)");
  return *dag_;
}

Output identify(const Workspace& ws, const json& request) {
  const Request r(request, {"treatment", "outcome", "forced", "latent", "filter", "seed"});
  const Dag& g = ws.require_dag();
  auto node = [&](const std::optional<std::string>& name, const char* what) {
    if (!name) throw Error(ErrorKind::InvalidArgument, std::string("identify needs the ") + what + " node");
    if (!g.contains(NodeId(*name))) throw Error(ErrorKind::InvalidArgument, "unknown node '" + *name + "'");
    return NodeId(*name);
  };
  std::optional<std::string> tname = r.get<std::string>("treatment"), oname = r.get<std::string>("outcome");
  if (ws.table()) {
    const auto& s = ws.table()->schema();
    if (!tname) {
      if (auto c = s.with_role(Role::Treatment)) tname = s.columns()[*c].name;
    }
    if (!oname) {
      if (auto c = s.with_role(Role::Outcome)) oname = s.columns()[*c].name;
    }
  }
  const NodeId x = node(tname, "treatment"), y = node(oname, "outcome");

  NodeSet forced, latent, observed;
  for (const auto& n : r.get<std::vector<std::string>>("forced").value_or(std::vector<std::string>{})) {
    forced.insert(node(n, "forced"));
  }
  for (const auto& n : r.get<std::vector<std::string>>("latent").value_or(std::vector<std::string>{})) {
    latent.insert(node(n, "latent"));
  }
  if (auto f = r.get<std::string>("filter")) {
    // Columns restricted by the stratum are conditioned on by design.
    const auto filter = parse_filter(*f, ws.require_table().schema());
    for (const auto& c : filter.columns()) {
      if (g.contains(NodeId(c))) forced.insert(NodeId(c));
    }
  }
  for (const auto& n : g.nodes()) {
    if (!latent.count(n)) observed.insert(n);
  }
  for (const auto& n : forced) {
    if (latent.count(n)) throw Error(ErrorKind::InvalidArgument, "node '" + n.str() + "' is both forced and latent");
  }
  const auto res = find_adjustment_sets(g, x, y, observed, forced);

  ordered_json j;
  j["command"] = "identify";
  j["treatment"] = x.str();
  j["outcome"] = y.str();
  j["observed"] = to_json(observed);
  j["latent"] = to_json(latent);
  j["forced"] = to_json(forced);
  j["status"] = to_string(res.status);
  auto& sets = j["adjustment_sets"] = ordered_json::array();
  for (const auto& s : res.admissible_sets) sets.push_back(to_json(s));
  auto& wit = j["witnesses"] = ordered_json::array();
  for (std::size_t i = 0; i < res.witness_paths.size(); ++i) {
    ordered_json w;
    w["path"] = res.witness_paths[i].to_string();
    w["given"] = i < res.witness_sets.size() ? to_json(res.witness_sets[i]) : ordered_json::array();
    wit.push_back(std::move(w));
  }

  Output out;
  out.body = j.dump(2);
  const bool ok = res.status == Identification::Identified;
  out.exit_code = ok ? 0 : 2;
  out.text = x.str() + " -> " + y.str() + ": " + (ok ? "identified" : "not identified") + "\n";
  out.text += "forced: " + to_string(forced) + "\n";
  if (ok) {
    out.text += "minimal adjustment sets:\n";
    for (const auto& s : res.admissible_sets) out.text += "  " + to_string(s) + "\n";
  } else {
    out.text += "unblocked back-door paths:\n";
    for (std::size_t i = 0; i < res.witness_paths.size(); ++i) {
      out.text += "  " + res.witness_paths[i].to_string();
      if (i < res.witness_sets.size()) out.text += "   given " + to_string(res.witness_sets[i]);
      out.text += "\n";
    }
  }
  out.files.emplace_back("identify.json", out.body);
  return out;
}

Output positivity(const Workspace& ws, const json& request) {
  const Request r(request, {"treatment", "covariates", "filter", "prior_sd", "thresholds", "seed"});
  const auto p = fit_propensity(ws, r);
  OverlapThresholds th;
  if (r.has("thresholds")) {
    const auto& tj = r.raw("thresholds");
    th.epsilon = tj.value("epsilon", th.epsilon);
    th.adequate_coefficient = tj.value("adequate_coefficient", th.adequate_coefficient);
    th.inadequate_coefficient = tj.value("inadequate_coefficient", th.inadequate_coefficient);
    th.max_outside_mass = tj.value("max_outside_mass", th.max_outside_mass);
  }
  std::vector<double> treated, control;
  split_scores(p, treated, control);
  const auto rep = overlap_report(treated, control, th);

  ordered_json j;
  j["command"] = "positivity";
  j["treatment"] = p.treatment;
  j["stratum"] = p.stratum;
  j["covariates"] = p.covariates;
  j["dropped_constant"] = p.dropped;
  j["propensity"] = p.fit_json;
  j["overlap"] = embed(overlap_to_json(rep));

  Output out;
  out.body = j.dump(2);
  out.text = stratum_line(p.stratum);
  out.text += fmt("treated %zu, control %zu\n", treated.size(), control.size());
  out.text += fmt("overlap coefficient: %.3f\n", rep.overlap_coefficient);
  out.text += fmt("mass outside common support: treated %.3f, control %.3f\n", rep.treated_mass_outside,
                  rep.control_mass_outside);
  out.text += "verdict: " + to_string(rep.verdict) + "\n";
  out.files.emplace_back("positivity.json", out.body);
  out.files.emplace_back("positivity_density.csv", overlap_plot_csv(rep));
  return out;
}

Output match(const Workspace& ws, const json& request) {
  const Request r(request, {"treatment", "covariates", "filter", "prior_sd", "seed", "caliper", "ratio",
                            "with_replacement", "rct_n"});
  std::optional<std::uint64_t> rct_n;
  if (r.has("rct_n")) {
    const auto v = r.get<std::int64_t>("rct_n");
    if (!v || *v < 1) throw Error(ErrorKind::InvalidArgument, "rct_n must be a positive integer");
    rct_n = static_cast<std::uint64_t>(*v);
  }
  const auto p = fit_propensity(ws, r);
  const auto tc = p.table.schema().require(p.treatment);
  std::vector<ScoredUnit> units;
  for (std::size_t i = 0; i < p.table.rows(); ++i) {
    units.push_back({p.table.ids()[i], p.scores[i], p.table.binary(i, tc) == 1.0});
  }
  MatchConfig cfg;
  cfg.caliper = r.get<double>("caliper");
  cfg.ratio = r.get<int>("ratio").value_or(1);
  cfg.with_replacement = r.get<bool>("with_replacement").value_or(false);
  cfg.seed = request_seed(r);
  const auto res = stochastic_match(units, cfg);
  const auto bal = post_match_balance(p.table, p.treatment, res, p.covariates, p.scores);

  ordered_json j;
  j["command"] = "match";
  j["treatment"] = p.treatment;
  j["stratum"] = p.stratum;
  j["covariates"] = p.covariates;
  j["dropped_constant"] = p.dropped;
  j["propensity"] = p.fit_json;
  j["match"] = embed(match_to_json(res));
  j["balance"] = embed(balance_to_json(bal));
  std::optional<std::uint64_t> equivalent;
  if (rct_n) {
    // The published translation divides by the ratio as reported (two decimals).
    equivalent = rct_equivalent_sample_size(*rct_n, display_ratio(res.sampling_ratio));
    j["rct_equivalent"] = {{"rct_n", *rct_n},
                           {"sampling_ratio", display_ratio(res.sampling_ratio)},
                           {"observational_n", *equivalent},
                           {"observational_n_unrounded_ratio", rct_equivalent_sample_size(*rct_n, res.sampling_ratio)}};
  } else {
    j["rct_equivalent"] = nullptr;
  }

  Output out;
  out.body = j.dump(2);
  out.text = stratum_line(p.stratum);
  out.text += fmt("matched pairs: %zu, matched patients: %zu\n", res.pairs.size(), res.matched_patients);
  out.text += fmt("sampling ratio: %.2f (%zu/%zu)\n", display_ratio(res.sampling_ratio), res.matched_patients,
                  res.stratum_size);
  out.text += fmt("caliper (logit): %.4f, seed %llu\n", res.caliper, static_cast<unsigned long long>(res.seed));
  if (equivalent) {
    out.text += fmt("RCT-equivalent observational sample size for n = %llu: %llu\n",
                    static_cast<unsigned long long>(*rct_n), static_cast<unsigned long long>(*equivalent));
  }
  out.text += "balance (standardized mean difference, before / after):\n";
  for (const auto& row : bal.rows) {
    out.text += fmt("  %-24s %8.3f", row.covariate.c_str(), row.smd_before);
    out.text += row.smd_after ? fmt(" %8.3f\n", *row.smd_after) : std::string("        -\n");
  }
  out.files.emplace_back("match.json", out.body);
  out.files.emplace_back("match_pairs.csv", match_pairs_csv(res));
  return out;
}

Output monitor(const Workspace& ws, const json& request) {
  const Request r(request, {"centre", "treatment", "outcome", "covariates", "reference", "filter", "weighting",
                            "instrument_level", "anonymize", "min_centre_count", "seed"});
  const auto& t = ws.require_table();
  const auto& s = t.schema();
  MonitorConfig cfg;
  cfg.centre = role_column(s, Role::Centre, r.get<std::string>("centre"), "centre");
  cfg.treatment = role_column(s, Role::Treatment, r.get<std::string>("treatment"), "treatment");
  cfg.outcome = role_column(s, Role::Outcome, r.get<std::string>("outcome"), "outcome");
  cfg.covariates = default_covariates(s, r.get<std::vector<std::string>>("covariates"));
  cfg.reference = r.get<std::string>("reference");
  if (auto m = r.get<std::size_t>("min_centre_count")) cfg.min_centre_count = *m;
  EggerOptions eo;
  if (auto w = r.get<std::string>("weighting")) {
    if (*w == "outcome_precision") {
      eo.weighting = EggerWeighting::OutcomePrecision;
    } else if (*w == "unweighted") {
      eo.weighting = EggerWeighting::Unweighted;
    } else {
      throw Error(ErrorKind::InvalidArgument, "weighting must be 'outcome_precision' or 'unweighted'");
    }
  }
  if (auto l = r.get<double>("instrument_level")) eo.instrument_level = *l;

  PatientTable rows = t;
  ordered_json stratum = nullptr;
  if (auto f = r.get<std::string>("filter")) {
    auto st = apply_stratum(t, parse_filter(*f, s));
    stratum = {{"filter", *f}, {"input_rows", st.input_rows}, {"not_matching", st.not_matching},
               {"excluded_missing", st.excluded_missing}, {"rows", st.table.rows()}};
    rows = std::move(st.table);
  }
  const auto effects = fit_centre_effects(rows, cfg);
  const auto fit = egger_iv(effects, eo);
  const auto scatter = scatter_export(effects, fit, r.get<bool>("anonymize").value_or(false));

  ordered_json j;
  j["command"] = "monitor";
  j["stratum"] = stratum;
  j["effects"] = embed(effects_to_json(effects));
  j["egger"] = embed(egger_to_json(fit));
  j["scatter"] = embed(scatter_to_json(scatter));
  j["forest"] = {{"treatment", embed(forest_to_json(forest_export(effects.treatment_fit, 0.95), 0.95))},
                 {"outcome", embed(forest_to_json(forest_export(effects.outcome_fit, 0.95), 0.95))}};

  Output out;
  out.body = j.dump(2);
  out.text = fmt("centres: %zu (reference %s), rows used %zu\n", effects.pairs.size() + 1, effects.reference.c_str(),
                 effects.rows_used);
  if (!effects.small_centres.empty()) {
    out.text += "warning: centres below " + std::to_string(cfg.min_centre_count) + " patients:";
    for (const auto& c : effects.small_centres) out.text += " " + c;
    out.text += "\n";
  }
  out.text += fmt("  %-12s %9s %9s %9s %9s\n", "centre", "alpha", "se", "beta", "se");
  for (const auto& p : effects.pairs) {
    out.text += fmt("  %-12s %9.4f %9.4f %9.4f %9.4f\n", p.centre.c_str(), p.alpha, p.se_alpha, p.beta, p.se_beta);
  }
  out.text += fmt("Egger slope %.4f (se %.4f), intercept %.4f (se %.4f)\n", fit.slope, fit.se_slope, fit.intercept,
                  fit.se_intercept);
  out.text += "note: " + fit.caveat + "\n";
  out.files.emplace_back("monitor.json", out.body);
  out.files.emplace_back("centre_effects.csv", effects_to_csv(effects));
  return out;
}

Output simulate(const json& request) {
  const Request r(request, {"scm", "n", "seed", "do", "multicentre"});
  const auto seed = request_seed(r);
  PatientTable table;
  if (r.has("scm")) {
    if (r.has("multicentre")) throw Error(ErrorKind::InvalidArgument, "give either 'scm' or 'multicentre', not both");
    const auto scm = parse_scm(r.raw("scm").dump());
    const auto n = r.get<std::size_t>("n");
    if (!n || *n == 0) throw Error(ErrorKind::InvalidArgument, "simulate needs a positive row count 'n'");
    InterventionSpec spec;
    for (const auto& [k, v] : r.get<std::map<std::string, std::string>>("do").value_or(std::map<std::string, std::string>{})) {
      spec.emplace(NodeId(k), v);
    }
    table = sample(scm, *n, seed, spec, {});
  } else {
    if (r.has("do") || r.has("n")) throw Error(ErrorKind::InvalidArgument, "'n' and 'do' apply to an explicit 'scm'");
    MulticentreConfig cfg;
    cfg.seed = seed;
    if (r.has("multicentre")) {
      const auto& m = r.raw("multicentre");
      try {
        cfg.centres = m.value("centres", cfg.centres);
        cfg.n_per_centre = m.value("n_per_centre", cfg.n_per_centre);
        cfg.tau = m.value("tau", cfg.tau);
        cfg.propensity_shift = m.value("propensity_shift", cfg.propensity_shift);
        cfg.outcome_shift = m.value("outcome_shift", cfg.outcome_shift);
      } catch (const json::exception&) {
        throw Error(ErrorKind::InvalidArgument, "malformed 'multicentre' settings");
      }
    }
    table = generate_multicentre(cfg);
  }
  Output out;
  out.body = write_csv(table);
  out.content_type = "text/csv";
  out.text = fmt("simulated %zu rows, %zu columns\n", table.rows(), table.schema().size());
  out.files.emplace_back("simulated.csv", out.body);
  out.files.emplace_back("simulated_schema.json", schema_to_json(table.schema()));
  return out;
}

Output run(const std::string& command, const Workspace& ws, const json& request) {
  if (command == "identify") return identify(ws, request);
  if (command == "positivity") return positivity(ws, request);
  if (command == "match") return match(ws, request);
  if (command == "monitor") return monitor(ws, request);
  if (command == "simulate") return simulate(request);
  throw Error(ErrorKind::InvalidArgument, "unknown command '" + command + "'");
}

std::string dag_to_json(const Dag& g) {
  ordered_json j;
  j["dsl"] = serialize(g);
  auto& nodes = j["nodes"] = ordered_json::array();
  for (const auto& n : g.nodes()) nodes.push_back(n.str());
  auto& edges = j["edges"] = ordered_json::array();
  for (const auto& e : g.edges()) edges.push_back({e.parent.str(), e.child.str()});
  return j.dump(2);
}

std::string manifest(const std::string& command, const json& request, const Workspace& ws, const Output& out) {
  ordered_json j;
  j["toolkit"] = "midway";
  j["version"] = version();
  j["command"] = command;
  std::uint64_t seed = kDefaultSeed;
  if (request.is_object() && request.contains("seed") && request["seed"].is_number_unsigned()) {
    seed = request["seed"].get<std::uint64_t>();
  }
  j["seed"] = seed;
  j["request"] = ordered_json::parse(request.is_null() ? "{}" : request.dump());
  j["inputs"] = ws.fingerprint();
  auto& files = j["outputs"] = ordered_json::array();
  for (const auto& [name, contents] : out.files) files.push_back({{"file", name}, {"fnv1a", hex64(fnv1a(contents))}});
  j["exit_code"] = out.exit_code;
  return j.dump(2);
}

std::string error_to_json(const Error& e) {
  ordered_json j;
  j["error"] = to_string(e.kind());
  j["message"] = e.what();
  return j.dump(2);
}

int http_status(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NotConverged:
    case ErrorKind::RankDeficient:
    case ErrorKind::Limit:
    case ErrorKind::Numeric:
      return 422;
    default:
      return 400;
  }
}

}  // namespace midway::app
