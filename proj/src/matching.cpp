#include "midway/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "midway/error.hpp"
#include "midway/rng.hpp"

namespace midway {

namespace {

struct Candidate {
  double logit;
  std::size_t unit;
};

double smd(const std::vector<double>& t, const std::vector<double>& c) {
  auto moments = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const double var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
    return std::pair{m, var};
  };
  if (t.empty() || c.empty()) return std::nan("");
  const auto [mt, vt] = moments(t);
  const auto [mc, vc] = moments(c);
  const double diff = mt - mc;
  const double pooled = std::sqrt(0.5 * (vt + vc));
  if (pooled == 0.0) return diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
  return diff / pooled;
}

}  // namespace

double logit(double p) { return std::log(p / (1.0 - p)); }

double default_caliper(std::span<const ScoredUnit> units) {
  double mean = 0;
  for (const auto& u : units) mean += logit(u.score);
  mean /= static_cast<double>(units.size());
  double ss = 0;
  for (const auto& u : units) ss += (logit(u.score) - mean) * (logit(u.score) - mean);
  return 0.2 * std::sqrt(ss / static_cast<double>(units.size() - 1));
}

MatchResult stochastic_match(std::span<const ScoredUnit> units, const MatchConfig& cfg) {
  std::vector<std::size_t> treated;
  std::vector<Candidate> controls;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    if (!(u.score > 0.0 && u.score < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "balancing score of '" + u.id + "' is not in (0, 1)");
    }
    if (!ids.insert(u.id).second) throw Error(ErrorKind::InvalidArgument, "duplicate unit id '" + u.id + "'");
    if (u.treated) {
      treated.push_back(i);
    } else {
      controls.push_back({logit(u.score), i});
    }
  }
  if (treated.empty() || controls.empty()) {
    throw Error(ErrorKind::InvalidArgument, "matching needs both arms non-empty (treated " +
                                                std::to_string(treated.size()) + ", control " +
                                                std::to_string(controls.size()) + ")");
  }
  if (cfg.ratio < 1) throw Error(ErrorKind::InvalidArgument, "match ratio must be at least 1");
  const double caliper = cfg.caliper ? *cfg.caliper : default_caliper(units);
  if (!(caliper > 0.0) || !std::isfinite(caliper)) {
    throw Error(ErrorKind::InvalidArgument, "caliper must be positive");
  }

  std::sort(controls.begin(), controls.end(), [&](const Candidate& a, const Candidate& b) {
    return a.logit != b.logit ? a.logit < b.logit : units[a.unit].id < units[b.unit].id;
  });
  Rng rng(cfg.seed);
  for (std::size_t i = treated.size(); i > 1; --i) {
    std::swap(treated[i - 1], treated[rng.below(i)]);
  }

  MatchResult r;
  r.stratum_size = units.size();
  r.caliper = caliper;
  r.ratio = cfg.ratio;
  r.with_replacement = cfg.with_replacement;
  r.seed = cfg.seed;

  std::vector<Candidate> available = controls;
  std::set<std::size_t> used_controls;
  std::size_t matched_treated = 0;
  for (auto ti : treated) {
    const double lt = logit(units[ti].score);
    std::vector<Candidate> pool = available;  // with replacement: per-treated copy
    std::vector<Candidate>& from = cfg.with_replacement ? pool : available;
    int got = 0;
    for (; got < cfg.ratio; ++got) {
      auto lo = std::lower_bound(from.begin(), from.end(), lt - caliper,
                                 [](const Candidate& c, double v) { return c.logit < v; });
      auto hi = std::upper_bound(from.begin(), from.end(), lt + caliper,
                                 [](double v, const Candidate& c) { return v < c.logit; });
      // Trim rounding at the window edges so every pair obeys the caliper.
      while (lo != hi && std::abs(lo->logit - lt) > caliper) ++lo;
      while (lo != hi && std::abs((hi - 1)->logit - lt) > caliper) --hi;
      if (lo == hi) break;
      const auto pick = lo + static_cast<std::ptrdiff_t>(rng.below(static_cast<std::uint64_t>(hi - lo)));
      r.pairs.push_back({units[ti].id, units[pick->unit].id, std::abs(pick->logit - lt)});
      used_controls.insert(pick->unit);
      from.erase(pick);
    }
    if (got > 0) {
      ++matched_treated;
    } else {
      r.unmatched_treated.push_back(units[ti].id);
    }
  }
  for (const auto& c : controls) {
    if (!used_controls.count(c.unit)) r.unmatched_control.push_back(units[c.unit].id);
  }
  std::sort(r.unmatched_treated.begin(), r.unmatched_treated.end());
  std::sort(r.unmatched_control.begin(), r.unmatched_control.end());
  r.matched_patients = matched_treated + used_controls.size();
  r.sampling_ratio = static_cast<double>(r.matched_patients) / static_cast<double>(r.stratum_size);
  return r;
}

std::uint64_t rct_equivalent_sample_size(std::uint64_t rct_n, double sampling_ratio) {
  if (rct_n == 0) throw Error(ErrorKind::InvalidArgument, "RCT sample size must be positive");
  if (!(sampling_ratio > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "sampling ratio is zero: the effect cannot be probed in this stratum");
  }
  if (sampling_ratio > 1.0) throw Error(ErrorKind::InvalidArgument, "sampling ratio exceeds 1");
  const double q = static_cast<double>(rct_n) / sampling_ratio;
  const double nearest = std::round(q);
  if (std::abs(q - nearest) <= 1e-9 * q) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::ceil(q));
}

double display_ratio(double ratio) { return std::round(ratio * 100.0 + 1e-9) / 100.0; }

BalanceTable post_match_balance(const PatientTable& t, const std::string& treatment,
                                const MatchResult& result, const std::vector<std::string>& covariates,
                                std::span<const double> scores) {
  const auto& schema = t.schema();
  const auto tc = schema.require(treatment);
  if (!scores.empty() && scores.size() != t.rows()) {
    throw Error(ErrorKind::InvalidArgument, "score vector is not aligned with the table");
  }
  std::map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < t.rows(); ++r) row_of[t.ids()[r]] = r;
  std::set<std::size_t> matched;
  for (const auto& p : result.pairs) {
    for (const auto* id : {&p.treated, &p.control}) {
      auto it = row_of.find(*id);
      if (it == row_of.end()) throw Error(ErrorKind::InvalidArgument, "matched id '" + *id + "' not in table");
      matched.insert(it->second);
    }
  }

  BalanceTable out;
  out.post_match_applicable = !result.pairs.empty();
  auto add_row = [&](const std::string& label, auto value) {
    std::vector<double> bt, bc, at, ac;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (t.missing(r, tc)) continue;
      const auto v = value(r);
      if (!v) continue;
      const bool is_t = t.cell(r, tc) != 0.0;
      (is_t ? bt : bc).push_back(*v);
      if (matched.count(r)) (is_t ? at : ac).push_back(*v);
    }
    BalanceRow row{label, smd(bt, bc), std::nullopt};
    if (out.post_match_applicable) row.smd_after = smd(at, ac);
    out.rows.push_back(row);
  };
  for (const auto& name : covariates) {
    const auto c = schema.require(name);
    const auto& spec = schema[c];
    if (spec.type == ColumnType::Categorical) {
      for (std::size_t l = 1; l < spec.levels.size(); ++l) {
        add_row(name + "=" + spec.levels[l], [&, l](std::size_t r) -> std::optional<double> {
          if (t.missing(r, c)) return std::nullopt;
          return t.cell(r, c) == static_cast<double>(l) ? 1.0 : 0.0;
        });
      }
    } else {
      add_row(name, [&](std::size_t r) -> std::optional<double> {
        if (t.missing(r, c)) return std::nullopt;
        return t.numeric(r, c);
      });
    }
  }
  if (out.post_match_applicable && !scores.empty()) {
    std::vector<double> st, sc;
    for (auto r : matched) (t.cell(r, tc) != 0.0 ? st : sc).push_back(scores[r]);
    if (st.size() >= 2 && sc.size() >= 2) out.post_match_overlap = overlap_report(st, sc);
  }
  return out;
}

std::string match_to_json(const MatchResult& r, int indent) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["seed"] = r.seed;
  doc["caliper"] = r.caliper;
  doc["ratio"] = r.ratio;
  doc["with_replacement"] = r.with_replacement;
  doc["stratum_size"] = r.stratum_size;
  doc["matched_patients"] = r.matched_patients;
  doc["sampling_ratio"] = r.sampling_ratio;
  doc["sampling_ratio_display"] = display_ratio(r.sampling_ratio);
  auto& pairs = doc["pairs"] = ordered_json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"treated", p.treated}, {"control", p.control}, {"distance", p.distance}});
  }
  doc["unmatched_treated"] = r.unmatched_treated;
  doc["unmatched_control"] = r.unmatched_control;
  return doc.dump(indent);
}

std::string match_pairs_csv(const MatchResult& r) {
  std::string out = "treated,control,distance\n";
  for (const auto& p : r.pairs) {
    out += csv_escape(p.treated) + "," + csv_escape(p.control) + "," +
           nlohmann::json(p.distance).dump() + "\n";
  }
  return out;
}

std::string balance_to_json(const BalanceTable& b, int indent) {
  using nlohmann::ordered_json;
  ordered_json doc;
  auto& rows = doc["rows"] = ordered_json::array();
  auto number = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  for (const auto& r : b.rows) {
    ordered_json row;
    row["covariate"] = r.covariate;
    row["smd_before"] = number(r.smd_before);
    row["smd_after"] = r.smd_after ? number(*r.smd_after) : ordered_json("not applicable");
    rows.push_back(std::move(row));
  }
  doc["post_match"] = b.post_match_applicable ? "applicable" : "not applicable";
  if (b.post_match_overlap) {
    doc["post_match_overlap_coefficient"] = b.post_match_overlap->overlap_coefficient;
    doc["post_match_verdict"] = to_string(b.post_match_overlap->verdict);
  }
  return doc.dump(indent);
}

}  // namespace midway
