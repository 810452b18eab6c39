#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "midway/error.hpp"
#include "midway/matching.hpp"
#include "midway/rng.hpp"

using namespace midway;

namespace {

std::vector<ScoredUnit> units(const std::vector<double>& treated, const std::vector<double>& control) {
  std::vector<ScoredUnit> out;
  for (std::size_t i = 0; i < treated.size(); ++i) out.push_back({"t" + std::to_string(i), treated[i], true});
  for (std::size_t i = 0; i < control.size(); ++i) out.push_back({"c" + std::to_string(i), control[i], false});
  return out;
}

// Agreement at the extremes, equipoise in the middle: 34 + 34 patients
// around 0.5, 40 treated near 0.97, 39 controls near 0.03.
std::vector<ScoredUnit> planted_stratum(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> t, c;
  for (int i = 0; i < 34; ++i) t.push_back(0.5 + rng.uniform(-0.01, 0.01));
  for (int i = 0; i < 34; ++i) c.push_back(0.5 + rng.uniform(-0.01, 0.01));
  for (int i = 0; i < 40; ++i) t.push_back(0.97 + rng.uniform(-0.01, 0.01));
  for (int i = 0; i < 39; ++i) c.push_back(0.03 + rng.uniform(-0.01, 0.01));
  return units(t, c);
}

}  // namespace

TEST_SUITE("match") {
  TEST_CASE("identical arms match completely") {
    Rng rng(1);
    std::vector<double> s(50);
    for (auto& v : s) v = rng.uniform(0.05, 0.95);
    MatchConfig cfg;
    cfg.caliper = 1e-9;
    const auto r = stochastic_match(units(s, s), cfg);
    CHECK(r.pairs.size() == 50);
    CHECK(r.sampling_ratio == 1.0);
    CHECK(r.unmatched_treated.empty());
  }

  TEST_CASE("distant arms do not match") {
    Rng rng(2);
    std::vector<double> t(30), c(30);
    for (auto& v : t) v = 0.9 + rng.uniform(-0.01, 0.01);
    for (auto& v : c) v = 0.1 + rng.uniform(-0.01, 0.01);
    MatchConfig cfg;
    cfg.caliper = 0.2;
    const auto r = stochastic_match(units(t, c), cfg);
    CHECK(r.pairs.empty());
    CHECK(r.sampling_ratio == 0.0);
    CHECK(r.unmatched_treated.size() == 30);
    CHECK(r.unmatched_control.size() == 30);
  }

  TEST_CASE("planted 147-patient stratum") {
    for (std::uint64_t seed : std::vector<std::uint64_t>{1, 2, 3, kDefaultSeed}) {
      const auto u = planted_stratum(seed);
      REQUIRE(u.size() == 147);
      MatchConfig cfg;
      cfg.seed = seed;
      const auto r = stochastic_match(u, cfg);
      CHECK(r.stratum_size == 147);
      CHECK(std::abs(r.sampling_ratio - 0.46) <= 0.05);
      CHECK(display_ratio(r.sampling_ratio) == 0.46);
      CHECK(rct_equivalent_sample_size(100, display_ratio(r.sampling_ratio)) == 218);
    }
  }

  TEST_CASE("determinism and seeds") {
    const auto u = planted_stratum(9);
    MatchConfig cfg;
    cfg.seed = 77;
    const auto a = match_to_json(stochastic_match(u, cfg));
    const auto b = match_to_json(stochastic_match(u, cfg));
    CHECK(a == b);
    CHECK(match_pairs_csv(stochastic_match(u, cfg)) == match_pairs_csv(stochastic_match(u, cfg)));
    cfg.seed = 78;
    CHECK(match_to_json(stochastic_match(u, cfg)) != a);
  }

  TEST_CASE("caliper soundness, no reuse, ratio") {
    Rng rng(5);
    std::vector<double> t(200), c(500);
    for (auto& v : t) v = 1 / (1 + std::exp(-rng.normal(0.5, 1)));
    for (auto& v : c) v = 1 / (1 + std::exp(-rng.normal(-0.5, 1)));
    for (int ratio : {1, 2, 3}) {
      MatchConfig cfg;
      cfg.ratio = ratio;
      const auto u = units(t, c);
      const auto r = stochastic_match(u, cfg);
      std::set<std::string> controls;
      std::map<std::string, int> per_treated;
      for (const auto& p : r.pairs) {
        CHECK(p.distance <= r.caliper);
        CHECK(controls.insert(p.control).second);
        ++per_treated[p.treated];
      }
      for (const auto& [id, k] : per_treated) CHECK(k <= ratio);
      CHECK(r.matched_patients == per_treated.size() + controls.size());
      CHECK(r.sampling_ratio == static_cast<double>(r.matched_patients) / 700.0);
      CHECK(r.unmatched_treated.size() + per_treated.size() == 200);
      CHECK(r.unmatched_control.size() + controls.size() == 500);
    }
  }

  TEST_CASE("with replacement a control may serve several treated") {
    std::vector<double> t(10, 0.5), c(1, 0.5);
    MatchConfig cfg;
    cfg.with_replacement = true;
    cfg.caliper = 0.1;
    const auto r = stochastic_match(units(t, c), cfg);
    CHECK(r.pairs.size() == 10);
    CHECK(r.matched_patients == 11);
  }

  TEST_CASE("caliper ladder is monotone") {
    Rng rng(6);
    std::vector<double> t(150), c(150);
    for (auto& v : t) v = 1 / (1 + std::exp(-rng.normal(1, 1.2)));
    for (auto& v : c) v = 1 / (1 + std::exp(-rng.normal(-1, 1.2)));
    const auto u = units(t, c);
    std::size_t last = 0;
    for (double cal : {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0}) {
      MatchConfig cfg;
      cfg.caliper = cal;
      const auto r = stochastic_match(u, cfg);
      std::set<std::string> treated;
      for (const auto& p : r.pairs) treated.insert(p.treated);
      CHECK(treated.size() >= last);
      last = treated.size();
    }
  }

  TEST_CASE("contract") {
    CHECK_THROWS_AS(stochastic_match(units({}, {0.5})), Error);
    CHECK_THROWS_AS(stochastic_match(units({0.5}, {})), Error);
    CHECK_THROWS_AS(stochastic_match(units({NAN}, {0.5})), Error);
    CHECK_THROWS_AS(stochastic_match(units({1.0}, {0.5})), Error);
    MatchConfig bad;
    bad.caliper = 0.0;
    CHECK_THROWS_AS(stochastic_match(units({0.5}, {0.5}), bad), Error);
    bad.caliper = 0.1;
    bad.ratio = 0;
    CHECK_THROWS_AS(stochastic_match(units({0.5}, {0.5}), bad), Error);
  }
}

TEST_SUITE("sample size") {
  TEST_CASE("rct equivalent") {
    CHECK(rct_equivalent_sample_size(100, 0.46) == 218);
    CHECK(rct_equivalent_sample_size(100, 1.0) == 100);
    CHECK(rct_equivalent_sample_size(50, 0.25) == 200);
    CHECK(rct_equivalent_sample_size(100, 0.5) == 200);
    CHECK_THROWS_AS(rct_equivalent_sample_size(100, 0.0), Error);
    CHECK_THROWS_AS(rct_equivalent_sample_size(0, 0.5), Error);
    CHECK_THROWS_AS(rct_equivalent_sample_size(100, 1.5), Error);
  }

  TEST_CASE("display rounding") {
    CHECK(display_ratio(68.0 / 147.0) == 0.46);
    CHECK(display_ratio(0.455) == 0.46);
    CHECK(display_ratio(1.0) == 1.0);
  }
}

TEST_SUITE("balance") {
  const char* kSchema = R"({"columns":[
    {"name":"id","type":"id"},
    {"name":"evd","type":"binary"},
    {"name":"x","type":"real"},
    {"name":"centre","type":"categorical","levels":["A","B"]}
  ]})";

  TEST_CASE("planted shift gives SMD near one") {
    Rng rng(7);
    std::string csv = "id,evd,x,centre\n";
    for (int i = 0; i < 2000; ++i) {
      const int e = i % 2;
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", rng.normal(e ? 1.0 : 0.0, 1.0));
      csv += "p" + std::to_string(i) + "," + std::to_string(e) + "," + buf + "," + (rng.below(2) ? "A" : "B") + "\n";
    }
    const auto t = ingest_csv(csv, parse_schema(kSchema));
    const auto b = post_match_balance(t, "evd", MatchResult{}, {"x", "centre"});
    REQUIRE(b.rows.size() == 2);
    CHECK(b.rows[0].covariate == "x");
    CHECK(std::abs(b.rows[0].smd_before - 1.0) < 0.1);
    CHECK(b.rows[1].covariate == "centre=B");
    CHECK_FALSE(b.post_match_applicable);
    CHECK_FALSE(b.rows[0].smd_after.has_value());
    CHECK(balance_to_json(b).find("not applicable") != std::string::npos);
  }

  TEST_CASE("pairwise identical covariates give zero SMD after matching") {
    std::string csv = "id,evd,x,centre\n";
    Rng rng(8);
    std::vector<ScoredUnit> u;
    for (int i = 0; i < 40; ++i) {
      const double x = rng.normal();
      const char* c = rng.below(2) ? "A" : "B";
      const double s = rng.uniform(0.2, 0.8);
      csv += "t" + std::to_string(i) + ",1," + std::to_string(x) + "," + c + "\n";
      csv += "c" + std::to_string(i) + ",0," + std::to_string(x) + "," + c + "\n";
      u.push_back({"t" + std::to_string(i), s, true});
      u.push_back({"c" + std::to_string(i), s, false});
    }
    for (int i = 0; i < 30; ++i) csv += "u" + std::to_string(i) + ",0,5,A\n";
    const auto t = ingest_csv(csv, parse_schema(kSchema));
    MatchResult r;
    for (int i = 0; i < 40; ++i) r.pairs.push_back({"t" + std::to_string(i), "c" + std::to_string(i), 0});
    std::vector<double> scores;
    for (std::size_t i = 0; i < t.rows(); ++i) scores.push_back(i < 80 ? u[i].score : 0.1);
    const auto b = post_match_balance(t, "evd", r, {"x", "centre"}, scores);
    CHECK(b.post_match_applicable);
    for (const auto& row : b.rows) {
      REQUIRE(row.smd_after.has_value());
      CHECK(std::abs(*row.smd_after) < 1e-12);
    }
    CHECK(std::abs(b.rows[0].smd_before) > 0.5);
    REQUIRE(b.post_match_overlap.has_value());
    CHECK(b.post_match_overlap->overlap_coefficient > 0.99);
  }
}
