#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "midway/positivity.hpp"
#include "midway/table.hpp"

namespace midway {

constexpr std::uint64_t kDefaultSeed = 20240607;

struct MatchConfig {
  std::optional<double> caliper;  // logit scale; default 0.2 * sd of logit scores
  int ratio = 1;                  // controls per treated
  std::uint64_t seed = kDefaultSeed;
  bool with_replacement = false;
};

struct ScoredUnit {
  std::string id;
  double score = 0.5;  // balancing score in (0, 1)
  bool treated = false;
};

struct MatchPair {
  std::string treated, control;
  double distance = 0;  // |logit difference|
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::string> unmatched_treated, unmatched_control;
  std::size_t stratum_size = 0;
  std::size_t matched_patients = 0;
  double sampling_ratio = 0;  // matched_patients / stratum_size, unrounded
  double caliper = 0;
  int ratio = 1;
  bool with_replacement = false;
  std::uint64_t seed = 0;
};

double logit(double p);
double default_caliper(std::span<const ScoredUnit> units);

// Greedy matching in a seeded random order of treated units; each draws its
// controls uniformly among the available ones inside the caliper.
MatchResult stochastic_match(std::span<const ScoredUnit> units, const MatchConfig& cfg = {});

// ceil(rct_n / sampling_ratio), taking the ratio as given (possibly rounded).
std::uint64_t rct_equivalent_sample_size(std::uint64_t rct_n, double sampling_ratio);

// Half-up rounding to 2 decimals for display.
double display_ratio(double ratio);

struct BalanceRow {
  std::string covariate;
  double smd_before = 0;
  std::optional<double> smd_after;
};

struct BalanceTable {
  std::vector<BalanceRow> rows;
  bool post_match_applicable = false;
  std::optional<OverlapReport> post_match_overlap;
};

// Standardized mean differences before and after matching. Factor columns
// contribute one indicator row per non-reference level. `scores`, when
// given, is aligned with the table rows and yields the post-match overlap.
BalanceTable post_match_balance(const PatientTable& t, const std::string& treatment,
                                const MatchResult& result, const std::vector<std::string>& covariates,
                                std::span<const double> scores = {});

std::string match_to_json(const MatchResult& r, int indent = 2);
std::string match_pairs_csv(const MatchResult& r);
std::string balance_to_json(const BalanceTable& b, int indent = 2);

}  // namespace midway
