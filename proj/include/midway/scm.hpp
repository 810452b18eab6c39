#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "midway/dag.hpp"
#include "midway/table.hpp"

namespace midway {

// One discrete variable. `cpt` is row-major: one row per configuration of
// the parents (parents in name order, the last parent varying fastest), one
// column per level.
struct Variable {
  std::vector<std::string> levels;
  std::vector<double> cpt;
  Role role = Role::None;
  bool observed = true;
};

using InterventionSpec = std::map<NodeId, std::string>;

class Scm {
 public:
  Scm() = default;
  // Validates domains, CPT shapes and row sums (|sum - 1| <= 1e-12).
  static Scm create(Dag graph, std::map<NodeId, Variable> variables);

  const Dag& graph() const noexcept { return graph_; }
  const Variable& variable(Dag::Index i) const { return vars_[i]; }
  const Variable& variable(const NodeId& n) const { return vars_[graph_.require(n)]; }
  std::size_t level_count(Dag::Index i) const { return vars_[i].levels.size(); }
  std::size_t level_index(Dag::Index i, std::string_view label) const;

  // Row of node i's CPT for the given full assignment (level index per node).
  std::size_t cpt_row(Dag::Index i, const std::vector<std::uint32_t>& assignment) const;
  double probability(Dag::Index i, std::uint32_t level, const std::vector<std::uint32_t>& assignment) const {
    return vars_[i].cpt[cpt_row(i, assignment) * vars_[i].levels.size() + level];
  }

  bool operator==(const Scm& other) const;

 private:
  Dag graph_;
  std::vector<Variable> vars_;  // indexed like graph_ nodes
};

Scm parse_scm(std::string_view json_text);
std::string scm_to_json(const Scm& scm, int indent = 2);

// Replaces each intervened node's CPT by a point mass and removes its
// incoming edges. Other CPTs are copied unchanged.
Scm mutilate(const Scm& scm, const InterventionSpec& intervention);

struct SampleOptions {
  std::size_t block_size = 4096;  // rows per derived-seed block
  unsigned threads = 0;           // 0: hardware concurrency
  bool include_latent = false;
  std::string id_prefix = "P";
};

// Ancestral sampling. Block b uses Rng(mix_seed(seed, b)), so the output
// does not depend on the thread count.
PatientTable sample(const Scm& scm, std::size_t n, std::uint64_t seed,
                    const InterventionSpec& intervention = {}, const SampleOptions& options = {});

constexpr std::uint64_t kMaxExactStates = 10'000'000;

// p(target | do(intervention)) by enumerating the ancestors of the target in
// the mutilated model.
std::vector<double> exact_interventional(const Scm& scm, const InterventionSpec& intervention,
                                         const NodeId& target);

// Back-door plug-in estimate sum_z p(z) p(y | x, z) from a sample.
double adjusted_probability(const PatientTable& t, const std::string& x, const std::string& x_level,
                            const std::string& y, const std::string& y_level,
                            const std::vector<std::string>& z);

struct MulticentreConfig {
  int centres = 18;
  std::size_t n_per_centre = 2000;
  // Centre shifts on the treatment probability; empty: evenly spaced in
  // [-0.15, 0.15]. Outcome shifts default to zero (no direct centre effect).
  std::vector<double> propensity_shift;
  std::vector<double> outcome_shift;
  double tau = -0.10;  // treatment effect on the outcome probability
  double base_treatment = 0.40;
  double base_outcome = 0.45;
  double age_on_treatment = -0.05;  // per age step (45, 60, 75)
  double age_on_outcome = 0.08;
  double hypertension_on_treatment = 0.05;
  double hypertension_on_outcome = 0.05;
  double u_on_hypertension = 0.30;
  double u_on_outcome = 0.10;
  std::uint64_t seed = 1;
};

// Discrete SCM with Centre, latent U, Age, Hypertension, EVD and Outcome and
// linear additive probability tables.
Scm multicentre_scm(const MulticentreConfig& config);

// Samples n_per_centre rows under do(Centre = c) for each centre.
PatientTable generate_multicentre(const MulticentreConfig& config);

}  // namespace midway
