#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "midway/table.hpp"

namespace midway {

enum class Group { Treated, Control };
std::string to_string(Group g);

struct DensityProfile {
  Group group = Group::Treated;
  std::vector<double> grid;     // uniform over [0, 1]
  std::vector<double> density;  // trapezoid integral 1
  std::size_t n = 0;
  double bandwidth = 0;
};

constexpr double kBandwidthFloor = 1e-3;

// Silverman's rule, floored at kBandwidthFloor.
double silverman_bandwidth(std::span<const double> scores);

// Gaussian KDE on a uniform grid over [0, 1] with reflection at both ends,
// renormalized on the grid.
DensityProfile kde_profile(std::span<const double> scores, Group group, std::size_t grid_size = 512);

double trapezoid(std::span<const double> y, double dx);

struct OverlapThresholds {
  double epsilon = 0.01;           // density floor for common support
  double adequate_coefficient = 0.5;
  double inadequate_coefficient = 0.2;
  double max_outside_mass = 0.10;  // per group, outside common support
};

enum class Verdict { Adequate, Partial, Inadequate };
std::string to_string(Verdict v);

// Pure function of the report's scalar fields.
Verdict classify_overlap(double coefficient, double treated_outside, double control_outside,
                         const OverlapThresholds& t);

struct SupportInterval {
  double low = 0, high = 0;
};

struct TailFlag {
  double low = 0, high = 0;
  Group group = Group::Treated;  // the only group with density above epsilon
};

struct OverlapReport {
  DensityProfile treated, control;
  double overlap_coefficient = 0;
  std::vector<SupportInterval> common_support;
  std::vector<TailFlag> tail_flags;
  double treated_mass_outside = 0, control_mass_outside = 0;
  Verdict verdict = Verdict::Inadequate;
  OverlapThresholds thresholds;
};

OverlapReport overlap_report(std::span<const double> treated, std::span<const double> control,
                             const OverlapThresholds& thresholds = {}, std::size_t grid_size = 512);

std::string overlap_to_json(const OverlapReport& r, int indent = 2);
std::string overlap_plot_csv(const OverlapReport& r);

struct PositivityCell {
  std::vector<std::string> configuration;  // one label per parent
  std::size_t treated = 0, control = 0;
  bool flagged = false;
};

struct CellReport {
  std::vector<std::string> parents;
  std::vector<PositivityCell> cells;  // observed configurations, level order
  std::size_t min_count = 1;
  std::size_t excluded_missing = 0;
  std::size_t flagged() const;
};

// Bin edges for real-valued parents: cut points c1 < ... < ck give the bins
// (-inf, c1), [c1, c2), ..., [ck, inf).
using Binning = std::map<std::string, std::vector<double>>;

CellReport positivity_cells(const PatientTable& t, const std::string& treatment,
                            const std::vector<std::string>& parents, std::size_t min_count = 1,
                            const Binning& bins = {});

std::string cells_to_json(const CellReport& r, int indent = 2);

}  // namespace midway
