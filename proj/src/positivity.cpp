#include "midway/positivity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "midway/error.hpp"
#include "midway/kernels.hpp"

namespace midway {

namespace {

// Linear-interpolation quantile of sorted data.
double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::string num(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Mass of `d` on segments whose endpoints are both inside `mask`.
double mass_inside(const std::vector<double>& d, const std::vector<bool>& mask, double dx) {
  double m = 0;
  for (std::size_t j = 0; j + 1 < d.size(); ++j) {
    if (mask[j] && mask[j + 1]) m += 0.5 * dx * (d[j] + d[j + 1]);
  }
  return m;
}

template <class Pred>
std::vector<std::pair<std::size_t, std::size_t>> runs(std::size_t n, Pred pred) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t j = 0;
  while (j < n) {
    if (!pred(j)) {
      ++j;
      continue;
    }
    const std::size_t start = j;
    while (j < n && pred(j)) ++j;
    out.emplace_back(start, j - 1);
  }
  return out;
}

}  // namespace

std::string to_string(Group g) { return g == Group::Treated ? "treated" : "control"; }

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Adequate: return "Adequate";
    case Verdict::Partial: return "Partial";
    case Verdict::Inadequate: return "Inadequate";
  }
  return "?";
}

double trapezoid(std::span<const double> y, double dx) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t j = 1; j + 1 < y.size(); ++j) s += y[j];
  return s * dx;
}

double silverman_bandwidth(std::span<const double> scores) {
  const auto n = static_cast<double>(scores.size());
  double mean = 0;
  for (double s : scores) mean += s;
  mean /= n;
  double ss = 0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  const double sd = scores.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0)) spread = std::max(sd, iqr / 1.34);
  return std::max(0.9 * spread * std::pow(n, -0.2), kBandwidthFloor);
}

DensityProfile kde_profile(std::span<const double> scores, Group group, std::size_t grid_size) {
  if (scores.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "density profile of the " + to_string(group) +
                                                " group needs at least 2 observations");
  }
  if (grid_size < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least 2 points");
  for (double s : scores) {
    if (!(s > 0.0 && s < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "balancing score " + num(s) + " outside (0, 1)");
    }
  }
  DensityProfile p;
  p.group = group;
  p.n = scores.size();
  p.bandwidth = silverman_bandwidth(scores);
  p.grid.resize(grid_size);
  for (std::size_t j = 0; j < grid_size; ++j) {
    p.grid[j] = static_cast<double>(j) / static_cast<double>(grid_size - 1);
  }
  std::vector<double> centers;
  centers.reserve(3 * scores.size());
  for (double s : scores) {
    centers.push_back(s);
    centers.push_back(-s);
    centers.push_back(2.0 - s);
  }
  p.density.assign(grid_size, 0.0);
  kernels::active().gaussian_sum(centers, p.grid, 1.0 / p.bandwidth, p.density);
  const double dx = p.grid[1] - p.grid[0];
  const double total = trapezoid(p.density, dx);
  if (!(total > 0)) throw Error(ErrorKind::Numeric, "density profile vanished on the grid");
  for (auto& d : p.density) d /= total;
  return p;
}

Verdict classify_overlap(double coefficient, double treated_outside, double control_outside,
                         const OverlapThresholds& t) {
  if (coefficient < t.inadequate_coefficient) return Verdict::Inadequate;
  if (coefficient >= t.adequate_coefficient && treated_outside <= t.max_outside_mass &&
      control_outside <= t.max_outside_mass) {
    return Verdict::Adequate;
  }
  return Verdict::Partial;
}

OverlapReport overlap_report(std::span<const double> treated, std::span<const double> control,
                             const OverlapThresholds& thresholds, std::size_t grid_size) {
  OverlapReport r;
  r.thresholds = thresholds;
  r.treated = kde_profile(treated, Group::Treated, grid_size);
  r.control = kde_profile(control, Group::Control, grid_size);
  const auto& g = r.treated.grid;
  const auto& dt = r.treated.density;
  const auto& dc = r.control.density;
  const double dx = g[1] - g[0];
  r.overlap_coefficient = std::min(1.0, kernels::active().trapezoid_min(dt, dc, dx));

  const double eps = thresholds.epsilon;
  std::vector<bool> both(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) both[j] = dt[j] > eps && dc[j] > eps;
  for (auto [a, b] : runs(g.size(), [&](std::size_t j) { return both[j]; })) {
    r.common_support.push_back({g[a], g[b]});
  }
  for (auto [a, b] : runs(g.size(), [&](std::size_t j) { return dt[j] > eps && dc[j] <= eps; })) {
    r.tail_flags.push_back({g[a], g[b], Group::Treated});
  }
  for (auto [a, b] : runs(g.size(), [&](std::size_t j) { return dc[j] > eps && dt[j] <= eps; })) {
    r.tail_flags.push_back({g[a], g[b], Group::Control});
  }
  std::sort(r.tail_flags.begin(), r.tail_flags.end(),
            [](const TailFlag& a, const TailFlag& b) { return a.low < b.low; });
  r.treated_mass_outside = std::clamp(1.0 - mass_inside(dt, both, dx), 0.0, 1.0);
  r.control_mass_outside = std::clamp(1.0 - mass_inside(dc, both, dx), 0.0, 1.0);
  r.verdict = classify_overlap(r.overlap_coefficient, r.treated_mass_outside,
                               r.control_mass_outside, thresholds);
  return r;
}

std::string overlap_to_json(const OverlapReport& r, int indent) {
  using nlohmann::ordered_json;
  auto profile = [](const DensityProfile& p) {
    ordered_json j;
    j["group"] = to_string(p.group);
    j["n"] = p.n;
    j["bandwidth"] = p.bandwidth;
    j["density"] = p.density;
    return j;
  };
  ordered_json doc;
  doc["overlap_coefficient"] = r.overlap_coefficient;
  doc["verdict"] = to_string(r.verdict);
  doc["thresholds"] = {{"epsilon", r.thresholds.epsilon},
                       {"adequate_coefficient", r.thresholds.adequate_coefficient},
                       {"inadequate_coefficient", r.thresholds.inadequate_coefficient},
                       {"max_outside_mass", r.thresholds.max_outside_mass}};
  doc["treated_mass_outside"] = r.treated_mass_outside;
  doc["control_mass_outside"] = r.control_mass_outside;
  auto& cs = doc["common_support"] = ordered_json::array();
  for (const auto& s : r.common_support) cs.push_back({{"low", s.low}, {"high", s.high}});
  auto& tf = doc["tail_flags"] = ordered_json::array();
  for (const auto& t : r.tail_flags) {
    tf.push_back({{"low", t.low}, {"high", t.high}, {"group", to_string(t.group)}});
  }
  doc["grid"] = r.treated.grid;
  doc["treated"] = profile(r.treated);
  doc["control"] = profile(r.control);
  return doc.dump(indent);
}

std::string overlap_plot_csv(const OverlapReport& r) {
  std::string out = "grid,density_treated,density_control\n";
  for (std::size_t j = 0; j < r.treated.grid.size(); ++j) {
    out += num(r.treated.grid[j]) + "," + num(r.treated.density[j]) + "," + num(r.control.density[j]) + "\n";
  }
  return out;
}

std::size_t CellReport::flagged() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const PositivityCell& c) { return c.flagged; }));
}

CellReport positivity_cells(const PatientTable& t, const std::string& treatment,
                            const std::vector<std::string>& parents, std::size_t min_count,
                            const Binning& bins) {
  const auto& schema = t.schema();
  const auto tc = schema.require(treatment);
  if (schema[tc].type != ColumnType::Binary) {
    throw Error(ErrorKind::Schema, "treatment column '" + treatment + "' must be binary");
  }
  CellReport rep;
  rep.parents = parents;
  rep.min_count = min_count;
  std::vector<std::size_t> pc;
  for (const auto& p : parents) {
    const auto c = schema.require(p);
    const auto type = schema[c].type;
    if (type == ColumnType::Id) throw Error(ErrorKind::Schema, "identifier column '" + p + "' as parent");
    if (type == ColumnType::Real) {
      auto it = bins.find(p);
      if (it == bins.end()) {
        throw Error(ErrorKind::InvalidArgument,
                    "continuous parent '" + p + "' needs a binning specification");
      }
      if (!std::is_sorted(it->second.begin(), it->second.end()) ||
          std::adjacent_find(it->second.begin(), it->second.end()) != it->second.end()) {
        throw Error(ErrorKind::InvalidArgument, "bin edges for '" + p + "' must be strictly increasing");
      }
    }
    pc.push_back(c);
  }

  // Cell code per parent: level index, 0/1, or bin index.
  std::map<std::vector<double>, PositivityCell> cells;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    bool skip = t.missing(r, tc);
    for (auto c : pc) skip = skip || t.missing(r, c);
    if (skip) {
      ++rep.excluded_missing;
      continue;
    }
    std::vector<double> key;
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < pc.size(); ++k) {
      const auto c = pc[k];
      if (schema[c].type == ColumnType::Real) {
        const auto& edges = bins.at(parents[k]);
        const double v = t.cell(r, c);
        const auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
        key.push_back(static_cast<double>(b));
        const std::string lo = b == 0 ? "(-inf" : "[" + num(edges[b - 1]);
        const std::string hi = b == edges.size() ? "inf)" : num(edges[b]) + ")";
        labels.push_back(lo + ", " + hi);
      } else {
        key.push_back(t.cell(r, c));
        labels.push_back(t.text(r, c));
      }
    }
    auto& cell = cells[key];
    if (cell.configuration.empty()) cell.configuration = std::move(labels);
    (t.cell(r, tc) != 0.0 ? cell.treated : cell.control) += 1;
  }
  for (auto& [key, cell] : cells) {
    cell.flagged = cell.treated < min_count || cell.control < min_count;
    rep.cells.push_back(std::move(cell));
  }
  return rep;
}

std::string cells_to_json(const CellReport& r, int indent) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["parents"] = r.parents;
  doc["min_count"] = r.min_count;
  doc["excluded_missing"] = r.excluded_missing;
  doc["flagged"] = r.flagged();
  auto& arr = doc["cells"] = ordered_json::array();
  for (const auto& c : r.cells) {
    arr.push_back({{"configuration", c.configuration},
                   {"treated", c.treated},
                   {"control", c.control},
                   {"flagged", c.flagged}});
  }
  return doc.dump(indent);
}

}  // namespace midway
