#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "midway/error.hpp"
#include "midway/positivity.hpp"
#include "midway/rng.hpp"
#include "support.hpp"

using namespace midway;
using namespace midway::testing;

namespace {

}  // namespace

TEST_SUITE("kde") {
  TEST_CASE("beta(2,5) recovered in L1") {
    Rng rng(17);
    std::vector<double> s(10000);
    for (auto& v : s) v = beta_int(rng, 2, 5);
    const auto p = kde_profile(s, Group::Treated);
    REQUIRE(p.grid.size() == 512);
    const boost::math::beta_distribution<double> beta(2, 5);
    std::vector<double> err(p.grid.size());
    for (std::size_t j = 0; j < p.grid.size(); ++j) {
      err[j] = std::abs(p.density[j] - boost::math::pdf(beta, p.grid[j]));
    }
    const double l1 = trapezoid(err, p.grid[1] - p.grid[0]);
    MESSAGE("L1 = " << l1);
    CHECK(l1 < 0.05);
  }

  TEST_CASE("profile invariants") {
    Rng rng(3);
    std::vector<double> s(500);
    for (auto& v : s) v = rng.uniform(0.01, 0.99);
    const auto p = kde_profile(s, Group::Control, 200);
    CHECK(p.n == 500);
    CHECK(p.group == Group::Control);
    CHECK(p.grid.front() == 0.0);
    CHECK(p.grid.back() == 1.0);
    for (std::size_t j = 1; j < p.grid.size(); ++j) CHECK(p.grid[j] > p.grid[j - 1]);
    CHECK(std::abs(trapezoid(p.density, p.grid[1] - p.grid[0]) - 1.0) < 1e-3);
    CHECK(*std::min_element(p.density.begin(), p.density.end()) >= 0.0);
  }

  TEST_CASE("degenerate spread uses the bandwidth floor") {
    std::vector<double> s(50, 0.5);
    const auto p = kde_profile(s, Group::Treated);
    CHECK(p.bandwidth == kBandwidthFloor);
    CHECK(std::abs(trapezoid(p.density, p.grid[1] - p.grid[0]) - 1.0) < 1e-3);
    const auto peak = std::max_element(p.density.begin(), p.density.end()) - p.density.begin();
    CHECK(std::abs(p.grid[static_cast<std::size_t>(peak)] - 0.5) < 0.002);
  }

  TEST_CASE("silverman rule") {
    std::vector<double> s{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double mean = 0.45, ss = 0;
    for (double v : s) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / 7);
    const double iqr = 0.625 - 0.275;
    CHECK(silverman_bandwidth(s) ==
          doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(8.0, -0.2)).epsilon(1e-12));
  }

  TEST_CASE("clusters stay separate") {
    Rng rng(4);
    std::vector<double> a(400), b(400);
    for (auto& v : a) v = 0.1 + rng.normal(0, 0.02);
    for (auto& v : b) v = 0.9 + rng.normal(0, 0.02);
    const auto pa = kde_profile(a, Group::Treated);
    const auto pb = kde_profile(b, Group::Control);
    auto argmax = [](const DensityProfile& p) {
      return p.grid[static_cast<std::size_t>(std::max_element(p.density.begin(), p.density.end()) - p.density.begin())];
    };
    CHECK(std::abs(argmax(pa) - 0.1) < 0.03);
    CHECK(std::abs(argmax(pb) - 0.9) < 0.03);
    // Local maxima above a tenth of the peak; isolated outliers add small bumps.
    auto modes = [](const DensityProfile& p) {
      const double floor = 0.1 * *std::max_element(p.density.begin(), p.density.end());
      int m = 0;
      for (std::size_t j = 1; j + 1 < p.density.size(); ++j) {
        if (p.density[j] > p.density[j - 1] && p.density[j] >= p.density[j + 1] && p.density[j] > floor) ++m;
      }
      return m;
    };
    CHECK(modes(pa) == 1);
    CHECK(modes(pb) == 1);
  }

  TEST_CASE("contract") {
    std::vector<double> one{0.5};
    CHECK_THROWS_AS(kde_profile(one, Group::Treated), Error);
    std::vector<double> bad{0.5, 1.0};
    CHECK_THROWS_AS(kde_profile(bad, Group::Treated), Error);
    std::vector<double> nan{0.5, NAN};
    CHECK_THROWS_AS(kde_profile(nan, Group::Treated), Error);
  }
}

TEST_SUITE("overlap") {
  TEST_CASE("identical populations") {
    Rng rng(8);
    std::vector<double> t(5000), c(5000);
    for (auto& v : t) v = beta_int(rng, 3, 4);
    for (auto& v : c) v = beta_int(rng, 3, 4);
    const auto r = overlap_report(t, c);
    CHECK(r.overlap_coefficient > 0.9);
    CHECK(r.verdict == Verdict::Adequate);
  }

  TEST_CASE("disjoint supports") {
    Rng rng(9);
    std::vector<double> t(2000), c(2000);
    for (auto& v : t) v = truncated_normal(rng, 0.9, 0.02);
    for (auto& v : c) v = truncated_normal(rng, 0.1, 0.02);
    const auto r = overlap_report(t, c);
    CHECK(r.overlap_coefficient < 0.05);
    CHECK(r.verdict == Verdict::Inadequate);
    CHECK(r.tail_flags.size() >= 2);
  }

  TEST_CASE("truncated normals against numeric integration") {
    Rng rng(10);
    std::vector<double> t(10000), c(10000);
    for (auto& v : t) v = truncated_normal(rng, 0.6, 0.1);
    for (auto& v : c) v = truncated_normal(rng, 0.4, 0.1);
    const auto r = overlap_report(t, c);
    const int m = 200000;
    double truth = 0;
    for (int i = 0; i <= m; ++i) {
      const double x = static_cast<double>(i) / m;
      const double w = (i == 0 || i == m) ? 0.5 : 1.0;
      truth += w * std::min(trunc_pdf(x, 0.6, 0.1), trunc_pdf(x, 0.4, 0.1)) / m;
    }
    MESSAGE("estimate " << r.overlap_coefficient << " truth " << truth);
    CHECK(std::abs(r.overlap_coefficient - truth) < 0.05);
  }

  TEST_CASE("symmetry and verdict recomputation") {
    Rng rng(11);
    std::vector<double> t(800), c(600);
    for (auto& v : t) v = truncated_normal(rng, 0.7, 0.15);
    for (auto& v : c) v = truncated_normal(rng, 0.35, 0.12);
    const auto a = overlap_report(t, c);
    const auto b = overlap_report(c, t);
    CHECK(a.overlap_coefficient == b.overlap_coefficient);
    CHECK(a.verdict == classify_overlap(a.overlap_coefficient, a.treated_mass_outside,
                                        a.control_mass_outside, a.thresholds));
    for (const auto& s : a.common_support) {
      CHECK(s.low >= 0.0);
      CHECK(s.high <= 1.0);
      CHECK(s.low <= s.high);
    }
  }

  TEST_CASE("classification thresholds") {
    const OverlapThresholds th;
    CHECK(classify_overlap(0.6, 0.05, 0.05, th) == Verdict::Adequate);
    CHECK(classify_overlap(0.6, 0.2, 0.05, th) == Verdict::Partial);
    CHECK(classify_overlap(0.3, 0.0, 0.0, th) == Verdict::Partial);
    CHECK(classify_overlap(0.19, 0.0, 0.0, th) == Verdict::Inadequate);
  }

  TEST_CASE("exports") {
    Rng rng(12);
    std::vector<double> t(100), c(100);
    for (auto& v : t) v = rng.uniform(0.2, 0.8);
    for (auto& v : c) v = rng.uniform(0.1, 0.7);
    const auto r = overlap_report(t, c, {}, 64);
    const auto csv = overlap_plot_csv(r);
    CHECK(csv.rfind("grid,density_treated,density_control\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 65);
    const auto json = overlap_to_json(r);
    CHECK(json.find("\"overlap_coefficient\"") != std::string::npos);
    CHECK(json.find("\"verdict\"") != std::string::npos);
  }
}

TEST_SUITE("cells") {
  const char* kSchema = R"({"columns":[
    {"name":"id","type":"id"},
    {"name":"evd","type":"binary"},
    {"name":"a","type":"binary"},
    {"name":"b","type":"binary"},
    {"name":"age","type":"real"}
  ]})";

  PatientTable table(const std::vector<std::array<int, 3>>& rows) {
    std::string csv = "id,evd,a,b,age\n";
    int i = 0;
    for (const auto& r : rows) {
      csv += std::to_string(i) + "," + std::to_string(r[0]) + "," + std::to_string(r[1]) + "," +
             std::to_string(r[2]) + "," + std::to_string(40 + i % 50) + "\n";
      ++i;
    }
    return ingest_csv(csv, parse_schema(kSchema));
  }

  TEST_CASE("fully populated") {
    std::vector<std::array<int, 3>> rows;
    for (int e = 0; e < 2; ++e)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) rows.push_back({e, a, b});
    const auto r = positivity_cells(table(rows), "evd", {"a", "b"});
    CHECK(r.cells.size() == 4);
    CHECK(r.flagged() == 0);
  }

  TEST_CASE("zero treated cell") {
    const auto t = table({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0, 1, 1}, {0, 1, 1}});
    const auto r = positivity_cells(t, "evd", {"a", "b"});
    REQUIRE(r.cells.size() == 3);
    CHECK(r.flagged() == 1);
    CHECK(r.cells[2].configuration == std::vector<std::string>{"1", "1"});
    CHECK(r.cells[2].flagged);
    CHECK(r.cells[2].treated == 0);
  }

  TEST_CASE("deterministic rule against direct tabulation") {
    Rng rng(13);
    std::vector<std::array<int, 3>> rows;
    int counts[2][2][2] = {};
    for (int i = 0; i < 500; ++i) {
      const int a = static_cast<int>(rng.below(2));
      const int b = static_cast<int>(rng.below(2));
      const int e = (a == 1 && b == 1) ? 1 : static_cast<int>(rng.below(2));
      rows.push_back({e, a, b});
      ++counts[a][b][e];
    }
    const auto r = positivity_cells(table(rows), "evd", {"a", "b"});
    REQUIRE(r.cells.size() == 4);
    for (const auto& cell : r.cells) {
      const int a = std::stoi(cell.configuration[0]);
      const int b = std::stoi(cell.configuration[1]);
      CHECK(cell.treated == static_cast<std::size_t>(counts[a][b][1]));
      CHECK(cell.control == static_cast<std::size_t>(counts[a][b][0]));
      CHECK(cell.flagged == (a == 1 && b == 1));
    }
    const auto strict = positivity_cells(table(rows), "evd", {"a", "b"}, 1000);
    CHECK(strict.flagged() == 4);
  }

  TEST_CASE("continuous parents need bins") {
    const auto t = table({{0, 0, 0}, {1, 0, 0}});
    CHECK_THROWS_AS(positivity_cells(t, "evd", {"age"}), Error);
    const auto r = positivity_cells(t, "evd", {"age"}, 1, {{"age", {40.5}}});
    REQUIRE(r.cells.size() == 2);
    CHECK(r.cells[0].configuration[0] == "(-inf, 40.5)");
    CHECK(r.cells[1].configuration[0] == "[40.5, inf)");
    CHECK(cells_to_json(r).find("flagged") != std::string::npos);
  }
}
