#include "midway/monitoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <boost/math/distributions/fisher_f.hpp>

#include "json.hpp"
#include "midway/error.hpp"
#include "midway/hash.hpp"

namespace midway {

namespace {

constexpr const char* kDilutionCaveat =
    "centre propensity effects are estimated with error; the slope is attenuated toward zero "
    "(regression dilution) and no correction is applied";

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Joint Wald F-test that all centre propensity effects are zero.
void check_instrument(const CentreEffects& e, double level, EggerFit& fit) {
  const auto k = static_cast<Eigen::Index>(e.pairs.size());
  if (level <= 0 || e.alpha_covariance.rows() != k || e.alpha_df <= 0) return;
  Eigen::VectorXd a(k);
  for (Eigen::Index i = 0; i < k; ++i) a[i] = e.pairs[static_cast<std::size_t>(i)].alpha;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(e.alpha_covariance);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::Numeric, "alpha covariance is not positive definite");
  const double f = a.dot(ldlt.solve(a)) / static_cast<double>(k);
  boost::math::fisher_f dist(static_cast<double>(k), static_cast<double>(e.alpha_df));
  const double p = boost::math::cdf(boost::math::complement(dist, f));
  fit.instrument_f = f;
  fit.instrument_p = p;
  if (p > level) {
    throw Error(ErrorKind::Data, "no instrument variation: centre propensity effects are jointly "
                                 "indistinguishable from zero (F = " + shortest(f) + ", p = " + shortest(p) + ")");
  }
}

}  // namespace

std::string to_string(EggerWeighting w) {
  return w == EggerWeighting::OutcomePrecision ? "outcome_precision" : "unweighted";
}

CentreEffects fit_centre_effects(const PatientTable& t, const MonitorConfig& config) {
  const auto& schema = t.schema();
  const auto& centre_spec = schema.columns()[schema.require(config.centre)];
  if (centre_spec.type != ColumnType::Categorical) {
    throw Error(ErrorKind::Schema, "centre column '" + config.centre + "' must be categorical");
  }
  std::vector<std::string> columns = config.covariates;
  columns.push_back(config.centre);
  columns.push_back(config.treatment);
  columns.push_back(config.outcome);
  const auto cc = complete_cases(t, columns);
  const PatientTable& data = cc.table;
  const auto cc_centre = data.schema().require(config.centre);
  const auto cc_treat = data.schema().require(config.treatment);
  const auto cc_out = data.schema().require(config.outcome);

  std::vector<std::size_t> counts(centre_spec.levels.size(), 0);
  for (std::size_t r = 0; r < data.rows(); ++r) ++counts[static_cast<std::size_t>(data.cell(r, cc_centre))];
  std::vector<std::string> observed;
  CentreEffects out;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (counts[l] == 0) continue;
    observed.push_back(centre_spec.levels[l]);
    if (counts[l] < config.min_centre_count) out.small_centres.push_back(centre_spec.levels[l]);
  }
  if (observed.size() < 3) {
    throw Error(ErrorKind::InvalidArgument, "centre monitoring needs at least 3 centres with complete rows, found " +
                                                std::to_string(observed.size()));
  }
  out.reference = config.reference.value_or(observed.front());
  if (std::find(observed.begin(), observed.end(), out.reference) == observed.end()) {
    throw Error(ErrorKind::InvalidArgument, "reference centre '" + out.reference + "' has no complete rows");
  }
  out.rows_used = data.rows();
  out.rows_excluded = cc.excluded;

  EncoderOptions opt;
  opt.reference[config.centre] = out.reference;
  std::vector<std::string> terms = config.covariates;
  terms.push_back(config.centre);
  const auto encoder = DesignEncoder::fit(data, terms, opt);
  const auto x = encoder.encode(data);
  Eigen::VectorXd yt(static_cast<Eigen::Index>(data.rows())), yo(yt.size());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    yt[static_cast<Eigen::Index>(r)] = data.binary(r, cc_treat);
    yo[static_cast<Eigen::Index>(r)] = data.binary(r, cc_out);
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(yt.size());
  out.treatment_fit = fit_linear_wls(x, yt, w);
  out.outcome_fit = fit_linear_wls(x, yo, w);
  out.treatment_fit.encoder = encoder;
  out.outcome_fit.encoder = encoder;

  std::vector<Eigen::Index> idx;
  for (const auto& level : observed) {
    if (level == out.reference) continue;
    const auto label = config.centre + "=" + level;
    const auto i = out.treatment_fit.index_of(label);
    const auto j = out.outcome_fit.index_of(label);
    idx.push_back(i);
    out.pairs.push_back({level, out.treatment_fit.coefficients[i], out.treatment_fit.se(i),
                         out.outcome_fit.coefficients[j], out.outcome_fit.se(j)});
  }
  const auto k = static_cast<Eigen::Index>(idx.size());
  out.alpha_covariance.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) out.alpha_covariance(a, b) = out.treatment_fit.covariance(idx[a], idx[b]);
  out.alpha_df = out.treatment_fit.df;
  return out;
}

EggerFit egger_from_points(std::vector<std::string> centres, std::vector<double> alpha, std::vector<double> beta,
                           std::vector<double> weights, EggerWeighting weighting) {
  const std::size_t n = alpha.size();
  if (beta.size() != n || weights.size() != n || centres.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "Egger inputs have inconsistent lengths");
  }
  if (n < 3) {
    throw Error(ErrorKind::InvalidArgument, "Egger regression needs at least 3 centre pairs, got " + std::to_string(n));
  }
  for (double v : weights) {
    if (!(v > 0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "Egger weights must be positive and finite");
  }
  const auto [lo, hi] = std::minmax_element(alpha.begin(), alpha.end());
  if (*hi - *lo <= 1e-12 * (1.0 + std::max(std::abs(*lo), std::abs(*hi)))) {
    throw Error(ErrorKind::Data, "no instrument variation: all centre propensity effects are identical");
  }
  Eigen::MatrixXd xm(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(xm.rows()), w(xm.rows());
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    xm(r, 0) = 1.0;
    xm(r, 1) = alpha[i];
    y[r] = beta[i];
    w[r] = weights[i];
  }
  const auto fit = fit_linear_wls(DesignMatrix::from_matrix(std::move(xm), {"(Intercept)", "alpha"}, true), y, w);
  EggerFit out;
  out.intercept = fit.coefficients[0];
  out.slope = fit.coefficients[1];
  out.se_intercept = fit.se(0);
  out.se_slope = fit.se(1);
  out.centres = std::move(centres);
  out.alpha = std::move(alpha);
  out.beta = std::move(beta);
  out.weights = std::move(weights);
  out.n_centres = n;
  out.weighting = weighting;
  out.caveat = kDilutionCaveat;
  return out;
}

EggerFit egger_iv(const CentreEffects& effects, const EggerOptions& options) {
  std::vector<std::string> centres;
  std::vector<double> alpha, beta, weights;
  for (const auto& p : effects.pairs) {
    centres.push_back(p.centre);
    alpha.push_back(p.alpha);
    beta.push_back(p.beta);
    if (options.weighting == EggerWeighting::OutcomePrecision) {
      if (!(p.se_beta > 0)) {
        throw Error(ErrorKind::InvalidArgument, "centre '" + p.centre + "' has a non-positive outcome standard error");
      }
      weights.push_back(1.0 / (p.se_beta * p.se_beta));
    } else {
      weights.push_back(1.0);
    }
  }
  if (effects.pairs.size() < 3) {
    throw Error(ErrorKind::InvalidArgument,
                "Egger regression needs at least 3 centre pairs, got " + std::to_string(effects.pairs.size()));
  }
  EggerFit probe;
  check_instrument(effects, options.instrument_level, probe);
  auto fit = egger_from_points(std::move(centres), std::move(alpha), std::move(beta), std::move(weights),
                               options.weighting);
  fit.instrument_f = probe.instrument_f;
  fit.instrument_p = probe.instrument_p;
  return fit;
}

std::string anonymized_label(const std::string& centre) {
  return "centre-" + hex64(fnv1a(centre)).substr(0, 8);
}

ScatterData scatter_export(const CentreEffects& effects, const EggerFit& fit, bool anonymize) {
  ScatterData s;
  s.anonymized = anonymize;
  s.weighting = fit.weighting;
  s.line_slope = -fit.slope;
  s.line_intercept = fit.intercept;
  for (std::size_t i = 0; i < effects.pairs.size(); ++i) {
    const auto& p = effects.pairs[i];
    const double w = i < fit.weights.size() ? fit.weights[i] : 0.0;
    s.points.push_back({anonymize ? anonymized_label(p.centre) : p.centre, -p.alpha, p.beta, p.se_alpha, p.se_beta, w});
  }
  return s;
}

EggerFit egger_from_scatter(const ScatterData& scatter) {
  std::vector<std::string> labels;
  std::vector<double> alpha, beta, weights;
  for (const auto& p : scatter.points) {
    labels.push_back(p.label);
    alpha.push_back(-p.x);
    beta.push_back(p.y);
    weights.push_back(p.weight);
  }
  return egger_from_points(std::move(labels), std::move(alpha), std::move(beta), std::move(weights), scatter.weighting);
}

std::string effects_to_csv(const CentreEffects& effects) {
  std::string out = "centre,alpha,se_alpha,beta,se_beta\n";
  for (const auto& p : effects.pairs) {
    out += csv_escape(p.centre) + "," + shortest(p.alpha) + "," + shortest(p.se_alpha) + "," + shortest(p.beta) + "," +
           shortest(p.se_beta) + "\n";
  }
  return out;
}

std::string effects_to_json(const CentreEffects& effects, int indent) {
  nlohmann::ordered_json j;
  j["reference"] = effects.reference;
  j["rows_used"] = effects.rows_used;
  j["rows_excluded"] = effects.rows_excluded;
  j["small_centres"] = effects.small_centres;
  auto& pairs = j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : effects.pairs) {
    pairs.push_back({{"centre", p.centre}, {"alpha", p.alpha}, {"se_alpha", p.se_alpha}, {"beta", p.beta},
                     {"se_beta", p.se_beta}});
  }
  return j.dump(indent);
}

std::string egger_to_json(const EggerFit& fit, int indent) {
  nlohmann::ordered_json j;
  j["slope"] = fit.slope;
  j["se_slope"] = fit.se_slope;
  j["intercept"] = fit.intercept;
  j["se_intercept"] = fit.se_intercept;
  j["n_centres"] = fit.n_centres;
  j["weighting"] = to_string(fit.weighting);
  j["centres"] = fit.centres;
  j["alpha"] = fit.alpha;
  j["beta"] = fit.beta;
  j["weights"] = fit.weights;
  j["instrument_f"] = fit.instrument_f ? nlohmann::ordered_json(*fit.instrument_f) : nullptr;
  j["instrument_p"] = fit.instrument_p ? nlohmann::ordered_json(*fit.instrument_p) : nullptr;
  j["caveat"] = fit.caveat;
  return j.dump(indent);
}

std::string scatter_to_json(const ScatterData& s, int indent) {
  nlohmann::ordered_json j;
  j["transform"] = "x = -alpha (reluctance), y = beta; line slope is the negated Egger slope";
  j["anonymized"] = s.anonymized;
  j["weighting"] = to_string(s.weighting);
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : s.points) {
    pts.push_back({{"label", p.label}, {"x", p.x}, {"y", p.y}, {"se_x", p.se_x}, {"se_y", p.se_y}, {"weight", p.weight}});
  }
  j["line"] = {{"slope", s.line_slope}, {"intercept", s.line_intercept}};
  return j.dump(indent);
}

}  // namespace midway
