#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "midway/estimators.hpp"
#include "midway/table.hpp"

namespace midway {

struct MonitorConfig {
  std::string centre;
  std::string treatment;
  std::string outcome;
  std::vector<std::string> covariates;
  std::optional<std::string> reference;  // first observed level otherwise
  std::size_t min_centre_count = 10;
};

struct CentrePair {
  std::string centre;
  double alpha = 0, se_alpha = 0;
  double beta = 0, se_beta = 0;
};

struct CentreEffects {
  std::string reference;
  std::vector<CentrePair> pairs;  // non-reference centres, declared level order
  // Covariance of the alpha estimates and the residual df of the treatment fit;
  // used for the instrument-strength check.
  Eigen::MatrixXd alpha_covariance;
  int alpha_df = 0;
  std::size_t rows_used = 0;
  std::size_t rows_excluded = 0;
  std::vector<std::string> small_centres;  // below min_centre_count (warning only)
  FitResult treatment_fit;
  FitResult outcome_fit;
};

// Two linear-link fits (treatment and outcome on covariates + one-hot centre)
// over the complete cases.
CentreEffects fit_centre_effects(const PatientTable& t, const MonitorConfig& config);

enum class EggerWeighting {
  OutcomePrecision,  // 1 / se_beta^2
  Unweighted,
};
std::string to_string(EggerWeighting w);

struct EggerOptions {
  EggerWeighting weighting = EggerWeighting::OutcomePrecision;
  // Joint F-test of the alpha block; the fit is refused when the centre
  // propensities are not distinguishable at this level. 0 disables the test.
  double instrument_level = 0.05;
};

struct EggerFit {
  double slope = 0, intercept = 0;
  double se_slope = 0, se_intercept = 0;
  std::vector<std::string> centres;
  std::vector<double> alpha, beta, weights;
  std::size_t n_centres = 0;
  EggerWeighting weighting = EggerWeighting::OutcomePrecision;
  std::optional<double> instrument_f;
  std::optional<double> instrument_p;
  std::string caveat;
};

EggerFit egger_iv(const CentreEffects& effects, const EggerOptions& options = {});
// Plain WLS of beta on alpha with intercept; no instrument test.
EggerFit egger_from_points(std::vector<std::string> centres, std::vector<double> alpha,
                           std::vector<double> beta, std::vector<double> weights,
                           EggerWeighting weighting = EggerWeighting::OutcomePrecision);

struct ScatterPoint {
  std::string label;
  double x = 0, y = 0, se_x = 0, se_y = 0, weight = 0;
};

struct ScatterData {
  std::vector<ScatterPoint> points;
  double line_slope = 0, line_intercept = 0;  // display coordinates
  bool anonymized = false;
  EggerWeighting weighting = EggerWeighting::OutcomePrecision;
};

// x = -alpha (reluctance), y = beta.
ScatterData scatter_export(const CentreEffects& effects, const EggerFit& fit, bool anonymize = false);
EggerFit egger_from_scatter(const ScatterData& scatter);
std::string anonymized_label(const std::string& centre);

std::string effects_to_csv(const CentreEffects& effects);
std::string effects_to_json(const CentreEffects& effects, int indent = 2);
std::string egger_to_json(const EggerFit& fit, int indent = 2);
std::string scatter_to_json(const ScatterData& scatter, int indent = 2);

}  // namespace midway
