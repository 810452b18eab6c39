#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "midway/table.hpp"

namespace midway {

struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<std::string> labels;
  bool has_intercept = false;  // column 0 when set
  Eigen::Index rank = 0;

  bool full_rank() const { return rank == x.cols(); }
  // Raw matrix; computes the rank.
  static DesignMatrix from_matrix(Eigen::MatrixXd x, std::vector<std::string> labels,
                                  bool has_intercept);
};

struct EncoderOptions {
  bool intercept = true;
  bool standardize = true;
  // Ordered columns become one numeric column (coerced labels) unless listed here.
  std::vector<std::string> ordered_as_factor;
  // Reference level per categorical column; first declared level otherwise.
  std::map<std::string, std::string> reference;
};

// Column encoding learned on one table and replayed on others: real and
// ordered-numeric columns standardized with the fit-time mean/sd, binary as
// 0/1, factors one-hot against a reference level.
class DesignEncoder {
 public:
  struct Term {
    std::string column;
    enum Kind { Numeric, Binary, Factor } kind = Numeric;
    double mean = 0, sd = 1;
    std::vector<std::string> levels;  // factor levels, reference first
  };

  static DesignEncoder fit(const PatientTable& t, const std::vector<std::string>& covariates,
                           const EncoderOptions& options = {});

  // Throws on missing cells and on factor levels not seen at fit time.
  DesignMatrix encode(const PatientTable& t) const;

  const std::vector<Term>& terms() const noexcept { return terms_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  std::vector<Term> terms_;
  std::vector<std::string> labels_;
  bool intercept_ = true;
};

struct Prior {
  double sd = 2.5;
  double intercept_sd = 10.0;
};

enum class Link { Logit, Linear };
std::string to_string(Link link);

struct Interval {
  double low = 0, high = 0;
};

struct FitResult {
  Link link = Link::Logit;
  std::vector<std::string> labels;
  bool has_intercept = false;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  int iterations = 0;
  double gradient_norm = 0;
  // Linear fits only.
  double sigma2 = 0;
  int df = 0;
  std::optional<Prior> prior;
  std::optional<DesignEncoder> encoder;

  double se(Eigen::Index j) const;
  // Central interval from the Gaussian approximation; level in (0, 1).
  Interval interval(Eigen::Index j, double level) const;
  Eigen::Index index_of(const std::string& label) const;
};

// Log-posterior of the Gaussian-prior Bernoulli-logit model, its gradient
// and the negative Hessian.
double logit_log_posterior(const DesignMatrix& x, const Eigen::VectorXd& y, const Prior& prior,
                           const Eigen::VectorXd& beta);
Eigen::VectorXd logit_gradient(const DesignMatrix& x, const Eigen::VectorXd& y,
                               const Prior& prior, const Eigen::VectorXd& beta);

struct NewtonOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  int max_halvings = 30;
};

FitResult fit_logit_map(const DesignMatrix& x, const Eigen::VectorXd& y, const Prior& prior = {},
                        const NewtonOptions& options = {});

FitResult fit_linear_wls(const DesignMatrix& x, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& weights);

Eigen::VectorXd predict_propensity(const FitResult& fit, const DesignMatrix& x_new);
// Encodes with the fit's stored encoder.
Eigen::VectorXd predict_propensity(const FitResult& fit, const PatientTable& rows);

struct LinearPrediction {
  Eigen::VectorXd values;
  std::size_t out_of_unit_range = 0;  // probability-scale misuse flag
};
LinearPrediction predict_linear(const FitResult& fit, const DesignMatrix& x_new);

struct ForestRecord {
  std::string label;
  double point = 0, low = 0, high = 0;
};

std::vector<ForestRecord> forest_export(const FitResult& fit, double level);
std::string forest_to_json(const std::vector<ForestRecord>& records, double level, int indent = 2);
std::string format_fit_table(const FitResult& fit, double level);

// Standard normal quantile.
double normal_quantile(double p);

}  // namespace midway
