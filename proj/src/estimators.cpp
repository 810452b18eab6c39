#include "midway/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "json.hpp"
#include "midway/error.hpp"
#include "midway/kernels.hpp"

namespace midway {

namespace {

constexpr double kRankTolerance = 1e-10;

Eigen::Index numeric_rank(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return 0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(kRankTolerance);
  return qr.rank();
}

// Columns that add nothing to the span of the columns before them.
std::vector<std::string> collinear_columns(const Eigen::MatrixXd& x,
                                           const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
    for (std::size_t k = 0; k < kept.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = x.col(kept[k]);
    sub.col(sub.cols() - 1) = x.col(j);
    if (numeric_rank(sub) == sub.cols()) {
      kept.push_back(j);
    } else {
      out.push_back(labels[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

void require_finite(const Eigen::MatrixXd& x, const char* what) {
  if (!x.allFinite()) throw Error(ErrorKind::Numeric, std::string("non-finite value in ") + what);
}

Eigen::VectorXd prior_precision(const DesignMatrix& x, const Prior& prior) {
  if (!(prior.sd > 0) || !(prior.intercept_sd > 0)) {
    throw Error(ErrorKind::InvalidArgument, "prior standard deviations must be positive");
  }
  Eigen::VectorXd d = Eigen::VectorXd::Constant(x.x.cols(), 1.0 / (prior.sd * prior.sd));
  if (x.has_intercept && d.size() > 0) d(0) = 1.0 / (prior.intercept_sd * prior.intercept_sd);
  return d;
}

double softplus(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

Eigen::VectorXd inverse_logit(const Eigen::VectorXd& eta) {
  Eigen::VectorXd p(eta.size());
  kernels::active().logistic({eta.data(), static_cast<std::size_t>(eta.size())},
                             {p.data(), static_cast<std::size_t>(p.size())});
  return p;
}

double log_posterior(const DesignMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& prec,
                     const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x.x * beta;
  double s = -0.5 * beta.cwiseProduct(prec).dot(beta);
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += y(i) * eta(i) - softplus(eta(i));
  return s;
}

Eigen::VectorXd gradient(const DesignMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& prec,
                         const Eigen::VectorXd& beta) {
  const Eigen::VectorXd p = inverse_logit(x.x * beta);
  return x.x.transpose() * (y - p) - prec.cwiseProduct(beta);
}

Eigen::MatrixXd negative_hessian(const DesignMatrix& x, const Eigen::VectorXd& prec,
                                 const Eigen::VectorXd& beta) {
  const Eigen::VectorXd p = inverse_logit(x.x * beta);
  const Eigen::VectorXd w = p.cwiseProduct(Eigen::VectorXd::Ones(p.size()) - p);
  Eigen::MatrixXd h = x.x.transpose() * w.asDiagonal() * x.x;
  h.diagonal() += prec;
  return h;
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string to_string(Link link) { return link == Link::Logit ? "logit" : "linear"; }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

DesignMatrix DesignMatrix::from_matrix(Eigen::MatrixXd x, std::vector<std::string> labels,
                                       bool has_intercept) {
  if (static_cast<std::size_t>(x.cols()) != labels.size()) {
    throw Error(ErrorKind::InvalidArgument, "design labels do not match column count");
  }
  DesignMatrix d;
  d.rank = x.allFinite() ? numeric_rank(x) : 0;
  d.x = std::move(x);
  d.labels = std::move(labels);
  d.has_intercept = has_intercept;
  return d;
}

DesignEncoder DesignEncoder::fit(const PatientTable& t, const std::vector<std::string>& covariates,
                                 const EncoderOptions& options) {
  DesignEncoder enc;
  enc.intercept_ = options.intercept;
  if (options.intercept) enc.labels_.push_back("(Intercept)");
  std::set<std::string> seen;
  for (const auto& name : covariates) {
    if (!seen.insert(name).second) {
      throw Error(ErrorKind::InvalidArgument, "covariate '" + name + "' listed twice");
    }
    const auto c = t.schema().require(name);
    const auto& spec = t.schema()[c];
    Term term;
    term.column = name;
    const bool as_factor =
        spec.type == ColumnType::Categorical ||
        (spec.type == ColumnType::Ordered &&
         std::find(options.ordered_as_factor.begin(), options.ordered_as_factor.end(), name) !=
             options.ordered_as_factor.end());
    if (spec.type == ColumnType::Id) {
      throw Error(ErrorKind::Schema, "identifier column '" + name + "' cannot be a covariate");
    }
    if (as_factor) {
      term.kind = Term::Factor;
      std::vector<bool> present(spec.levels.size(), false);
      for (std::size_t r = 0; r < t.rows(); ++r) {
        if (!t.missing(r, c)) present[static_cast<std::size_t>(t.cell(r, c))] = true;
      }
      for (std::size_t l = 0; l < spec.levels.size(); ++l) {
        if (present[l]) term.levels.push_back(spec.levels[l]);
      }
      if (auto ref = options.reference.find(name); ref != options.reference.end()) {
        auto it = std::find(term.levels.begin(), term.levels.end(), ref->second);
        if (it == term.levels.end()) {
          throw Error(ErrorKind::InvalidArgument, "reference level '" + ref->second +
                                                      "' not observed in column '" + name + "'");
        }
        std::rotate(term.levels.begin(), it, it + 1);
      }
      if (term.levels.empty()) {
        throw Error(ErrorKind::Data, "factor column '" + name + "' has no observed levels");
      }
      for (std::size_t l = 1; l < term.levels.size(); ++l) {
        enc.labels_.push_back(name + "=" + term.levels[l]);
      }
    } else {
      term.kind = spec.type == ColumnType::Binary ? Term::Binary : Term::Numeric;
      if (term.kind == Term::Numeric && options.standardize) {
        double sum = 0, n = 0;
        for (std::size_t r = 0; r < t.rows(); ++r) {
          if (!t.missing(r, c)) {
            sum += t.numeric(r, c);
            n += 1;
          }
        }
        term.mean = n > 0 ? sum / n : 0.0;
        double ss = 0;
        for (std::size_t r = 0; r < t.rows(); ++r) {
          if (!t.missing(r, c)) ss += (t.numeric(r, c) - term.mean) * (t.numeric(r, c) - term.mean);
        }
        const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        term.sd = sd > 0 ? sd : 1.0;
      }
      enc.labels_.push_back(name);
    }
    enc.terms_.push_back(std::move(term));
  }
  return enc;
}

DesignMatrix DesignEncoder::encode(const PatientTable& t) const {
  const auto n = static_cast<Eigen::Index>(t.rows());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(labels_.size()));
  Eigen::Index j = 0;
  if (intercept_) x.col(j++).setOnes();
  for (const auto& term : terms_) {
    const auto c = t.schema().require(term.column);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      if (t.missing(r, c)) {
        throw Error(ErrorKind::Data, "missing value in column '" + term.column + "' for patient '" +
                                         t.ids()[r] + "'");
      }
    }
    switch (term.kind) {
      case Term::Numeric:
        for (Eigen::Index i = 0; i < n; ++i) {
          x(i, j) = (t.numeric(static_cast<std::size_t>(i), c) - term.mean) / term.sd;
        }
        ++j;
        break;
      case Term::Binary:
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = t.cell(static_cast<std::size_t>(i), c);
        ++j;
        break;
      case Term::Factor: {
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto label = t.text(static_cast<std::size_t>(i), c);
          auto it = std::find(term.levels.begin(), term.levels.end(), label);
          if (it == term.levels.end()) {
            throw Error(ErrorKind::Data, "unseen level '" + label + "' in column '" + term.column + "'");
          }
          const auto l = it - term.levels.begin();
          if (l > 0) x(i, j + l - 1) = 1.0;
        }
        j += static_cast<Eigen::Index>(term.levels.size()) - 1;
        break;
      }
    }
  }
  return DesignMatrix::from_matrix(std::move(x), labels_, intercept_);
}

double FitResult::se(Eigen::Index j) const { return std::sqrt(std::max(0.0, covariance(j, j))); }

Interval FitResult::interval(Eigen::Index j, double level) const {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "interval level must lie strictly between 0 and 1");
  }
  const double z = normal_quantile(0.5 + level / 2.0);
  return {coefficients(j) - z * se(j), coefficients(j) + z * se(j)};
}

Eigen::Index FitResult::index_of(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorKind::InvalidArgument, "no coefficient '" + label + "'");
  return it - labels.begin();
}

double logit_log_posterior(const DesignMatrix& x, const Eigen::VectorXd& y, const Prior& prior,
                           const Eigen::VectorXd& beta) {
  return log_posterior(x, y, prior_precision(x, prior), beta);
}

Eigen::VectorXd logit_gradient(const DesignMatrix& x, const Eigen::VectorXd& y, const Prior& prior,
                               const Eigen::VectorXd& beta) {
  return gradient(x, y, prior_precision(x, prior), beta);
}

FitResult fit_logit_map(const DesignMatrix& x, const Eigen::VectorXd& y, const Prior& prior,
                        const NewtonOptions& options) {
  if (x.x.rows() != y.size()) throw Error(ErrorKind::InvalidArgument, "design and response lengths differ");
  require_finite(x.x, "design matrix");
  require_finite(y, "response");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw Error(ErrorKind::Data, "logit response must be 0/1");
  }
  const Eigen::VectorXd prec = prior_precision(x, prior);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.x.cols());
  double f = log_posterior(x, y, prec, beta);
  Eigen::VectorXd g = gradient(x, y, prec, beta);
  int it = 0;
  while (g.norm() >= options.gradient_tolerance) {
    if (it == options.max_iterations) {
      throw Error(ErrorKind::NotConverged, "logit fit did not converge in " + std::to_string(it) +
                                               " iterations; gradient norm " + fmt(g.norm(), "%.3e"));
    }
    ++it;
    const Eigen::VectorXd step = negative_hessian(x, prec, beta).llt().solve(g);
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd cand = beta + t * step;
      const double fc = log_posterior(x, y, prec, cand);
      if (std::isfinite(fc) && fc >= f) {
        beta = cand;
        f = fc;
        moved = true;
        break;
      }
    }
    g = gradient(x, y, prec, beta);
    if (!moved && g.norm() >= options.gradient_tolerance) {
      throw Error(ErrorKind::NotConverged, "logit line search stalled; gradient norm " +
                                               fmt(g.norm(), "%.3e"));
    }
  }
  FitResult out;
  out.link = Link::Logit;
  out.labels = x.labels;
  out.has_intercept = x.has_intercept;
  out.coefficients = beta;
  Eigen::MatrixXd cov = negative_hessian(x, prec, beta).llt().solve(
      Eigen::MatrixXd::Identity(beta.size(), beta.size()));
  out.covariance = 0.5 * (cov + cov.transpose());
  out.iterations = it;
  out.gradient_norm = g.norm();
  out.prior = prior;
  return out;
}

FitResult fit_linear_wls(const DesignMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  if (x.x.rows() != y.size() || weights.size() != y.size()) {
    throw Error(ErrorKind::InvalidArgument, "design, response and weight lengths differ");
  }
  require_finite(x.x, "design matrix");
  require_finite(y, "response");
  require_finite(weights, "weights");
  if ((weights.array() < 0).any()) throw Error(ErrorKind::InvalidArgument, "negative weight");
  const auto positive = (weights.array() > 0).count();
  if (positive == 0) throw Error(ErrorKind::InvalidArgument, "no positive weight");
  const Eigen::Index p = x.x.cols();
  const Eigen::VectorXd sw = weights.cwiseSqrt();
  const Eigen::MatrixXd xw = sw.asDiagonal() * x.x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < p) {
    const auto bad = collinear_columns(xw, x.labels);
    std::string names;
    for (const auto& b : bad) names += (names.empty() ? "" : ", ") + b;
    throw Error(ErrorKind::RankDeficient, "weighted design is rank deficient; collinear column(s): " + names);
  }
  const Eigen::Index df = positive - p;
  if (df <= 0) {
    throw Error(ErrorKind::InvalidArgument, "zero residual degrees of freedom (" +
                                                std::to_string(positive) + " weighted rows, " +
                                                std::to_string(p) + " columns)");
  }
  FitResult out;
  out.link = Link::Linear;
  out.labels = x.labels;
  out.has_intercept = x.has_intercept;
  out.coefficients = qr.solve(sw.cwiseProduct(y));
  const Eigen::VectorXd r = y - x.x * out.coefficients;
  out.df = static_cast<int>(df);
  out.sigma2 = r.cwiseProduct(weights).dot(r) / static_cast<double>(df);
  const Eigen::MatrixXd gram = xw.transpose() * xw;
  Eigen::MatrixXd inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  out.covariance = out.sigma2 * 0.5 * (inv + inv.transpose());
  return out;
}

Eigen::VectorXd predict_propensity(const FitResult& fit, const DesignMatrix& x_new) {
  if (fit.link != Link::Logit) {
    throw Error(ErrorKind::InvalidArgument, "propensity prediction needs a logit fit");
  }
  if (x_new.x.cols() != fit.coefficients.size()) {
    throw Error(ErrorKind::InvalidArgument, "design width does not match the fit");
  }
  return inverse_logit(x_new.x * fit.coefficients);
}

Eigen::VectorXd predict_propensity(const FitResult& fit, const PatientTable& rows) {
  if (!fit.encoder) throw Error(ErrorKind::InvalidArgument, "fit carries no covariate encoder");
  return predict_propensity(fit, fit.encoder->encode(rows));
}

LinearPrediction predict_linear(const FitResult& fit, const DesignMatrix& x_new) {
  if (x_new.x.cols() != fit.coefficients.size()) {
    throw Error(ErrorKind::InvalidArgument, "design width does not match the fit");
  }
  LinearPrediction out;
  out.values = x_new.x * fit.coefficients;
  out.out_of_unit_range = static_cast<std::size_t>(
      ((out.values.array() < 0.0) || (out.values.array() > 1.0)).count());
  return out;
}

std::vector<ForestRecord> forest_export(const FitResult& fit, double level) {
  std::vector<ForestRecord> out;
  for (Eigen::Index j = fit.has_intercept ? 1 : 0; j < fit.coefficients.size(); ++j) {
    const auto iv = fit.interval(j, level);
    out.push_back({fit.labels[static_cast<std::size_t>(j)], fit.coefficients(j), iv.low, iv.high});
  }
  if (out.empty()) {
    // Still validate the level for intercept-only fits.
    if (!(level > 0.0 && level < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "interval level must lie strictly between 0 and 1");
    }
  }
  return out;
}

std::string forest_to_json(const std::vector<ForestRecord>& records, double level, int indent) {
  nlohmann::ordered_json doc;
  doc["level"] = level;
  auto& arr = doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    arr.push_back({{"label", r.label}, {"point", r.point}, {"low", r.low}, {"high", r.high}});
  }
  return doc.dump(indent);
}

std::string format_fit_table(const FitResult& fit, double level) {
  std::size_t width = 4;
  for (const auto& l : fit.labels) width = std::max(width, l.size());
  std::string out;
  if (fit.prior) {
    out += "prior: N(0, " + fmt(fit.prior->sd, "%g") + ") coefficients, N(0, " +
           fmt(fit.prior->intercept_sd, "%g") + ") intercept\n";
  }
  out += to_string(fit.link) + " fit, " + fmt(level * 100, "%g") + "% intervals\n";
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  std::string term = "term";
  term.resize(width, ' ');
  out += term + pad("estimate", 11) + pad("se", 11) + pad("low", 11) + pad("high", 11) + "\n";
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    std::string label = fit.labels[static_cast<std::size_t>(j)];
    label.resize(width, ' ');
    const auto iv = fit.interval(j, level);
    out += label + pad(fmt(fit.coefficients(j)), 11) + pad(fmt(fit.se(j)), 11) + pad(fmt(iv.low), 11) +
           pad(fmt(iv.high), 11) + "\n";
  }
  return out;
}

}  // namespace midway
