#include "regadj/estimate.hpp"

#include "linalg.hpp"
#include "regadj/errors.hpp"

#include <algorithm>
#include <cmath>

namespace regadj {
namespace {

std::vector<std::string> labels_of(const std::vector<ColumnRole>& cols,
                                   const std::vector<std::string>& names) {
  std::vector<std::string> out;
  out.reserve(cols.size());
  for (const auto& c : cols) out.push_back(c.label(names));
  return out;
}

void check_dimensions(const ModelSpec& spec, const Dataset& data) {
  if (spec.p() != data.p()) {
    throw ValidationError("model has p=" + std::to_string(spec.p()) +
                          " covariates but the dataset has " +
                          std::to_string(data.p()));
  }
}

bool is_full_model(const ModelSpec& spec) {
  return std::all_of(spec.gamma.begin(), spec.gamma.end(),
                     [](const CoefConstraint& c) { return c.is_free(); }) &&
         std::all_of(spec.delta.begin(), spec.delta.end(),
                     [](const CoefConstraint& c) { return c.is_free(); });
}

bool has_no_interactions(const ModelSpec& spec) {
  return std::all_of(spec.delta.begin(), spec.delta.end(), [](const CoefConstraint& c) {
    return c.is_fixed() && c.value() == 0.0;
  });
}

Eigen::MatrixXd sandwich_from(const Eigen::MatrixXd& z, const Eigen::VectorXd& score_weight,
                              const Eigen::MatrixXd& bread_inverse, SandwichType type) {
  // score_weight_i = w_i * e_i, so the meat is sum (w_i e_i)^2 Z_i Z_i'.
  const Eigen::MatrixXd zs = score_weight.asDiagonal() * z;
  const Eigen::MatrixXd meat = zs.transpose() * zs;
  Eigen::MatrixXd v = bread_inverse * meat * bread_inverse;
  v = 0.5 * (v + v.transpose());
  if (type == SandwichType::HC1) {
    const double n = static_cast<double>(z.rows());
    const double q = static_cast<double>(z.cols());
    v *= n / (n - q);
  }
  return v;
}

Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  return xc.transpose() * xc / static_cast<double>(x.rows());
}

double centering_correction(const Eigen::VectorXd& delta_s,
                            const Eigen::VectorXd& delta_f,
                            const Eigen::MatrixXd& sigma) {
  return delta_s.dot(sigma * (2.0 * delta_f - delta_s));
}

FitResult fit_linear(const ModelSpec& spec, const Dataset& data, bool weighted,
                     const FitOptions& options) {
  data.validate_for_estimation();
  check_dimensions(spec, data);

  const Design design = build_design(spec, data);
  const auto names = data.names();
  const auto labels = labels_of(design.columns, names);
  const Eigen::VectorXd w = weighted ? *data.weights : Eigen::VectorXd();

  const Eigen::VectorXd r = data.y - design.offset;
  const auto ls = detail::solve_least_squares(design.z, r, w, labels);
  const Eigen::VectorXd e = r - design.z * ls.coef;

  FitResult fit;
  fit.spec = spec;
  fit.columns = design.columns;
  fit.covariate_names = names;
  fit.x_center = design.center;
  fit.n_used = data.n();
  fit.theta_hat = Coefficients::from_free(spec, design.columns, ls.coef);
  fit.ate_hat = fit.theta_hat.beta;
  fit.rss = weighted ? e.cwiseAbs2().dot(w) : e.squaredNorm();

  if (!options.compute_vcov) return fit;

  const Eigen::VectorXd score_weight = weighted ? Eigen::VectorXd(w.cwiseProduct(e)) : e;
  fit.vcov = sandwich_from(design.z, score_weight, ls.gram_inverse, options.sandwich);
  double n_var = fit.vcov(1, 1) * data.n();

  if (spec.centering.is_empirical() && !weighted && !has_no_interactions(spec)) {
    Eigen::VectorXd delta_f;
    if (is_full_model(spec)) {
      delta_f = fit.theta_hat.delta;
    } else {
      const ModelSpec full = named_spec(NamedEstimator::ANHECOVA, spec.p());
      delta_f = fit_linear(full, data, false, FitOptions{options.sandwich, false})
                    .theta_hat.delta;
    }
    fit.centering_correction =
        centering_correction(fit.theta_hat.delta, delta_f, empirical_covariance(data.x));
    n_var += fit.centering_correction;
    if (n_var < 0.0) {
      n_var = 0.0;
      fit.variance_clamped = true;
    }
  }
  fit.ate_se = std::sqrt(std::max(n_var, 0.0) / data.n());
  return fit;
}

}  // namespace

Eigen::VectorXd Coefficients::free_vector(const std::vector<ColumnRole>& columns) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& c = columns[k];
    switch (c.kind) {
      case ColumnRole::Kind::Intercept: out[k] = alpha; break;
      case ColumnRole::Kind::Treatment: out[k] = beta; break;
      case ColumnRole::Kind::Main: out[k] = gamma[c.covariate]; break;
      case ColumnRole::Kind::Interaction: out[k] = delta[c.covariate]; break;
    }
  }
  return out;
}

Coefficients Coefficients::from_free(const ModelSpec& spec,
                                     const std::vector<ColumnRole>& columns,
                                     const Eigen::VectorXd& free) {
  Coefficients t;
  t.gamma = Eigen::VectorXd::Zero(spec.p());
  t.delta = Eigen::VectorXd::Zero(spec.p());
  for (int j = 0; j < spec.p(); ++j) {
    if (spec.gamma[j].is_fixed()) t.gamma[j] = spec.gamma[j].value();
    if (spec.delta[j].is_fixed()) t.delta[j] = spec.delta[j].value();
  }
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& c = columns[k];
    switch (c.kind) {
      case ColumnRole::Kind::Intercept: t.alpha = free[k]; break;
      case ColumnRole::Kind::Treatment: t.beta = free[k]; break;
      case ColumnRole::Kind::Main: t.gamma[c.covariate] = free[k]; break;
      case ColumnRole::Kind::Interaction: t.delta[c.covariate] = free[k]; break;
    }
  }
  return t;
}

FitResult fit_ols(const ModelSpec& spec, const Dataset& data, const FitOptions& options) {
  return fit_linear(spec, data, false, options);
}

FitResult fit_weighted(const ModelSpec& spec, const Dataset& data,
                       const FitOptions& options) {
  if (!data.weights) throw ValidationError("fit_weighted requires per-unit weights");
  return fit_linear(spec, data, true, options);
}

Eigen::VectorXd residuals(const Design& design, const Dataset& data,
                          const Eigen::VectorXd& free) {
  return data.y - design.offset - design.z * free;
}

Eigen::MatrixXd sandwich_vcov(const ModelSpec& spec, const Dataset& data,
                              const Coefficients& theta_hat, SandwichType type,
                              bool weighted) {
  data.validate_for_estimation();
  check_dimensions(spec, data);
  if (weighted && !data.weights) {
    throw ValidationError("weighted sandwich requested but the dataset has no weights");
  }
  const Design design = build_design(spec, data);
  const auto labels = labels_of(design.columns, data.names());
  const Eigen::VectorXd e = residuals(design, data, theta_hat.free_vector(design.columns));
  Eigen::MatrixXd gram;
  Eigen::VectorXd score_weight = e;
  if (weighted) {
    gram = design.z.transpose() * data.weights->asDiagonal() * design.z;
    score_weight = data.weights->cwiseProduct(e);
  } else {
    gram = design.z.transpose() * design.z;
  }
  return sandwich_from(design.z, score_weight, detail::spd_inverse(gram, labels), type);
}

CenteredVariance estimate_ate_variance_centered(const ModelSpec& spec,
                                                const Dataset& data,
                                                const FitResult& fit_full,
                                                const FitResult& fit_sub) {
  check_dimensions(spec, data);
  if (fit_full.spec.p() != spec.p() || fit_sub.spec.p() != spec.p()) {
    throw ValidationError("fit dimensions do not match the model");
  }
  if (!is_full_model(fit_full.spec)) {
    throw ValidationError("fit_full must be the fully interacted (ANHECOVA) fit");
  }
  if (fit_sub.vcov.rows() < 2) {
    throw ValidationError("fit_sub carries no covariance matrix");
  }
  CenteredVariance out;
  out.correction = centering_correction(fit_sub.theta_hat.delta, fit_full.theta_hat.delta,
                                        empirical_covariance(data.x));
  out.n_var = data.n() * fit_sub.vcov(1, 1) + out.correction;
  if (out.n_var < 0.0) {
    out.n_var = 0.0;
    out.clamped = true;
  }
  return out;
}

double lemma3_variance(const FitResult& fit, const Dataset& data, double pi) {
  if (!(pi > 0.0 && pi < 1.0)) throw ValidationError("pi must lie in (0, 1)");
  const Design design = build_design(fit.spec, data);
  const Eigen::VectorXd e = residuals(design, data, fit.theta_hat.free_vector(design.columns));
  const Eigen::ArrayXd am = data.a.array() - pi;
  const double num = (am.square() * e.array().square()).mean();
  return num / (pi * pi * (1 - pi) * (1 - pi));
}

}  // namespace regadj
