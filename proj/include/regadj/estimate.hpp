#pragma once

#include "regadj/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace regadj {

// (alpha, beta, gamma, delta); gamma and delta have length p with fixed
// entries echoed at their constraint values.
struct Coefficients {
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::VectorXd gamma;
  Eigen::VectorXd delta;

  // The free entries in design-column order.
  Eigen::VectorXd free_vector(const std::vector<ColumnRole>& columns) const;
  static Coefficients from_free(const ModelSpec& spec,
                                const std::vector<ColumnRole>& columns,
                                const Eigen::VectorXd& free);
};

enum class SandwichType { HC0, HC1 };

struct FitOptions {
  SandwichType sandwich = SandwichType::HC0;
  // Skip the covariance computation (Monte Carlo loops that only need the
  // point estimate).
  bool compute_vcov = true;
};

struct FitResult {
  ModelSpec spec;
  Coefficients theta_hat;
  double ate_hat = 0.0;
  Eigen::MatrixXd vcov;  // q x q, free coefficients in design-column order
  double ate_se = 0.0;
  int n_used = 0;
  bool converged = true;
  int iterations = 0;  // IRLS only
  double rss = 0.0;    // (weighted) residual sum of squares
  std::vector<ColumnRole> columns;
  Eigen::VectorXd x_center;
  std::vector<std::string> covariate_names;

  // Centered fits: n * var(beta_tilde) before/after the centering correction
  // and whether it was clamped at zero.
  double centering_correction = 0.0;
  bool variance_clamped = false;
};

// Constrained OLS of Y on [1, A, X, A X] with Gamma/Delta constraints.
// Under Empirical centering ate_hat is beta_tilde and ate_se includes the
// plug-in centering correction. Dataset weights are ignored.
FitResult fit_ols(const ModelSpec& spec, const Dataset& data,
                  const FitOptions& options = {});

// Weighted least squares with data.weights (required). The sandwich uses the
// weighted bread and meat; no centering correction is applied.
FitResult fit_weighted(const ModelSpec& spec, const Dataset& data,
                       const FitOptions& options = {});

// Heteroscedasticity-robust covariance of the free coefficients evaluated at
// theta_hat: (Z'WZ)^-1 (sum w_i^2 e_i^2 Z_i Z_i') (Z'WZ)^-1.
Eigen::MatrixXd sandwich_vcov(const ModelSpec& spec, const Dataset& data,
                              const Coefficients& theta_hat,
                              SandwichType type = SandwichType::HC0,
                              bool weighted = false);

struct CenteredVariance {
  double n_var = 0.0;         // n * var(beta_tilde), clamped at zero
  double correction = 0.0;    // delta_s' Sigma (2 delta_f - delta_s)
  bool clamped = false;
};

// n * var(beta_tilde) = n * var(beta_hat) + delta_s' S (2 delta_f - delta_s)
// with S the empirical covariance of X and var(beta_hat) taken from
// fit_sub.vcov.
CenteredVariance estimate_ate_variance_centered(const ModelSpec& spec,
                                                const Dataset& data,
                                                const FitResult& fit_full,
                                                const FitResult& fit_sub);

// Plug-in of the known-pi variance formula
// E[(A - pi)^2 e^2] / (pi^2 (1 - pi)^2) evaluated at the fit residuals.
double lemma3_variance(const FitResult& fit, const Dataset& data, double pi);

struct GlmOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
  bool compute_vcov = true;
};

// Poisson regression with log link fitted by IRLS on the same design as
// build_design (fixed coefficients enter the linear predictor as an offset).
// ate_hat is the raw treatment coefficient.
FitResult fit_poisson_glm(const ModelSpec& spec, const Dataset& data,
                          const GlmOptions& options = {});

// Residuals y - offset - Z theta of a linear fit.
Eigen::VectorXd residuals(const Design& design, const Dataset& data,
                          const Eigen::VectorXd& free);

}  // namespace regadj
