#include "regadj/estimate.hpp"

#include "linalg.hpp"
#include "regadj/errors.hpp"

#include <cmath>
#include <limits>

namespace regadj {
namespace {

// |coefficient| beyond which the IRLS iterates are treated as diverging.
constexpr double kSeparationBound = 50.0;

}  // namespace

FitResult fit_poisson_glm(const ModelSpec& spec, const Dataset& data,
                          const GlmOptions& options) {
  data.validate_for_estimation();
  if (spec.p() != data.p()) {
    throw ValidationError("model has p=" + std::to_string(spec.p()) +
                          " covariates but the dataset has " + std::to_string(data.p()));
  }
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    const double yi = data.y[i];
    if (yi < 0.0 || yi != std::floor(yi)) {
      throw ValidationError("Poisson outcome must be a nonnegative integer (row " +
                            std::to_string(i + 1) + ")");
    }
  }

  const Design design = build_design(spec, data);
  const auto names = data.names();
  std::vector<std::string> labels;
  for (const auto& c : design.columns) labels.push_back(c.label(names));

  const Eigen::VectorXd& y = data.y;
  Eigen::VectorXd mu = (y.array() + 0.5).matrix();
  Eigen::VectorXd eta = mu.array().log().matrix();
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(design.q(), std::nan(""));
  detail::LeastSquares ls;

  FitResult fit;
  fit.converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Eigen::VectorXd working =
        (eta - design.offset).array() + (y - mu).array() / mu.array();
    ls = detail::solve_least_squares(design.z, working, mu, labels);
    if (!ls.coef.allFinite() || ls.coef.cwiseAbs().maxCoeff() > kSeparationBound) {
      throw ConvergenceError(
          "Poisson IRLS diverged: coefficients are unbounded (separation; e.g. an "
          "arm with all-zero counts)");
    }
    const double change = theta.allFinite()
                              ? (ls.coef - theta).cwiseAbs().maxCoeff()
                              : std::numeric_limits<double>::infinity();
    theta = ls.coef;
    eta = design.z * theta + design.offset;
    mu = eta.array().exp().matrix();
    fit.iterations = it;
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }

  fit.spec = spec;
  fit.columns = design.columns;
  fit.covariate_names = names;
  fit.x_center = design.center;
  fit.n_used = data.n();
  fit.theta_hat = Coefficients::from_free(spec, design.columns, theta);
  fit.ate_hat = fit.theta_hat.beta;
  fit.rss = (y - mu).squaredNorm();

  if (options.compute_vcov) {
    // Robust GLM sandwich: bread Z' diag(mu) Z, meat sum (y - mu)^2 Z Z'.
    const Eigen::MatrixXd bread_inv =
        detail::spd_inverse(design.z.transpose() * mu.asDiagonal() * design.z, labels);
    const Eigen::MatrixXd zs = (y - mu).asDiagonal() * design.z;
    Eigen::MatrixXd v = bread_inv * (zs.transpose() * zs) * bread_inv;
    fit.vcov = 0.5 * (v + v.transpose());
    fit.ate_se = std::sqrt(std::max(fit.vcov(1, 1), 0.0));
  }
  return fit;
}

}  // namespace regadj
