#pragma once

// Internal least-squares kernel shared by the linear and Poisson fits.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace regadj::detail {

// Ratio below which the smallest singular value counts as zero.
inline constexpr double kSingularTolerance = 1e-10;

struct LeastSquares {
  Eigen::VectorXd coef;
  Eigen::MatrixXd gram_inverse;  // (Z' W Z)^-1
};

// Minimizes sum_i w_i (r_i - Z_i' b)^2. `weights` may be empty for unit
// weights. Throws SingularDesignError naming the columns that span the
// near-null direction.
LeastSquares solve_least_squares(const Eigen::MatrixXd& z,
                                 const Eigen::VectorXd& r,
                                 const Eigen::VectorXd& weights,
                                 const std::vector<std::string>& labels);

// Inverse of a symmetric positive definite matrix with the same singularity
// rule (applied to the square roots of its eigenvalues).
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& g,
                            const std::vector<std::string>& labels);

}  // namespace regadj::detail
