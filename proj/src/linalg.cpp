#include "linalg.hpp"

#include "regadj/errors.hpp"

#include <cmath>

namespace regadj::detail {
namespace {

[[noreturn]] void throw_singular(const Eigen::VectorXd& null_direction,
                                 double ratio,
                                 const std::vector<std::string>& labels) {
  std::vector<std::string> involved;
  const double scale = null_direction.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < null_direction.size(); ++k) {
    if (std::abs(null_direction[k]) > 1e-3 * scale) {
      involved.push_back(k < static_cast<Eigen::Index>(labels.size())
                             ? labels[k]
                             : "column " + std::to_string(k + 1));
    }
  }
  std::string msg = "singular design: columns {";
  for (std::size_t i = 0; i < involved.size(); ++i) {
    msg += (i ? ", " : "") + involved[i];
  }
  msg += "} are collinear (singular value ratio " + std::to_string(ratio) + ")";
  throw SingularDesignError(msg, std::move(involved));
}

}  // namespace

LeastSquares solve_least_squares(const Eigen::MatrixXd& z,
                                 const Eigen::VectorXd& r,
                                 const Eigen::VectorXd& weights,
                                 const std::vector<std::string>& labels) {
  const Eigen::Index q = z.cols();
  Eigen::MatrixXd zw;
  Eigen::VectorXd rw;
  if (weights.size() == 0) {
    zw = z;
    rw = r;
  } else {
    const Eigen::VectorXd sw = weights.cwiseSqrt();
    zw = sw.asDiagonal() * z;
    rw = sw.cwiseProduct(r);
  }
  if (z.rows() < q) {
    throw SingularDesignError("fewer rows than free columns", labels);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(
      zw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  const double smin = s.size() ? s[s.size() - 1] : 0.0;
  if (!(smax > 0.0) || smin < kSingularTolerance * smax) {
    throw_singular(svd.matrixV().col(q - 1), smax > 0 ? smin / smax : 0.0, labels);
  }

  LeastSquares out;
  const Eigen::VectorXd inv_s = s.cwiseInverse();
  out.coef = svd.matrixV() * (inv_s.asDiagonal() * (svd.matrixU().transpose() * rw));
  out.gram_inverse = svd.matrixV() * inv_s.cwiseAbs2().asDiagonal() *
                     svd.matrixV().transpose();
  return out;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& g,
                            const std::vector<std::string>& labels) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const Eigen::VectorXd& ev = es.eigenvalues();  // ascending
  const double emax = ev[ev.size() - 1];
  const double emin = ev[0];
  if (!(emax > 0.0) || emin <= 0.0 ||
      std::sqrt(emin / emax) < kSingularTolerance) {
    throw_singular(es.eigenvectors().col(0),
                   emax > 0 && emin > 0 ? std::sqrt(emin / emax) : 0.0, labels);
  }
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace regadj::detail
