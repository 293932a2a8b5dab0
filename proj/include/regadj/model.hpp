#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace regadj {

// Constraint on a single main-effect or interaction coefficient: either the
// whole real line or a singleton {value}.
class CoefConstraint {
 public:
  static CoefConstraint free() { return CoefConstraint(); }
  static CoefConstraint fixed(double value);

  bool is_free() const noexcept { return !fixed_.has_value(); }
  bool is_fixed() const noexcept { return fixed_.has_value(); }
  // Throws std::logic_error on a free constraint.
  double value() const;

  // Set containment: R contains everything, {c} contains only {c}.
  bool contains(const CoefConstraint& other) const noexcept;

  bool operator==(const CoefConstraint& other) const noexcept = default;

 private:
  CoefConstraint() = default;
  explicit CoefConstraint(double v) : fixed_(v) {}

  std::optional<double> fixed_;
};

// How covariates are centered before the regression is assembled.
struct Centering {
  enum class Kind { KnownMean, Empirical };

  Kind kind = Kind::Empirical;
  Eigen::VectorXd mean;  // only meaningful for KnownMean

  static Centering empirical() { return Centering{}; }
  static Centering known_mean(Eigen::VectorXd mu) {
    return Centering{Kind::KnownMean, std::move(mu)};
  }
  // Covariates are used as given (known mean of zero).
  static Centering known_zero(int p) {
    return known_mean(Eigen::VectorXd::Zero(p));
  }

  bool is_empirical() const noexcept { return kind == Kind::Empirical; }
};

// The pair (Gamma, Delta) of per-covariate coefficient constraints. The
// intercept and the treatment coefficient are always free.
struct ModelSpec {
  std::vector<CoefConstraint> gamma;
  std::vector<CoefConstraint> delta;
  Centering centering;

  ModelSpec() = default;
  ModelSpec(std::vector<CoefConstraint> g, std::vector<CoefConstraint> d,
            Centering c = Centering::empirical());

  int p() const noexcept { return static_cast<int>(gamma.size()); }

  // 0-based indices of the free main effects / interactions.
  std::vector<int> unrestricted_gamma() const;
  std::vector<int> unrestricted_delta() const;

  // Number of free regression columns: 2 + |U(Gamma)| + |U(Delta)|.
  int free_columns() const;

  // Same constraint sets (centering is not compared).
  bool same_constraints(const ModelSpec& other) const noexcept {
    return gamma == other.gamma && delta == other.delta;
  }

  ModelSpec with_centering(Centering c) const;

  // Throws ValidationError when the invariants are broken.
  void validate() const;
};

enum class NamedEstimator { ANOVA, ANCOVA, ANHECOVA, DiD, LDV };

NamedEstimator parse_named_estimator(std::string_view name);
std::string to_string(NamedEstimator e);

// Standard members of the estimator class. DiD and LDV treat the first
// covariate as the baseline outcome.
ModelSpec named_spec(NamedEstimator e, int p,
                     Centering centering = Centering::empirical());

// Interactions only: Gamma = {0}^p, Delta = R^p.
ModelSpec interactions_only_spec(int p,
                                 Centering centering = Centering::empirical());

// (A, X, Y) records with optional per-unit weights.
struct Dataset {
  Eigen::VectorXd a;  // 0/1
  Eigen::MatrixXd x;  // n x p
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> weights;
  std::vector<std::string> covariate_names;  // empty means X1..Xp

  int n() const noexcept { return static_cast<int>(y.size()); }
  int p() const noexcept { return static_cast<int>(x.cols()); }
  int n_treated() const;

  std::vector<std::string> names() const;

  // Structural checks: shapes, binary A, finite values, positive weights.
  void validate() const;
  // validate() plus n >= p + 2 and both arms nonempty.
  void validate_for_estimation() const;
};

std::vector<std::string> default_covariate_names(int p);

// Role of each column in the assembled design.
struct ColumnRole {
  enum class Kind { Intercept, Treatment, Main, Interaction };
  Kind kind;
  int covariate = -1;  // 0-based, for Main / Interaction

  std::string label(const std::vector<std::string>& names) const;
  bool operator==(const ColumnRole&) const noexcept = default;
};

struct Design {
  Eigen::MatrixXd z;       // n x q free columns
  Eigen::VectorXd offset;  // fixed-coefficient contribution per unit
  std::vector<ColumnRole> columns;
  Eigen::VectorXd center;  // vector subtracted from every X_i
  Eigen::MatrixXd xc;      // centered covariates, n x p

  int q() const noexcept { return static_cast<int>(z.cols()); }
  // Position of the column with this role, or -1.
  int column_of(ColumnRole::Kind kind, int covariate = -1) const;
};

// Columns are [1, A, X_j for j in U(Gamma), A*X_j for j in U(Delta)]; the
// fixed coefficients go into the offset.
Design build_design(const ModelSpec& spec, const Dataset& data);

// The column layout alone, without touching data.
std::vector<ColumnRole> design_columns(const ModelSpec& spec);

}  // namespace regadj
