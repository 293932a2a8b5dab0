#include "regadj/model.hpp"

#include "regadj/errors.hpp"

#include <cmath>

namespace regadj {

CoefConstraint CoefConstraint::fixed(double value) {
  if (!std::isfinite(value)) {
    throw ValidationError("fixed coefficient value must be finite");
  }
  return CoefConstraint(value);
}

double CoefConstraint::value() const {
  if (!fixed_) throw std::logic_error("value() called on a free constraint");
  return *fixed_;
}

bool CoefConstraint::contains(const CoefConstraint& other) const noexcept {
  if (is_free()) return true;
  return other.is_fixed() && *other.fixed_ == *fixed_;
}

ModelSpec::ModelSpec(std::vector<CoefConstraint> g,
                     std::vector<CoefConstraint> d, Centering c)
    : gamma(std::move(g)), delta(std::move(d)), centering(std::move(c)) {
  validate();
}

std::vector<int> ModelSpec::unrestricted_gamma() const {
  std::vector<int> out;
  for (int j = 0; j < p(); ++j)
    if (gamma[j].is_free()) out.push_back(j);
  return out;
}

std::vector<int> ModelSpec::unrestricted_delta() const {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(delta.size()); ++j)
    if (delta[j].is_free()) out.push_back(j);
  return out;
}

int ModelSpec::free_columns() const {
  return 2 + static_cast<int>(unrestricted_gamma().size()) +
         static_cast<int>(unrestricted_delta().size());
}

ModelSpec ModelSpec::with_centering(Centering c) const {
  ModelSpec out = *this;
  out.centering = std::move(c);
  out.validate();
  return out;
}

void ModelSpec::validate() const {
  if (gamma.size() != delta.size()) {
    throw ValidationError("gamma and delta constraint lists differ in length");
  }
  if (centering.kind == Centering::Kind::KnownMean) {
    if (centering.mean.size() != p()) {
      throw ValidationError("known covariate mean has length " +
                            std::to_string(centering.mean.size()) +
                            ", expected " + std::to_string(p()));
    }
    if (!centering.mean.allFinite()) {
      throw ValidationError("known covariate mean must be finite");
    }
  }
}

NamedEstimator parse_named_estimator(std::string_view name) {
  if (name == "ANOVA" || name == "anova") return NamedEstimator::ANOVA;
  if (name == "ANCOVA" || name == "ancova") return NamedEstimator::ANCOVA;
  if (name == "ANHECOVA" || name == "anhecova") return NamedEstimator::ANHECOVA;
  if (name == "DiD" || name == "did" || name == "DID") return NamedEstimator::DiD;
  if (name == "LDV" || name == "ldv") return NamedEstimator::LDV;
  throw ValidationError("unknown estimator name '" + std::string(name) + "'");
}

std::string to_string(NamedEstimator e) {
  switch (e) {
    case NamedEstimator::ANOVA: return "ANOVA";
    case NamedEstimator::ANCOVA: return "ANCOVA";
    case NamedEstimator::ANHECOVA: return "ANHECOVA";
    case NamedEstimator::DiD: return "DiD";
    case NamedEstimator::LDV: return "LDV";
  }
  return "?";
}

ModelSpec named_spec(NamedEstimator e, int p, Centering centering) {
  if (p < 1) throw ValidationError("named_spec requires p >= 1");
  const auto zero = CoefConstraint::fixed(0.0);
  const auto free = CoefConstraint::free();
  std::vector<CoefConstraint> g(p, zero), d(p, zero);
  switch (e) {
    case NamedEstimator::ANOVA:
      break;
    case NamedEstimator::ANCOVA:
      g.assign(p, free);
      break;
    case NamedEstimator::ANHECOVA:
      g.assign(p, free);
      d.assign(p, free);
      break;
    case NamedEstimator::DiD:
      g.assign(p, free);
      d.assign(p, free);
      g[0] = CoefConstraint::fixed(1.0);
      d[0] = zero;
      break;
    case NamedEstimator::LDV:
      g.assign(p, free);
      d.assign(p, free);
      d[0] = zero;
      break;
  }
  return ModelSpec(std::move(g), std::move(d), std::move(centering));
}

ModelSpec interactions_only_spec(int p, Centering centering) {
  if (p < 1) throw ValidationError("interactions_only_spec requires p >= 1");
  return ModelSpec(std::vector<CoefConstraint>(p, CoefConstraint::fixed(0.0)),
                   std::vector<CoefConstraint>(p, CoefConstraint::free()),
                   std::move(centering));
}

int Dataset::n_treated() const {
  int k = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) k += a[i] == 1.0 ? 1 : 0;
  return k;
}

std::vector<std::string> default_covariate_names(int p) {
  std::vector<std::string> out;
  out.reserve(p);
  for (int j = 1; j <= p; ++j) out.push_back("X" + std::to_string(j));
  return out;
}

std::vector<std::string> Dataset::names() const {
  if (covariate_names.empty()) return default_covariate_names(p());
  return covariate_names;
}

void Dataset::validate() const {
  const auto n_rows = y.size();
  if (a.size() != n_rows || x.rows() != n_rows) {
    throw ValidationError("dataset dimension mismatch: |a|=" +
                          std::to_string(a.size()) + ", rows(x)=" +
                          std::to_string(x.rows()) + ", |y|=" +
                          std::to_string(n_rows));
  }
  if (!covariate_names.empty() &&
      static_cast<Eigen::Index>(covariate_names.size()) != x.cols()) {
    throw ValidationError("covariate_names does not match the number of columns");
  }
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    if (a[i] != 0.0 && a[i] != 1.0) {
      throw ValidationError("treatment indicator must be 0 or 1 (row " +
                            std::to_string(i + 1) + ")");
    }
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw ValidationError("dataset contains non-finite covariate or outcome values");
  }
  if (weights) {
    if (weights->size() != n_rows) {
      throw ValidationError("weights length does not match the number of rows");
    }
    for (Eigen::Index i = 0; i < n_rows; ++i) {
      const double w = (*weights)[i];
      if (!std::isfinite(w) || w <= 0.0) {
        throw ValidationError("weights must be strictly positive and finite (row " +
                              std::to_string(i + 1) + ")");
      }
    }
  }
}

void Dataset::validate_for_estimation() const {
  validate();
  if (n() < p() + 2) {
    throw ValidationError("need at least p + 2 = " + std::to_string(p() + 2) +
                          " rows, got " + std::to_string(n()));
  }
  const int n1 = n_treated();
  if (n1 == 0 || n1 == n()) {
    throw ValidationError("both treatment arms must be nonempty");
  }
}

std::string ColumnRole::label(const std::vector<std::string>& names) const {
  auto name = [&](int j) {
    return j >= 0 && j < static_cast<int>(names.size()) ? names[j]
                                                        : "X" + std::to_string(j + 1);
  };
  switch (kind) {
    case Kind::Intercept: return "1";
    case Kind::Treatment: return "A";
    case Kind::Main: return name(covariate);
    case Kind::Interaction: return "A:" + name(covariate);
  }
  return "?";
}

int Design::column_of(ColumnRole::Kind kind, int covariate) const {
  for (int k = 0; k < q(); ++k) {
    if (columns[k].kind == kind &&
        (covariate < 0 || columns[k].covariate == covariate)) {
      return k;
    }
  }
  return -1;
}

std::vector<ColumnRole> design_columns(const ModelSpec& spec) {
  std::vector<ColumnRole> cols;
  cols.push_back({ColumnRole::Kind::Intercept});
  cols.push_back({ColumnRole::Kind::Treatment});
  for (int j : spec.unrestricted_gamma()) cols.push_back({ColumnRole::Kind::Main, j});
  for (int j : spec.unrestricted_delta())
    cols.push_back({ColumnRole::Kind::Interaction, j});
  return cols;
}

Design build_design(const ModelSpec& spec, const Dataset& data) {
  spec.validate();
  data.validate();
  if (spec.p() != data.p()) {
    throw ValidationError("model has p=" + std::to_string(spec.p()) +
                          " covariates but the dataset has " +
                          std::to_string(data.p()));
  }
  const int n = data.n();
  const int p = data.p();

  Design d;
  d.center = spec.centering.is_empirical()
                 ? Eigen::VectorXd(data.x.colwise().mean().transpose())
                 : spec.centering.mean;
  if (n == 0) d.center = Eigen::VectorXd::Zero(p);
  d.xc = data.x.rowwise() - d.center.transpose();
  d.columns = design_columns(spec);

  d.z.resize(n, static_cast<Eigen::Index>(d.columns.size()));
  for (int k = 0; k < d.q(); ++k) {
    const auto& c = d.columns[k];
    switch (c.kind) {
      case ColumnRole::Kind::Intercept: d.z.col(k).setOnes(); break;
      case ColumnRole::Kind::Treatment: d.z.col(k) = data.a; break;
      case ColumnRole::Kind::Main: d.z.col(k) = d.xc.col(c.covariate); break;
      case ColumnRole::Kind::Interaction:
        d.z.col(k) = data.a.cwiseProduct(d.xc.col(c.covariate));
        break;
    }
  }

  Eigen::VectorXd g_fixed = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd d_fixed = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < p; ++j) {
    if (spec.gamma[j].is_fixed()) g_fixed[j] = spec.gamma[j].value();
    if (spec.delta[j].is_fixed()) d_fixed[j] = spec.delta[j].value();
  }
  d.offset = d.xc * g_fixed + data.a.cwiseProduct(d.xc * d_fixed);
  return d;
}

}  // namespace regadj
