#include <doctest.h>

#include "oracles.hpp"
#include "regadj/errors.hpp"
#include "regadj/estimate.hpp"
#include "regadj/formula.hpp"

#include <boost/rational.hpp>

#include <cmath>
#include <random>

using namespace regadj;

namespace {

using Q = boost::rational<long long>;

Dataset hand_data() {
  Dataset d;
  d.a = (Eigen::VectorXd(6) << 1, 1, 1, 0, 0, 0).finished();
  d.x = (Eigen::MatrixXd(6, 1) << -1, 0, 1, -1, 0, 1).finished();
  d.y = (Eigen::VectorXd(6) << 1, 2, 4, 0, 1, 1).finished();
  return d;
}

// Exact Gauss-Jordan on the normal equations Z'Z t = Z'y.
std::vector<Q> exact_normal_equations(const std::vector<std::vector<Q>>& z,
                                      const std::vector<Q>& y) {
  const std::size_t n = z.size(), q = z[0].size();
  std::vector<std::vector<Q>> m(q, std::vector<Q>(q + 1, Q(0)));
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t c = 0; c < q; ++c) {
      for (std::size_t i = 0; i < n; ++i) m[r][c] += z[i][r] * z[i][c];
    }
    for (std::size_t i = 0; i < n; ++i) m[r][q] += z[i][r] * y[i];
  }
  for (std::size_t c = 0; c < q; ++c) {
    std::size_t piv = c;
    while (m[piv][c].numerator() == 0) ++piv;
    std::swap(m[piv], m[c]);
    const Q d = m[c][c];
    for (auto& v : m[c]) v /= d;
    for (std::size_t r = 0; r < q; ++r) {
      if (r == c || m[r][c].numerator() == 0) continue;
      const Q f = m[r][c];
      for (std::size_t k = 0; k <= q; ++k) m[r][k] -= f * m[c][k];
    }
  }
  std::vector<Q> out(q);
  for (std::size_t r = 0; r < q; ++r) out[r] = m[r][q];
  return out;
}

double to_double(const Q& q) { return boost::rational_cast<double>(q); }

}  // namespace

TEST_CASE("hand data: ANHECOVA matches the exact rational solve") {
  const Dataset d = hand_data();
  const int a[] = {1, 1, 1, 0, 0, 0}, x[] = {-1, 0, 1, -1, 0, 1}, y[] = {1, 2, 4, 0, 1, 1};
  std::vector<std::vector<Q>> z;
  std::vector<Q> yy;
  for (int i = 0; i < 6; ++i) {
    z.push_back({Q(1), Q(a[i]), Q(x[i]), Q(a[i] * x[i])});
    yy.push_back(Q(y[i]));
  }
  const auto exact = exact_normal_equations(z, yy);
  CHECK((exact[1] - Q(5, 3)).numerator() == 0);

  const FitResult fit = fit_ols(parse_formula("1 + A + X + A:X", d.names()), d);
  CHECK(fit.ate_hat == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
  CHECK(fit.theta_hat.alpha == doctest::Approx(to_double(exact[0])).epsilon(1e-14));
  CHECK(fit.theta_hat.gamma[0] == doctest::Approx(to_double(exact[2])).epsilon(1e-14));
  CHECK(fit.theta_hat.delta[0] == doctest::Approx(to_double(exact[3])).epsilon(1e-14));
}

TEST_CASE("hand data: ANOVA HC0 variance is 16/27") {
  const Dataset d = hand_data();
  const FitResult fit = fit_ols(named_spec(NamedEstimator::ANOVA, 1), d);
  CHECK(fit.ate_hat == doctest::Approx(5.0 / 3.0));
  CHECK(fit.vcov(1, 1) == doctest::Approx(16.0 / 27.0).epsilon(1e-13));
  CHECK(fit.ate_se == doctest::Approx(std::sqrt(16.0 / 27.0)).epsilon(1e-13));
  // The known-pi formula at pi = n1/n reduces to n times the HC0 variance.
  CHECK(lemma3_variance(fit, d, 0.5) == doctest::Approx(32.0 / 9.0).epsilon(1e-13));
}

TEST_CASE("ANOVA without covariates is the difference in means") {
  Dataset d;
  d.a = (Eigen::VectorXd(4) << 1, 1, 0, 0).finished();
  d.x = Eigen::MatrixXd(4, 0);
  d.y = (Eigen::VectorXd(4) << 3, 5, 1, 3).finished();
  const FitResult fit = fit_ols(ModelSpec({}, {}), d);
  CHECK(fit.ate_hat == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("constrained OLS equals the KKT oracle on random instances") {
  Rng rng(20240517);
  for (int t = 0; t < 200; ++t) {
    const auto inst = oracles::random_instance(rng);
    const FitResult fit = fit_ols(inst.spec, inst.data, FitOptions{SandwichType::HC0, false});
    const Eigen::VectorXd full = oracles::kkt_constrained_ols(inst.spec, inst.data);
    INFO("instance " << t << " formula " << format_formula(inst.spec));
    REQUIRE(std::abs(fit.ate_hat - full[1]) < 1e-10);
    REQUIRE(std::abs(fit.theta_hat.alpha - full[0]) < 1e-10);
    const int p = inst.spec.p();
    for (int j = 0; j < p; ++j) {
      REQUIRE(std::abs(fit.theta_hat.gamma[j] - full[2 + j]) < 1e-10);
      REQUIRE(std::abs(fit.theta_hat.delta[j] - full[2 + p + j]) < 1e-10);
    }
  }
}

TEST_CASE("DiD equals the difference in mean gain scores") {
  Rng rng(5);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const int n = 20 + t;
    Dataset d;
    d.a.resize(n);
    d.x.resize(n, 1);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
      d.a[i] = i % 3 == 0 ? 1.0 : 0.0;
      d.x(i, 0) = 2.0 + nd(rng);
      d.y[i] = 1.0 + 0.8 * d.x(i, 0) + d.a[i] + nd(rng);
    }
    for (const Centering& c : {Centering::empirical(), Centering::known_zero(1)}) {
      const FitResult fit = fit_ols(named_spec(NamedEstimator::DiD, 1, c), d);
      CHECK(std::abs(fit.ate_hat - oracles::gain_score_difference(d)) < 1e-10);
    }
  }
}

TEST_CASE("empirical centering identity beta_tilde = beta_hat + delta_hat' xbar") {
  Rng rng(77);
  for (int t = 0; t < 30; ++t) {
    const auto inst = oracles::random_instance(rng);
    const int p = inst.spec.p();
    const FitResult raw = fit_ols(inst.spec.with_centering(Centering::known_zero(p)), inst.data);
    const FitResult cen = fit_ols(inst.spec.with_centering(Centering::empirical()), inst.data);
    const Eigen::VectorXd xbar = inst.data.x.colwise().mean().transpose();
    CHECK(cen.ate_hat == doctest::Approx(raw.ate_hat + raw.theta_hat.delta.dot(xbar)));
  }
}

TEST_CASE("empirical centering is invariant to covariate shifts") {
  Rng rng(78);
  for (int t = 0; t < 30; ++t) {
    auto inst = oracles::random_instance(rng);
    const ModelSpec spec = inst.spec.with_centering(Centering::empirical());
    const FitResult before = fit_ols(spec, inst.data);
    inst.data.x.array() += 3.5;
    const FitResult after = fit_ols(spec, inst.data);
    CHECK(after.ate_hat == doctest::Approx(before.ate_hat).epsilon(1e-9));
    CHECK(after.ate_se == doctest::Approx(before.ate_se).epsilon(1e-9));
  }
}

TEST_CASE("nesting never increases the residual sum of squares") {
  Rng rng(79);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracles::random_instance(rng);
    const int p = inst.spec.p();
    const FitResult full = fit_ols(named_spec(NamedEstimator::ANHECOVA, p), inst.data);
    const FitResult sub = fit_ols(inst.spec, inst.data);
    CHECK(full.rss <= sub.rss + 1e-9 * (1.0 + sub.rss));
  }
}

TEST_CASE("sandwich variants") {
  Rng rng(80);
  const auto inst = oracles::random_instance(rng);
  const auto spec = inst.spec.with_centering(Centering::known_zero(inst.spec.p()));
  const FitResult h0 = fit_ols(spec, inst.data);
  const FitResult h1 = fit_ols(spec, inst.data, FitOptions{SandwichType::HC1, true});
  const double n = inst.data.n(), q = spec.free_columns();
  CHECK(h1.vcov.isApprox(h0.vcov * n / (n - q), 1e-12));
  const Eigen::MatrixXd again = sandwich_vcov(spec, inst.data, h0.theta_hat);
  CHECK(again.isApprox(h0.vcov, 1e-10));
  CHECK(h0.ate_se == doctest::Approx(std::sqrt(h0.vcov(1, 1))));
}

TEST_CASE("centered standard error carries the plug-in correction") {
  Rng rng(81);
  for (int t = 0; t < 20; ++t) {
    const auto inst = oracles::random_instance(rng);
    const int p = inst.spec.p();
    const FitResult full = fit_ols(named_spec(NamedEstimator::ANHECOVA, p), inst.data);
    const ModelSpec spec = inst.spec.with_centering(Centering::empirical());
    const FitResult sub = fit_ols(spec, inst.data);
    const CenteredVariance cv = estimate_ate_variance_centered(spec, inst.data, full, sub);
    CHECK(sub.ate_se * sub.ate_se * inst.data.n() == doctest::Approx(cv.n_var).epsilon(1e-9));
    const Eigen::MatrixXd xc = inst.data.x.rowwise() - inst.data.x.colwise().mean();
    const Eigen::MatrixXd s = xc.transpose() * xc / inst.data.n();
    const Eigen::VectorXd ds = sub.theta_hat.delta, df = full.theta_hat.delta;
    CHECK(cv.correction == doctest::Approx(ds.dot(s * (2 * df - ds))).epsilon(1e-9));
  }
  const FitResult anova = fit_ols(named_spec(NamedEstimator::ANOVA, 1), hand_data());
  CHECK(anova.centering_correction == 0.0);
}

TEST_CASE("weighted least squares") {
  Rng rng(82);
  auto inst = oracles::random_instance(rng);
  const auto spec = inst.spec.with_centering(Centering::known_zero(inst.spec.p()));
  inst.data.weights = Eigen::VectorXd::Ones(inst.data.n());
  const FitResult w = fit_weighted(spec, inst.data);
  const FitResult o = fit_ols(spec, inst.data);
  CHECK(w.ate_hat == doctest::Approx(o.ate_hat).epsilon(1e-12));
  CHECK(w.vcov.isApprox(o.vcov, 1e-10));

  // Weighted ANOVA is the difference of weighted arm means.
  Dataset d = hand_data();
  d.weights = (Eigen::VectorXd(6) << 1, 2, 3, 1, 1, 2).finished();
  const FitResult wa = fit_weighted(named_spec(NamedEstimator::ANOVA, 1), d);
  const double m1 = (1 * 1 + 2 * 2 + 3 * 4) / 6.0, m0 = (0 + 1 + 2) / 4.0;
  CHECK(wa.ate_hat == doctest::Approx(m1 - m0).epsilon(1e-13));
  d.weights.reset();
  CHECK_THROWS_AS(fit_weighted(named_spec(NamedEstimator::ANOVA, 1), d), ValidationError);
}

TEST_CASE("singular designs name the offending columns") {
  Dataset d = hand_data();
  d.x.conservativeResize(6, 2);
  d.x.col(1) = 2.0 * d.x.col(0);
  try {
    fit_ols(named_spec(NamedEstimator::ANCOVA, 2), d);
    FAIL("expected SingularDesignError");
  } catch (const SingularDesignError& e) {
    const auto& cols = e.columns();
    CHECK(std::find(cols.begin(), cols.end(), "X1") != cols.end());
    CHECK(std::find(cols.begin(), cols.end(), "X2") != cols.end());
  }
  // An interaction with a covariate constant within the treated arm.
  Dataset c = hand_data();
  c.x(0, 0) = c.x(1, 0) = c.x(2, 0) = 0.0;
  CHECK_THROWS_AS(fit_ols(interactions_only_spec(1), c), SingularDesignError);
}

TEST_CASE("dimension mismatch is a validation error") {
  CHECK_THROWS_AS(fit_ols(named_spec(NamedEstimator::ANCOVA, 2), hand_data()), ValidationError);
}

TEST_CASE("Poisson GLM") {
  SUBCASE("ANOVA reduces to log ratio of arm means") {
    Dataset d = hand_data();
    d.y = (Eigen::VectorXd(6) << 3, 5, 7, 1, 2, 3).finished();
    const FitResult f = fit_poisson_glm(named_spec(NamedEstimator::ANOVA, 1), d);
    CHECK(f.converged);
    CHECK(f.ate_hat == doctest::Approx(std::log(5.0 / 2.0)).epsilon(1e-10));
    CHECK(f.theta_hat.alpha == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  }
  SUBCASE("recovers a log-linear truth") {
    Rng rng(3);
    std::normal_distribution<double> nd;
    const int n = 4000;
    Dataset d;
    d.a.resize(n);
    d.x.resize(n, 1);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
      d.a[i] = i % 2;
      d.x(i, 0) = nd(rng);
      std::poisson_distribution<int> pd(std::exp(0.5 + 0.7 * d.a[i] + 0.3 * d.x(i, 0)));
      d.y[i] = pd(rng);
    }
    const FitResult f = fit_poisson_glm(named_spec(NamedEstimator::ANCOVA, 1), d);
    CHECK(f.ate_hat == doctest::Approx(0.7).epsilon(0.05));
    CHECK(f.ate_se > 0.0);
    CHECK(std::abs(f.ate_hat - 0.7) < 4 * f.ate_se);
  }
  SUBCASE("separation and invalid outcomes") {
    Dataset d = hand_data();
    d.y = (Eigen::VectorXd(6) << 3, 5, 7, 0, 0, 0).finished();
    CHECK_THROWS_AS(fit_poisson_glm(named_spec(NamedEstimator::ANOVA, 1), d), ConvergenceError);
    d.y[3] = 0.5;
    CHECK_THROWS_AS(fit_poisson_glm(named_spec(NamedEstimator::ANOVA, 1), d), ValidationError);
  }
}
