#include <doctest.h>

#include "regadj/errors.hpp"
#include "regadj/formula.hpp"
#include "regadj/model.hpp"
#include "regadj/rng.hpp"

#include <random>

using namespace regadj;

namespace {

Dataset hand_data() {
  Dataset d;
  d.a = (Eigen::VectorXd(6) << 1, 1, 1, 0, 0, 0).finished();
  d.x = (Eigen::MatrixXd(6, 1) << -1, 0, 1, -1, 0, 1).finished();
  d.y = (Eigen::VectorXd(6) << 1, 2, 4, 0, 1, 1).finished();
  return d;
}

const std::vector<std::string> kTwo = {"X1", "X2"};

}  // namespace

TEST_CASE("coefficient constraints") {
  const auto f = CoefConstraint::free();
  const auto z = CoefConstraint::fixed(0.0);
  const auto one = CoefConstraint::fixed(1.0);
  CHECK(f.is_free());
  CHECK(z.is_fixed());
  CHECK(one.value() == 1.0);
  CHECK_THROWS_AS(f.value(), std::logic_error);
  CHECK_THROWS_AS(CoefConstraint::fixed(std::nan("")), ValidationError);
  CHECK(f.contains(z));
  CHECK(f.contains(f));
  CHECK(z.contains(z));
  CHECK_FALSE(z.contains(one));
  CHECK_FALSE(z.contains(f));
}

TEST_CASE("named estimators") {
  const auto anova = named_spec(NamedEstimator::ANOVA, 2);
  CHECK(anova.free_columns() == 2);
  CHECK(anova.unrestricted_gamma().empty());
  const auto ancova = named_spec(NamedEstimator::ANCOVA, 2);
  CHECK(ancova.unrestricted_gamma() == std::vector<int>{0, 1});
  CHECK(ancova.unrestricted_delta().empty());
  const auto full = named_spec(NamedEstimator::ANHECOVA, 2);
  CHECK(full.free_columns() == 6);
  const auto did = named_spec(NamedEstimator::DiD, 2);
  CHECK(did.gamma[0] == CoefConstraint::fixed(1.0));
  CHECK(did.delta[0] == CoefConstraint::fixed(0.0));
  CHECK(did.gamma[1].is_free());
  CHECK(did.delta[1].is_free());
  const auto ldv = named_spec(NamedEstimator::LDV, 2);
  CHECK(ldv.gamma[0].is_free());
  CHECK(ldv.delta[0] == CoefConstraint::fixed(0.0));
  CHECK(parse_named_estimator("anhecova") == NamedEstimator::ANHECOVA);
  CHECK(parse_named_estimator("DiD") == NamedEstimator::DiD);
  CHECK_THROWS_AS(parse_named_estimator("OLS"), ValidationError);
  CHECK_THROWS_AS(named_spec(NamedEstimator::DiD, 0), ValidationError);
}

TEST_CASE("model spec validation") {
  CHECK_THROWS_AS(ModelSpec({CoefConstraint::free()}, {}), ValidationError);
  CHECK_THROWS_AS(ModelSpec({CoefConstraint::free()}, {CoefConstraint::free()},
                            Centering::known_mean(Eigen::VectorXd::Zero(2))),
                  ValidationError);
}

TEST_CASE("parse_formula examples") {
  SUBCASE("full model with shorthand") {
    const auto s = parse_formula("1 + A + X + A:X", kTwo);
    CHECK(s.same_constraints(named_spec(NamedEstimator::ANHECOVA, 2)));
  }
  SUBCASE("anova") {
    const auto s = parse_formula("1+A", kTwo);
    CHECK(s.same_constraints(named_spec(NamedEstimator::ANOVA, 2)));
  }
  SUBCASE("fixed coefficients") {
    const auto s = parse_formula("1 + A + X1@1 + X2 + A:X2", kTwo);
    CHECK(s.same_constraints(named_spec(NamedEstimator::DiD, 2)));
    const auto t = parse_formula("1 + A + A:X1@-0.5", kTwo);
    CHECK(t.delta[0] == CoefConstraint::fixed(-0.5));
    CHECK(t.gamma[0] == CoefConstraint::fixed(0.0));
  }
  SUBCASE("exponent and explicit plus sign") {
    const auto s = parse_formula("1 + A + X1@+2.5e-1", kTwo);
    CHECK(s.gamma[0].value() == doctest::Approx(0.25));
  }
  SUBCASE("covariate literally named X is not shorthand") {
    const auto s = parse_formula("1 + A + X", {"X", "Z"});
    CHECK(s.gamma[0].is_free());
    CHECK(s.gamma[1] == CoefConstraint::fixed(0.0));
  }
  SUBCASE("errors carry a column") {
    try {
      parse_formula("1 + A + X3", kTwo);
      FAIL("expected FormulaError");
    } catch (const FormulaError& e) {
      CHECK(e.column() == 9);
    }
    CHECK_THROWS_AS(parse_formula("A + X1", kTwo), FormulaError);
    CHECK_THROWS_AS(parse_formula("1 + X1", kTwo), FormulaError);
    CHECK_THROWS_AS(parse_formula("1 + A + X1 + X1", kTwo), FormulaError);
    CHECK_THROWS_AS(parse_formula("1 + A + X@1", kTwo), FormulaError);
    CHECK_THROWS_AS(parse_formula("1 + A + X1 *", kTwo), FormulaError);
    CHECK_THROWS_AS(parse_formula("1 + A +", kTwo), FormulaError);
    CHECK_THROWS_AS(parse_formula("1 + A + X1@", kTwo), FormulaError);
  }
}

TEST_CASE("format_formula round trip over random specs") {
  Rng rng(11);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_int_distribution<int> dim(1, 4);
  const double values[] = {0.0, 1.0, -0.75};
  for (int t = 0; t < 300; ++t) {
    const int p = dim(rng);
    std::vector<CoefConstraint> g, d;
    for (int j = 0; j < p; ++j) {
      const int kg = pick(rng), kd = pick(rng);
      g.push_back(kg == 3 ? CoefConstraint::free() : CoefConstraint::fixed(values[kg]));
      d.push_back(kd == 3 ? CoefConstraint::free() : CoefConstraint::fixed(values[kd]));
    }
    const ModelSpec s(g, d);
    const auto names = default_covariate_names(p);
    const ModelSpec back = parse_formula(format_formula(s, names), names);
    REQUIRE(back.same_constraints(s));
  }
}

TEST_CASE("formula_identifiers") {
  CHECK(formula_identifiers("1 + A + age + A:age + bmi@2") ==
        std::vector<std::string>{"age", "bmi"});
}

TEST_CASE("design assembly") {
  const Dataset d = hand_data();
  SUBCASE("columns and empirical centering") {
    const auto s = parse_formula("1 + A + X + A:X", d.names());
    const Design des = build_design(s, d);
    REQUIRE(des.q() == 4);
    CHECK(des.columns[2].kind == ColumnRole::Kind::Main);
    CHECK(des.columns[3].kind == ColumnRole::Kind::Interaction);
    CHECK(des.z.col(3).isApprox(d.a.cwiseProduct(d.x.col(0))));
    CHECK(des.offset.isZero());
    CHECK(des.column_of(ColumnRole::Kind::Interaction, 0) == 3);
  }
  SUBCASE("fixed coefficients become an offset") {
    const auto s = parse_formula("1 + A + X1@2 + A:X1@-1", d.names(),
                                 Centering::known_mean(Eigen::VectorXd::Constant(1, 0.5)));
    const Design des = build_design(s, d);
    CHECK(des.q() == 2);
    for (int i = 0; i < d.n(); ++i) {
      const double xc = d.x(i, 0) - 0.5;
      CHECK(des.offset[i] == doctest::Approx(2.0 * xc - d.a[i] * xc));
    }
  }
  CHECK(design_columns(named_spec(NamedEstimator::LDV, 3)).size() == 7);
}

TEST_CASE("dataset validation") {
  Dataset d = hand_data();
  CHECK_NOTHROW(d.validate_for_estimation());
  d.a[2] = 2.0;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = hand_data();
  d.a.setOnes();
  CHECK_THROWS_AS(d.validate_for_estimation(), ValidationError);
  d = hand_data();
  d.y[0] = std::nan("");
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = hand_data();
  d.weights = Eigen::VectorXd::Constant(6, -1.0);
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = hand_data();
  d.x.conservativeResize(6, 5);
  d.x.rightCols(4).setRandom();
  CHECK_THROWS_AS(d.validate_for_estimation(), ValidationError);
}
