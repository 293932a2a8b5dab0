#include <doctest.h>

#include "regadj/dominance.hpp"
#include "regadj/errors.hpp"
#include "regadj/population.hpp"

#include <cmath>

using namespace regadj;

namespace {

ModelSpec spec_of(NamedEstimator e, int p = 1) { return named_spec(e, p); }

// All specs with entries from {free, 0, 1}.
std::vector<ModelSpec> enumerate_specs(int p) {
  const CoefConstraint options[] = {CoefConstraint::free(), CoefConstraint::fixed(0.0),
                                    CoefConstraint::fixed(1.0)};
  std::vector<ModelSpec> out;
  int total = 1;
  for (int k = 0; k < 2 * p; ++k) total *= 3;
  for (int code = 0; code < total; ++code) {
    std::vector<CoefConstraint> g, d;
    int c = code;
    for (int j = 0; j < p; ++j) {
      g.push_back(options[c % 3]);
      c /= 3;
    }
    for (int j = 0; j < p; ++j) {
      d.push_back(options[c % 3]);
      c /= 3;
    }
    out.emplace_back(g, d);
  }
  return out;
}

}  // namespace

TEST_CASE("nesting is elementwise containment") {
  const auto full = spec_of(NamedEstimator::ANHECOVA, 2);
  const auto anova = spec_of(NamedEstimator::ANOVA, 2);
  CHECK(nested(full, anova));
  CHECK_FALSE(nested(anova, full));
  CHECK(nested(full, full));
  const auto did = spec_of(NamedEstimator::DiD, 2);
  const auto ldv = spec_of(NamedEstimator::LDV, 2);
  CHECK(nested(ldv, did));
  CHECK_FALSE(nested(did, ldv));
  CHECK(nested(full, did));
}

TEST_CASE("known-mean examples") {
  for (double pi : {0.1, 0.3, 0.5, 0.8}) {
    const auto v = check_known_mean(spec_of(NamedEstimator::ANHECOVA), spec_of(NamedEstimator::ANOVA), pi);
    CHECK(v.verdict == Verdict::Dominates);
    CHECK(v.centering == CenteringMode::KnownMean);
  }
  const auto v03 = check_known_mean(spec_of(NamedEstimator::ANCOVA), spec_of(NamedEstimator::ANOVA), 0.3);
  CHECK(v03.verdict == Verdict::NotGuaranteed);
  CHECK(v03.clause == Clause::None);
  CHECK(v03.explanation.gamma_nested);
  CHECK(v03.explanation.delta_nested);
  CHECK_FALSE(v03.explanation.interactions_cover_mains);
  const auto v05 = check_known_mean(spec_of(NamedEstimator::ANCOVA), spec_of(NamedEstimator::ANOVA), 0.5);
  CHECK(v05.verdict == Verdict::Dominates);
  CHECK(v05.clause == Clause::Theorem1PiHalf);
  const auto rev = check_known_mean(spec_of(NamedEstimator::ANOVA), spec_of(NamedEstimator::ANHECOVA), 0.5);
  CHECK(rev.verdict == Verdict::NotGuaranteed);
  CHECK_FALSE(rev.explanation.gamma_nested);
}

TEST_CASE("centered examples") {
  const auto v = check_centered(spec_of(NamedEstimator::ANHECOVA), spec_of(NamedEstimator::ANCOVA), 0.3);
  CHECK(v.verdict == Verdict::Dominates);
  CHECK(v.clause == Clause::Theorem2);
  CHECK(v.centering == CenteringMode::Empirical);
  const auto io = check_centered(interactions_only_spec(1), spec_of(NamedEstimator::ANOVA), 0.3);
  CHECK(io.verdict == Verdict::NotGuaranteed);
  CHECK_FALSE(io.explanation.free_sets_equal);
  const auto r1 = check_centered(spec_of(NamedEstimator::ANHECOVA, 3), spec_of(NamedEstimator::ANCOVA, 3), 0.5);
  CHECK(r1.verdict == Verdict::EqualVariance);
  CHECK(r1.clause == Clause::Remark1);
  CHECK(r1.explanation.gamma_equal);
}

TEST_CASE("check errors") {
  CHECK_THROWS_AS(check_known_mean(spec_of(NamedEstimator::ANOVA, 1), spec_of(NamedEstimator::ANOVA, 2), 0.5),
                  ValidationError);
  CHECK_THROWS_AS(check_centered(spec_of(NamedEstimator::ANCOVA), spec_of(NamedEstimator::ANCOVA), 0.5),
                  ValidationError);
  CHECK_THROWS_AS(check_known_mean(spec_of(NamedEstimator::ANCOVA), spec_of(NamedEstimator::ANOVA), 0.0),
                  ValidationError);
  CHECK_THROWS_AS(check_centered(spec_of(NamedEstimator::ANCOVA), spec_of(NamedEstimator::ANOVA), 1.2),
                  ValidationError);
}

TEST_CASE("table1 verdict pattern") {
  using V = Verdict;
  for (int p : {1, 3}) {
    const auto t = table1(p, 0.3);
    REQUIRE(t.rows.size() == 5);
    const V known[] = {V::Dominates, V::Dominates, V::Dominates, V::NotGuaranteed, V::Dominates};
    const V cent[] = {V::Dominates, V::Dominates, V::Dominates, V::NotGuaranteed, V::NotGuaranteed};
    for (int r = 0; r < 5; ++r) {
      CHECK(t.rows[r].known_mean.verdict == known[r]);
      CHECK(t.rows[r].centered.verdict == cent[r]);
    }
    CHECK(t.rows[0].model1 == "~ 1 + A + X + A:X");
    CHECK(t.rows[4].model1 == "~ 1 + A + A:X");
  }
  const auto half = table1(1, 0.5);
  CHECK(half.rows[3].known_mean.verdict == Verdict::Dominates);
  CHECK(half.rows[3].known_mean.clause == Clause::Theorem1PiHalf);
  CHECK(half.to_text().find("Not") != std::string::npos);
  CHECK_THROWS_AS(table1(0, 0.5), ValidationError);
}

TEST_CASE("corollaries report") {
  const auto c = corollaries(0.3);
  REQUIRE(c.entries.size() == 4);
  CHECK(c.entries[0].certified);
  CHECK(c.entries[1].certified);
  CHECK(c.entries[2].certified);
  CHECK(c.entries[3].model1 == "LDV");
  CHECK_FALSE(c.entries[3].certified);
  CHECK(c.entries[3].verdict.verdict == Verdict::NotGuaranteed);
  CHECK(corollaries(0.5).entries[0].certified);
  CHECK(c.to_text().find("NOT certified") != std::string::npos);
}

TEST_CASE("certified verdicts hold on random populations") {
  const auto specs = enumerate_specs(2);
  REQUIRE(specs.size() == 81);
  Rng rng(77);
  std::vector<PopulationSpec> pops;
  for (int t = 0; t < 12; ++t) pops.push_back(random_population(2, t % 3 == 0 ? 0.5 : 0.15 + 0.06 * t, rng));

  int dominated_known = 0, dominated_centered = 0, equal = 0;
  for (const auto& pop : pops) {
    std::vector<double> vk, vc;
    for (const auto& s : specs) {
      vk.push_back(asymptotic_variance_known_mean(s, pop).value);
      vc.push_back(asymptotic_variance_centered(s, pop).value);
    }
    for (size_t i = 0; i < specs.size(); ++i) {
      for (size_t j = 0; j < specs.size(); ++j) {
        if (i == j) continue;
        const auto k = check_known_mean(specs[i], specs[j], pop.pi);
        if (k.verdict == Verdict::Dominates) {
          ++dominated_known;
          REQUIRE(vk[i] <= vk[j] + 1e-9 * (1 + vk[j]));
        }
        const auto c = check_centered(specs[i], specs[j], pop.pi);
        if (c.verdict == Verdict::Dominates) {
          ++dominated_centered;
          REQUIRE(vc[i] <= vc[j] + 1e-9 * (1 + vc[j]));
        } else if (c.verdict == Verdict::EqualVariance) {
          ++equal;
          REQUIRE(std::abs(vc[i] - vc[j]) <= 1e-9 * (1 + vc[j]));
        }
      }
    }
  }
  CHECK(dominated_known > 0);
  CHECK(dominated_centered > 0);
  CHECK(equal > 0);
}
