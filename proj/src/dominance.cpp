#include "regadj/dominance.hpp"

#include "regadj/errors.hpp"
#include "regadj/formula.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace regadj {
namespace {

constexpr double kPiHalfTolerance = 1e-12;

bool elementwise_contains(const std::vector<CoefConstraint>& big,
                          const std::vector<CoefConstraint>& small) {
  for (std::size_t j = 0; j < big.size(); ++j) {
    if (!big[j].contains(small[j])) return false;
  }
  return true;
}

bool subset(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

void check_pair(const ModelSpec& s1, const ModelSpec& s2, double pi) {
  if (s1.p() != s2.p()) {
    throw ValidationError("models have different covariate dimensions (" +
                          std::to_string(s1.p()) + " vs " + std::to_string(s2.p()) + ")");
  }
  s1.validate();
  s2.validate();
  if (s1.same_constraints(s2)) {
    throw ValidationError("the two models are identical; dominance needs distinct models");
  }
  if (!(pi > 0.0 && pi < 1.0)) throw ValidationError("pi must lie in (0, 1)");
}

DominanceExplanation explain(const ModelSpec& s1, const ModelSpec& s2, double pi) {
  DominanceExplanation e;
  e.gamma_nested = elementwise_contains(s1.gamma, s2.gamma);
  e.delta_nested = elementwise_contains(s1.delta, s2.delta);
  e.pi_half = std::abs(pi - 0.5) < kPiHalfTolerance;
  const auto ug = s1.unrestricted_gamma();
  const auto ud = s1.unrestricted_delta();
  e.interactions_cover_mains = subset(ug, ud);
  e.free_sets_equal = ug == ud;
  e.gamma_equal = s1.gamma == s2.gamma;
  return e;
}

const char* yn(bool b) { return b ? "yes" : "no"; }

}  // namespace

bool nested(const ModelSpec& larger, const ModelSpec& smaller) {
  if (larger.p() != smaller.p()) return false;
  return elementwise_contains(larger.gamma, smaller.gamma) &&
         elementwise_contains(larger.delta, smaller.delta);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Dominates: return "Dominates";
    case Verdict::NotGuaranteed: return "NotGuaranteed";
    case Verdict::EqualVariance: return "EqualVariance";
  }
  return "?";
}

std::string to_string(Clause c) {
  switch (c) {
    case Clause::Theorem1PiHalf: return "Theorem1-pi-half";
    case Clause::Theorem1InteractionSuperset: return "Theorem1-interaction-superset";
    case Clause::Theorem2: return "Theorem2";
    case Clause::Remark1: return "Remark1";
    case Clause::None: return "none";
  }
  return "?";
}

std::string to_string(CenteringMode m) {
  return m == CenteringMode::KnownMean ? "known-mean" : "empirical";
}

DominanceVerdict check_known_mean(const ModelSpec& spec1, const ModelSpec& spec2,
                                  double pi) {
  check_pair(spec1, spec2, pi);
  DominanceVerdict v;
  v.centering = CenteringMode::KnownMean;
  v.explanation = explain(spec1, spec2, pi);
  const auto& e = v.explanation;
  const bool nested_ok = e.gamma_nested && e.delta_nested;
  if (nested_ok && e.interactions_cover_mains) {
    v.verdict = Verdict::Dominates;
    v.clause = Clause::Theorem1InteractionSuperset;
  } else if (nested_ok && e.pi_half) {
    v.verdict = Verdict::Dominates;
    v.clause = Clause::Theorem1PiHalf;
  }
  v.summary = fmt::format(
      "Gamma1 contains Gamma2: {}; Delta1 contains Delta2: {}; U(Delta1) contains "
      "U(Gamma1): {}; pi = 1/2: {}. {}",
      yn(e.gamma_nested), yn(e.delta_nested), yn(e.interactions_cover_mains),
      yn(e.pi_half),
      v.verdict == Verdict::Dominates
          ? "Model 1 has asymptotic variance no larger than model 2 for every distribution."
          : "Not certified by the sufficient conditions (the ordering may still hold).");
  return v;
}

DominanceVerdict check_centered(const ModelSpec& spec1, const ModelSpec& spec2,
                                double pi) {
  check_pair(spec1, spec2, pi);
  DominanceVerdict v;
  v.centering = CenteringMode::Empirical;
  v.explanation = explain(spec1, spec2, pi);
  const auto& e = v.explanation;
  if (e.gamma_nested && e.delta_nested && e.free_sets_equal) {
    if (e.gamma_equal && e.pi_half) {
      v.verdict = Verdict::EqualVariance;
      v.clause = Clause::Remark1;
    } else {
      v.verdict = Verdict::Dominates;
      v.clause = Clause::Theorem2;
    }
  }
  const char* tail = "Not certified by the sufficient conditions (the ordering may still hold).";
  if (v.verdict == Verdict::Dominates) {
    tail = "Model 1 has asymptotic variance no larger than model 2 for every distribution.";
  } else if (v.verdict == Verdict::EqualVariance) {
    tail = "Both models have the same asymptotic variance for every distribution.";
  }
  v.summary = fmt::format(
      "Gamma1 contains Gamma2: {}; Delta1 contains Delta2: {}; U(Gamma1) == U(Delta1): "
      "{}; Gamma1 == Gamma2: {}; pi = 1/2: {}. {}",
      yn(e.gamma_nested), yn(e.delta_nested), yn(e.free_sets_equal), yn(e.gamma_equal),
      yn(e.pi_half), tail);
  return v;
}

Table1Report table1(int p, double pi) {
  if (p < 1) throw ValidationError("table1 requires p >= 1");
  Table1Report report;
  report.p = p;
  report.pi = pi;
  const ModelSpec anova = named_spec(NamedEstimator::ANOVA, p);
  const ModelSpec ancova = named_spec(NamedEstimator::ANCOVA, p);
  const ModelSpec full = named_spec(NamedEstimator::ANHECOVA, p);
  const ModelSpec inter = interactions_only_spec(p);
  const struct {
    const char* m1;
    const char* m2;
    const ModelSpec& s1;
    const ModelSpec& s2;
  } rows[] = {
      {"~ 1 + A + X + A:X", "~ 1 + A", full, anova},
      {"~ 1 + A + X + A:X", "~ 1 + A + X", full, ancova},
      {"~ 1 + A + X + A:X", "~ 1 + A + A:X", full, inter},
      {"~ 1 + A + X", "~ 1 + A", ancova, anova},
      {"~ 1 + A + A:X", "~ 1 + A", inter, anova},
  };
  for (const auto& r : rows) {
    report.rows.push_back(
        {r.m1, r.m2, check_known_mean(r.s1, r.s2, pi), check_centered(r.s1, r.s2, pi)});
  }
  return report;
}

std::string Table1Report::to_text() const {
  std::string out = fmt::format("Variance ordering (p = {}, pi = {})\n", p, pi);
  out += fmt::format("{:<20} {:<14} {:<46} {:<30}\n", "Model 1", "Model 2",
                     "V1 <= V2 (known mean)", "V~1 <= V~2 (centered)");
  for (const auto& r : rows) {
    auto cell = [](const DominanceVerdict& v) {
      return v.clause == Clause::None ? to_string(v.verdict)
                                      : to_string(v.verdict) + " (" + to_string(v.clause) + ")";
    };
    out += fmt::format("{:<20} {:<14} {:<46} {:<30}\n", r.model1, r.model2,
                       cell(r.known_mean), cell(r.centered));
  }
  return out;
}

CorollaryReport corollaries(double pi) {
  if (!(pi > 0.0 && pi < 1.0)) throw ValidationError("pi must lie in (0, 1)");
  CorollaryReport report;
  report.pi = pi;
  const int p = 2;
  const ModelSpec anova = named_spec(NamedEstimator::ANOVA, p);
  const ModelSpec ancova = named_spec(NamedEstimator::ANCOVA, p);
  const ModelSpec full = named_spec(NamedEstimator::ANHECOVA, p);
  const ModelSpec did = named_spec(NamedEstimator::DiD, p);
  const ModelSpec ldv = named_spec(NamedEstimator::LDV, p);

  auto dominated = [](const DominanceVerdict& v) { return v.verdict != Verdict::NotGuaranteed; };

  auto v1 = check_centered(full, anova, pi);
  report.entries.push_back({"ANHECOVA is at least as efficient as ANOVA", "ANHECOVA",
                            "ANOVA", v1, dominated(v1)});
  auto v2 = check_centered(full, ancova, pi);
  report.entries.push_back({"ANHECOVA is at least as efficient as ANCOVA", "ANHECOVA",
                            "ANCOVA", v2, dominated(v2)});
  auto v3 = check_centered(ancova, anova, pi);
  auto v3r = check_centered(anova, ancova, pi);
  report.entries.push_back({"No guaranteed ordering between ANCOVA and ANOVA", "ANCOVA",
                            "ANOVA", v3, !dominated(v3) && !dominated(v3r)});
  auto v4 = check_centered(ldv, did, pi);
  report.entries.push_back({"LDV is at least as efficient as DiD", "LDV", "DiD", v4,
                            dominated(v4)});
  return report;
}

std::string CorollaryReport::to_text() const {
  std::string out = fmt::format("Corollary checks (centered covariates, pi = {})\n", pi);
  for (const auto& e : entries) {
    out += fmt::format("  [{}] {}: {} vs {} -> {}\n", e.certified ? "certified" : "NOT certified",
                       e.claim, e.model1, e.model2, to_string(e.verdict.verdict));
  }
  return out;
}

}  // namespace regadj
