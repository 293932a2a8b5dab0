#pragma once

#include "regadj/model.hpp"

#include <string>
#include <vector>

namespace regadj {

// Gamma_1 contains Gamma_2 and Delta_1 contains Delta_2, elementwise.
bool nested(const ModelSpec& larger, const ModelSpec& smaller);

enum class Verdict { Dominates, NotGuaranteed, EqualVariance };
enum class Clause {
  Theorem1PiHalf,
  Theorem1InteractionSuperset,
  Theorem2,
  Remark1,
  None
};
enum class CenteringMode { KnownMean, Empirical };

std::string to_string(Verdict v);
std::string to_string(Clause c);
std::string to_string(CenteringMode m);

// Which sufficient-condition ingredients held for the ordered pair.
struct DominanceExplanation {
  bool gamma_nested = false;   // Gamma_1 contains Gamma_2
  bool delta_nested = false;   // Delta_1 contains Delta_2
  bool pi_half = false;
  bool interactions_cover_mains = false;  // U(Delta_1) contains U(Gamma_1)
  bool free_sets_equal = false;           // U(Gamma_1) == U(Delta_1)
  bool gamma_equal = false;               // Gamma_1 == Gamma_2
};

// Outcome of checking the sufficient conditions. NotGuaranteed means the
// pair is not certified, not that the ordering fails.
struct DominanceVerdict {
  Verdict verdict = Verdict::NotGuaranteed;
  Clause clause = Clause::None;
  CenteringMode centering = CenteringMode::KnownMean;
  DominanceExplanation explanation;
  std::string summary;
};

// Known covariate mean: estimator 1 dominates estimator 2 when the models
// are nested and either pi = 1/2 or every free main effect of model 1 has
// its free interaction.
DominanceVerdict check_known_mean(const ModelSpec& spec1, const ModelSpec& spec2,
                                  double pi);

// Empirically centered covariates: nested models with U(Gamma_1) ==
// U(Delta_1). With Gamma_1 == Gamma_2 and pi = 1/2 the variances coincide.
DominanceVerdict check_centered(const ModelSpec& spec1, const ModelSpec& spec2,
                                double pi);

struct Table1Row {
  std::string model1;
  std::string model2;
  DominanceVerdict known_mean;
  DominanceVerdict centered;
};

struct Table1Report {
  int p = 1;
  double pi = 0.5;
  std::vector<Table1Row> rows;

  std::string to_text() const;
};

// The five standard comparisons among ANOVA, ANCOVA, ANHECOVA and the
// interactions-only model, in both centering modes.
Table1Report table1(int p, double pi);

struct CorollaryEntry {
  std::string claim;
  std::string model1;
  std::string model2;
  DominanceVerdict verdict;
  // The claim follows from the implemented sufficient conditions.
  bool certified = false;
};

struct CorollaryReport {
  double pi = 0.5;
  std::vector<CorollaryEntry> entries;

  std::string to_text() const;
};

CorollaryReport corollaries(double pi);

}  // namespace regadj
