#pragma once

#include "regadj/model.hpp"
#include "regadj/population.hpp"
#include "regadj/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace regadj {

// Built-in simulation designs. X_nc ~ N(2, 1) and X = X_nc - mean(X_nc).
//   1: Y(1) = 5 + 2.5 X + e1, Y(0) = 3 + X + e0, A ~ Bernoulli(pi).
//   2: Y(a) ~ Poisson(mu_a), mu_1 = exp(3 + 0.6 X), mu_0 = exp(1 + 0.6 X).
//   3: Y(1) = 7 + X + e1, Y(0) = 2 - X + X^2 + e0, logit P(A = 1 | X) = 4 - 2 X.
//   4: scenario 3 fitted with weights 1 / (pi(X) (1 - pi(X))).
struct ScenarioDraw {
  Dataset data;
  Eigen::VectorXd y1;
  Eigen::VectorXd y0;
  Eigen::VectorXd propensity;  // P(A = 1 | X_i)
};

bool scenario_uses_pi(int scenario);
void validate_scenario(int scenario);

// pi is ignored by scenarios 3 and 4.
ScenarioDraw draw_scenario(int scenario, int n, double pi, Rng& rng);

// Population version of the scenario outcomes with X ~ N(0, 1).
OutcomeSampler scenario_sampler(int scenario);

// Centering for models fitted to scenario draws. Outcomes are generated from
// the already centered covariate, so its mean is known to be zero and the
// empirical-centering variance correction does not apply.
Centering scenario_centering();

// E[Y(1) - Y(0)] in closed form: 2, (e^3 - e) e^0.18, 4, 4.
double scenario_beta_ate(int scenario);

struct GridModel {
  std::string label;
  ModelSpec spec;
};

struct GridConfig {
  int scenario = 1;
  std::vector<GridModel> models;
  std::vector<double> pis;  // required for scenarios 1 and 2
  int reps = 1000;
  int n = 1000;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
};

struct CellResult {
  std::string scenario;
  std::string model;
  std::optional<double> pi;  // absent for X-dependent assignment
  int n = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  double beta_ate = 0.0;
  double bias = 0.0;     // mean(estimate) - beta_ate
  double sd = 0.0;       // sample SD across successful replications
  double mc_se = 0.0;    // sd / sqrt(successes)
  double mean_se = 0.0;  // mean reported standard error
  int failures = 0;
  double fail_rate = 0.0;
  bool failed = false;   // more than 1% of replications failed
};

struct MonteCarloReport {
  std::uint64_t seed = 0;
  std::vector<CellResult> cells;

  const CellResult& cell(const std::string& model,
                         std::optional<double> pi = std::nullopt) const;
  // Header: scenario,model,pi,n,reps,bias,sd,mc_se,fail_rate
  std::string to_csv() const;
  std::string to_text() const;
};

// Every (model, pi) cell gets `reps` replications. Replication r of a given
// pi draws one dataset from seed (scenario, pi, r) and fits every model to
// it, so models are compared on common draws. Results do not depend on the
// thread count.
MonteCarloReport run_grid(const GridConfig& config);

// 0.1, 0.2, ..., 0.9.
std::vector<double> figure1_pis();

// Scenarios 1 and 2 for ANOVA, ANCOVA and ANHECOVA over figure1_pis().
MonteCarloReport figure1_data(int reps, std::uint64_t seed, int n = 1000, int threads = 0);

// Baseline outcome Y0 and an extra covariate X2, both N(0, 1):
// Y(0) = 1 + b Y0 + 0.5 X2 + e with Var(e) = noise_var, Y(1) = Y(0) + 1 + 0.5 X2.
// The defaults give corr(Y0, Y(0)) = 0.7.
struct DidLdvConfig {
  int reps = 2000;
  int n = 500;
  double pi = 0.5;
  double baseline_coef = 0.7;
  double noise_var = 0.26;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct DidLdvReport {
  MonteCarloReport report;  // cells "DiD" and "LDV"
  double sd_did = 0.0;
  double sd_ldv = 0.0;
  // Standard error of sd_ldv - sd_did from the paired replications.
  double sd_diff_se = 0.0;

  // sd_ldv <= sd_did + 3 * sd_diff_se
  bool ldv_not_worse() const { return sd_ldv <= sd_did + 3.0 * sd_diff_se; }
};

DidLdvReport did_vs_ldv_experiment(const DidLdvConfig& config);

}  // namespace regadj
