#pragma once

#include "regadj/estimate.hpp"
#include "regadj/model.hpp"
#include "regadj/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>

namespace regadj {

// Second-order description of (X, Y(1), Y(0)). Under A independent of X these
// moments determine every population coefficient and asymptotic variance.
struct PopulationMoments {
  Eigen::MatrixXd sigma;    // Cov(X), symmetric positive definite
  Eigen::VectorXd x_mean;   // E(X); empty means zero
  double mu1 = 0.0;         // E Y(1)
  double mu0 = 0.0;         // E Y(0)
  Eigen::VectorXd omega1;   // E[(X - E X) Y(1)]
  Eigen::VectorXd omega0;   // E[(X - E X) Y(0)]
  double m2_1 = 0.0;        // E Y(1)^2
  double m2_0 = 0.0;        // E Y(0)^2

  int p() const noexcept { return static_cast<int>(sigma.rows()); }
  Eigen::VectorXd mean() const;
  // Throws ValidationError on shape errors or impossible second moments and
  // SingularDesignError when sigma is not positive definite.
  void validate() const;
};

// One unit's covariates and both potential outcomes.
struct UnitDraw {
  Eigen::VectorXd x;
  double y1 = 0.0;
  double y0 = 0.0;
};

// Seeded generator of units; treatment is assigned by the caller.
struct OutcomeSampler {
  int p = 0;
  std::function<UnitDraw(Rng&)> draw;
};

struct PopulationSpec {
  double pi = 0.5;
  std::optional<PopulationMoments> moments;
  std::optional<OutcomeSampler> sampler;

  int p() const;
  void validate() const;
};

// Y(a) = mu_a + b_a' X + s_a e_a with X ~ N(0, sigma), e_a ~ N(0, 1).
struct LinearGaussianArms {
  Eigen::MatrixXd sigma;
  double mu1 = 0.0;
  double mu0 = 0.0;
  Eigen::VectorXd b1;
  Eigen::VectorXd b0;
  double s1 = 1.0;
  double s0 = 1.0;
};

// Both exact moments and a sampler.
PopulationSpec linear_gaussian_population(const LinearGaussianArms& arms, double pi);

// Monte Carlo settings for sampler-mode evaluation.
struct SamplerOptions {
  long n_draws = 1'000'000;
  std::uint64_t seed = 0;
  int batches = 10;  // for the reported standard error
};

struct PopulationSolution {
  Coefficients theta;
  double beta_ate = 0.0;
  double residual_m2_1 = 0.0;  // E[eps^2 | A = 1]
  double residual_m2_0 = 0.0;  // E[eps^2 | A = 0]
  bool approximate = false;
};

struct VarianceValue {
  double value = 0.0;
  double mc_se = 0.0;  // zero in moment mode
  bool approximate = false;
};

// Population least squares for the spec on the raw (uncentered) covariates,
// so beta = beta_ate - delta' E(X). Moment mode is exact; sampler mode uses
// estimated moments and sets approximate.
PopulationSolution solve_population(const ModelSpec& spec, const PopulationSpec& pop,
                                    const SamplerOptions& options = {});

// E[Z eps] at theta for the spec's design; zero at the population solution.
Eigen::VectorXd population_score(const ModelSpec& spec, const PopulationSpec& pop,
                                 const Coefficients& theta);

// E[(A - pi)^2 eps^2] / (pi^2 (1 - pi)^2) with covariates centered at E(X).
VarianceValue asymptotic_variance_known_mean(const ModelSpec& spec,
                                             const PopulationSpec& pop,
                                             const SamplerOptions& options = {});

// Known-mean variance plus delta_s' Sigma (2 delta_f - delta_s).
VarianceValue asymptotic_variance_centered(const ModelSpec& spec,
                                           const PopulationSpec& pop,
                                           const SamplerOptions& options = {});

// Centered variance of spec2 minus that of spec1 as the quadratic form
// (d_g + (1 - pi) d_d)' Sigma (d_g + (1 - pi) d_d) / (pi (1 - pi)).
// Requires spec1 nested over spec2 with U(Gamma_1) == U(Delta_1), or equal
// specs. Moments required.
double variance_gap_theorem2(const ModelSpec& spec1, const ModelSpec& spec2,
                             const PopulationSpec& pop);

// V(ANCOVA) - V(ANOVA) in known-mean mode:
// (g_f + pi d_f)' Sigma ((3 pi - 2) d_f - g_f) / (pi (1 - pi)).
double ancova_anova_gap(const PopulationSpec& pop);

// Centered V(interactions only) - V(ANOVA):
// W1' S^-1 (W1 - 2 W0) - W1' S^-1 W1 / pi.
double interactions_only_anova_gap(const PopulationSpec& pop);

enum class CounterexampleKind { AncovaWorse, InteractionsOnlyWorseCentered };

// Single-covariate Gaussian populations where the named ordering fails.
// AncovaWorse: gamma_f = pi - 1, delta_f = 1, Sigma = 1; needs pi != 1/2.
// InteractionsOnlyWorseCentered: Omega_0 = -Omega_1 / 2, Omega_1 = 1,
// Sigma = 1; the centered gap is (2 pi - 1) / pi, so pi must exceed 1/2.
PopulationSpec make_counterexample(CounterexampleKind kind, double pi);

struct MonteCarloMean {
  double value = 0.0;
  double mc_se = 0.0;
};

// mean(Y(1) - Y(0)) over n_draws seeded draws.
MonteCarloMean approximate_beta_ate(const OutcomeSampler& sampler, long n_draws,
                                    std::uint64_t seed);
MonteCarloMean approximate_beta_ate(const PopulationSpec& pop, long n_draws,
                                    std::uint64_t seed);

// Random linear Gaussian population: Sigma Wishart-like with condition number
// at most 1e3, coefficients and means uniform on [-2, 2], noise scales on
// [0.5, 2].
PopulationSpec random_population(int p, double pi, Rng& rng);

// Y(1) = 5 + 2.5 X + e1, Y(0) = 3 + X + e0, X ~ N(0, 1).
PopulationSpec scenario1_population(double pi);

struct SampleDraw {
  Dataset data;
  Eigen::VectorXd y1;
  Eigen::VectorXd y0;
};

// n units from the sampler with A ~ Bernoulli(pi).
SampleDraw draw_sample(const PopulationSpec& pop, int n, Rng& rng);

}  // namespace regadj
