#include "regadj/population.hpp"

#include "linalg.hpp"
#include "regadj/dominance.hpp"
#include "regadj/errors.hpp"

#include <cmath>
#include <random>

namespace regadj {
namespace {

// Raw second moments of u = (1, X) and the potential outcomes.
struct Raw {
  Eigen::MatrixXd m;      // E[u u']
  Eigen::VectorXd r[2];   // E[u Y(a)]
  double s[2] = {0, 0};   // E[Y(a)^2]

  int p() const { return static_cast<int>(m.rows()) - 1; }
  Eigen::VectorXd mean() const { return m.col(0).tail(p()); }
};

struct Solved {
  Coefficients theta;
  Eigen::VectorXd free;
  double e2[2] = {0, 0};
};

Raw raw_from(const PopulationMoments& pm) {
  const int p = pm.p();
  const Eigen::VectorXd mean = pm.mean();
  Raw raw;
  raw.m.resize(p + 1, p + 1);
  raw.m(0, 0) = 1.0;
  raw.m.block(1, 0, p, 1) = mean;
  raw.m.block(0, 1, 1, p) = mean.transpose();
  raw.m.block(1, 1, p, p) = pm.sigma + mean * mean.transpose();
  const double mu[2] = {pm.mu0, pm.mu1};
  const Eigen::VectorXd* om[2] = {&pm.omega0, &pm.omega1};
  for (int a = 0; a < 2; ++a) {
    raw.r[a].resize(p + 1);
    raw.r[a][0] = mu[a];
    raw.r[a].tail(p) = *om[a] + mean * mu[a];
  }
  raw.s[0] = pm.m2_0;
  raw.s[1] = pm.m2_1;
  return raw;
}

// Moments of (1, X - E X).
Raw centered(const Raw& raw) {
  const int p = raw.p();
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(p + 1, p + 1);
  t.block(1, 0, p, 1) = -raw.mean();
  Raw c;
  c.m = t * raw.m * t.transpose();
  c.m.block(1, 0, p, 1).setZero();
  c.m.block(0, 1, 1, p).setZero();
  for (int a = 0; a < 2; ++a) {
    c.r[a] = t * raw.r[a];
    c.s[a] = raw.s[a];
  }
  return c;
}

Eigen::MatrixXd sigma_of(const Raw& c) { return c.m.block(1, 1, c.p(), c.p()); }

// Z = L_a u for a unit in arm a.
Eigen::MatrixXd selector(const std::vector<ColumnRole>& cols, int a, int p) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cols.size()), p + 1);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& c = cols[k];
    switch (c.kind) {
      case ColumnRole::Kind::Intercept: l(k, 0) = 1.0; break;
      case ColumnRole::Kind::Treatment: l(k, 0) = a; break;
      case ColumnRole::Kind::Main: l(k, c.covariate + 1) = 1.0; break;
      case ColumnRole::Kind::Interaction: l(k, c.covariate + 1) = a; break;
    }
  }
  return l;
}

// Offset coefficients on u in arm a.
Eigen::VectorXd fixed_part(const ModelSpec& spec, int a) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(spec.p() + 1);
  for (int j = 0; j < spec.p(); ++j) {
    if (spec.gamma[j].is_fixed()) f[j + 1] += spec.gamma[j].value();
    if (a == 1 && spec.delta[j].is_fixed()) f[j + 1] += spec.delta[j].value();
  }
  return f;
}

std::vector<std::string> labels_for(const std::vector<ColumnRole>& cols, int p) {
  const auto names = default_covariate_names(p);
  std::vector<std::string> out;
  for (const auto& c : cols) out.push_back(c.label(names));
  return out;
}

Solved solve_raw(const ModelSpec& spec, const Raw& raw, double pi) {
  const int p = raw.p();
  if (spec.p() != p) {
    throw ValidationError("model has p=" + std::to_string(spec.p()) +
                          " covariates but the population has " + std::to_string(p));
  }
  const auto cols = design_columns(spec);
  const double w[2] = {1.0 - pi, pi};
  const Eigen::Index q = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd l[2];
  Eigen::VectorXd f[2];
  for (int a = 0; a < 2; ++a) {
    l[a] = selector(cols, a, p);
    f[a] = fixed_part(spec, a);
    g += w[a] * l[a] * raw.m * l[a].transpose();
    h += w[a] * l[a] * (raw.r[a] - raw.m * f[a]);
  }
  Solved out;
  out.free = detail::spd_inverse(g, labels_for(cols, p)) * h;
  out.theta = Coefficients::from_free(spec, cols, out.free);
  for (int a = 0; a < 2; ++a) {
    const Eigen::VectorXd c = l[a].transpose() * out.free + f[a];
    const double e2 = raw.s[a] - 2.0 * c.dot(raw.r[a]) + c.dot(raw.m * c);
    out.e2[a] = std::max(e2, 0.0);
  }
  return out;
}

double known_mean_variance(const ModelSpec& spec, const Raw& c, double pi) {
  const Solved s = solve_raw(spec, c, pi);
  return s.e2[1] / pi + s.e2[0] / (1.0 - pi);
}

double centered_variance(const ModelSpec& spec, const Raw& c, double pi) {
  const Solved s = solve_raw(spec, c, pi);
  double v = s.e2[1] / pi + s.e2[0] / (1.0 - pi);
  const Eigen::VectorXd& ds = s.theta.delta;
  if (ds.isZero(0.0)) return v;
  const Eigen::VectorXd df =
      solve_raw(named_spec(NamedEstimator::ANHECOVA, spec.p()), c, pi).theta.delta;
  return v + ds.dot(sigma_of(c) * (2.0 * df - ds));
}

// Running raw sums over sampler draws.
struct Accumulator {
  Eigen::MatrixXd m;
  Eigen::VectorXd r[2];
  double s[2] = {0, 0};
  long count = 0;

  explicit Accumulator(int p) : m(Eigen::MatrixXd::Zero(p + 1, p + 1)) {
    r[0] = r[1] = Eigen::VectorXd::Zero(p + 1);
  }

  void add(const UnitDraw& d) {
    Eigen::VectorXd u(m.rows());
    u[0] = 1.0;
    u.tail(m.rows() - 1) = d.x;
    m.selfadjointView<Eigen::Lower>().rankUpdate(u);
    r[1] += d.y1 * u;
    r[0] += d.y0 * u;
    s[1] += d.y1 * d.y1;
    s[0] += d.y0 * d.y0;
    ++count;
  }

  void merge(const Accumulator& o) {
    m += o.m;
    r[0] += o.r[0];
    r[1] += o.r[1];
    s[0] += o.s[0];
    s[1] += o.s[1];
    count += o.count;
  }

  Raw raw() const {
    Raw out;
    const double n = static_cast<double>(count);
    out.m = m.selfadjointView<Eigen::Lower>();
    out.m /= n;
    for (int a = 0; a < 2; ++a) {
      out.r[a] = r[a] / n;
      out.s[a] = s[a] / n;
    }
    return out;
  }
};

std::vector<Accumulator> sample_batches(const OutcomeSampler& sampler,
                                        const SamplerOptions& opt) {
  if (opt.n_draws < 2 || opt.batches < 1) {
    throw ValidationError("sampler evaluation needs n_draws >= 2 and batches >= 1");
  }
  std::vector<Accumulator> out;
  const long per = std::max(1L, opt.n_draws / opt.batches);
  for (int b = 0; b < opt.batches; ++b) {
    Rng rng = make_rng(derive_seed(opt.seed, {hash_label("moments"), std::uint64_t(b)}));
    Accumulator acc(sampler.p);
    const long count = b + 1 == opt.batches ? opt.n_draws - per * (opt.batches - 1) : per;
    for (long i = 0; i < count; ++i) acc.add(sampler.draw(rng));
    out.push_back(std::move(acc));
  }
  return out;
}

// Exact in moment mode; otherwise pooled estimate with a batch-means
// standard error.
template <class F>
VarianceValue evaluate(const PopulationSpec& pop, const SamplerOptions& opt, F f) {
  pop.validate();
  if (pop.moments) return {f(centered(raw_from(*pop.moments))), 0.0, false};
  const auto batches = sample_batches(*pop.sampler, opt);
  Accumulator pooled(pop.sampler->p);
  for (const auto& b : batches) pooled.merge(b);
  VarianceValue out{f(centered(pooled.raw())), 0.0, true};
  if (batches.size() > 1) {
    Eigen::VectorXd vals(static_cast<Eigen::Index>(batches.size()));
    for (std::size_t b = 0; b < batches.size(); ++b) vals[b] = f(centered(batches[b].raw()));
    const double mean = vals.mean();
    const double var = (vals.array() - mean).square().sum() / (vals.size() - 1);
    out.mc_se = std::sqrt(var / vals.size());
  }
  return out;
}

const PopulationMoments& require_moments(const PopulationSpec& pop) {
  pop.validate();
  if (!pop.moments) throw ValidationError("this operation needs exact population moments");
  return *pop.moments;
}

void check_pi(double pi) {
  if (!(pi > 0.0 && pi < 1.0)) throw ValidationError("pi must lie in (0, 1)");
}

}  // namespace

Eigen::VectorXd PopulationMoments::mean() const {
  return x_mean.size() == 0 ? Eigen::VectorXd::Zero(p()) : x_mean;
}

void PopulationMoments::validate() const {
  const int k = p();
  if (k < 1 || sigma.cols() != k) throw ValidationError("sigma must be a nonempty square matrix");
  if (omega1.size() != k || omega0.size() != k) {
    throw ValidationError("omega vectors must have length p");
  }
  if (x_mean.size() != 0 && x_mean.size() != k) {
    throw ValidationError("x_mean must be empty or have length p");
  }
  if (!sigma.allFinite() || !omega1.allFinite() || !omega0.allFinite() ||
      !std::isfinite(mu1) || !std::isfinite(mu0) || !std::isfinite(m2_1) ||
      !std::isfinite(m2_0) || (x_mean.size() && !x_mean.allFinite())) {
    throw ValidationError("population moments must be finite");
  }
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) throw ValidationError("sigma must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= detail::kSingularTolerance * hi) {
    throw SingularDesignError("population covariance sigma is singular", {});
  }
  // E Y(a)^2 must cover the mean and the part explained by X.
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  const double explained1 = mu1 * mu1 + omega1.dot(llt.solve(omega1));
  const double explained0 = mu0 * mu0 + omega0.dot(llt.solve(omega0));
  if (m2_1 < explained1 - 1e-9 * (1.0 + std::abs(m2_1)) ||
      m2_0 < explained0 - 1e-9 * (1.0 + std::abs(m2_0))) {
    throw ValidationError("second moments are inconsistent: E Y(a)^2 < mu_a^2 + W_a' S^-1 W_a");
  }
}

int PopulationSpec::p() const {
  if (moments) return moments->p();
  if (sampler) return sampler->p;
  return 0;
}

void PopulationSpec::validate() const {
  check_pi(pi);
  if (!moments && !sampler) throw ValidationError("population needs moments or a sampler");
  if (moments) moments->validate();
  if (sampler) {
    if (sampler->p < 1 || !sampler->draw) throw ValidationError("sampler is not usable");
    if (moments && moments->p() != sampler->p) {
      throw ValidationError("sampler and moments disagree on p");
    }
  }
}

PopulationSpec linear_gaussian_population(const LinearGaussianArms& arms, double pi) {
  const int p = static_cast<int>(arms.sigma.rows());
  if (arms.b1.size() != p || arms.b0.size() != p) {
    throw ValidationError("arm slopes must have length p");
  }
  if (arms.s1 < 0.0 || arms.s0 < 0.0) throw ValidationError("noise scales must be nonnegative");
  PopulationMoments m;
  m.sigma = arms.sigma;
  m.x_mean = Eigen::VectorXd::Zero(p);
  m.mu1 = arms.mu1;
  m.mu0 = arms.mu0;
  m.omega1 = arms.sigma * arms.b1;
  m.omega0 = arms.sigma * arms.b0;
  m.m2_1 = arms.mu1 * arms.mu1 + arms.b1.dot(m.omega1) + arms.s1 * arms.s1;
  m.m2_0 = arms.mu0 * arms.mu0 + arms.b0.dot(m.omega0) + arms.s0 * arms.s0;
  m.validate();

  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(arms.sigma).matrixL();
  OutcomeSampler sampler;
  sampler.p = p;
  sampler.draw = [chol, arms, p](Rng& rng) {
    std::normal_distribution<double> nd;
    Eigen::VectorXd z(p);
    for (int j = 0; j < p; ++j) z[j] = nd(rng);
    UnitDraw d;
    d.x = chol * z;
    d.y1 = arms.mu1 + arms.b1.dot(d.x) + arms.s1 * nd(rng);
    d.y0 = arms.mu0 + arms.b0.dot(d.x) + arms.s0 * nd(rng);
    return d;
  };

  PopulationSpec pop;
  pop.pi = pi;
  pop.moments = std::move(m);
  pop.sampler = std::move(sampler);
  pop.validate();
  return pop;
}

PopulationSolution solve_population(const ModelSpec& spec, const PopulationSpec& pop,
                                    const SamplerOptions& options) {
  pop.validate();
  Raw raw;
  PopulationSolution out;
  if (pop.moments) {
    raw = raw_from(*pop.moments);
  } else {
    Accumulator pooled(pop.sampler->p);
    for (const auto& b : sample_batches(*pop.sampler, options)) pooled.merge(b);
    raw = pooled.raw();
    out.approximate = true;
  }
  const Solved s = solve_raw(spec, raw, pop.pi);
  out.theta = s.theta;
  out.beta_ate = raw.r[1][0] - raw.r[0][0];
  out.residual_m2_1 = s.e2[1];
  out.residual_m2_0 = s.e2[0];
  return out;
}

Eigen::VectorXd population_score(const ModelSpec& spec, const PopulationSpec& pop,
                                 const Coefficients& theta) {
  const Raw raw = raw_from(require_moments(pop));
  const auto cols = design_columns(spec);
  const Eigen::VectorXd free = theta.free_vector(cols);
  const double w[2] = {1.0 - pop.pi, pop.pi};
  Eigen::VectorXd score = Eigen::VectorXd::Zero(free.size());
  for (int a = 0; a < 2; ++a) {
    const Eigen::MatrixXd l = selector(cols, a, spec.p());
    const Eigen::VectorXd c = l.transpose() * free + fixed_part(spec, a);
    score += w[a] * l * (raw.r[a] - raw.m * c);
  }
  return score;
}

VarianceValue asymptotic_variance_known_mean(const ModelSpec& spec,
                                             const PopulationSpec& pop,
                                             const SamplerOptions& options) {
  return evaluate(pop, options,
                  [&](const Raw& c) { return known_mean_variance(spec, c, pop.pi); });
}

VarianceValue asymptotic_variance_centered(const ModelSpec& spec,
                                           const PopulationSpec& pop,
                                           const SamplerOptions& options) {
  return evaluate(pop, options,
                  [&](const Raw& c) { return centered_variance(spec, c, pop.pi); });
}

double variance_gap_theorem2(const ModelSpec& spec1, const ModelSpec& spec2,
                             const PopulationSpec& pop) {
  const Raw c = centered(raw_from(require_moments(pop)));
  if (spec1.p() != spec2.p() || spec1.p() != c.p()) {
    throw ValidationError("models and population disagree on p");
  }
  if (spec1.same_constraints(spec2)) return 0.0;
  if (!nested(spec1, spec2) || spec1.unrestricted_gamma() != spec1.unrestricted_delta()) {
    throw ValidationError(
        "gap formula needs Gamma1 >= Gamma2, Delta1 >= Delta2 and U(Gamma1) == U(Delta1)");
  }
  const double pi = pop.pi;
  const Solved s1 = solve_raw(spec1, c, pi);
  const Solved s2 = solve_raw(spec2, c, pi);
  const Eigen::VectorXd d = (s1.theta.gamma - s2.theta.gamma) +
                            (1.0 - pi) * (s1.theta.delta - s2.theta.delta);
  return d.dot(sigma_of(c) * d) / (pi * (1.0 - pi));
}

double ancova_anova_gap(const PopulationSpec& pop) {
  const Raw c = centered(raw_from(require_moments(pop)));
  const double pi = pop.pi;
  const Solved full = solve_raw(named_spec(NamedEstimator::ANHECOVA, c.p()), c, pi);
  const Eigen::VectorXd& gf = full.theta.gamma;
  const Eigen::VectorXd& df = full.theta.delta;
  const Eigen::VectorXd left = gf + pi * df;
  const Eigen::VectorXd right = (3.0 * pi - 2.0) * df - gf;
  return left.dot(sigma_of(c) * right) / (pi * (1.0 - pi));
}

double interactions_only_anova_gap(const PopulationSpec& pop) {
  const PopulationMoments& m = require_moments(pop);
  const Eigen::LLT<Eigen::MatrixXd> llt(m.sigma);
  const Eigen::VectorXd s_inv_w1 = llt.solve(m.omega1);
  const double q11 = m.omega1.dot(s_inv_w1);
  return s_inv_w1.dot(m.omega1 - 2.0 * m.omega0) - q11 / pop.pi;
}

PopulationSpec make_counterexample(CounterexampleKind kind, double pi) {
  check_pi(pi);
  LinearGaussianArms arms;
  arms.sigma = Eigen::MatrixXd::Identity(1, 1);
  arms.b1.resize(1);
  arms.b0.resize(1);
  switch (kind) {
    case CounterexampleKind::AncovaWorse:
      if (std::abs(pi - 0.5) < 1e-12) {
        throw ValidationError("AncovaWorse needs pi != 1/2: the gap is (2 pi - 1)^2 d' S d");
      }
      // gamma_f = pi - 1, delta_f = 1.
      arms.mu1 = 1.0;
      arms.mu0 = 0.0;
      arms.b0[0] = pi - 1.0;
      arms.b1[0] = pi;
      break;
    case CounterexampleKind::InteractionsOnlyWorseCentered:
      if (pi <= 0.5) {
        throw ValidationError(
            "InteractionsOnlyWorseCentered needs pi > 1/2: with Omega_0 = -Omega_1 / 2 the "
            "centered gap is (2 pi - 1) / pi * Omega_1' S^-1 Omega_1");
      }
      arms.mu1 = 1.0;
      arms.mu0 = 0.0;
      arms.b1[0] = 1.0;
      arms.b0[0] = -0.5;
      break;
  }
  return linear_gaussian_population(arms, pi);
}

MonteCarloMean approximate_beta_ate(const OutcomeSampler& sampler, long n_draws,
                                    std::uint64_t seed) {
  if (!sampler.draw) throw ValidationError("approximate_beta_ate needs a sampler");
  if (n_draws < 2) throw ValidationError("approximate_beta_ate needs n_draws >= 2");
  Rng rng = make_rng(derive_seed(seed, {hash_label("beta_ate")}));
  // Welford update keeps 1e7-draw sums accurate.
  double mean = 0.0, m2 = 0.0;
  for (long i = 0; i < n_draws; ++i) {
    const UnitDraw d = sampler.draw(rng);
    const double diff = d.y1 - d.y0;
    const double delta = diff - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (diff - mean);
  }
  const double var = m2 / static_cast<double>(n_draws - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_draws))};
}

MonteCarloMean approximate_beta_ate(const PopulationSpec& pop, long n_draws,
                                    std::uint64_t seed) {
  if (!pop.sampler) throw ValidationError("approximate_beta_ate needs a sampler");
  return approximate_beta_ate(*pop.sampler, n_draws, seed);
}

PopulationSpec random_population(int p, double pi, Rng& rng) {
  if (p < 1) throw ValidationError("random_population needs p >= 1");
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_real_distribution<double> scale(0.5, 2.0);

  Eigen::MatrixXd g(p, p + 2);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  const Eigen::MatrixXd w = g * g.transpose() / static_cast<double>(p + 2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = ev.maxCoeff() / 1e3;
  for (Eigen::Index j = 0; j < p; ++j) ev[j] = std::max(ev[j], floor);
  Eigen::MatrixXd sigma = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  sigma = 0.5 * (sigma + sigma.transpose());

  LinearGaussianArms arms;
  arms.sigma = sigma;
  arms.mu1 = coef(rng);
  arms.mu0 = coef(rng);
  arms.b1.resize(p);
  arms.b0.resize(p);
  for (int j = 0; j < p; ++j) arms.b1[j] = coef(rng);
  for (int j = 0; j < p; ++j) arms.b0[j] = coef(rng);
  arms.s1 = scale(rng);
  arms.s0 = scale(rng);
  return linear_gaussian_population(arms, pi);
}

PopulationSpec scenario1_population(double pi) {
  LinearGaussianArms arms;
  arms.sigma = Eigen::MatrixXd::Identity(1, 1);
  arms.mu1 = 5.0;
  arms.mu0 = 3.0;
  arms.b1 = Eigen::VectorXd::Constant(1, 2.5);
  arms.b0 = Eigen::VectorXd::Constant(1, 1.0);
  return linear_gaussian_population(arms, pi);
}

SampleDraw draw_sample(const PopulationSpec& pop, int n, Rng& rng) {
  pop.validate();
  if (!pop.sampler) throw ValidationError("draw_sample needs a sampler");
  if (n < 1) throw ValidationError("draw_sample needs n >= 1");
  const int p = pop.sampler->p;
  SampleDraw out;
  out.data.a.resize(n);
  out.data.x.resize(n, p);
  out.data.y.resize(n);
  out.y1.resize(n);
  out.y0.resize(n);
  std::bernoulli_distribution assign(pop.pi);
  for (int i = 0; i < n; ++i) {
    const UnitDraw d = pop.sampler->draw(rng);
    const bool treated = assign(rng);
    out.data.a[i] = treated ? 1.0 : 0.0;
    out.data.x.row(i) = d.x.transpose();
    out.y1[i] = d.y1;
    out.y0[i] = d.y0;
    out.data.y[i] = treated ? d.y1 : d.y0;
  }
  return out;
}

}  // namespace regadj
