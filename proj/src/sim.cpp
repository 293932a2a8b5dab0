#include "regadj/sim.hpp"

#include "regadj/errors.hpp"
#include "regadj/estimate.hpp"

#include <fmt/format.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <thread>

namespace regadj {
namespace {

constexpr double kFailThreshold = 0.01;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [0, count); every index is handled exactly once.
void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  const int workers = std::min(resolve_threads(threads), std::max(count, 1));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> has_error{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!has_error.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Replication estimates (NaN on failure), rows = models, cols = replications.
struct RawRuns {
  Eigen::MatrixXd est;
  Eigen::MatrixXd se;
};

using DrawFn = std::function<Dataset(Rng&)>;
using FitFn = std::function<FitResult(const ModelSpec&, const Dataset&)>;

RawRuns replicate(const std::vector<GridModel>& models, int reps, std::uint64_t cell_seed,
                  int threads, const DrawFn& draw, const FitFn& fit) {
  RawRuns runs{Eigen::MatrixXd::Constant(models.size(), reps, kNaN),
               Eigen::MatrixXd::Constant(models.size(), reps, kNaN)};
  parallel_for(reps, threads, [&](int r) {
    Rng rng = make_rng(derive_seed(cell_seed, {std::uint64_t(r)}));
    const Dataset data = draw(rng);
    for (std::size_t m = 0; m < models.size(); ++m) {
      try {
        const FitResult f = fit(models[m].spec, data);
        if (!f.converged || !std::isfinite(f.ate_hat)) continue;
        runs.est(m, r) = f.ate_hat;
        runs.se(m, r) = f.ate_se;
      } catch (const Error&) {
        // Counted as a failed replication.
      }
    }
  });
  return runs;
}

CellResult summarize(const Eigen::VectorXd& est, const Eigen::VectorXd& se, double beta_ate) {
  CellResult c;
  c.reps = static_cast<int>(est.size());
  c.beta_ate = beta_ate;
  double sum = 0.0, sum_se = 0.0;
  int ok = 0;
  for (Eigen::Index r = 0; r < est.size(); ++r) {
    if (std::isnan(est[r])) continue;
    sum += est[r];
    sum_se += se[r];
    ++ok;
  }
  c.failures = c.reps - ok;
  c.fail_rate = c.reps ? static_cast<double>(c.failures) / c.reps : 0.0;
  c.failed = c.fail_rate > kFailThreshold;
  if (ok == 0) {
    c.bias = c.sd = c.mc_se = c.mean_se = kNaN;
    return c;
  }
  const double mean = sum / ok;
  double ss = 0.0;
  for (Eigen::Index r = 0; r < est.size(); ++r) {
    if (!std::isnan(est[r])) ss += (est[r] - mean) * (est[r] - mean);
  }
  c.bias = mean - beta_ate;
  c.sd = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
  c.mc_se = c.sd / std::sqrt(static_cast<double>(ok));
  c.mean_se = sum_se / ok;
  return c;
}

std::uint64_t pi_key(std::optional<double> pi) {
  return pi ? std::bit_cast<std::uint64_t>(*pi) : hash_label("x-dependent");
}

std::string fmt_pi(const std::optional<double>& pi) {
  return pi ? fmt::format("{}", *pi) : std::string("NA");
}

}  // namespace

bool scenario_uses_pi(int scenario) { return scenario == 1 || scenario == 2; }

void validate_scenario(int scenario) {
  if (scenario < 1 || scenario > 4) {
    throw ValidationError("unknown scenario " + std::to_string(scenario) +
                          " (expected 1, 2, 3 or 4)");
  }
}

ScenarioDraw draw_scenario(int scenario, int n, double pi, Rng& rng) {
  validate_scenario(scenario);
  if (n < 1) throw ValidationError("n must be positive");
  if (scenario_uses_pi(scenario) && !(pi > 0.0 && pi < 1.0)) {
    throw ValidationError("pi must lie in (0, 1)");
  }
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = 2.0 + nd(rng);
  x.array() -= x.mean();

  ScenarioDraw out;
  out.y1.resize(n);
  out.y0.resize(n);
  out.propensity.resize(n);
  out.data.a.resize(n);
  out.data.y.resize(n);
  out.data.x = x;
  for (int i = 0; i < n; ++i) {
    const double xi = x[i];
    switch (scenario) {
      case 1:
        out.y1[i] = 5.0 + 2.5 * xi + nd(rng);
        out.y0[i] = 3.0 + xi + nd(rng);
        out.propensity[i] = pi;
        break;
      case 2: {
        std::poisson_distribution<long> p1(std::exp(3.0 + 0.6 * xi));
        std::poisson_distribution<long> p0(std::exp(1.0 + 0.6 * xi));
        out.y1[i] = static_cast<double>(p1(rng));
        out.y0[i] = static_cast<double>(p0(rng));
        out.propensity[i] = pi;
        break;
      }
      default:
        out.y1[i] = 7.0 + xi + nd(rng);
        out.y0[i] = 2.0 - xi + xi * xi + nd(rng);
        out.propensity[i] = logistic(4.0 - 2.0 * xi);
        break;
    }
    const bool treated = unif(rng) < out.propensity[i];
    out.data.a[i] = treated ? 1.0 : 0.0;
    out.data.y[i] = treated ? out.y1[i] : out.y0[i];
  }
  if (scenario == 4) {
    out.data.weights =
        (1.0 / (out.propensity.array() * (1.0 - out.propensity.array()))).matrix();
  }
  return out;
}

OutcomeSampler scenario_sampler(int scenario) {
  validate_scenario(scenario);
  OutcomeSampler s;
  s.p = 1;
  s.draw = [scenario](Rng& rng) {
    std::normal_distribution<double> nd;
    UnitDraw d;
    d.x.resize(1);
    const double x = nd(rng);
    d.x[0] = x;
    if (scenario == 1) {
      d.y1 = 5.0 + 2.5 * x + nd(rng);
      d.y0 = 3.0 + x + nd(rng);
    } else if (scenario == 2) {
      std::poisson_distribution<long> p1(std::exp(3.0 + 0.6 * x));
      std::poisson_distribution<long> p0(std::exp(1.0 + 0.6 * x));
      d.y1 = static_cast<double>(p1(rng));
      d.y0 = static_cast<double>(p0(rng));
    } else {
      d.y1 = 7.0 + x + nd(rng);
      d.y0 = 2.0 - x + x * x + nd(rng);
    }
    return d;
  };
  return s;
}

Centering scenario_centering() { return Centering::known_zero(1); }

double scenario_beta_ate(int scenario) {
  validate_scenario(scenario);
  switch (scenario) {
    case 1: return 2.0;
    // E exp(c + 0.6 X) = exp(c + 0.18) for X ~ N(0, 1).
    case 2: return (std::exp(3.0) - std::exp(1.0)) * std::exp(0.18);
    default: return 4.0;
  }
}

const CellResult& MonteCarloReport::cell(const std::string& model,
                                         std::optional<double> pi) const {
  for (const auto& c : cells) {
    if (c.model != model) continue;
    if (!pi || (c.pi && std::abs(*c.pi - *pi) < 1e-12)) return c;
  }
  throw ValidationError("no cell for model '" + model + "'" +
                        (pi ? " at pi=" + fmt::format("{}", *pi) : std::string()));
}

std::string MonteCarloReport::to_csv() const {
  std::string out = "scenario,model,pi,n,reps,bias,sd,mc_se,fail_rate\n";
  for (const auto& c : cells) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", c.scenario, c.model, fmt_pi(c.pi), c.n,
                       c.reps, c.bias, c.sd, c.mc_se, c.fail_rate);
  }
  return out;
}

std::string MonteCarloReport::to_text() const {
  std::string out = fmt::format("{:<9} {:<22} {:>5} {:>6} {:>6} {:>10} {:>9} {:>9} {:>9}\n",
                                "scenario", "model", "pi", "n", "reps", "bias*1000",
                                "sd*1000", "mc_se", "fail");
  for (const auto& c : cells) {
    out += fmt::format("{:<9} {:<22} {:>5} {:>6} {:>6} {:>10.1f} {:>9.1f} {:>9.4f} {:>9.4f}\n",
                       c.scenario, c.model, fmt_pi(c.pi), c.n, c.reps, 1000.0 * c.bias,
                       1000.0 * c.sd, c.mc_se, c.fail_rate);
  }
  return out;
}

MonteCarloReport run_grid(const GridConfig& cfg) {
  validate_scenario(cfg.scenario);
  if (cfg.reps < 1) throw ValidationError("reps must be at least 1");
  if (cfg.n < 4) throw ValidationError("n must be at least 4");
  if (cfg.models.empty()) throw ValidationError("at least one model is required");
  for (const auto& m : cfg.models) {
    if (m.spec.p() != 1) {
      throw ValidationError("scenario models take exactly one covariate: '" + m.label + "'");
    }
    m.spec.validate();
  }
  std::vector<std::optional<double>> pis;
  if (scenario_uses_pi(cfg.scenario)) {
    if (cfg.pis.empty()) throw ValidationError("scenarios 1 and 2 need a list of pi values");
    for (double pi : cfg.pis) {
      if (!(pi > 0.0 && pi < 1.0)) throw ValidationError("pi values must lie in (0, 1)");
      pis.emplace_back(pi);
    }
  } else {
    pis.emplace_back(std::nullopt);
  }

  const int scenario = cfg.scenario;
  const int n = cfg.n;
  const double beta_ate = scenario_beta_ate(scenario);
  FitFn fit;
  switch (scenario) {
    case 2:
      fit = [](const ModelSpec& s, const Dataset& d) { return fit_poisson_glm(s, d); };
      break;
    case 4:
      fit = [](const ModelSpec& s, const Dataset& d) { return fit_weighted(s, d); };
      break;
    default:
      fit = [](const ModelSpec& s, const Dataset& d) { return fit_ols(s, d); };
      break;
  }

  MonteCarloReport report;
  report.seed = cfg.seed;
  for (const auto& pi : pis) {
    const std::uint64_t cell_seed =
        derive_seed(cfg.seed, {std::uint64_t(scenario), pi_key(pi)});
    const double pi_value = pi.value_or(0.5);
    const DrawFn draw = [=](Rng& rng) { return draw_scenario(scenario, n, pi_value, rng).data; };
    const RawRuns runs = replicate(cfg.models, cfg.reps, cell_seed, cfg.threads, draw, fit);
    for (std::size_t m = 0; m < cfg.models.size(); ++m) {
      CellResult c = summarize(runs.est.row(m).transpose(), runs.se.row(m).transpose(), beta_ate);
      c.scenario = std::to_string(scenario);
      c.model = cfg.models[m].label;
      c.pi = pi;
      c.n = n;
      c.seed = cell_seed;
      report.cells.push_back(std::move(c));
    }
  }
  return report;
}

std::vector<double> figure1_pis() {
  std::vector<double> out;
  for (int k = 1; k <= 9; ++k) out.push_back(k / 10.0);
  return out;
}

MonteCarloReport figure1_data(int reps, std::uint64_t seed, int n, int threads) {
  MonteCarloReport out;
  out.seed = seed;
  for (int scenario : {1, 2}) {
    GridConfig cfg;
    cfg.scenario = scenario;
    for (auto e : {NamedEstimator::ANOVA, NamedEstimator::ANCOVA, NamedEstimator::ANHECOVA}) {
      cfg.models.push_back({to_string(e), named_spec(e, 1, scenario_centering())});
    }
    cfg.pis = figure1_pis();
    cfg.reps = reps;
    cfg.n = n;
    cfg.seed = seed;
    cfg.threads = threads;
    auto r = run_grid(cfg);
    for (auto& c : r.cells) out.cells.push_back(std::move(c));
  }
  return out;
}

DidLdvReport did_vs_ldv_experiment(const DidLdvConfig& cfg) {
  if (cfg.reps < 2) throw ValidationError("reps must be at least 2");
  if (cfg.n < 8) throw ValidationError("n must be at least 8");
  if (!(cfg.pi > 0.0 && cfg.pi < 1.0)) throw ValidationError("pi must lie in (0, 1)");
  if (cfg.noise_var < 0.0) throw ValidationError("noise_var must be nonnegative");

  const std::vector<GridModel> models = {{"DiD", named_spec(NamedEstimator::DiD, 2)},
                                         {"LDV", named_spec(NamedEstimator::LDV, 2)}};
  const int n = cfg.n;
  const double pi = cfg.pi, b = cfg.baseline_coef, noise = std::sqrt(cfg.noise_var);
  const DrawFn draw = [=](Rng& rng) {
    std::normal_distribution<double> nd;
    std::bernoulli_distribution assign(pi);
    Dataset d;
    d.a.resize(n);
    d.x.resize(n, 2);
    d.y.resize(n);
    d.covariate_names = {"Y0", "X2"};
    for (int i = 0; i < n; ++i) {
      const double y0 = nd(rng), x2 = nd(rng);
      const double base = 1.0 + b * y0 + 0.5 * x2 + noise * nd(rng);
      const bool treated = assign(rng);
      d.x(i, 0) = y0;
      d.x(i, 1) = x2;
      d.a[i] = treated ? 1.0 : 0.0;
      d.y[i] = treated ? base + 1.0 + 0.5 * x2 : base;
    }
    return d;
  };
  const FitFn fit = [](const ModelSpec& s, const Dataset& d) { return fit_ols(s, d); };
  const std::uint64_t cell_seed = derive_seed(cfg.seed, {hash_label("did-ldv")});
  const RawRuns runs = replicate(models, cfg.reps, cell_seed, cfg.threads, draw, fit);

  DidLdvReport out;
  out.report.seed = cfg.seed;
  for (std::size_t m = 0; m < models.size(); ++m) {
    CellResult c = summarize(runs.est.row(m).transpose(), runs.se.row(m).transpose(), 1.0);
    c.scenario = "did-ldv";
    c.model = models[m].label;
    c.pi = cfg.pi;
    c.n = n;
    c.seed = cell_seed;
    out.report.cells.push_back(std::move(c));
  }
  out.sd_did = out.report.cells[0].sd;
  out.sd_ldv = out.report.cells[1].sd;

  // Delta method on paired squared deviations: d sd = d var / (2 sd).
  std::vector<double> g;
  const double m0 = out.report.cells[0].bias + 1.0, m1 = out.report.cells[1].bias + 1.0;
  for (int r = 0; r < cfg.reps; ++r) {
    const double e0 = runs.est(0, r), e1 = runs.est(1, r);
    if (std::isnan(e0) || std::isnan(e1)) continue;
    g.push_back((e1 - m1) * (e1 - m1) / (2.0 * out.sd_ldv) -
                (e0 - m0) * (e0 - m0) / (2.0 * out.sd_did));
  }
  if (g.size() > 1) {
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    double ss = 0.0;
    for (double v : g) ss += (v - mean) * (v - mean);
    out.sd_diff_se = std::sqrt(ss / static_cast<double>(g.size() - 1) /
                               static_cast<double>(g.size()));
  }
  return out;
}

}  // namespace regadj
