#include "cli.hpp"

#include "regadj/dominance.hpp"
#include "regadj/errors.hpp"
#include "regadj/estimate.hpp"
#include "regadj/formula.hpp"
#include "regadj/io.hpp"
#include "regadj/population.hpp"
#include "regadj/sim.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace regadj::cli {
namespace {

using nlohmann::json;

constexpr const char* kFooter = R"(Exit codes: 0 success, 1 I/O or unexpected error, 2 invalid flags/input/model,
3 singular design, 4 IRLS divergence.

CSV input: UTF-8, header row required, '.' decimal separator. Column 'a' is
the 0/1 treatment, 'y' the outcome, optional 'w' per-unit weights; every other
column is a covariate. Errors cite the file line.

Model formulas: '1 + A' plus any of 'Xj', 'A:Xj', 'Xj@c', 'A:Xj@c' ('@c' fixes
the coefficient at c); 'X' / 'A:X' expand to all covariates. Names ANOVA,
ANCOVA, ANHECOVA, DiD and LDV are also accepted.

Scenario 1 is read as Y(1) = 5 + 2.5 X + e1 (the treated outcome, A = 1).
Scenario outcomes are generated from the sample-centered covariate, so
simulate fits every model with known covariate mean 0.)";

struct Common {
  std::string format = "text";
  std::string out_path;
};

void emit(const Common& c, const std::string& text, std::ostream& out) {
  if (c.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out_path);
  if (!f) throw std::runtime_error("cannot write '" + c.out_path + "'");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

// Named estimator or formula.
ModelSpec model_from(const std::string& text, const std::vector<std::string>& names,
                     Centering centering) {
  const std::string t = lower(text);
  for (const char* n : {"anova", "ancova", "anhecova", "did", "ldv"}) {
    if (t == n) {
      return named_spec(parse_named_estimator(text), static_cast<int>(names.size()), centering);
    }
  }
  return parse_formula(text, names, centering);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(what + ": '" + s + "' is not a number");
  }
}

// "a:b:step" or "v1,v2,...".
std::vector<double> parse_pis(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ValidationError("--pis range must be start:stop:step");
    const double a = to_double(parts[0], "--pis"), b = to_double(parts[1], "--pis"),
                 step = to_double(parts[2], "--pis");
    if (!(step > 0.0) || b < a) throw ValidationError("--pis range needs step > 0 and stop >= start");
    const long count = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
    for (long k = 0; k < count; ++k) {
      out.push_back(std::round((a + k * step) * 1e12) / 1e12);
    }
  } else {
    for (const auto& s : split(text, ',')) out.push_back(to_double(s, "--pis"));
  }
  if (out.empty()) throw ValidationError("--pis is empty");
  return out;
}

Centering centering_from(const std::string& mode, const std::string& x_mean, int p) {
  if (mode == "empirical") {
    if (!x_mean.empty()) throw ValidationError("--x-mean needs --centering known-mean");
    return Centering::empirical();
  }
  if (mode != "known-mean") throw ValidationError("--centering must be known-mean or empirical");
  if (x_mean.empty()) return Centering::known_zero(p);
  const auto parts = split(x_mean, ',');
  if (static_cast<int>(parts.size()) != p) {
    throw ValidationError(fmt::format("--x-mean needs {} values", p));
  }
  Eigen::VectorXd mu(p);
  for (int j = 0; j < p; ++j) mu[j] = to_double(parts[j], "--x-mean");
  return Centering::known_mean(mu);
}

std::vector<std::string> covariates_for(const std::string& explicit_list,
                                        const std::vector<std::string>& formulas) {
  if (!explicit_list.empty()) return split(explicit_list, ',');
  std::vector<std::string> names;
  for (const auto& f : formulas) {
    const std::string t = lower(f);
    if (t == "anova" || t == "ancova" || t == "anhecova" || t == "did" || t == "ldv") continue;
    for (const auto& id : formula_identifiers(f)) {
      if (std::find(names.begin(), names.end(), id) == names.end()) names.push_back(id);
    }
  }
  if (names.empty()) names = default_covariate_names(1);
  return names;
}

// --- estimate -------------------------------------------------------------

struct EstimateArgs {
  Common common;
  std::string data, model, centering = "empirical", x_mean, family = "gaussian",
                              sandwich = "HC0";
  std::optional<double> pi;
  bool estimate_pi = false, weighted = false;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  const Dataset data = read_csv_file(a.data);
  const Centering c = centering_from(a.centering, a.x_mean, data.p());
  const ModelSpec spec = model_from(a.model, data.names(), c);
  FitResult fit;
  if (a.family == "poisson") {
    if (a.weighted) throw ValidationError("--weighted is not available with --family poisson");
    fit = fit_poisson_glm(spec, data);
  } else if (a.family == "gaussian") {
    FitOptions opt;
    opt.sandwich = a.sandwich == "HC1" ? SandwichType::HC1 : SandwichType::HC0;
    if (a.weighted) {
      if (!data.weights) throw ValidationError("--weighted needs a 'w' column");
      fit = fit_weighted(spec, data, opt);
    } else {
      fit = fit_ols(spec, data, opt);
    }
  } else {
    throw ValidationError("--family must be gaussian or poisson");
  }

  std::optional<double> pi = a.pi;
  if (pi && a.estimate_pi) throw ValidationError("use either --pi or --estimate-pi");
  if (a.estimate_pi) {
    pi = static_cast<double>(data.n_treated()) / data.n();
    err << fmt::format("warning: pi estimated by the treated fraction ({:.6f}); the known-pi "
                       "variance formula assumes pi is fixed by design\n",
                       *pi);
  }
  std::optional<double> known_pi_se;
  if (pi && a.family == "gaussian") {
    known_pi_se = std::sqrt(lemma3_variance(fit, data, *pi) / data.n());
  }

  if (a.common.format == "json") {
    json j = to_json(fit);
    if (pi) j["pi"] = *pi;
    if (known_pi_se) j["known_pi_se"] = *known_pi_se;
    emit(a.common, dump(j), out);
  } else {
    std::string text = format_fit(fit);
    if (known_pi_se) {
      text += fmt::format("\nknown-pi se : {:.6f}  (pi = {})\n", *known_pi_se, *pi);
    }
    emit(a.common, text, out);
  }
  return kOk;
}

// --- check ----------------------------------------------------------------

struct CheckArgs {
  Common common;
  std::string model, model2, centering = "empirical", covariates;
  double pi = 0.5;
};

int cmd_check(const CheckArgs& a, std::ostream& out) {
  const auto names = covariates_for(a.covariates, {a.model, a.model2});
  const ModelSpec s1 = model_from(a.model, names, Centering::empirical());
  const ModelSpec s2 = model_from(a.model2, names, Centering::empirical());
  std::vector<DominanceVerdict> verdicts;
  if (a.centering == "known-mean" || a.centering == "both") {
    verdicts.push_back(check_known_mean(s1, s2, a.pi));
  }
  if (a.centering == "empirical" || a.centering == "both") {
    verdicts.push_back(check_centered(s1, s2, a.pi));
  }
  if (verdicts.empty()) throw ValidationError("--centering must be known-mean, empirical or both");

  if (a.common.format == "json") {
    json j = {{"model1", format_formula(s1, names)},
              {"model2", format_formula(s2, names)},
              {"pi", a.pi}};
    json vs = json::array();
    for (const auto& v : verdicts) vs.push_back(to_json(v));
    j["verdicts"] = vs;
    emit(a.common, dump(j), out);
  } else {
    std::string text = fmt::format("model 1: {}\nmodel 2: {}\npi: {}\n", format_formula(s1, names),
                                   format_formula(s2, names), a.pi);
    for (const auto& v : verdicts) {
      text += fmt::format("[{}] {} ({})\n  {}\n", to_string(v.centering), to_string(v.verdict),
                          to_string(v.clause), v.summary);
    }
    emit(a.common, text, out);
  }
  return kOk;
}

// --- compare --------------------------------------------------------------

struct CompareArgs {
  Common common;
  std::string population, counterexample, model, model2, covariates;
  std::optional<double> pi;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  PopulationSpec pop;
  std::vector<std::string> names;
  if (!a.population.empty() == !a.counterexample.empty()) {
    throw ValidationError("give exactly one of --population and --counterexample");
  }
  if (!a.population.empty()) {
    std::ifstream f(a.population);
    if (!f) throw ValidationError("cannot open '" + a.population + "'");
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("population JSON: ") + e.what());
    }
    pop = population_from_json(j);
    if (j.contains("covariates")) names = j["covariates"].get<std::vector<std::string>>();
    if (a.pi) pop.pi = *a.pi;
  } else {
    const std::string k = lower(a.counterexample);
    if (!a.pi) throw ValidationError("--counterexample needs --pi");
    if (k == "ancova-worse") {
      pop = make_counterexample(CounterexampleKind::AncovaWorse, *a.pi);
    } else if (k == "interactions-only-worse") {
      pop = make_counterexample(CounterexampleKind::InteractionsOnlyWorseCentered, *a.pi);
    } else {
      throw ValidationError("--counterexample must be ancova-worse or interactions-only-worse");
    }
  }
  pop.validate();
  if (names.empty()) {
    names = a.covariates.empty() ? default_covariate_names(pop.p()) : split(a.covariates, ',');
  }
  if (static_cast<int>(names.size()) != pop.p()) {
    throw ValidationError(fmt::format("population has {} covariates but {} names were given",
                                      pop.p(), names.size()));
  }
  const ModelSpec s1 = model_from(a.model, names, Centering::empirical());
  const ModelSpec s2 = model_from(a.model2, names, Centering::empirical());
  const double v1 = asymptotic_variance_known_mean(s1, pop).value;
  const double v2 = asymptotic_variance_known_mean(s2, pop).value;
  const double c1 = asymptotic_variance_centered(s1, pop).value;
  const double c2 = asymptotic_variance_centered(s2, pop).value;
  const auto km = check_known_mean(s1, s2, pop.pi);
  const auto ce = check_centered(s1, s2, pop.pi);
  std::optional<double> gap;
  if (ce.verdict != Verdict::NotGuaranteed) gap = variance_gap_theorem2(s1, s2, pop);

  if (a.common.format == "json") {
    json j = {{"pi", pop.pi},
              {"model1", format_formula(s1, names)},
              {"model2", format_formula(s2, names)},
              {"known_mean", {{"v1", v1}, {"v2", v2}, {"v2_minus_v1", v2 - v1},
                              {"check", to_json(km)}}},
              {"centered", {{"v1", c1}, {"v2", c2}, {"v2_minus_v1", c2 - c1},
                            {"check", to_json(ce)}}}};
    if (gap) j["centered"]["theorem2_gap"] = *gap;
    emit(a.common, dump(j), out);
  } else {
    std::string t = fmt::format("model 1: {}\nmodel 2: {}\npi: {}\n", format_formula(s1, names),
                                format_formula(s2, names), pop.pi);
    t += fmt::format("known mean : V1 = {:.9g}  V2 = {:.9g}  V2 - V1 = {:.9g}  [{}]\n", v1, v2,
                     v2 - v1, to_string(km.verdict));
    t += fmt::format("centered   : V1 = {:.9g}  V2 = {:.9g}  V2 - V1 = {:.9g}  [{}]\n", c1, c2,
                     c2 - c1, to_string(ce.verdict));
    if (gap) t += fmt::format("closed-form centered gap: {:.9g}\n", *gap);
    emit(a.common, t, out);
  }
  return kOk;
}

// --- simulate and friends ---------------------------------------------------

struct SimArgs {
  Common common;
  int scenario = 1;
  std::string models = "ANOVA,ANCOVA,ANHECOVA", pis;
  int reps = 1000, n = 1000, threads = 0;
  std::uint64_t seed = 0;
};

std::string render(const MonteCarloReport& r, const std::string& format) {
  if (format == "json") return dump(to_json(r));
  if (format == "text") return r.to_text();
  return r.to_csv();
}

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  validate_scenario(a.scenario);
  if (a.reps < 1) throw ValidationError("--reps must be at least 1");
  GridConfig cfg;
  cfg.scenario = a.scenario;
  cfg.reps = a.reps;
  cfg.n = a.n;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  const std::vector<std::string> names = default_covariate_names(1);
  for (const auto& m : split(a.models, ',')) {
    cfg.models.push_back({m, model_from(m, names, scenario_centering())});
  }
  if (scenario_uses_pi(a.scenario)) {
    cfg.pis = a.pis.empty() ? figure1_pis() : parse_pis(a.pis);
  }
  emit(a.common, render(run_grid(cfg), a.common.format), out);
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kInvalid;
  if (dynamic_cast<const SingularDesignError*>(&e)) return kSingular;
  if (dynamic_cast<const ConvergenceError*>(&e)) return kNoConverge;
  return kFailure;
}

void add_common(CLI::App* sub, Common& c, const std::string& default_format) {
  c.format = default_format;
  sub->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  sub->add_option("--out", c.out_path, "Write the report to this file instead of stdout");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regression-adjusted ATE estimators: fitting, dominance checks, population "
               "variances and simulations",
               "regadj"};
  app.footer(kFooter);
  app.require_subcommand(1);

  EstimateArgs est;
  auto* s_est = app.add_subcommand("estimate", "Fit a model to a CSV dataset");
  s_est->add_option("--data", est.data, "CSV input")->required();
  s_est->add_option("--model", est.model, "Model formula or estimator name")->required();
  s_est->add_option("--centering", est.centering, "known-mean or empirical")
      ->check(CLI::IsMember({"known-mean", "empirical"}))
      ->capture_default_str();
  s_est->add_option("--x-mean", est.x_mean, "Known covariate means, comma separated");
  s_est->add_option("--pi", est.pi, "Known assignment probability (adds the known-pi SE)")
      ->check(CLI::Range(0.0, 1.0));
  s_est->add_flag("--estimate-pi", est.estimate_pi, "Use the treated fraction as pi (warns)");
  s_est->add_flag("--weighted", est.weighted, "Weighted least squares with column w");
  s_est->add_option("--family", est.family, "gaussian or poisson")
      ->check(CLI::IsMember({"gaussian", "poisson"}))
      ->capture_default_str();
  s_est->add_option("--sandwich", est.sandwich, "HC0 or HC1")
      ->check(CLI::IsMember({"HC0", "HC1"}))
      ->capture_default_str();
  add_common(s_est, est.common, "text");

  CheckArgs chk;
  auto* s_chk = app.add_subcommand("check", "Check the sufficient dominance conditions");
  s_chk->add_option("--model", chk.model, "Model 1")->required();
  s_chk->add_option("--model2", chk.model2, "Model 2")->required();
  s_chk->add_option("--pi", chk.pi, "Assignment probability")->required();
  s_chk->add_option("--centering", chk.centering, "known-mean, empirical or both")
      ->check(CLI::IsMember({"known-mean", "empirical", "both"}))
      ->capture_default_str();
  s_chk->add_option("--covariates", chk.covariates,
                    "Covariate names, comma separated (default: inferred from the formulas)");
  add_common(s_chk, chk.common, "text");

  CompareArgs cmp;
  auto* s_cmp = app.add_subcommand("compare", "Population asymptotic variances of two models");
  s_cmp->add_option("--population", cmp.population, "Moment-mode population JSON");
  s_cmp->add_option("--counterexample", cmp.counterexample,
                    "ancova-worse or interactions-only-worse");
  s_cmp->add_option("--pi", cmp.pi, "Assignment probability (overrides the JSON value)");
  s_cmp->add_option("--model", cmp.model, "Model 1")->required();
  s_cmp->add_option("--model2", cmp.model2, "Model 2")->required();
  s_cmp->add_option("--covariates", cmp.covariates, "Covariate names, comma separated");
  add_common(s_cmp, cmp.common, "text");

  SimArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Monte Carlo run of a built-in scenario");
  s_sim->add_option("--scenario", sim.scenario, "1, 2, 3 or 4")->required();
  s_sim->add_option("--models", sim.models, "Comma-separated formulas or estimator names")
      ->capture_default_str();
  s_sim->add_option("--pis", sim.pis, "start:stop:step or a comma list (scenarios 1 and 2)");
  s_sim->add_option("--reps", sim.reps, "Replications per cell")->capture_default_str();
  s_sim->add_option("--n", sim.n, "Sample size")->capture_default_str();
  s_sim->add_option("--seed", sim.seed, "Base seed")->capture_default_str();
  s_sim->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
  add_common(s_sim, sim.common, "csv");

  double t1_pi = 0.5;
  int t1_p = 1;
  Common t1c;
  auto* s_t1 = app.add_subcommand("table1", "Dominance verdicts for the standard comparisons");
  s_t1->add_option("--pi", t1_pi, "Assignment probability")->required();
  s_t1->add_option("--p", t1_p, "Number of covariates")->capture_default_str();
  add_common(s_t1, t1c, "text");

  double co_pi = 0.5;
  Common coc;
  auto* s_co = app.add_subcommand("corollaries", "Which named orderings are certified");
  s_co->add_option("--pi", co_pi, "Assignment probability")->required();
  add_common(s_co, coc, "text");

  SimArgs fig;
  auto* s_fig = app.add_subcommand("figure1", "Scenarios 1 and 2 over pi = 0.1..0.9");
  s_fig->add_option("--reps", fig.reps, "Replications per cell")->capture_default_str();
  s_fig->add_option("--n", fig.n, "Sample size")->capture_default_str();
  s_fig->add_option("--seed", fig.seed, "Base seed")->capture_default_str();
  s_fig->add_option("--threads", fig.threads, "Worker threads (0 = all cores)");
  add_common(s_fig, fig.common, "csv");

  DidLdvConfig dl;
  Common dlc;
  auto* s_dl = app.add_subcommand("did-ldv", "DiD versus LDV with a baseline outcome");
  s_dl->add_option("--reps", dl.reps, "Replications")->capture_default_str();
  s_dl->add_option("--n", dl.n, "Sample size")->capture_default_str();
  s_dl->add_option("--pi", dl.pi, "Assignment probability")->capture_default_str();
  s_dl->add_option("--baseline-coef", dl.baseline_coef, "True coefficient on Y0")
      ->capture_default_str();
  s_dl->add_option("--seed", dl.seed, "Base seed")->capture_default_str();
  s_dl->add_option("--threads", dl.threads, "Worker threads (0 = all cores)");
  add_common(s_dl, dlc, "text");

  std::vector<const char*> argv{"regadj"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*s_est) return cmd_estimate(est, out, err);
    if (*s_chk) return cmd_check(chk, out);
    if (*s_cmp) return cmd_compare(cmp, out);
    if (*s_sim) return cmd_simulate(sim, out);
    if (*s_t1) {
      const auto r = table1(t1_p, t1_pi);
      emit(t1c, t1c.format == "json" ? dump(to_json(r)) : r.to_text(), out);
      return kOk;
    }
    if (*s_co) {
      const auto r = corollaries(co_pi);
      emit(coc, coc.format == "json" ? dump(to_json(r)) : r.to_text(), out);
      return kOk;
    }
    if (*s_fig) {
      if (fig.reps < 1) throw ValidationError("--reps must be at least 1");
      emit(fig.common, render(figure1_data(fig.reps, fig.seed, fig.n, fig.threads),
                              fig.common.format),
           out);
      return kOk;
    }
    if (*s_dl) {
      const auto r = did_vs_ldv_experiment(dl);
      std::string text;
      if (dlc.format == "json") {
        text = dump(to_json(r));
      } else if (dlc.format == "csv") {
        text = r.report.to_csv();
      } else {
        text = r.report.to_text() +
               fmt::format("SD(LDV) - SD(DiD) = {:.5f} (se {:.5f}); LDV not worse at 3 se: {}\n",
                           r.sd_ldv - r.sd_did, r.sd_diff_se, r.ldv_not_worse() ? "yes" : "no");
      }
      emit(dlc, text, out);
      return kOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kInvalid;
}

}  // namespace regadj::cli
