#include "regadj/io.hpp"

#include "regadj/errors.hpp"
#include "regadj/formula.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace regadj {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw ValidationError(fmt::format("line {}: {}", line, what));
}

double parse_number(const std::string& field, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    fail_at(line, fmt::format("column '{}': '{}' is not a finite number", column, field));
  }
  return v;
}

json vec(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json mat(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vec(m.row(i).transpose()));
  return out;
}

Eigen::VectorXd read_vec(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ValidationError(fmt::format("population JSON: '{}' must be an array", key));
  }
  const auto& a = j[key];
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) {
      throw ValidationError(fmt::format("population JSON: '{}' must hold numbers", key));
    }
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

double read_num(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ValidationError(fmt::format("population JSON: '{}' must be a number", key));
  }
  return j[key].get<double>();
}

json pi_json(const std::optional<double>& pi) { return pi ? json(*pi) : json(nullptr); }

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    header = split_fields(line);
    break;
  }
  if (header.empty()) throw ValidationError("CSV input is empty (a header row is required)");

  int col_a = -1, col_y = -1, col_w = -1;
  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  for (std::size_t k = 0; k < header.size(); ++k) {
    const std::string& h = header[k];
    if (h.empty()) fail_at(lineno, fmt::format("header column {} is empty", k + 1));
    for (std::size_t m = 0; m < k; ++m) {
      if (header[m] == h) fail_at(lineno, fmt::format("duplicate header column '{}'", h));
    }
    if (h == "a") {
      col_a = static_cast<int>(k);
    } else if (h == "y") {
      col_y = static_cast<int>(k);
    } else if (h == "w") {
      col_w = static_cast<int>(k);
    } else {
      if (h == "A") fail_at(lineno, "covariate name 'A' is reserved for the treatment");
      cov_cols.push_back(static_cast<int>(k));
      cov_names.push_back(h);
    }
  }
  if (col_a < 0) fail_at(lineno, "header has no 'a' column");
  if (col_y < 0) fail_at(lineno, "header has no 'y' column");

  std::vector<double> a, y, w, x;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      fail_at(lineno, fmt::format("expected {} fields, found {}", header.size(), fields.size()));
    }
    const double av = parse_number(fields[col_a], lineno, "a");
    if (av != 0.0 && av != 1.0) {
      fail_at(lineno, fmt::format("treatment indicator a must be 0 or 1, got '{}'", fields[col_a]));
    }
    a.push_back(av);
    y.push_back(parse_number(fields[col_y], lineno, "y"));
    if (col_w >= 0) {
      const double wv = parse_number(fields[col_w], lineno, "w");
      if (!(wv > 0.0)) fail_at(lineno, "weight w must be positive");
      w.push_back(wv);
    }
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      x.push_back(parse_number(fields[cov_cols[j]], lineno, cov_names[j]));
    }
  }
  if (a.empty()) throw ValidationError("CSV input has a header but no data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(a.size());
  const Eigen::Index p = static_cast<Eigen::Index>(cov_cols.size());
  Dataset d;
  d.a = Eigen::Map<Eigen::VectorXd>(a.data(), n);
  d.y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  d.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      x.data(), n, p);
  if (col_w >= 0) d.weights = Eigen::Map<Eigen::VectorXd>(w.data(), n);
  d.covariate_names = cov_names;
  d.validate();
  return d;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_csv(in);
}

json to_json(const FitResult& fit) {
  const auto& names = fit.covariate_names;
  json coefs = json::array();
  const Eigen::VectorXd free = fit.theta_hat.free_vector(fit.columns);
  for (std::size_t k = 0; k < fit.columns.size(); ++k) {
    const bool has_v = fit.vcov.rows() == static_cast<Eigen::Index>(fit.columns.size());
    coefs.push_back({{"term", fit.columns[k].label(names)},
                     {"estimate", free[k]},
                     {"se", has_v ? json(std::sqrt(std::max(fit.vcov(k, k), 0.0)))
                                  : json(nullptr)}});
  }
  json fixed = json::array();
  for (int j = 0; j < fit.spec.p(); ++j) {
    const std::string& nm = names[j];
    if (fit.spec.gamma[j].is_fixed()) {
      fixed.push_back({{"term", nm}, {"value", fit.spec.gamma[j].value()}});
    }
    if (fit.spec.delta[j].is_fixed()) {
      fixed.push_back({{"term", "A:" + nm}, {"value", fit.spec.delta[j].value()}});
    }
  }
  return {{"formula", format_formula(fit.spec, names)},
          {"centering", fit.spec.centering.is_empirical() ? "empirical" : "known-mean"},
          {"n", fit.n_used},
          {"ate_hat", fit.ate_hat},
          {"ate_se", fit.ate_se},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"centering_correction", fit.centering_correction},
          {"variance_clamped", fit.variance_clamped},
          {"x_center", vec(fit.x_center)},
          {"coefficients", coefs},
          {"fixed", fixed}};
}

json to_json(const DominanceVerdict& v) {
  const auto& e = v.explanation;
  return {{"verdict", to_string(v.verdict)},
          {"clause", to_string(v.clause)},
          {"centering", to_string(v.centering)},
          {"summary", v.summary},
          {"explanation",
           {{"gamma_nested", e.gamma_nested},
            {"delta_nested", e.delta_nested},
            {"pi_half", e.pi_half},
            {"interactions_cover_mains", e.interactions_cover_mains},
            {"free_sets_equal", e.free_sets_equal},
            {"gamma_equal", e.gamma_equal}}}};
}

json to_json(const Table1Report& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"model1", row.model1},
                    {"model2", row.model2},
                    {"known_mean", to_json(row.known_mean)},
                    {"centered", to_json(row.centered)}});
  }
  return {{"p", r.p}, {"pi", r.pi}, {"rows", rows}};
}

json to_json(const CorollaryReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"claim", e.claim},
                       {"model1", e.model1},
                       {"model2", e.model2},
                       {"certified", e.certified},
                       {"verdict", to_json(e.verdict)}});
  }
  return {{"pi", r.pi}, {"entries", entries}};
}

json to_json(const CellResult& c) {
  return {{"scenario", c.scenario}, {"model", c.model},   {"pi", pi_json(c.pi)},
          {"n", c.n},               {"reps", c.reps},     {"bias", c.bias},
          {"sd", c.sd},             {"mc_se", c.mc_se},   {"fail_rate", c.fail_rate},
          {"mean_se", c.mean_se},   {"beta_ate", c.beta_ate},
          {"failed", c.failed},     {"seed", c.seed}};
}

json to_json(const MonteCarloReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return {{"seed", r.seed}, {"cells", cells}};
}

json to_json(const DidLdvReport& r) {
  json out = to_json(r.report);
  out["sd_did"] = r.sd_did;
  out["sd_ldv"] = r.sd_ldv;
  out["sd_diff_se"] = r.sd_diff_se;
  out["ldv_not_worse"] = r.ldv_not_worse();
  return out;
}

json population_to_json(const PopulationSpec& pop, const std::vector<std::string>& covariates) {
  if (!pop.moments) throw ValidationError("only moment-mode populations serialize to JSON");
  const auto& m = *pop.moments;
  json out = {{"pi", pop.pi},         {"sigma", mat(m.sigma)},   {"mu1", m.mu1},
              {"mu0", m.mu0},         {"omega1", vec(m.omega1)}, {"omega0", vec(m.omega0)},
              {"m2_1", m.m2_1},       {"m2_0", m.m2_0}};
  if (m.x_mean.size()) out["x_mean"] = vec(m.x_mean);
  if (!covariates.empty()) out["covariates"] = covariates;
  return out;
}

PopulationSpec population_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("population JSON must be an object");
  PopulationSpec pop;
  pop.pi = read_num(j, "pi");
  PopulationMoments m;
  if (!j.contains("sigma") || !j["sigma"].is_array() || j["sigma"].empty()) {
    throw ValidationError("population JSON: 'sigma' must be a nonempty array of rows");
  }
  const auto& rows = j["sigma"];
  const Eigen::Index p = static_cast<Eigen::Index>(rows.size());
  m.sigma.resize(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != p) {
      throw ValidationError("population JSON: 'sigma' must be square");
    }
    for (Eigen::Index k = 0; k < p; ++k) {
      const auto& cell = row[static_cast<std::size_t>(k)];
      if (!cell.is_number()) throw ValidationError("population JSON: 'sigma' must hold numbers");
      m.sigma(i, k) = cell.get<double>();
    }
  }
  m.mu1 = read_num(j, "mu1");
  m.mu0 = read_num(j, "mu0");
  m.omega1 = read_vec(j, "omega1");
  m.omega0 = read_vec(j, "omega0");
  m.m2_1 = read_num(j, "m2_1");
  m.m2_0 = read_num(j, "m2_0");
  if (j.contains("x_mean")) m.x_mean = read_vec(j, "x_mean");
  if (j.contains("covariates")) {
    const auto& c = j["covariates"];
    if (!c.is_array() || static_cast<Eigen::Index>(c.size()) != p) {
      throw ValidationError("population JSON: 'covariates' must list p names");
    }
  }
  pop.moments = std::move(m);
  pop.validate();
  return pop;
}

std::string format_fit(const FitResult& fit) {
  const auto& names = fit.covariate_names;
  std::string out;
  out += fmt::format("model      : {}\n", format_formula(fit.spec, names));
  out += fmt::format("centering  : {}\n",
                     fit.spec.centering.is_empirical() ? "empirical" : "known mean");
  out += fmt::format("n          : {}\n", fit.n_used);
  out += fmt::format("ate_hat    : {:.6f}\n", fit.ate_hat);
  out += fmt::format("ate_se     : {:.6f}{}\n", fit.ate_se,
                     fit.variance_clamped ? "  (variance clamped at 0)" : "");
  if (!fit.converged) out += "warning    : IRLS did not converge\n";
  out += fmt::format("\n{:<16} {:>14} {:>14}\n", "term", "estimate", "se");
  const Eigen::VectorXd free = fit.theta_hat.free_vector(fit.columns);
  const bool has_v = fit.vcov.rows() == static_cast<Eigen::Index>(fit.columns.size());
  for (std::size_t k = 0; k < fit.columns.size(); ++k) {
    const std::string se =
        has_v ? fmt::format("{:>14.6f}", std::sqrt(std::max(fit.vcov(k, k), 0.0)))
              : fmt::format("{:>14}", "-");
    out += fmt::format("{:<16} {:>14.6f} {}\n", fit.columns[k].label(names), free[k], se);
  }
  for (int j = 0; j < fit.spec.p(); ++j) {
    if (fit.spec.gamma[j].is_fixed() && fit.spec.gamma[j].value() != 0.0) {
      out += fmt::format("{:<16} {:>14.6f} {:>14}\n", names[j], fit.spec.gamma[j].value(),
                         "(fixed)");
    }
    if (fit.spec.delta[j].is_fixed() && fit.spec.delta[j].value() != 0.0) {
      out += fmt::format("{:<16} {:>14.6f} {:>14}\n", "A:" + names[j],
                         fit.spec.delta[j].value(), "(fixed)");
    }
  }
  return out;
}

}  // namespace regadj
