#pragma once

#include "regadj/dominance.hpp"
#include "regadj/estimate.hpp"
#include "regadj/population.hpp"
#include "regadj/sim.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace regadj {

// CSV with a mandatory header row. Columns `a` and `y` are required, `w` is
// read as per-unit weights, every other column is a covariate in header
// order. Errors cite the 1-based file line.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);

nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const DominanceVerdict& v);
nlohmann::json to_json(const Table1Report& r);
nlohmann::json to_json(const CorollaryReport& r);
nlohmann::json to_json(const CellResult& c);
nlohmann::json to_json(const MonteCarloReport& r);
nlohmann::json to_json(const DidLdvReport& r);

// Moment-mode population record:
// {"pi", "sigma", "mu1", "mu0", "omega1", "omega0", "m2_1", "m2_0",
//  optional "x_mean", optional "covariates"}.
nlohmann::json population_to_json(const PopulationSpec& pop,
                                  const std::vector<std::string>& covariates = {});
PopulationSpec population_from_json(const nlohmann::json& j);

// Human-readable coefficient table.
std::string format_fit(const FitResult& fit);

}  // namespace regadj
