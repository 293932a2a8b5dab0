#pragma once

#include "regadj/model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace regadj {

// Parses the model mini-language
//
//   formula := term ("+" term)*
//   term    := "1" | "A" | ident | ident "@" number
//            | "A:" ident | "A:" ident "@" number | "X" | "A:X"
//
// `Xj` frees the main effect of covariate Xj, `A:Xj` frees its interaction,
// `@c` fixes the coefficient at c instead. `X` and `A:X` expand to every
// covariate (unless a covariate is itself named `X`). Terms that do not
// appear are fixed at zero. `1` and `A` are mandatory.
ModelSpec parse_formula(std::string_view text,
                        const std::vector<std::string>& covariate_names,
                        Centering centering = Centering::empirical());

// Inverse of parse_formula for the constraint sets; zero-fixed terms are
// omitted.
std::string format_formula(const ModelSpec& spec,
                           const std::vector<std::string>& covariate_names);

std::string format_formula(const ModelSpec& spec);

// Covariate identifiers in order of first appearance (`A` excluded). Used to
// infer covariate names when no dataset is at hand.
std::vector<std::string> formula_identifiers(std::string_view text);

}  // namespace regadj
