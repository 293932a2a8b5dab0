#include "regadj/formula.hpp"

#include "regadj/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string>

namespace regadj {
namespace {

enum class Tok { Plus, Minus, Colon, At, Ident, Number, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t column;  // 1-based
};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    const std::size_t col = i + 1;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '+') {
      out.push_back({Tok::Plus, "+", col});
      ++i;
    } else if (c == '-') {
      out.push_back({Tok::Minus, "-", col});
      ++i;
    } else if (c == ':') {
      out.push_back({Tok::Colon, ":", col});
      ++i;
    } else if (c == '@') {
      out.push_back({Tok::At, "@", col});
      ++i;
    } else if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < s.size() && ident_char(s[j])) ++j;
      out.push_back({Tok::Ident, std::string(s.substr(i, j - i)), col});
      i = j;
    } else if (digit(c) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (digit(s[j]) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && digit(s[k])) {
          while (k < s.size() && digit(s[k])) ++k;
          j = k;
        }
      }
      out.push_back({Tok::Number, std::string(s.substr(i, j - i)), col});
      i = j;
    } else {
      throw FormulaError(std::string("unexpected character '") + c + "'", col);
    }
  }
  out.push_back({Tok::End, "", s.size() + 1});
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& names)
      : toks_(tokenize(text)), names_(names) {
    const auto p = names.size();
    gamma_.assign(p, CoefConstraint::fixed(0.0));
    delta_.assign(p, CoefConstraint::fixed(0.0));
    gamma_seen_.assign(p, false);
    delta_seen_.assign(p, false);
    shorthand_ = std::find(names.begin(), names.end(), "X") == names.end();
  }

  ModelSpec parse(Centering centering) {
    if (peek().kind == Tok::End) throw FormulaError("empty formula", peek().column);
    term();
    while (peek().kind == Tok::Plus) {
      next();
      term();
    }
    if (peek().kind != Tok::End) {
      throw FormulaError("expected '+' or end of formula, found '" + peek().text + "'",
                         peek().column);
    }
    const std::size_t end_col = peek().column;
    if (!has_intercept_) throw FormulaError("missing mandatory intercept term '1'", end_col);
    if (!has_treatment_) throw FormulaError("missing mandatory treatment term 'A'", end_col);
    return ModelSpec(gamma_, delta_, std::move(centering));
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) {
      throw FormulaError(std::string("expected ") + what +
                             (peek().kind == Tok::End ? ", found end of formula"
                                                      : ", found '" + peek().text + "'"),
                         peek().column);
    }
    return next();
  }

  int covariate_index(const Token& t) const {
    auto it = std::find(names_.begin(), names_.end(), t.text);
    if (it == names_.end()) {
      throw FormulaError("unknown covariate '" + t.text + "'", t.column);
    }
    return static_cast<int>(it - names_.begin());
  }

  // Optional "@ [+-] number" suffix.
  std::optional<double> fixed_suffix() {
    if (peek().kind != Tok::At) return std::nullopt;
    next();
    double sign = 1.0;
    if (peek().kind == Tok::Minus) {
      sign = -1.0;
      next();
    } else if (peek().kind == Tok::Plus) {
      next();
    }
    const Token& num = expect(Tok::Number, "a number after '@'");
    double v = 0.0;
    const char* b = num.text.data();
    const char* e = b + num.text.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      throw FormulaError("malformed number '" + num.text + "'", num.column);
    }
    return sign * v;
  }

  void set(std::vector<CoefConstraint>& target, std::vector<bool>& seen, int j,
           std::optional<double> fixed, const Token& at, const char* kind) {
    if (seen[j]) {
      throw FormulaError(std::string("duplicate ") + kind + " term for covariate '" +
                             names_[j] + "'",
                         at.column);
    }
    seen[j] = true;
    target[j] = fixed ? CoefConstraint::fixed(*fixed) : CoefConstraint::free();
  }

  void set_all(std::vector<CoefConstraint>& target, std::vector<bool>& seen,
               const Token& at, const char* kind) {
    for (int j = 0; j < static_cast<int>(names_.size()); ++j) {
      set(target, seen, j, std::nullopt, at, kind);
    }
  }

  void term() {
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      if (t.text != "1") {
        throw FormulaError("unexpected number '" + t.text + "'", t.column);
      }
      if (has_intercept_) throw FormulaError("duplicate term '1'", t.column);
      has_intercept_ = true;
      next();
      return;
    }
    if (t.kind != Tok::Ident) {
      throw FormulaError(
          t.kind == Tok::End ? "expected a term, found end of formula"
                             : "expected a term, found '" + t.text + "'",
          t.column);
    }
    const Token head = next();
    if (head.text == "A") {
      if (peek().kind != Tok::Colon) {
        if (has_treatment_) throw FormulaError("duplicate term 'A'", head.column);
        has_treatment_ = true;
        return;
      }
      next();
      const Token cov = expect(Tok::Ident, "a covariate name after 'A:'");
      if (shorthand_ && cov.text == "X") {
        set_all(delta_, delta_seen_, cov, "interaction");
        if (peek().kind == Tok::At) {
          throw FormulaError("'@' cannot follow the shorthand 'A:X'", peek().column);
        }
        return;
      }
      const int j = covariate_index(cov);
      set(delta_, delta_seen_, j, fixed_suffix(), cov, "interaction");
      return;
    }
    if (shorthand_ && head.text == "X") {
      set_all(gamma_, gamma_seen_, head, "main-effect");
      if (peek().kind == Tok::At) {
        throw FormulaError("'@' cannot follow the shorthand 'X'", peek().column);
      }
      return;
    }
    const int j = covariate_index(head);
    set(gamma_, gamma_seen_, j, fixed_suffix(), head, "main-effect");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& names_;
  std::vector<CoefConstraint> gamma_, delta_;
  std::vector<bool> gamma_seen_, delta_seen_;
  bool has_intercept_ = false;
  bool has_treatment_ = false;
  bool shorthand_ = true;
};

std::string number_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

ModelSpec parse_formula(std::string_view text,
                        const std::vector<std::string>& covariate_names,
                        Centering centering) {
  for (const auto& name : covariate_names) {
    if (name == "A" || name.empty()) {
      throw ValidationError("invalid covariate name '" + name + "'");
    }
  }
  if (centering.kind == Centering::Kind::KnownMean && centering.mean.size() == 0) {
    centering.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(covariate_names.size()));
  }
  return Parser(text, covariate_names).parse(std::move(centering));
}

std::string format_formula(const ModelSpec& spec,
                           const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != spec.p()) {
    throw ValidationError("format_formula: name list does not match p");
  }
  std::string out = "1 + A";
  auto emit = [&](const std::string& head, const CoefConstraint& c) {
    if (c.is_free()) {
      out += " + " + head;
    } else if (c.value() != 0.0) {
      out += " + " + head + "@" + number_text(c.value());
    }
  };
  for (int j = 0; j < spec.p(); ++j) emit(names[j], spec.gamma[j]);
  for (int j = 0; j < spec.p(); ++j) emit("A:" + names[j], spec.delta[j]);
  return out;
}

std::string format_formula(const ModelSpec& spec) {
  return format_formula(spec, default_covariate_names(spec.p()));
}

std::vector<std::string> formula_identifiers(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : tokenize(text)) {
    if (t.kind != Tok::Ident || t.text == "A") continue;
    if (std::find(out.begin(), out.end(), t.text) == out.end()) out.push_back(t.text);
  }
  return out;
}

}  // namespace regadj
