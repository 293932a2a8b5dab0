#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace regadj {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input (bad dimensions, non-finite values,
// empty treatment arm, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormulaError : public ValidationError {
 public:
  FormulaError(const std::string& what, std::size_t column)
      : ValidationError(what + " (at column " + std::to_string(column) + ")"),
        column_(column) {}

  // 1-based character column in the formula text.
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

// The free-column design (or a population Gram matrix) is rank deficient.
class SingularDesignError : public Error {
 public:
  SingularDesignError(const std::string& what, std::vector<std::string> columns)
      : Error(what), columns_(std::move(columns)) {}

  // Labels of the columns involved in the near-null direction.
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace regadj
