#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prospect {

/// Partial assignment of level labels to named variables.
using Assignment = std::vector<std::pair<std::string, std::string>>;

inline std::string describe(const Assignment& assignment) {
  std::string out = "{";
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (i) out += ", ";
    out += assignment[i].first + "=" + assignment[i].second;
  }
  return out + "}";
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed schema, missing column, or a value outside the declared levels.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A data row failed validation. `row` counts data rows from 1, header excluded.
class RowError : public SchemaError {
 public:
  RowError(std::size_t row, std::string variable, std::string value, const std::string& why)
      : SchemaError("row " + std::to_string(row) + ", variable '" + variable + "': " + why),
        row_(row), variable_(std::move(variable)), value_(std::move(value)) {}

  std::size_t row() const { return row_; }
  const std::string& variable() const { return variable_; }
  const std::string& value() const { return value_; }

 private:
  std::size_t row_;
  std::string variable_;
  std::string value_;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Logistic fit diverged past the coefficient guard.
class SeparationError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// Conditioning on an event of zero mass.
class UndefinedConditional : public Error {
 public:
  explicit UndefinedConditional(Assignment given)
      : Error("undefined conditional: event " + describe(given) + " has zero mass"),
        given_(std::move(given)) {}

  const Assignment& given() const { return given_; }

 private:
  Assignment given_;
};

/// A quantity needed for the post-deployment prediction is not identified
/// by the pre-deployment tables.
class IdentificationError : public Error {
 public:
  using Error::Error;
};

class PolicyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace prospect
