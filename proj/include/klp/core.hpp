#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace klp {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Bad shapes, out-of-range values, malformed user input.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well-formed but makes the requested quantity undefined
// (e.g. all points identical when a mean edge length is needed).
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

// Experiment/config level problems: label budget larger than a class, etc.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A required precondition of a stateful operation does not hold yet.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical failure inside a linear solve.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double condition = 0.0)
      : std::runtime_error(what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

// CSV / file ingestion failures. `row` is 1-based and counts the header.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& what, long row)
      : std::runtime_error(row > 0 ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}

  long row() const noexcept { return row_; }

 private:
  long row_;
};

}  // namespace klp
