#pragma once

#include <stdexcept>
#include <string>

namespace bysgnn {

// Shape or dimension disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller broke an API contract (e.g. backward on a non-scalar).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Inconsistent run configuration or data too small for the requested setup.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input file. Carries the offending 1-based line when known.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, long line_no = 0)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what), line(line_no) {}
  long line;
};

// Well-formed input that violates a data-model rule (duplicates, ordering).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf or divergence.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bysgnn
