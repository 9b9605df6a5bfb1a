#ifndef SDDD_ERRORS_HPP
#define SDDD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sddd {

// Base class for all domain errors thrown by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Malformed input text (bad row, unparsable number). Carries the row number
// in the message when one is known.
struct ParseError : Error {
  using Error::Error;
};

// Input violates the declared schema (unknown column, bad eligibility token,
// time-varying eligibility, duplicate unit-time pair).
struct SchemaError : Error {
  using Error::Error;
};

struct DuplicateError : SchemaError {
  using SchemaError::SchemaError;
};

// Lookup of an unknown unit or cohort.
struct LookupError : Error {
  using Error::Error;
};

// A required cell has no usable observations.
struct EmptyCellError : Error {
  using Error::Error;
};

// No admissible comparison cohort, or the requested window cannot be formed.
struct InfeasibleError : Error {
  using Error::Error;
};

struct WindowError : InfeasibleError {
  using InfeasibleError::InfeasibleError;
};

// Bad weights (nonpositive custom weight, normalization failure, missing
// variance inputs for precision weights).
struct WeightError : Error {
  using Error::Error;
};

// Invalid configuration or parameter value.
struct ConfigError : Error {
  using Error::Error;
};

// Singular Gram system in a diagnostic regression.
struct CollinearityError : Error {
  using Error::Error;
};

// Degenerate inference input (zero variance with nonzero estimate, empty
// influence set).
struct DegenerateError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace sddd

#endif  // SDDD_ERRORS_HPP
