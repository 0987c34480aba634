#pragma once

#include <stdexcept>
#include <string>

namespace ordgam {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller passed an out-of-range or inconsistent argument.
struct ArgumentError : Error {
  using Error::Error;
};

// Column mapping / config file problems.
struct SchemaError : Error {
  using Error::Error;
};

// Input data violates a structural requirement.
struct ValidationError : Error {
  using Error::Error;
};

// An iterative solver failed; `trace` carries the diagnostic state at failure.
struct ConvergenceError : Error {
  std::string trace;
  explicit ConvergenceError(const std::string& msg, std::string trace_ = "")
      : Error(msg), trace(std::move(trace_)) {}
};

}  // namespace ordgam
