#pragma once

#include <stdexcept>
#include <string>

namespace qttfem {

/// Shape mismatch, out-of-range index or invalid argument value.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A dense materialization or classical assembly would exceed its size cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Invalid problem configuration (e.g. no Dirichlet side, bad CLI value).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown inside a solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A black-box evaluator returned a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupt or unrecognized serialized container.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qttfem
