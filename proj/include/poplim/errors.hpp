#pragma once

#include <stdexcept>

namespace poplim {

// Error taxonomy mirrors the CLI exit codes: configuration errors (2),
// solver failures (3), detected invariant violations (4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoRoot final : SolverError {
  using SolverError::SolverError;
};
struct NonAttracting final : SolverError {
  using SolverError::SolverError;
};
struct DegenerateVariance final : SolverError {
  using SolverError::SolverError;
};
struct SingularSystem final : SolverError {
  using SolverError::SolverError;
};
struct NotConverged final : SolverError {
  using SolverError::SolverError;
};
struct WindowTooSmall final : ConfigError {
  using ConfigError::ConfigError;
};
struct TooFewPoints final : ConfigError {
  using ConfigError::ConfigError;
};
struct NonpositiveValue final : ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace poplim
