#pragma once

#include <stdexcept>
#include <string>

namespace exclusim {

// Kernel validation failures. Each message names the offending displacement.
struct SymmetryViolation : std::runtime_error {
  explicit SymmetryViolation(const std::string& what) : std::runtime_error(what) {}
};

struct NormalizationViolation : std::runtime_error {
  explicit NormalizationViolation(const std::string& what) : std::runtime_error(what) {}
};

struct RangeViolation : std::runtime_error {
  explicit RangeViolation(const std::string& what) : std::runtime_error(what) {}
};

// Enumerated state spaces are capped at 2^20 states.
struct StateSpaceTooLarge : std::runtime_error {
  explicit StateSpaceTooLarge(const std::string& what) : std::runtime_error(what) {}
};

// Resolvent solve did not reach the requested residual.
struct SolverFailure : std::runtime_error {
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigParseError : std::runtime_error {
  explicit ConfigParseError(const std::string& what) : std::runtime_error(what) {}
};

struct ParameterMismatch : std::runtime_error {
  explicit ParameterMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientReplicas : std::runtime_error {
  explicit InsufficientReplicas(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateWindow : std::runtime_error {
  explicit DegenerateWindow(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace exclusim
