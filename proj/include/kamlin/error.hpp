#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kamlin {

/// Outcome classes shared by the library, the engine and the CLI.
/// Each class maps to exactly one CLI exit code (see exit_code()).
enum class ErrorKind {
  // input / validation (exit 2)
  Domain,
  InsufficientSampling,
  Branch,
  NotACircleMap,
  InvalidScenario,
  Path,
  // numerical / certificate failures (exit 3)
  Nesting,
  UnivalenceUncertified,
  InversionDiverged,
  ResonantMode,
  CoboundaryFailure,
  ScheduleViolation,
  ConvergenceViolation,
  Truncation,
  NonConvergence,
  GateFailed,
  VerificationFailed,
  ExtractionFailed,
};

std::string_view to_string(ErrorKind kind);
int exit_code(ErrorKind kind);

/// Exception carrying an outcome class plus the location that triggered it,
/// when one is known (Fourier mode, edge index, certificate name, loop).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  std::optional<int> mode;
  std::optional<int> edge;
  std::optional<std::string> certificate;
  std::vector<int> loop;           // offending loop; edge e, or -e-1 when reversed
  std::optional<double> holonomy;  // phase of that loop, mod 2pi

 private:
  ErrorKind kind_;
};

}  // namespace kamlin
