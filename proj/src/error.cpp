#include "kamlin/error.hpp"

namespace kamlin {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::InsufficientSampling: return "insufficient_sampling";
    case ErrorKind::Branch: return "branch";
    case ErrorKind::NotACircleMap: return "not_a_circle_map";
    case ErrorKind::InvalidScenario: return "invalid_scenario";
    case ErrorKind::Path: return "path";
    case ErrorKind::Nesting: return "nesting";
    case ErrorKind::UnivalenceUncertified: return "univalence_uncertified";
    case ErrorKind::InversionDiverged: return "inversion_diverged";
    case ErrorKind::ResonantMode: return "resonant_mode";
    case ErrorKind::CoboundaryFailure: return "coboundary_failure";
    case ErrorKind::ScheduleViolation: return "schedule_violation";
    case ErrorKind::ConvergenceViolation: return "convergence_violation";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::NonConvergence: return "non_convergence";
    case ErrorKind::GateFailed: return "gate_failed";
    case ErrorKind::VerificationFailed: return "verification_failed";
    case ErrorKind::ExtractionFailed: return "extraction_failed";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain:
    case ErrorKind::InsufficientSampling:
    case ErrorKind::Branch:
    case ErrorKind::NotACircleMap:
    case ErrorKind::InvalidScenario:
    case ErrorKind::Path:
      return 2;
    default:
      return 3;
  }
}

}  // namespace kamlin
