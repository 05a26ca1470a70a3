#pragma once

// The KAM iteration over a transition system: parameter schedule, per-step
// coordinate changes from the mode-wise coboundary equations, certificates
// for every estimate the convergence argument relies on, transition renewal,
// and the assembled conjugacy.

#include <optional>
#include <string>
#include <vector>

#include "kamlin/circle_map.hpp"
#include "kamlin/cocycle.hpp"
#include "kamlin/error.hpp"

namespace kamlin {

struct KamParams {
  double C0 = 1.0;
  double mu = 2.0;
  double sigma0 = 1.0;
  double eta0 = 0.05;
  int N = 64;
  double tol = 1e-10;
  int max_iter = 40;
  bool strict_schedule = true;
  /// Mode residuals up to this fraction of the largest transition
  /// coefficient are accepted as solvable.
  double coboundary_tol = 1e-2;
  /// Conjugation residual accepted for the assembled conjugacy.
  double conjugacy_tol = 1e-8;

  /// eta_{m+1} / eta_m = mu^{-1/(mu+1)}
  double eta_ratio() const;
  /// Upper bound for eta0: min{pi, (1 - mu^{-1/(mu+1)}) sigma0 / 4}.
  double eta0_bound() const;
  /// 2 C0 sigma0^mu Gamma(mu) / (1 - e^{-sigma0})^mu
  double C1() const;
  /// min{eta0, eta0^{mu+1} / ((1 + e^{sigma0}) C1 mu)}, also delta_0.
  double gate() const;
  /// Throws InvalidScenario when a constant is out of range.
  void validate() const;
};

struct ScheduleEntry {
  double sigma = 0.0;
  double eta = 0.0;
  double delta = 0.0;
};

/// Closed forms eta_m = eta0 r^m, sigma_m = sigma0 - 4 eta0 (1 - r^m)/(1 - r) and
/// delta_m = cap_m (delta_0 / cap_0)^{2^m}, cap_m = eta_m^{mu+1} / ((1 + e^{sigma0}) C1 mu),
/// which solve delta_{m+1} = (1 + e^{sigma0}) C1 delta_m^2 / eta_m^{mu+1}.
ScheduleEntry schedule(const KamParams& params, int m);

/// sigma0 - 4 eta0 / (1 - r), the limit width.
double sigma_limit(const KamParams& params);

/// Transversal transition data of a good system: one circle map per edge.
class TransitionSystem {
 public:
  /// All transitions are re-widthed to `width`; throws InvalidScenario if a
  /// transition fails the univalence certificate or the phases are not a cocycle.
  TransitionSystem(Nerve nerve, std::vector<CircleDiffeo> transitions, double width);

  const Nerve& nerve() const { return bundle_.nerve(); }
  const UnitaryFlatBundle& bundle() const { return bundle_; }
  const std::vector<CircleDiffeo>& transitions() const { return transitions_; }
  const CircleDiffeo& transition(int e) const { return transitions_.at(static_cast<size_t>(e)); }
  double width() const { return width_; }

  /// max over edges of majorant_norm(hat, sigma).
  double max_hat_norm(double sigma) const;

 private:
  UnitaryFlatBundle bundle_;
  std::vector<CircleDiffeo> transitions_;
  double width_;
};

struct GateReport {
  double gate = 0.0;
  std::vector<double> edge_norm;  // certified majorant at sigma0 per edge
  std::vector<bool> edge_pass;
  bool passed = true;
  double margin = 0.0;  // gate - max edge norm
  int worst_edge = -1;
};

GateReport gate_check(const TransitionSystem& system, const KamParams& params);

struct Certificate {
  std::string name;
  bool passed = true;
  double value = 0.0;
  double bound = 0.0;
};

struct StepReport {
  int m = 0;
  ScheduleEntry sched;
  double max_hat_norm = 0.0;       // input, at sigma_m
  double next_max_hat_norm = 0.0;  // output, at sigma_{m+1}
  double next_delta = 0.0;
  double worst_mode_residual = 0.0;
  double tail_mass = 0.0;
  double chopped_mass = 0.0;
  double max_phase_drift = 0.0;
  double max_symmetry_projection = 0.0;
  double cochain_reality_defect = 0.0;  // max |a_{-n} + conj(a_n)| before projection
  double wall_ms = 0.0;
  std::vector<Certificate> certificates;
  std::vector<std::string> violations;  // logged when strict_schedule is false

  bool all_certificates_passed() const;
};

struct StepResult {
  TransitionSystem next;
  std::vector<CircleDiffeo> psi;  // per chart, w_m = psi(w_{m+1})
  StepReport report;
};

/// One renewal f_{m+1} = psi_k^{-1} o f_m o psi_j with psi solving the
/// linearized (simplified Schroeder) equation mode by mode.
StepResult kam_step(const TransitionSystem& system, int m, const KamParams& params);

struct TraceRow {
  int m = 0;
  double sigma = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double max_hat_norm = 0.0;
  double worst_mode_residual = 0.0;
  double tail_mass = 0.0;
  double wall_ms = 0.0;
};

struct IterationTrace {
  std::vector<TraceRow> rows;
  std::string to_csv() const;
};

inline constexpr const char* kTraceCsvHeader = "m,sigma,eta,delta,max_hat_norm,worst_mode_residual,tail_mass,wall_ms";

struct Conjugacy {
  std::vector<CircleDiffeo> charts;  // Phi_j maps final coordinates to initial ones
  UnitaryFlatBundle linear_cocycle;
  double final_width = 0.0;
};

/// max over edges and `samples` unit-circle points of |Phi_k(t_kj u) - f_kj(Phi_j(u))|.
double conjugacy_residual(const Conjugacy& conj, const TransitionSystem& original, int samples = 128);

struct RunResult {
  bool converged = false;
  IterationTrace trace;
  std::vector<StepReport> steps;
  GateReport gate;
  std::optional<Conjugacy> conjugacy;
  double conjugation_residual = 0.0;
  std::optional<Error> failure;
};

/// Iterates kam_step until the certified hat norm drops below params.tol.
/// Failures are returned in RunResult::failure together with the trace so far.
RunResult run(const TransitionSystem& system, const KamParams& params);

struct AlphaRotation {
  int edge = 0;
  double phase = 0.0;           // constant Laurent term, in [0, 2pi)
  double rotation_phase = 0.0;  // 2 pi rho(f), in [0, 2pi)
  double difference = 0.0;      // phase - rotation_phase, in (-pi, pi]
  bool converged = true;
};

/// Per-edge comparison of the multiplier phase with 2 pi rho(f); diagnostic only.
std::vector<AlphaRotation> alpha_vs_rotation(const TransitionSystem& system, long iters = 1L << 17);

/// Signed representative of a phase in (-pi, pi].
double signed_phase(double phase);

}  // namespace kamlin
