#pragma once

// Covering nerve, unitary flat bundle of edge phases, and the per-mode
// coboundary solver whose operator norm measures the small divisors.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kamlin/annulus_series.hpp"

namespace kamlin {

/// Oriented labelled edge j -> k; from/to are chart indices.
struct NerveEdge {
  int from = 0;
  int to = 0;
  std::string label;
};

/// Charts (vertices), oriented multi-edges and the triples with nonempty
/// triple overlap. Charts are addressed by index; `chart_ids` keeps the
/// external identifiers.
class Nerve {
 public:
  Nerve(std::vector<int> chart_ids, std::vector<NerveEdge> edges,
        std::vector<std::array<int, 3>> triples = {});

  int chart_count() const { return static_cast<int>(chart_ids_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<int>& chart_ids() const { return chart_ids_; }
  const std::vector<NerveEdge>& edges() const { return edges_; }
  const NerveEdge& edge(int e) const { return edges_.at(static_cast<size_t>(e)); }
  const std::vector<std::array<int, 3>>& triples() const { return triples_; }

  /// Index of the first edge with the given endpoints and label, if any.
  std::optional<int> find_edge(int from, int to, std::string_view label) const;

 private:
  std::vector<int> chart_ids_;
  std::vector<NerveEdge> edges_;
  std::vector<std::array<int, 3>> triples_;
};

/// One step of an edge walk; forward traverses from -> to.
struct LoopStep {
  int edge = 0;
  bool forward = true;
};
using Loop = std::vector<LoopStep>;

/// Fundamental cycles relative to a BFS spanning tree rooted at chart 0.
std::vector<Loop> fundamental_loops(const Nerve& nerve);

class UnitaryFlatBundle {
 public:
  /// Phases are wrapped to [0, 2pi); throws InvalidScenario when a listed
  /// triple violates the cocycle condition by more than 1e-9.
  UnitaryFlatBundle(Nerve nerve, std::vector<double> edge_phase);

  const Nerve& nerve() const { return nerve_; }
  double phase(int e) const { return phase_.at(static_cast<size_t>(e)); }
  const std::vector<double>& phases() const { return phase_; }
  cplx multiplier(int e, int n = 1) const;

  /// Largest |phi_kj + phi_ji - phi_ki| (mod 2pi) over the listed triples.
  double cocycle_defect() const;

 private:
  Nerve nerve_;
  std::vector<double> phase_;
};

/// Signed sum of edge phases along a closed walk, in [0, 2pi).
double holonomy(const UnitaryFlatBundle& bundle, const Loop& loop);

struct ModeCochainSolution {
  int n = 0;
  std::vector<cplx> a;         // per chart
  double residual = 0.0;       // infinity norm of equation defects
  double amplification = 0.0;  // max_j |a_j| / max_e |b_e|
  bool kernel = false;         // solution unique only up to a nontrivial kernel
  double min_singular_ratio = 0.0;
};

struct ModeSolveOptions {
  double resonance_rel = 1e-12;   // smallest singular value over max(largest, 1)
  double solvability_rel = 1e-8;  // allowed residual relative to `scale`
  double scale = 0.0;             // reference magnitude; 0 means max_e |b_e|
};

/// Minimum-norm least-squares solution of e^{i n phi_kj} a_k - a_j = b_kj.
/// Throws ResonantMode (with the loop whose holonomy is closest to resonance)
/// or CoboundaryFailure when the residual exceeds the solvability tolerance.
ModeCochainSolution solve_mode(const UnitaryFlatBundle& bundle, int n, std::span<const cplx> b,
                               const ModeSolveOptions& opts = {});

/// A_n for 0 < |n| <= N: infinity-to-infinity norm of the mode-n
/// minimum-norm solution operator.
class AmplificationSpectrum {
 public:
  explicit AmplificationSpectrum(int max_mode) : max_mode_(max_mode), values_(2 * static_cast<size_t>(max_mode) + 1) {}

  int max_mode() const { return max_mode_; }
  double at(int n) const { return values_.at(static_cast<size_t>(n + max_mode_)); }
  void set(int n, double v) { values_.at(static_cast<size_t>(n + max_mode_)) = v; }

 private:
  int max_mode_;
  std::vector<double> values_;
};

AmplificationSpectrum amplification_spectrum(const UnitaryFlatBundle& bundle, int max_mode,
                                             double resonance_rel = 1e-12);

struct DiophantineFit {
  double C0 = 0.0;
  double mu = 2.0;
  int argmax_mode = 0;
  std::vector<int> failing_modes;  // A_n > C0 |n|^{mu-1}; empty for a fitted C0
  double growth_exponent = 0.0;    // log2 of the top-half / second-quarter peak ratio
  bool super_polynomial = false;
};

/// C0 = max_n A_n / |n|^{mu-1}. `C0_override` checks a supplied constant
/// instead of fitting one.
DiophantineFit fit_diophantine(const AmplificationSpectrum& spectrum, double mu,
                               std::optional<double> C0_override = std::nullopt);

}  // namespace kamlin
