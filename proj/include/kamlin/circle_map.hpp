#pragma once

// Analytic orientation-preserving circle diffeomorphisms in multiplicative
// form w -> w exp(i phase + hat(w)), hat a Laurent series without constant
// term satisfying c_{-n} = -conj(c_n) (purely imaginary on |w| = 1).

#include <span>
#include <vector>

#include "kamlin/annulus_series.hpp"

namespace kamlin {

/// Largest admissible reality-symmetry projection after a re-expansion.
inline constexpr double kSymmetryTolerance = 1e-8;

/// Coefficients below kNoiseFactor * eps * (sample scale) are treated as
/// round-off and dropped on re-expansion.
inline constexpr double kNoiseFactor = 1024.0;

class CircleDiffeo {
 public:
  /// Validates a zero constant term and reality symmetry (relative defect
  /// <= 1e-8), then projects the hat onto exactly symmetric coefficients.
  CircleDiffeo(double phase, const LaurentSeries& hat);

  static CircleDiffeo identity(int truncation, double width);
  static CircleDiffeo rotation(double phase, int truncation, double width);

  double phase() const { return phase_; }
  const LaurentSeries& hat() const { return hat_; }
  double width() const { return hat_.width(); }
  int truncation() const { return hat_.truncation(); }

  cplx operator()(cplx w) const;

  /// F(x) - x for the lift F with e^{2 pi i F(x)} = f(e^{2 pi i x}).
  double lift_increment(double x) const;

  CircleDiffeo with_width(double width) const { return {phase_, hat_.with_width(width)}; }

 private:
  double phase_;
  LaurentSeries hat_;
};

/// max_n |c_n + conj(c_{-n})| together with |Re c_0|.
double symmetry_defect(const LaurentSeries& s);

/// max over `samples` unit-circle points of ||f(w)| - 1|.
double circle_defect(const CircleDiffeo& f, int samples = 1024);

/// Bookkeeping of one sample-and-re-expand pass.
struct ExpansionStats {
  double tail_mass = 0.0;        // DFT mass above N
  double chopped_mass = 0.0;     // coefficients dropped as round-off
  double symmetry_defect = 0.0;  // size of the reality projection
  double phase_shift = 0.0;      // constant mode absorbed into the phase
  double scale = 0.0;            // sample magnitude that set the noise floor
};

/// Rebuilds a CircleDiffeo from unit-circle samples of f.
/// Throws Branch on nonzero winding of f(w)/w, NotACircleMap when the
/// symmetry defect exceeds kSymmetryTolerance.
CircleDiffeo expand(std::span<const cplx> fvals, int truncation, double width,
                    ExpansionStats* stats = nullptr);

struct RotationNumber {
  double value = 0.0;   // in [0, 1)
  double spread = 0.0;  // disagreement of the two Richardson estimates
  bool converged = true;
};

/// Rotation number by orbit averaging of the lift with Richardson
/// extrapolation over orbit lengths iters/4, iters/2, iters.
RotationNumber rotation_number(const CircleDiffeo& f, long iters = 1L << 17);

/// g o f re-expanded on the out_width annulus.
/// Throws Nesting if f's certified image of that annulus leaves g's domain.
CircleDiffeo compose(const CircleDiffeo& g, const CircleDiffeo& f, double out_width,
                     ExpansionStats* stats = nullptr);

/// Solves psi(z) = v on the log-lift, fixed point first and Newton after 50
/// iterations. Throws InversionDiverged after 200 iterations.
cplx invert_point(const CircleDiffeo& psi, cplx v);

/// psi^{-1} on the out_width annulus. `derivative_bound` caps the log-
/// derivative majorant of psi's hat at psi's width (univalence certificate).
CircleDiffeo invert(const CircleDiffeo& psi, double out_width, double derivative_bound = 0.5,
                    ExpansionStats* stats = nullptr);

/// outer^{-1} o f o inner in a single sampling pass (transition renewal).
/// The hat is accumulated as f^(inner(w)) + inner^(w) - outer^(z), so its
/// round-off scales with the hats rather than with the phases.
CircleDiffeo conjugate(const CircleDiffeo& outer, const CircleDiffeo& f, const CircleDiffeo& inner,
                       double out_width, double derivative_bound = 0.5,
                       ExpansionStats* stats = nullptr);

}  // namespace kamlin
