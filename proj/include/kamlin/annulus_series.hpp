#pragma once

// Truncated Laurent series regarded as holomorphic functions on the annulus
// {e^-sigma < |w| < e^sigma}.

#include <complex>
#include <span>
#include <vector>

namespace kamlin {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Finite two-sided series sum_{|n|<=N} c_n w^n with a recorded width sigma.
/// Values are immutable once built; "modifiers" return new series.
class LaurentSeries {
 public:
  /// Zero series of truncation N on the width-sigma annulus.
  LaurentSeries(int truncation, double width);

  /// Coefficients c_{-N..N} in index order (size 2N+1).
  LaurentSeries(int truncation, double width, std::vector<cplx> coeffs);

  static LaurentSeries monomial(int truncation, double width, int n, cplx c);

  int truncation() const { return n_; }
  double width() const { return width_; }

  /// c_n, or 0 when |n| > N.
  cplx coeff(int n) const;
  std::span<const cplx> coeffs() const { return coeffs_; }

  bool is_zero() const;
  double max_abs_coeff() const;

  LaurentSeries with_width(double width) const;
  LaurentSeries with_coeff(int n, cplx c) const;
  /// Re-truncates (or zero-pads) to degree N.
  LaurentSeries resized(int truncation) const;

  /// Coefficients n*c_n: the series of d/dzeta s(e^zeta).
  LaurentSeries zeta_derivative() const;

  /// sum c_n w^n by two Horner passes. Throws Domain outside the closed
  /// annulus (boundary circles are accepted for finite series).
  cplx operator()(cplx w) const;

  LaurentSeries operator-() const;
  friend LaurentSeries operator+(const LaurentSeries& a, const LaurentSeries& b);
  friend LaurentSeries operator-(const LaurentSeries& a, const LaurentSeries& b);
  friend LaurentSeries operator*(cplx s, const LaurentSeries& a);

 private:
  int n_;
  double width_;
  std::vector<cplx> coeffs_;
};

inline cplx eval(const LaurentSeries& s, cplx w) { return s(w); }

/// Certified sup-norm bound on the sigma'-annulus: sum |c_n| e^{|n| sigma'}.
double majorant_norm(const LaurentSeries& s, double sigma_prime);

/// Max |s| over `samples` equispaced points on |w| = e^{-sigma'}, 1, e^{sigma'}.
double empirical_sup_norm(const LaurentSeries& s, double sigma_prime, int samples);

/// sum |n||c_n| e^{|n| sigma'}, bounding sup |d/dzeta s(e^zeta)| on |Re zeta| < sigma'.
double log_derivative_majorant(const LaurentSeries& s, double sigma_prime);

/// Points e^{2 pi i k / M}, k = 0..M-1.
std::vector<cplx> unit_circle_points(int samples);

/// Values of s at unit_circle_points(samples).
std::vector<cplx> sample_unit_circle(const LaurentSeries& s, int samples);

struct CircleExpansion {
  LaurentSeries series;
  /// sum of |DFT coefficients| discarded above N (aliasing/truncation indicator)
  double tail_mass = 0.0;
};

/// Discrete Fourier coefficients |n| <= N of equispaced unit-circle values.
/// Requires fvals.size() >= 4N.
CircleExpansion coeffs_from_circle(std::span<const cplx> fvals, int truncation, double width);

struct DecayReport {
  bool passed = true;
  std::vector<int> violations;  // indices n with |c_n| above the bound
  double tail_bound = 0.0;      // bound on the discarded tail at sigma' (0 if not requested)
};

/// Checks |c_n| <= norm_sigma e^{-|n| sigma} (+slack) for the series width
/// sigma. When sigma_prime in (0, sigma) is given, also bounds the dropped
/// tail sum_{|n|>N} |c_n| e^{|n| sigma'} by norm_sigma sum_{|n|>N} e^{-|n|(sigma-sigma')}.
DecayReport decay_check(const LaurentSeries& s, double norm_sigma, double sigma_prime = 0.0,
                        double rel_slack = 1e-12);

namespace detail {
/// Unnormalized forward DFT: X_k = sum_j x_j e^{-2 pi i jk/M}.
std::vector<cplx> dft(std::span<const cplx> values);
}  // namespace detail

}  // namespace kamlin
