#include "kamlin/circle_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "kamlin/error.hpp"

namespace kamlin {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kFixedPointIters = 50;
constexpr int kMaxInverseIters = 200;
constexpr double kInverseCertTol = 1e-9;
constexpr int kCertSamples = 64;

double wrap_phase(double phase) {
  double p = std::fmod(phase, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  if (p >= kTwoPi) p = 0.0;
  return p;
}

int sample_count(int truncation) { return std::max(4 * truncation, 8); }

// Re-expands unit-circle samples h(w_k) of log(F(w)/w) - i*phase_base into a
// CircleDiffeo: the constant mode moves into the phase, the rest is projected
// onto reality-symmetric coefficients and round-off is dropped.
CircleDiffeo reexpand(std::span<const cplx> h, double phase_base, double scale, int truncation,
                      double width, ExpansionStats* stats) {
  auto [series, tail] = coeffs_from_circle(h, truncation, width);
  const double defect = symmetry_defect(series);
  if (defect > kSymmetryTolerance) {
    std::ostringstream os;
    os << "re-expanded map leaves the unit circle: symmetry defect " << defect;
    throw Error(ErrorKind::NotACircleMap, os.str());
  }
  const double floor = kNoiseFactor * kEps * scale;
  std::vector<cplx> c(2 * static_cast<size_t>(truncation) + 1);
  double chopped = 0.0;
  for (int n = 1; n <= truncation; ++n) {
    const cplx v = 0.5 * (series.coeff(n) - std::conj(series.coeff(-n)));
    if (std::abs(v) <= floor) {
      chopped += 2.0 * std::abs(v);
      continue;
    }
    c[static_cast<size_t>(truncation + n)] = v;
    c[static_cast<size_t>(truncation - n)] = -std::conj(v);
  }
  const double shift = series.coeff(0).imag();
  if (stats) {
    stats->tail_mass = tail;
    stats->chopped_mass = chopped;
    stats->symmetry_defect = defect;
    stats->phase_shift = shift;
    stats->scale = scale;
  }
  return CircleDiffeo(phase_base + shift, LaurentSeries(truncation, width, std::move(c)));
}

void require_nested(double inner, double outer, const char* what) {
  if (inner > outer * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "nesting violated: " << what << " (" << inner << " > " << outer << ")";
    auto err = Error(ErrorKind::Nesting, os.str());
    err.certificate = what;
    throw err;
  }
}

}  // namespace

CircleDiffeo::CircleDiffeo(double phase, const LaurentSeries& hat)
    : phase_(wrap_phase(phase)), hat_(hat) {
  if (!std::isfinite(phase)) throw Error(ErrorKind::NotACircleMap, "non-finite phase");
  if (hat.coeff(0) != cplx{})
    throw Error(ErrorKind::NotACircleMap, "hat part must have zero constant term");
  const double defect = symmetry_defect(hat);
  if (defect > 1e-8 * hat.max_abs_coeff()) {
    std::ostringstream os;
    os << "hat violates c_{-n} = -conj(c_n): defect " << defect;
    throw Error(ErrorKind::NotACircleMap, os.str());
  }
  const int n_max = hat.truncation();
  std::vector<cplx> c(2 * static_cast<size_t>(n_max) + 1);
  for (int n = 1; n <= n_max; ++n) {
    const cplx v = 0.5 * (hat.coeff(n) - std::conj(hat.coeff(-n)));
    c[static_cast<size_t>(n_max + n)] = v;
    c[static_cast<size_t>(n_max - n)] = -std::conj(v);
  }
  hat_ = LaurentSeries(n_max, hat.width(), std::move(c));
}

CircleDiffeo CircleDiffeo::identity(int truncation, double width) {
  return {0.0, LaurentSeries(truncation, width)};
}

CircleDiffeo CircleDiffeo::rotation(double phase, int truncation, double width) {
  return {phase, LaurentSeries(truncation, width)};
}

cplx CircleDiffeo::operator()(cplx w) const {
  return w * std::exp(cplx{0.0, phase_} + hat_(w));
}

double CircleDiffeo::lift_increment(double x) const {
  const cplx w = std::polar(1.0, kTwoPi * x);
  return (phase_ + hat_(w).imag()) / kTwoPi;
}

double symmetry_defect(const LaurentSeries& s) {
  double d = std::abs(s.coeff(0).real());
  for (int n = 1; n <= s.truncation(); ++n)
    d = std::max(d, std::abs(s.coeff(n) + std::conj(s.coeff(-n))));
  return d;
}

double circle_defect(const CircleDiffeo& f, int samples) {
  double d = 0.0;
  for (cplx w : unit_circle_points(samples)) d = std::max(d, std::abs(std::abs(f(w)) - 1.0));
  return d;
}

CircleDiffeo expand(std::span<const cplx> fvals, int truncation, double width, ExpansionStats* stats) {
  const int m = static_cast<int>(fvals.size());
  if (m < 4 * truncation || m < 2)
    throw Error(ErrorKind::InsufficientSampling, "expand needs at least 4N unit-circle samples");
  const auto pts = unit_circle_points(m);
  std::vector<cplx> g(fvals.size());
  for (size_t k = 0; k < g.size(); ++k) g[k] = fvals[k] / pts[k];

  // continuous branch of arg g along the circle
  std::vector<double> arg(g.size());
  arg[0] = std::arg(g[0]);
  for (size_t k = 1; k < g.size(); ++k) arg[k] = arg[k - 1] + std::arg(g[k] / g[k - 1]);
  const double total = arg.back() + std::arg(g[0] / g.back()) - arg[0];
  const long winding = std::lround(total / kTwoPi);
  if (winding != 0) {
    std::ostringstream os;
    os << "log(f(w)/w) has no single-valued branch: winding number " << winding;
    throw Error(ErrorKind::Branch, os.str());
  }

  double mean_arg = 0.0;
  for (double a : arg) mean_arg += a;
  mean_arg /= m;
  std::vector<cplx> h(g.size());
  double scale = 1.0;
  for (size_t k = 0; k < g.size(); ++k) {
    h[k] = {std::log(std::abs(g[k])), arg[k] - mean_arg};
    scale = std::max(scale, std::abs(h[k]));
  }
  return reexpand(h, mean_arg, scale, truncation, width, stats);
}

RotationNumber rotation_number(const CircleDiffeo& f, long iters) {
  if (iters < 1000) throw Error(ErrorKind::Domain, "rotation_number needs at least 1000 iterations");
  iters -= iters % 4;
  const long q1 = iters / 4, q2 = iters / 2;
  // displacement kept as integer turns plus a fractional position
  long turns = 0;
  double frac = 0.0;
  double d1 = 0.0, d2 = 0.0, d4 = 0.0;
  for (long k = 1; k <= iters; ++k) {
    frac += f.lift_increment(frac);
    const double fl = std::floor(frac);
    turns += static_cast<long>(fl);
    frac -= fl;
    if (k == q1) d1 = static_cast<double>(turns) + frac;
    if (k == q2) d2 = static_cast<double>(turns) + frac;
  }
  d4 = static_cast<double>(turns) + frac;
  const double r1 = d1 / static_cast<double>(q1);
  const double r2 = d2 / static_cast<double>(q2);
  const double r4 = d4 / static_cast<double>(iters);
  const double fine = 2.0 * r4 - r2;
  const double coarse = 2.0 * r2 - r1;
  RotationNumber out;
  out.value = fine - std::floor(fine);
  if (out.value >= 1.0) out.value = 0.0;
  out.spread = std::abs(fine - coarse);
  out.converged = out.spread <= 1e-6;
  return out;
}

CircleDiffeo compose(const CircleDiffeo& g, const CircleDiffeo& f, double out_width, ExpansionStats* stats) {
  require_nested(out_width, f.width(), "out_width annulus inside the domain of f");
  const double image = out_width + majorant_norm(f.hat(), out_width);
  require_nested(image, g.width(), "f(annulus) inside the domain of g");

  const int n = std::max(g.truncation(), f.truncation());
  const auto pts = unit_circle_points(sample_count(n));
  std::vector<cplx> h(pts.size());
  double scale = 0.0;
  for (size_t k = 0; k < pts.size(); ++k) {
    const cplx outer = g.hat()(f(pts[k]));
    const cplx inner = f.hat()(pts[k]);
    h[k] = outer + inner;
    scale = std::max({scale, std::abs(outer), std::abs(inner)});
  }
  return reexpand(h, g.phase() + f.phase(), scale, n, out_width, stats);
}

cplx invert_point(const CircleDiffeo& psi, cplx v) {
  const cplx zeta0 = std::log(v) - cplx{0.0, psi.phase()};
  cplx zeta = zeta0;
  std::optional<LaurentSeries> dhat;
  for (int it = 0; it < kMaxInverseIters; ++it) {
    if (std::abs(zeta.real()) > psi.width()) break;
    const cplx z = std::exp(zeta);
    cplx next;
    if (it < kFixedPointIters) {
      next = zeta0 - psi.hat()(z);
    } else {
      if (!dhat) dhat = psi.hat().zeta_derivative();
      const cplx g = zeta + psi.hat()(z) - zeta0;
      next = zeta - g / (1.0 + (*dhat)(z));
    }
    const double step = std::abs(next - zeta);
    zeta = next;
    if (step <= 8.0 * kEps * std::max(1.0, std::abs(zeta))) return std::exp(zeta);
  }
  std::ostringstream os;
  os << "inverse iteration did not converge at v = " << v;
  throw Error(ErrorKind::InversionDiverged, os.str());
}

CircleDiffeo invert(const CircleDiffeo& psi, double out_width, double derivative_bound, ExpansionStats* stats) {
  const double sigma = psi.width();
  const double dbound = log_derivative_majorant(psi.hat(), sigma);
  if (dbound > derivative_bound) {
    std::ostringstream os;
    os << "log-derivative majorant " << dbound << " exceeds " << derivative_bound;
    auto err = Error(ErrorKind::UnivalenceUncertified, os.str());
    err.certificate = "log_derivative_bound";
    throw err;
  }
  require_nested(out_width, sigma - 2.0 * majorant_norm(psi.hat(), sigma),
                 "out_width within the certified inverse domain");

  const int n = psi.truncation();
  const auto pts = unit_circle_points(sample_count(n));
  std::vector<cplx> h(pts.size());
  double scale = 0.0;
  for (size_t k = 0; k < pts.size(); ++k) {
    const cplx z = invert_point(psi, pts[k]);
    h[k] = -psi.hat()(z);
    scale = std::max(scale, std::abs(h[k]));
  }
  CircleDiffeo inv = reexpand(h, -psi.phase(), scale, n, out_width, stats);

  // psi o psi^{-1} = id on the out_width annulus, psi^{-1} o psi = id on |w| = 1
  double worst = 0.0;
  for (double r : {std::exp(-out_width), 1.0, std::exp(out_width)}) {
    for (int k = 0; k < kCertSamples; ++k) {
      const cplx v = std::polar(r, kTwoPi * (k + 0.5) / kCertSamples);
      worst = std::max(worst, std::abs(psi(inv(v)) - v) / r);
    }
  }
  for (int k = 0; k < kCertSamples; ++k) {
    const cplx u = std::polar(1.0, kTwoPi * (k + 0.25) / kCertSamples);
    worst = std::max(worst, std::abs(inv(psi(u)) - u));
  }
  if (worst > kInverseCertTol) {
    std::ostringstream os;
    os << "inverse certification failed: |psi o psi^-1 - id| = " << worst;
    throw Error(ErrorKind::InversionDiverged, os.str());
  }
  return inv;
}

CircleDiffeo conjugate(const CircleDiffeo& outer, const CircleDiffeo& f, const CircleDiffeo& inner,
                       double out_width, double derivative_bound, ExpansionStats* stats) {
  const double dbound = log_derivative_majorant(outer.hat(), outer.width());
  if (dbound > derivative_bound) {
    std::ostringstream os;
    os << "log-derivative majorant of the outer map " << dbound << " exceeds " << derivative_bound;
    auto err = Error(ErrorKind::UnivalenceUncertified, os.str());
    err.certificate = "log_derivative_bound";
    throw err;
  }
  require_nested(out_width, inner.width(), "out_width annulus inside the domain of the inner map");
  const double w1 = out_width + majorant_norm(inner.hat(), out_width);
  require_nested(w1, f.width(), "inner(annulus) inside the domain of f");
  const double w2 = w1 + majorant_norm(f.hat(), w1);
  require_nested(w2, outer.width() - majorant_norm(outer.hat(), outer.width()),
                 "f(inner(annulus)) inside the image of the outer map");

  const int n = std::max({outer.truncation(), f.truncation(), inner.truncation()});
  const auto pts = unit_circle_points(sample_count(n));
  std::vector<cplx> h(pts.size());
  double scale = 0.0;
  for (size_t k = 0; k < pts.size(); ++k) {
    const cplx u = inner(pts[k]);
    const cplx v = f(u);
    const cplx z = invert_point(outer, v);
    // log(z/w) = log(z/v) + log(v/u) + log(u/w), each term small
    const cplx a = f.hat()(u);
    const cplx b = inner.hat()(pts[k]);
    const cplx c = outer.hat()(z);
    h[k] = a + b - c;
    scale = std::max({scale, std::abs(a), std::abs(b), std::abs(c)});
  }
  return reexpand(h, f.phase() + inner.phase() - outer.phase(), scale, n, out_width, stats);
}

}  // namespace kamlin
