#include "kamlin/annulus_series.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "kamlin/error.hpp"

namespace kamlin {

namespace {

// fftw's planner is not thread-safe; execution with a finished plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void require_width(double width) {
  if (!(width > 0.0) || !std::isfinite(width)) {
    std::ostringstream os;
    os << "series width must be positive and finite, got " << width;
    throw Error(ErrorKind::Domain, os.str());
  }
}

}  // namespace

LaurentSeries::LaurentSeries(int truncation, double width)
    : n_(truncation), width_(width), coeffs_(2 * static_cast<size_t>(truncation) + 1) {
  if (truncation < 0) throw Error(ErrorKind::Domain, "negative truncation degree");
  require_width(width);
}

LaurentSeries::LaurentSeries(int truncation, double width, std::vector<cplx> coeffs)
    : n_(truncation), width_(width), coeffs_(std::move(coeffs)) {
  if (truncation < 0) throw Error(ErrorKind::Domain, "negative truncation degree");
  require_width(width);
  if (coeffs_.size() != 2 * static_cast<size_t>(truncation) + 1)
    throw Error(ErrorKind::Domain, "coefficient vector must have 2N+1 entries");
}

LaurentSeries LaurentSeries::monomial(int truncation, double width, int n, cplx c) {
  return LaurentSeries(truncation, width).with_coeff(n, c);
}

cplx LaurentSeries::coeff(int n) const {
  if (n < -n_ || n > n_) return {};
  return coeffs_[static_cast<size_t>(n + n_)];
}

bool LaurentSeries::is_zero() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](cplx c) { return c == cplx{}; });
}

double LaurentSeries::max_abs_coeff() const {
  double m = 0.0;
  for (cplx c : coeffs_) m = std::max(m, std::abs(c));
  return m;
}

LaurentSeries LaurentSeries::with_width(double width) const {
  return LaurentSeries(n_, width, coeffs_);
}

LaurentSeries LaurentSeries::with_coeff(int n, cplx c) const {
  if (n < -n_ || n > n_) {
    std::ostringstream os;
    os << "index " << n << " outside truncation " << n_;
    throw Error(ErrorKind::Domain, os.str());
  }
  auto out = coeffs_;
  out[static_cast<size_t>(n + n_)] = c;
  return LaurentSeries(n_, width_, std::move(out));
}

LaurentSeries LaurentSeries::resized(int truncation) const {
  std::vector<cplx> out(2 * static_cast<size_t>(truncation) + 1);
  for (int n = -truncation; n <= truncation; ++n) out[static_cast<size_t>(n + truncation)] = coeff(n);
  return LaurentSeries(truncation, width_, std::move(out));
}

LaurentSeries LaurentSeries::zeta_derivative() const {
  auto out = coeffs_;
  for (int n = -n_; n <= n_; ++n) out[static_cast<size_t>(n + n_)] *= static_cast<double>(n);
  return LaurentSeries(n_, width_, std::move(out));
}

cplx LaurentSeries::operator()(cplx w) const {
  const double r = std::abs(w);
  const double slack = 1e-12 * std::max(1.0, width_);
  if (r == 0.0 || std::abs(std::log(r)) > width_ + slack) {
    std::ostringstream os;
    os << "point |w| = " << r << " outside annulus of width " << width_;
    throw Error(ErrorKind::Domain, os.str());
  }
  cplx pos{};
  for (int n = n_; n >= 0; --n) pos = pos * w + coeff(n);
  const cplx inv = 1.0 / w;
  cplx neg{};
  for (int n = n_; n >= 1; --n) neg = (neg + coeff(-n)) * inv;
  return pos + neg;
}

LaurentSeries LaurentSeries::operator-() const { return cplx{-1.0} * *this; }

LaurentSeries operator+(const LaurentSeries& a, const LaurentSeries& b) {
  const int n = std::max(a.n_, b.n_);
  std::vector<cplx> out(2 * static_cast<size_t>(n) + 1);
  for (int k = -n; k <= n; ++k) out[static_cast<size_t>(k + n)] = a.coeff(k) + b.coeff(k);
  return LaurentSeries(n, std::min(a.width_, b.width_), std::move(out));
}

LaurentSeries operator-(const LaurentSeries& a, const LaurentSeries& b) { return a + (-b); }

LaurentSeries operator*(cplx s, const LaurentSeries& a) {
  auto out = a.coeffs_;
  for (auto& c : out) c *= s;
  return LaurentSeries(a.n_, a.width_, std::move(out));
}

double majorant_norm(const LaurentSeries& s, double sigma_prime) {
  if (!(sigma_prime > 0.0) || sigma_prime > s.width() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "majorant width " << sigma_prime << " outside (0, " << s.width() << "]";
    throw Error(ErrorKind::Domain, os.str());
  }
  double sum = 0.0;
  for (int n = -s.truncation(); n <= s.truncation(); ++n)
    sum += std::abs(s.coeff(n)) * std::exp(std::abs(n) * sigma_prime);
  return sum;
}

double empirical_sup_norm(const LaurentSeries& s, double sigma_prime, int samples) {
  if (samples < 2 * s.truncation() + 1)
    throw Error(ErrorKind::InsufficientSampling, "empirical_sup_norm needs samples >= 2N+1");
  double best = 0.0;
  for (double radius : {std::exp(-sigma_prime), 1.0, std::exp(sigma_prime)}) {
    for (int k = 0; k < samples; ++k) {
      const cplx w = std::polar(radius, kTwoPi * k / samples);
      best = std::max(best, std::abs(s(w)));
    }
  }
  return best;
}

double log_derivative_majorant(const LaurentSeries& s, double sigma_prime) {
  double sum = 0.0;
  for (int n = -s.truncation(); n <= s.truncation(); ++n)
    sum += std::abs(n) * std::abs(s.coeff(n)) * std::exp(std::abs(n) * sigma_prime);
  return sum;
}

std::vector<cplx> unit_circle_points(int samples) {
  std::vector<cplx> pts(static_cast<size_t>(samples));
  for (int k = 0; k < samples; ++k) pts[static_cast<size_t>(k)] = std::polar(1.0, kTwoPi * k / samples);
  return pts;
}

std::vector<cplx> sample_unit_circle(const LaurentSeries& s, int samples) {
  auto pts = unit_circle_points(samples);
  for (auto& p : pts) p = s(p);
  return pts;
}

namespace detail {

std::vector<cplx> dft(std::span<const cplx> values) {
  const int m = static_cast<int>(values.size());
  std::vector<cplx> in(values.begin(), values.end());
  std::vector<cplx> out(values.size());
  auto* pin = reinterpret_cast<fftw_complex*>(in.data());
  auto* pout = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(m, pin, pout, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace detail

CircleExpansion coeffs_from_circle(std::span<const cplx> fvals, int truncation, double width) {
  const int m = static_cast<int>(fvals.size());
  if (m < 4 * truncation || m == 0) {
    std::ostringstream os;
    os << "coefficient extraction needs at least 4N = " << 4 * truncation << " samples, got " << m;
    throw Error(ErrorKind::InsufficientSampling, os.str());
  }
  const auto spectrum = detail::dft(fvals);
  std::vector<cplx> c(2 * static_cast<size_t>(truncation) + 1);
  double tail = 0.0;
  for (int k = 0; k < m; ++k) {
    const int n = (k <= m / 2) ? k : k - m;  // signed frequency
    const cplx v = spectrum[static_cast<size_t>(k)] / static_cast<double>(m);
    if (std::abs(n) <= truncation)
      c[static_cast<size_t>(n + truncation)] = v;
    else
      tail += std::abs(v);
  }
  return {LaurentSeries(truncation, width, std::move(c)), tail};
}

DecayReport decay_check(const LaurentSeries& s, double norm_sigma, double sigma_prime, double rel_slack) {
  DecayReport rep;
  const double sigma = s.width();
  for (int n = -s.truncation(); n <= s.truncation(); ++n) {
    if (n == 0) continue;
    const double bound = norm_sigma * std::exp(-std::abs(n) * sigma);
    const double mag = std::abs(s.coeff(n));
    if (mag > bound * (1.0 + rel_slack) + 1e-300) {
      rep.passed = false;
      rep.violations.push_back(n);
    }
  }
  if (sigma_prime > 0.0 && sigma_prime < sigma) {
    const double gap = sigma - sigma_prime;
    const double q = std::exp(-gap);
    rep.tail_bound = norm_sigma * 2.0 * std::pow(q, s.truncation() + 1) / (1.0 - q);
  }
  return rep;
}

}  // namespace kamlin
