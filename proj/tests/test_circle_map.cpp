#include <doctest.h>

#include <cmath>
#include <random>

#include "kamlin/circle_map.hpp"
#include "kamlin/error.hpp"

using namespace kamlin;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

LaurentSeries symmetric_hat(std::mt19937& rng, int N, double width, double amp) {
  std::normal_distribution<double> g;
  LaurentSeries s(N, width);
  for (int n = 1; n <= N; ++n) {
    const cplx c = amp * cplx(g(rng), g(rng)) * std::exp(-2.0 * n);
    s = s.with_coeff(n, c).with_coeff(-n, -std::conj(c));
  }
  return s;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Domain;
}

// F(x) - x for f(e^{2 pi i x}) = e^{2 pi i x} exp(i phi + hat), hat = 2i sum_{n>0} Im(c_n e^{2 pi i n x})
double closed_form_increment(const CircleDiffeo& f, double x) {
  double h = 0.0;
  for (int n = 1; n <= f.truncation(); ++n) h += 2.0 * std::imag(f.hat().coeff(n) * std::polar(1.0, kTwoPi * n * x));
  return (f.phase() + h) / kTwoPi;
}

double circle_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 1.0);
  return std::min(d, 1.0 - d);
}

}  // namespace

TEST_CASE("construction validates the multiplicative form") {
  CHECK(kind_of([] { CircleDiffeo(0.1, LaurentSeries::monomial(3, 1.0, 0, 0.01)); }) == ErrorKind::NotACircleMap);
  CHECK(kind_of([] { CircleDiffeo(0.1, LaurentSeries::monomial(3, 1.0, 1, 0.01)); }) == ErrorKind::NotACircleMap);
  CHECK(kind_of([] { CircleDiffeo(NAN, LaurentSeries(3, 1.0)); }) == ErrorKind::NotACircleMap);

  // a relative defect of 1e-12 is projected away exactly
  const LaurentSeries near = LaurentSeries(3, 1.0).with_coeff(2, cplx(1e-3, 2e-3)).with_coeff(-2, cplx(-1e-3, 2e-3 + 1e-15));
  const CircleDiffeo f(7.0, near);
  CHECK(f.hat().coeff(-2) == -std::conj(f.hat().coeff(2)));
  CHECK(symmetry_defect(f.hat()) == 0.0);
  CHECK(f.phase() == doctest::Approx(7.0 - kTwoPi).epsilon(1e-15));
}

TEST_CASE("valid maps preserve the unit circle") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const CircleDiffeo f(kTwoPi * std::uniform_real_distribution<double>()(rng), symmetric_hat(rng, 10, 1.0, 0.05));
    CHECK(circle_defect(f, 512) <= 1e-14);
  }
}

TEST_CASE("lift increment matches the closed form") {
  std::mt19937 rng(9);
  const CircleDiffeo f(1.3, symmetric_hat(rng, 6, 1.0, 0.02));
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.93}) CHECK(f.lift_increment(x) == doctest::Approx(closed_form_increment(f, x)).epsilon(1e-13));
  CHECK(CircleDiffeo::rotation(kTwoPi * 0.25, 4, 1.0).lift_increment(0.3) == doctest::Approx(0.25));
}

TEST_CASE("rotation number of a rigid rotation is its angle") {
  const auto r = rotation_number(CircleDiffeo::rotation(kTwoPi * kGolden, 4, 1.0));
  CHECK(r.converged);
  CHECK(circle_distance(r.value, kGolden) <= 1e-12);
  CHECK(kind_of([] { rotation_number(CircleDiffeo::identity(2, 1.0), 10); }) == ErrorKind::Domain);
}

TEST_CASE("rotation number agrees with a brute-force orbit average") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const CircleDiffeo f(kTwoPi * std::uniform_real_distribution<double>(0.1, 0.9)(rng), symmetric_hat(rng, 5, 1.0, 0.1));
    const long m = 1000000;
    double x = 0.0;
    for (long i = 0; i < m; ++i) x += closed_form_increment(f, x - std::floor(x));
    const double brute = x / static_cast<double>(m);
    const auto r = rotation_number(f);
    CHECK(circle_distance(r.value, brute - std::floor(brute)) <= 2e-6);
  }
}

TEST_CASE("composition agrees with pointwise evaluation") {
  std::mt19937 rng(1);
  const CircleDiffeo f(0.7, symmetric_hat(rng, 8, 1.0, 0.01).resized(48));
  const CircleDiffeo g(2.1, symmetric_hat(rng, 8, 1.0, 0.01).resized(48));
  ExpansionStats stats;
  const CircleDiffeo gf = compose(g, f, 0.5, &stats);
  CHECK(gf.phase() == doctest::Approx(std::fmod(0.7 + 2.1, kTwoPi)).epsilon(1e-3));
  for (double r : {-0.5, -0.2, 0.0, 0.3, 0.5})
    for (int k = 0; k < 7; ++k) {
      const cplx w = std::polar(std::exp(r), 0.9 * k);
      CHECK(std::abs(gf(w) - g(f(w))) <= 1e-12);
    }
  CHECK(stats.symmetry_defect <= 1e-8);
  CHECK(kind_of([&] { compose(g, f, 1.0); }) == ErrorKind::Nesting);
}

TEST_CASE("inversion is a two-sided inverse") {
  std::mt19937 rng(2);
  const CircleDiffeo psi(0.0, symmetric_hat(rng, 8, 1.0, 0.01).resized(48));
  const CircleDiffeo inv = invert(psi, 0.8);
  for (double r : {-0.6, -0.1, 0.0, 0.4, 0.6})
    for (int k = 0; k < 9; ++k) {
      const cplx v = std::polar(std::exp(r), 0.7 * k);
      CHECK(std::abs(psi(inv(v)) - v) <= 1e-11 * std::abs(v));
      CHECK(std::abs(psi(invert_point(psi, v)) - v) <= 1e-13 * std::abs(v));
    }
  for (const cplx& u : unit_circle_points(64)) CHECK(std::abs(inv(psi(u)) - u) <= 1e-12);

  CHECK(kind_of([&] { invert(CircleDiffeo(0.0, LaurentSeries::monomial(2, 1.0, 1, 0.4).with_coeff(-1, -0.4)), 0.5); }) ==
        ErrorKind::UnivalenceUncertified);
  CHECK(kind_of([&] { invert(psi, 1.0); }) == ErrorKind::Nesting);
}

TEST_CASE("conjugation matches pointwise inverse composition") {
  std::mt19937 rng(4);
  // room above the input degree for the products the conjugation creates
  const CircleDiffeo f(kTwoPi * kGolden, symmetric_hat(rng, 8, 1.0, 1e-3).resized(32));
  const CircleDiffeo inner(0.0, symmetric_hat(rng, 8, 1.0, 1e-3).resized(32));
  const CircleDiffeo outer(0.0, symmetric_hat(rng, 8, 1.0, 1e-3).resized(32));
  const CircleDiffeo c = conjugate(outer, f, inner, 0.8);
  for (double r : {-0.8, 0.0, 0.6})
    for (int k = 0; k < 11; ++k) {
      const cplx w = std::polar(std::exp(r), 0.57 * k);
      CHECK(std::abs(c(w) - invert_point(outer, f(inner(w)))) <= 1e-12 * std::abs(w));
    }
}

TEST_CASE("conjugating a rotation by a coordinate change keeps its rotation number") {
  std::mt19937 rng(8);
  const CircleDiffeo psi(0.0, symmetric_hat(rng, 6, 1.25, 0.05));
  const CircleDiffeo f = conjugate(psi, CircleDiffeo::rotation(kTwoPi * kGolden, 6, 1.25), psi, 1.0);
  CHECK(circle_distance(rotation_number(f).value, kGolden) <= 1e-6);
}

TEST_CASE("re-expansion rejects winding and non-circle samples") {
  const auto pts = unit_circle_points(64);
  std::vector<cplx> square, bulge;
  for (const cplx& w : pts) {
    square.push_back(w * w);
    bulge.push_back(w * (1.0 + 0.1 * w));
  }
  CHECK(kind_of([&] { expand(square, 8, 1.0); }) == ErrorKind::Branch);
  CHECK(kind_of([&] { expand(bulge, 8, 1.0); }) == ErrorKind::NotACircleMap);

  std::mt19937 rng(6);
  const CircleDiffeo f(0.4, symmetric_hat(rng, 8, 1.0, 0.01));
  std::vector<cplx> vals;
  for (const cplx& w : pts) vals.push_back(f(w));
  const CircleDiffeo g = expand(vals, 8, 1.0);
  CHECK(g.phase() == doctest::Approx(0.4).epsilon(1e-14));
  for (int n = -8; n <= 8; ++n) CHECK(std::abs(g.hat().coeff(n) - f.hat().coeff(n)) <= 1e-15);
}
