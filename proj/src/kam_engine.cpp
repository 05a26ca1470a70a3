#include "kamlin/kam_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace kamlin {

namespace {

double wrap(double phase) {
  double p = std::fmod(phase, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  return p >= kTwoPi ? 0.0 : p;
}

std::vector<double> phases_of(const std::vector<CircleDiffeo>& maps) {
  std::vector<double> out;
  out.reserve(maps.size());
  for (const auto& f : maps) out.push_back(f.phase());
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double signed_phase(double phase) {
  const double p = wrap(phase);
  return p > kPi ? p - kTwoPi : p;
}

// ---------------------------------------------------------------- parameters

double KamParams::eta_ratio() const { return std::pow(mu, -1.0 / (mu + 1.0)); }

double KamParams::eta0_bound() const { return std::min(kPi, (1.0 - eta_ratio()) * sigma0 / 4.0); }

double KamParams::C1() const {
  return 2.0 * C0 * std::pow(sigma0, mu) * std::tgamma(mu) / std::pow(1.0 - std::exp(-sigma0), mu);
}

double KamParams::gate() const {
  return std::min(eta0, std::pow(eta0, mu + 1.0) / ((1.0 + std::exp(sigma0)) * C1() * mu));
}

void KamParams::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidScenario, what); };
  if (!(mu > 1.0) || !std::isfinite(mu)) bad("mu must exceed 1");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) bad("sigma0 must be positive");
  if (!(C0 > 0.0) || !std::isfinite(C0)) bad("C0 must be positive");
  if (!(eta0 > 0.0) || !(eta0 < eta0_bound()))
    bad("eta0 = " + fmt(eta0) + " outside (0, " + fmt(eta0_bound()) + ")");
  if (N < 1) bad("N must be positive");
  if (!(tol > 0.0)) bad("tol must be positive");
  if (max_iter < 1) bad("max_iter must be positive");
  if (!(coboundary_tol > 0.0)) bad("coboundary_tol must be positive");
  if (!(conjugacy_tol > 0.0)) bad("conjugacy_tol must be positive");
}

ScheduleEntry schedule(const KamParams& params, int m) {
  const double r = params.eta_ratio();
  const double rm = std::pow(r, m);
  ScheduleEntry s;
  s.eta = params.eta0 * rm;
  s.sigma = params.sigma0 - 4.0 * params.eta0 * (1.0 - rm) / (1.0 - r);
  // delta_m / cap_m squares at every step, cap_m = eta_m^{mu+1} / ((1 + e^{sigma0}) C1 mu)
  const double k = (1.0 + std::exp(params.sigma0)) * params.C1() * params.mu;
  const double cap0 = std::pow(params.eta0, params.mu + 1.0) / k;
  const double u0 = std::min(params.eta0, cap0) / cap0;
  s.delta = std::pow(s.eta, params.mu + 1.0) / k * std::pow(u0, std::ldexp(1.0, m));
  return s;
}

double sigma_limit(const KamParams& params) {
  return params.sigma0 - 4.0 * params.eta0 / (1.0 - params.eta_ratio());
}

// ---------------------------------------------------------- transition system

TransitionSystem::TransitionSystem(Nerve nerve, std::vector<CircleDiffeo> transitions, double width)
    : bundle_(std::move(nerve), phases_of(transitions)), width_(width) {
  if (static_cast<int>(transitions.size()) != bundle_.nerve().edge_count())
    throw Error(ErrorKind::InvalidScenario, "one transition per edge is required");
  if (!(width > 0.0)) throw Error(ErrorKind::InvalidScenario, "transition width must be positive");
  transitions_.reserve(transitions.size());
  for (size_t e = 0; e < transitions.size(); ++e) {
    const double d = log_derivative_majorant(transitions[e].hat(), width);
    if (!(d < 1.0)) {
      Error err(ErrorKind::InvalidScenario,
                "transition " + std::to_string(e) + " is not certified univalent: log-derivative bound " + fmt(d));
      err.edge = static_cast<int>(e);
      throw err;
    }
    transitions_.push_back(transitions[e].with_width(width));
  }
}

double TransitionSystem::max_hat_norm(double sigma) const {
  double m = 0.0;
  for (const auto& f : transitions_) m = std::max(m, majorant_norm(f.hat(), sigma));
  return m;
}

GateReport gate_check(const TransitionSystem& system, const KamParams& params) {
  GateReport g;
  g.gate = params.gate();
  double worst = -1.0;
  for (int e = 0; e < system.nerve().edge_count(); ++e) {
    const double norm = majorant_norm(system.transition(e).hat(), std::min(params.sigma0, system.width()));
    g.edge_norm.push_back(norm);
    g.edge_pass.push_back(norm < g.gate);
    if (norm >= g.gate) g.passed = false;
    if (norm > worst) {
      worst = norm;
      g.worst_edge = e;
    }
  }
  g.margin = g.gate - std::max(worst, 0.0);
  return g;
}

// ---------------------------------------------------------------- one step

bool StepReport::all_certificates_passed() const {
  return std::all_of(certificates.begin(), certificates.end(), [](const Certificate& c) { return c.passed; });
}

StepResult kam_step(const TransitionSystem& system, int m, const KamParams& params) {
  const auto t0 = std::chrono::steady_clock::now();
  const Nerve& nerve = system.nerve();
  const int charts = nerve.chart_count();
  const int edges = nerve.edge_count();
  const int N = params.N;

  StepReport rep;
  rep.m = m;
  rep.sched = schedule(params, m);
  const ScheduleEntry next = schedule(params, m + 1);
  rep.next_delta = next.delta;
  const double sigma = rep.sched.sigma;
  const double eta = rep.sched.eta;
  if (system.width() < sigma)
    throw Error(ErrorKind::Domain, "transition width " + fmt(system.width()) + " below sigma_m = " + fmt(sigma));

  auto certify = [&](const std::string& name, double value, double bound, ErrorKind kind) {
    rep.certificates.push_back({name, value < bound, value, bound});
    if (value < bound) return;
    const std::string msg = name + ": " + fmt(value) + " >= " + fmt(bound) + " at m = " + std::to_string(m);
    if (params.strict_schedule) {
      Error err(kind, msg);
      err.certificate = name;
      throw err;
    }
    rep.violations.push_back(msg);
  };

  // inductive hypothesis
  rep.max_hat_norm = system.max_hat_norm(sigma);
  certify("inductive_bound", rep.max_hat_norm, rep.sched.delta, ErrorKind::ScheduleViolation);

  std::vector<LaurentSeries> hats;
  hats.reserve(static_cast<size_t>(edges));
  for (int e = 0; e < edges; ++e) {
    hats.push_back(system.transition(e).hat().resized(N).with_width(sigma));
    const double norm = majorant_norm(hats.back(), sigma);
    const DecayReport decay = decay_check(hats.back(), norm);
    if (!decay.passed) {
      Error err(ErrorKind::Truncation, "coefficients of transition " + std::to_string(e) + " exceed their decay bound");
      err.edge = e;
      err.certificate = "coefficient_decay";
      throw err;
    }
  }

  // mode-wise coboundary equations
  double scale = 0.0;
  for (const auto& h : hats) scale = std::max(scale, h.max_abs_coeff());
  ModeSolveOptions opts;
  opts.solvability_rel = params.coboundary_tol;
  opts.scale = scale;

  std::vector<std::vector<cplx>> a(static_cast<size_t>(charts), std::vector<cplx>(2 * static_cast<size_t>(N) + 1));
  std::vector<cplx> b(static_cast<size_t>(edges));
  for (int k = 1; k <= N; ++k) {
    for (int n : {k, -k}) {
      bool any = false;
      for (int e = 0; e < edges; ++e) {
        b[static_cast<size_t>(e)] = hats[static_cast<size_t>(e)].coeff(n);
        any = any || b[static_cast<size_t>(e)] != cplx{};
      }
      if (!any) continue;
      const ModeCochainSolution sol = solve_mode(system.bundle(), n, b, opts);
      rep.worst_mode_residual = std::max(rep.worst_mode_residual, sol.residual);
      for (int j = 0; j < charts; ++j) a[static_cast<size_t>(j)][static_cast<size_t>(n + N)] = sol.a[static_cast<size_t>(j)];
    }
  }

  std::vector<CircleDiffeo> psi;
  psi.reserve(static_cast<size_t>(charts));
  const double psi_width = sigma - eta;
  for (int j = 0; j < charts; ++j) {
    auto& c = a[static_cast<size_t>(j)];
    for (int n = 1; n <= N; ++n) {
      cplx& plus = c[static_cast<size_t>(N + n)];
      cplx& minus = c[static_cast<size_t>(N - n)];
      rep.cochain_reality_defect = std::max(rep.cochain_reality_defect, std::abs(minus + std::conj(plus)));
      const cplx sym = 0.5 * (plus - std::conj(minus));
      plus = sym;
      minus = -std::conj(sym);
    }
    psi.emplace_back(0.0, LaurentSeries(N, psi_width, c));
  }

  // coordinate-change estimates
  const double C1 = params.C1();
  for (int k = 1; k <= 4; ++k) {
    const double lambda = k * eta;
    double worst = 0.0;
    for (const auto& p : psi) worst = std::max(worst, majorant_norm(p.hat(), sigma - lambda));
    const double bound = C1 * rep.max_hat_norm * std::pow(lambda, -params.mu);
    certify("psi_norm_bound_" + std::to_string(k) + "eta", worst, bound * (1.0 + 1e-12) + 1e-300,
            ErrorKind::ScheduleViolation);
  }
  const double deriv_bound = 1.0 / (1.0 + std::exp(params.sigma0));
  double deriv = 0.0;
  for (const auto& p : psi) deriv = std::max(deriv, log_derivative_majorant(p.hat(), psi_width));
  certify("log_derivative_bound", deriv, deriv_bound, ErrorKind::ScheduleViolation);

  // domain nesting for the renewal
  double psi_deep = 0.0;
  double psi_shallow = 0.0;
  for (const auto& p : psi) {
    psi_deep = std::max(psi_deep, majorant_norm(p.hat(), sigma - 4.0 * eta));
    psi_shallow = std::max(psi_shallow, majorant_norm(p.hat(), sigma - eta));
  }
  certify("nesting_inner_image", psi_deep, eta, ErrorKind::ScheduleViolation);
  certify("nesting_transition_image", system.max_hat_norm(sigma - 3.0 * eta), eta, ErrorKind::ScheduleViolation);
  certify("nesting_inverse_domain", psi_shallow, eta, ErrorKind::ScheduleViolation);

  // renewal f_{m+1} = psi_k^{-1} o f_m o psi_j
  std::vector<CircleDiffeo> renewed;
  renewed.reserve(static_cast<size_t>(edges));
  const double inv_bound = params.strict_schedule ? deriv_bound : 1.0;
  for (int e = 0; e < edges; ++e) {
    const auto& edge = nerve.edge(e);
    ExpansionStats stats;
    CircleDiffeo f = conjugate(psi[static_cast<size_t>(edge.to)], system.transition(e),
                               psi[static_cast<size_t>(edge.from)], next.sigma, inv_bound, &stats);
    rep.tail_mass = std::max(rep.tail_mass, stats.tail_mass);
    rep.chopped_mass = std::max(rep.chopped_mass, stats.chopped_mass);
    rep.max_symmetry_projection = std::max(rep.max_symmetry_projection, stats.symmetry_defect);
    rep.max_phase_drift = std::max(rep.max_phase_drift, std::abs(signed_phase(f.phase() - system.transition(e).phase())));
    if (stats.tail_mass > 1e-3 * rep.sched.delta) {
      Error err(ErrorKind::Truncation, "renewed transition " + std::to_string(e) + " has tail mass " +
                                           fmt(stats.tail_mass) + " > 1e-3 delta_m; increase N");
      err.edge = e;
      err.certificate = "tail_mass";
      throw err;
    }
    renewed.push_back(std::move(f));
  }

  TransitionSystem next_system(nerve, std::move(renewed), next.sigma);
  rep.next_max_hat_norm = next_system.max_hat_norm(next.sigma);
  certify("quadratic_decrease", rep.next_max_hat_norm, next.delta, ErrorKind::ConvergenceViolation);
  rep.wall_ms = elapsed_ms(t0);
  return {std::move(next_system), std::move(psi), std::move(rep)};
}

// ------------------------------------------------------------------- trace

std::string IterationTrace::to_csv() const {
  std::ostringstream os;
  os << kTraceCsvHeader << '\n';
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.m << ',' << r.sigma << ',' << r.eta << ',' << r.delta << ',' << r.max_hat_norm << ','
       << r.worst_mode_residual << ',' << r.tail_mass << ',' << r.wall_ms << '\n';
  }
  return os.str();
}

// --------------------------------------------------------------- conjugacy

double conjugacy_residual(const Conjugacy& conj, const TransitionSystem& original, int samples) {
  const Nerve& nerve = original.nerve();
  double worst = 0.0;
  const auto pts = unit_circle_points(samples);
  for (int e = 0; e < nerve.edge_count(); ++e) {
    const auto& edge = nerve.edge(e);
    const auto& phi_j = conj.charts.at(static_cast<size_t>(edge.from));
    const auto& phi_k = conj.charts.at(static_cast<size_t>(edge.to));
    const cplx t = conj.linear_cocycle.multiplier(e);
    const auto& f = original.transition(e);
    for (const cplx& u : pts) worst = std::max(worst, std::abs(phi_k(t * u) - f(phi_j(u))));
  }
  return worst;
}

namespace {

Conjugacy assemble(const TransitionSystem& final_system, const std::vector<std::vector<CircleDiffeo>>& steps,
                   int charts, int N, double width) {
  std::vector<CircleDiffeo> phi;
  phi.reserve(static_cast<size_t>(charts));
  for (int j = 0; j < charts; ++j) {
    if (steps.empty()) {
      phi.push_back(CircleDiffeo::identity(N, width));
      continue;
    }
    // Phi_j = psi_{j,0} o ... o psi_{j,M-1}, built from the innermost factor out
    CircleDiffeo acc = steps.back()[static_cast<size_t>(j)].with_width(width);
    for (size_t i = steps.size() - 1; i-- > 0;) acc = compose(steps[i][static_cast<size_t>(j)], acc, width);
    phi.push_back(std::move(acc));
  }
  return {std::move(phi), UnitaryFlatBundle(final_system.nerve(), final_system.bundle().phases()), width};
}

TraceRow row_for(const KamParams& params, int m, double norm) {
  const ScheduleEntry s = schedule(params, m);
  TraceRow row;
  row.m = m;
  row.sigma = s.sigma;
  row.eta = s.eta;
  row.delta = s.delta;
  row.max_hat_norm = norm;
  return row;
}

}  // namespace

RunResult run(const TransitionSystem& system, const KamParams& params) {
  params.validate();
  RunResult res;
  res.gate = gate_check(system, params);
  if (system.width() < params.sigma0)
    throw Error(ErrorKind::InvalidScenario, "transition width " + fmt(system.width()) + " below sigma0");

  TransitionSystem current(system.nerve(), system.transitions(), params.sigma0);
  std::vector<std::vector<CircleDiffeo>> psis;

  double norm = current.max_hat_norm(params.sigma0);
  int m = 0;
  if (norm >= params.tol && params.strict_schedule && !res.gate.passed) {
    res.trace.rows.push_back(row_for(params, 0, norm));
    Error err(ErrorKind::GateFailed, "largest transition norm " + fmt(norm) + " at sigma0 is not below the gate " +
                                         fmt(res.gate.gate));
    err.edge = res.gate.worst_edge;
    err.certificate = "gate";
    res.failure = err;
    return res;
  }

  while (norm >= params.tol) {
    if (m >= params.max_iter) {
      res.failure = Error(ErrorKind::NonConvergence, "no convergence within " + std::to_string(params.max_iter) +
                                                         " iterations; last norm " + fmt(norm));
      return res;
    }
    TraceRow row = row_for(params, m, norm);
    try {
      StepResult step = kam_step(current, m, params);
      row.worst_mode_residual = step.report.worst_mode_residual;
      row.tail_mass = step.report.tail_mass;
      row.wall_ms = step.report.wall_ms;
      res.trace.rows.push_back(row);
      norm = step.report.next_max_hat_norm;
      res.steps.push_back(std::move(step.report));
      psis.push_back(std::move(step.psi));
      current = std::move(step.next);
    } catch (const Error& e) {
      res.trace.rows.push_back(row);
      res.failure = e;
      return res;
    }
    ++m;
  }
  res.trace.rows.push_back(row_for(params, m, norm));

  try {
    const double width = schedule(params, m).sigma;
    res.conjugacy = assemble(current, psis, system.nerve().chart_count(), params.N, width);
    res.conjugation_residual = conjugacy_residual(*res.conjugacy, system);
  } catch (const Error& e) {
    res.conjugacy.reset();
    res.failure = e;
    return res;
  }
  if (!(res.conjugation_residual <= params.conjugacy_tol)) {
    Error err(ErrorKind::VerificationFailed, "conjugacy residual " + fmt(res.conjugation_residual) + " exceeds " +
                                                 fmt(params.conjugacy_tol));
    err.certificate = "conjugacy_residual";
    res.failure = err;
    return res;
  }
  res.converged = true;
  return res;
}

std::vector<AlphaRotation> alpha_vs_rotation(const TransitionSystem& system, long iters) {
  std::vector<AlphaRotation> out;
  for (int e = 0; e < system.nerve().edge_count(); ++e) {
    const auto& f = system.transition(e);
    const RotationNumber rho = rotation_number(f, iters);
    AlphaRotation ar;
    ar.edge = e;
    ar.phase = f.phase();
    ar.rotation_phase = wrap(kTwoPi * rho.value);
    ar.difference = signed_phase(ar.phase - ar.rotation_phase);
    ar.converged = rho.converged;
    out.push_back(ar);
  }
  return out;
}

}  // namespace kamlin
