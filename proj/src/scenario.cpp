#include "kamlin/scenario.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace kamlin {

namespace {

Error invalid(const std::string& msg) { return Error(ErrorKind::InvalidScenario, msg); }

double wrap(double phase) {
  double p = std::fmod(phase, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  return p >= kTwoPi ? 0.0 : p;
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw invalid(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw invalid(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

}  // namespace

KamParams resolve_params(const Scenario& scenario) {
  const ScenarioParams& sp = scenario.params;
  KamParams p;
  p.mu = sp.mu;
  p.sigma0 = sp.sigma0;
  p.N = sp.N;
  p.tol = sp.tol;
  p.max_iter = sp.max_iter;
  p.strict_schedule = sp.strict_schedule;
  p.coboundary_tol = sp.coboundary_tol;
  p.conjugacy_tol = sp.conjugacy_tol;
  p.eta0 = sp.eta0 ? *sp.eta0 : 0.95 * p.eta0_bound();

  const bool linear = scenario.system.max_hat_norm(std::min(p.sigma0, scenario.system.width())) < p.tol;
  if (sp.C0) {
    p.C0 = *sp.C0;
    if (!linear && p.strict_schedule) {
      const auto spectrum = amplification_spectrum(scenario.system.bundle(), p.N);
      const auto fit = fit_diophantine(spectrum, p.mu, p.C0);
      if (!fit.failing_modes.empty()) {
        Error err(ErrorKind::ScheduleViolation, "supplied C0 = " + std::to_string(p.C0) +
                                                    " is exceeded by the amplification at mode " +
                                                    std::to_string(fit.failing_modes.front()));
        err.mode = fit.failing_modes.front();
        err.certificate = "diophantine";
        throw err;
      }
    }
  } else if (!linear) {
    const auto spectrum = amplification_spectrum(scenario.system.bundle(), p.N);
    p.C0 = fit_diophantine(spectrum, p.mu).C0;
  }
  p.validate();
  return p;
}

// ------------------------------------------------------------------- JSON

json to_json(const LaurentSeries& s) {
  json coeffs = json::array();
  const int N = s.truncation();
  for (int n = -N; n <= N; ++n) {
    const cplx c = s.coeff(n);
    if (std::abs(c) < 1e-300) continue;
    coeffs.push_back({n, c.real(), c.imag()});
  }
  return {{"N", N}, {"sigma", s.width()}, {"coeffs", coeffs}};
}

LaurentSeries series_from_json(const json& j) {
  const int N = field<int>(j, "N");
  const double sigma = field<double>(j, "sigma");
  if (N < 0) throw invalid("series truncation must be nonnegative");
  if (!(sigma > 0.0)) throw invalid("series width must be positive");
  std::vector<cplx> c(2 * static_cast<size_t>(N) + 1);
  for (const auto& entry : field_or<json>(j, "coeffs", json::array())) {
    if (!entry.is_array() || entry.size() != 3) throw invalid("series coefficients are [n, re, im] triples");
    const int n = entry[0].get<int>();
    if (std::abs(n) > N) throw invalid("coefficient index " + std::to_string(n) + " exceeds N");
    c[static_cast<size_t>(n + N)] += cplx(entry[1].get<double>(), entry[2].get<double>());
  }
  return {N, sigma, std::move(c)};
}

json to_json(const CircleDiffeo& f) { return {{"phase", f.phase()}, {"hat", to_json(f.hat())}}; }

CircleDiffeo diffeo_from_json(const json& j) {
  return {field<double>(j, "phase"), series_from_json(field<json>(j, "hat"))};
}

json to_json(const Scenario& s) {
  const Nerve& nerve = s.system.nerve();
  const auto& ids = nerve.chart_ids();
  json edges = json::array();
  for (int e = 0; e < nerve.edge_count(); ++e) {
    const auto& edge = nerve.edge(e);
    const auto& f = s.system.transition(e);
    edges.push_back({{"from", ids[static_cast<size_t>(edge.from)]},
                     {"to", ids[static_cast<size_t>(edge.to)]},
                     {"label", edge.label},
                     {"phase", f.phase()},
                     {"hat", to_json(f.hat())}});
  }
  json triples = json::array();
  for (const auto& t : nerve.triples())
    triples.push_back({ids[static_cast<size_t>(t[0])], ids[static_cast<size_t>(t[1])], ids[static_cast<size_t>(t[2])]});

  const ScenarioParams& p = s.params;
  json params = {{"mu", p.mu},
                 {"sigma0", p.sigma0},
                 {"N", p.N},
                 {"tol", p.tol},
                 {"max_iter", p.max_iter},
                 {"strict_schedule", p.strict_schedule},
                 {"coboundary_tol", p.coboundary_tol},
                 {"conjugacy_tol", p.conjugacy_tol}};
  if (p.C0) params["C0"] = *p.C0;
  if (p.eta0) params["eta0"] = *p.eta0;

  return {{"schema", kScenarioSchema},
          {"name", s.name},
          {"charts", ids},
          {"edges", edges},
          {"triples", triples},
          {"sigma", s.system.width()},
          {"params", params},
          {"outputs",
           {{"trace_csv", s.outputs.trace_csv},
            {"trace_json", s.outputs.trace_json},
            {"conjugacy_json", s.outputs.conjugacy_json},
            {"diagnostics_json", s.outputs.diagnostics_json}}}};
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw invalid("scenario must be a JSON object");
  if (field<int>(j, "schema") != kScenarioSchema) throw invalid("unsupported scenario schema");

  const auto ids = field<std::vector<int>>(j, "charts");
  std::map<int, int> index;
  for (size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], static_cast<int>(i));
  auto chart = [&](int id) {
    const auto it = index.find(id);
    if (it == index.end()) throw invalid("unknown chart id " + std::to_string(id));
    return it->second;
  };

  std::vector<NerveEdge> edges;
  std::vector<CircleDiffeo> maps;
  for (const auto& e : field<json>(j, "edges")) {
    edges.push_back({chart(field<int>(e, "from")), chart(field<int>(e, "to")), field_or<std::string>(e, "label", "")});
    maps.push_back(diffeo_from_json(e));
  }
  std::vector<std::array<int, 3>> triples;
  for (const auto& t : field_or<json>(j, "triples", json::array())) {
    const auto v = t.get<std::vector<int>>();
    if (v.size() != 3) throw invalid("triples have three chart ids");
    triples.push_back({chart(v[0]), chart(v[1]), chart(v[2])});
  }

  ScenarioParams p;
  const json pj = field_or<json>(j, "params", json::object());
  if (pj.contains("C0") && !pj.at("C0").is_null()) p.C0 = field<double>(pj, "C0");
  if (pj.contains("eta0") && !pj.at("eta0").is_null()) p.eta0 = field<double>(pj, "eta0");
  p.mu = field_or(pj, "mu", p.mu);
  p.sigma0 = field_or(pj, "sigma0", p.sigma0);
  p.N = field_or(pj, "N", p.N);
  p.tol = field_or(pj, "tol", p.tol);
  p.max_iter = field_or(pj, "max_iter", p.max_iter);
  p.strict_schedule = field_or(pj, "strict_schedule", p.strict_schedule);
  p.coboundary_tol = field_or(pj, "coboundary_tol", p.coboundary_tol);
  p.conjugacy_tol = field_or(pj, "conjugacy_tol", p.conjugacy_tol);

  ScenarioOutputs out;
  const json oj = field_or<json>(j, "outputs", json::object());
  out.trace_csv = field_or(oj, "trace_csv", out.trace_csv);
  out.trace_json = field_or(oj, "trace_json", out.trace_json);
  out.conjugacy_json = field_or(oj, "conjugacy_json", out.conjugacy_json);
  out.diagnostics_json = field_or(oj, "diagnostics_json", out.diagnostics_json);

  const double sigma = field_or(j, "sigma", p.sigma0);
  Nerve nerve(ids, std::move(edges), std::move(triples));
  return {field_or<std::string>(j, "name", ""), TransitionSystem(std::move(nerve), std::move(maps), sigma), p, out};
}

json to_json(const IterationTrace& trace) {
  json rows = json::array();
  for (const auto& r : trace.rows) {
    rows.push_back({{"m", r.m},
                    {"sigma", r.sigma},
                    {"eta", r.eta},
                    {"delta", r.delta},
                    {"max_hat_norm", r.max_hat_norm},
                    {"worst_mode_residual", r.worst_mode_residual},
                    {"tail_mass", r.tail_mass},
                    {"wall_ms", r.wall_ms}});
  }
  return {{"C1", "2 C0 sigma0^mu Gamma(mu) / (1 - exp(-sigma0))^mu"}, {"rows", rows}};
}

json to_json(const Conjugacy& conj) {
  json charts = json::array();
  for (const auto& phi : conj.charts) charts.push_back(to_json(phi));
  return {{"final_width", conj.final_width}, {"charts", charts}, {"phases", conj.linear_cocycle.phases()}};
}

Conjugacy conjugacy_from_json(const json& j, const Nerve& nerve) {
  std::vector<CircleDiffeo> charts;
  for (const auto& c : field<json>(j, "charts")) charts.push_back(diffeo_from_json(c));
  if (static_cast<int>(charts.size()) != nerve.chart_count()) throw invalid("conjugacy chart count does not match the nerve");
  auto phases = field<std::vector<double>>(j, "phases");
  if (static_cast<int>(phases.size()) != nerve.edge_count()) throw invalid("conjugacy phase count does not match the nerve");
  return {std::move(charts), UnitaryFlatBundle(nerve, std::move(phases)), field<double>(j, "final_width")};
}

json diagnostics_json(const std::optional<Error>& failure, const std::string& success_message) {
  if (!failure) return {{"outcome", "ok"}, {"message", success_message}};
  const Error& e = *failure;
  json d = {{"outcome", std::string(to_string(e.kind()))}, {"message", e.what()}};
  if (e.certificate) d["failed_certificate"] = *e.certificate;
  if (e.mode) d["mode"] = *e.mode;
  if (e.edge) d["edge"] = *e.edge;
  if (!e.loop.empty()) d["loop"] = e.loop;
  if (e.holonomy) d["holonomy"] = *e.holonomy;
  return d;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw invalid(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw invalid("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------- builders

Scenario build_single_chart(double theta, const LaurentSeries& hat, double sigma0) {
  const int N = std::max(hat.truncation(), 1);
  std::vector<CircleDiffeo> maps{CircleDiffeo(kTwoPi * theta, hat.resized(N).with_width(sigma0))};
  Nerve nerve({0}, {NerveEdge{0, 0, ""}});
  Scenario s{"single-chart", TransitionSystem(std::move(nerve), std::move(maps), sigma0), {}, {}};
  s.params.sigma0 = sigma0;
  return s;
}

Scenario build_genus2(const CircleDiffeo& f1, const CircleDiffeo& f2, double sigma0) {
  const int N = std::max(f1.truncation(), f2.truncation());
  std::vector<NerveEdge> edges{{0, 1, "+"}, {0, 1, "-"}, {0, 2, "+"}, {0, 2, "-"}};
  std::vector<CircleDiffeo> maps{f1.with_width(sigma0), CircleDiffeo::identity(N, sigma0), f2.with_width(sigma0),
                                 CircleDiffeo::identity(N, sigma0)};
  Nerve nerve({0, 1, 2}, std::move(edges));
  Scenario s{"genus2", TransitionSystem(std::move(nerve), std::move(maps), sigma0), {}, {}};
  s.params.sigma0 = sigma0;
  return s;
}

std::array<CircleDiffeo, 2> consistent_pair(double theta1, double theta2, const LaurentSeries& psi_hat, double sigma0) {
  const double outer = sigma0 + 0.25;
  const CircleDiffeo psi(0.0, psi_hat.with_width(outer));
  const int N = psi_hat.truncation();
  auto conj = [&](double theta) {
    return conjugate(psi, CircleDiffeo::rotation(kTwoPi * theta, N, outer), psi, sigma0);
  };
  return {conj(theta1), conj(theta2)};
}

Scenario flagship_scenario(double eps) {
  const double theta = (std::sqrt(5.0) - 1.0) / 2.0;
  const LaurentSeries hat = LaurentSeries(64, 1.0).with_coeff(1, eps).with_coeff(-1, -eps);
  Scenario s = build_single_chart(theta, hat, 1.0);
  s.name = "golden-mean";
  s.params.eta0 = 0.05;
  s.params.strict_schedule = false;
  return s;
}

// ------------------------------------------------------------- extraction

SimultaneousLinearization extract_simultaneous(const Conjugacy& conj, const Scenario& scenario, double tol) {
  const Nerve& nerve = scenario.system.nerve();
  auto fail = [](const std::string& msg) { return Error(ErrorKind::ExtractionFailed, msg); };
  if (nerve.chart_count() != 3 || static_cast<int>(conj.charts.size()) != 3)
    throw fail("simultaneous extraction needs the three-chart genus-2 nerve");

  const CircleDiffeo& phi0 = conj.charts[0];
  SimultaneousLinearization out{phi0, {}, 0.0, {}};
  const auto pts = unit_circle_points(128);
  for (int j = 1; j <= 2; ++j) {
    const auto plus = nerve.find_edge(0, j, "+");
    const auto minus = nerve.find_edge(0, j, "-");
    if (!plus || !minus) throw fail("chart " + std::to_string(j) + " lacks its '+' or '-' edge");
    const CircleDiffeo& phij = conj.charts[static_cast<size_t>(j)];
    const cplx t_minus = conj.linear_cocycle.multiplier(*minus);
    const double rot = wrap(conj.linear_cocycle.phase(*plus) - conj.linear_cocycle.phase(*minus));
    const cplx t = std::polar(1.0, rot);
    const CircleDiffeo& f = scenario.system.transition(*plus);

    double chart_res = 0.0;
    double res = 0.0;
    for (const cplx& u : pts) {
      chart_res = std::max(chart_res, std::abs(phij(t_minus * u) - phi0(u)));
      res = std::max(res, std::abs(invert_point(phi0, f(phi0(u))) - t * u));
    }
    out.chart_residual = std::max(out.chart_residual, chart_res);
    out.rotations[static_cast<size_t>(j - 1)] = rot;
    out.residuals[static_cast<size_t>(j - 1)] = res;
  }
  if (out.chart_residual > tol) {
    std::ostringstream os;
    os << "minus-edge relation residual " << out.chart_residual << " exceeds " << tol;
    throw fail(os.str());
  }
  for (int j = 0; j < 2; ++j) {
    if (out.residuals[static_cast<size_t>(j)] > tol) {
      std::ostringstream os;
      os << "Phi_0 does not linearize f_" << j + 1 << ": residual " << out.residuals[static_cast<size_t>(j)];
      throw fail(os.str());
    }
  }
  return out;
}

}  // namespace kamlin
