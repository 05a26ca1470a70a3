#include "kamlin/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <ostream>

#include "kamlin/scenario.hpp"

namespace kamlin {

namespace fs = std::filesystem;

namespace {

Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

Scenario example_scenario(const std::string& name) {
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  const double silver = std::sqrt(2.0) - 1.0;
  if (name == "flagship") return flagship_scenario();
  if (name == "linear") {
    Scenario s = build_single_chart(golden, LaurentSeries(64, 1.0), 1.0);
    s.name = "linear";
    return s;
  }
  if (name == "resonant") {
    Scenario s = build_single_chart(1.0 / 3.0, LaurentSeries(64, 1.0).with_coeff(3, 1e-4).with_coeff(-3, -1e-4), 1.0);
    s.name = "resonant";
    s.params.strict_schedule = false;
    return s;
  }
  if (name == "genus2") {
    const auto pair = consistent_pair(golden, silver, LaurentSeries(64, 1.0).with_coeff(1, 1e-4).with_coeff(-1, -1e-4), 1.0);
    Scenario s = build_genus2(pair[0], pair[1], 1.0);
    s.name = "genus2";
    s.params.eta0 = 0.05;
    s.params.strict_schedule = false;
    return s;
  }
  if (name == "genus2-inconsistent") {
    const LaurentSeries hat = LaurentSeries(64, 1.0).with_coeff(1, 1e-4).with_coeff(-1, -1e-4);
    Scenario s = build_genus2(CircleDiffeo(kTwoPi * golden, hat), CircleDiffeo(kTwoPi * silver, hat), 1.0);
    s.name = "genus2-inconsistent";
    s.params.eta0 = 0.05;
    s.params.strict_schedule = false;
    return s;
  }
  throw Error(ErrorKind::InvalidScenario, "unknown example '" + name + "'");
}

json gate_json(const GateReport& g) {
  return {{"gate", g.gate}, {"passed", g.passed}, {"margin", g.margin}, {"worst_edge", g.worst_edge},
          {"edge_norm", g.edge_norm}};
}

int cmd_run(const std::string& path, const std::string& out_dir, bool no_strict, std::ostream& out,
            std::ostream& err) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::optional<Scenario> scenario;
  std::optional<Error> failure;
  RunResult result;
  try {
    scenario = load_scenario(path);
    if (no_strict) scenario->params.strict_schedule = false;
    const KamParams params = resolve_params(*scenario);
    result = run(scenario->system, params);
    failure = result.failure;
  } catch (const Error& e) {
    failure = e;
  }

  const ScenarioOutputs outputs = scenario ? scenario->outputs : ScenarioOutputs{};
  if (outputs.trace_csv) write_text_file(dir / "trace.csv", result.trace.to_csv());
  if (outputs.trace_json) write_text_file(dir / "trace.json", to_json(result.trace).dump(2) + "\n");
  if (outputs.conjugacy_json && result.conjugacy)
    write_text_file(dir / "conjugacy.json", to_json(*result.conjugacy).dump(2) + "\n");

  json diag = diagnostics_json(failure, "converged");
  diag["steps"] = result.steps.size();
  if (!result.gate.edge_norm.empty()) diag["gate"] = gate_json(result.gate);
  if (result.conjugacy) diag["conjugation_residual"] = result.conjugation_residual;
  json violations = json::array();
  for (const auto& s : result.steps)
    for (const auto& v : s.violations) violations.push_back(v);
  diag["logged_violations"] = violations;
  if (outputs.diagnostics_json) write_text_file(dir / "diagnostics.json", diag.dump(2) + "\n");

  if (failure) {
    err << "kamlin run: " << to_string(failure->kind()) << ": " << failure->what() << '\n';
    return exit_code(failure->kind());
  }
  out << "converged in " << result.steps.size() << " steps; conjugation residual " << result.conjugation_residual
      << '\n';
  return 0;
}

int cmd_gate(const std::string& path, std::ostream& out) {
  const Scenario s = load_scenario(path);
  const KamParams params = resolve_params(s);
  const GateReport g = gate_check(s.system, params);
  json j = gate_json(g);
  j["C0"] = params.C0;
  j["C1"] = params.C1();
  j["eta0"] = params.eta0;
  out << j.dump(2) << '\n';
  return g.passed ? 0 : exit_code(ErrorKind::GateFailed);
}

int cmd_rotnum(const std::string& path, long iters, std::ostream& out) {
  const Scenario s = load_scenario(path);
  json rows = json::array();
  for (const auto& r : alpha_vs_rotation(s.system, iters)) {
    rows.push_back({{"edge", r.edge},
                    {"phase", r.phase},
                    {"rotation_number", r.rotation_phase / kTwoPi},
                    {"rotation_phase", r.rotation_phase},
                    {"difference", r.difference},
                    {"converged", r.converged}});
  }
  out << rows.dump(2) << '\n';
  return 0;
}

int cmd_dioph(const std::string& path, std::optional<int> modes, std::optional<double> mu, std::ostream& out) {
  const Scenario s = load_scenario(path);
  const int N = modes.value_or(s.params.N);
  const double m = mu.value_or(s.params.mu);
  const auto spectrum = amplification_spectrum(s.system.bundle(), N);
  const auto fit = fit_diophantine(spectrum, m);
  json values = json::array();
  for (int n = -N; n <= N; ++n)
    if (n != 0) values.push_back({n, spectrum.at(n)});
  out << json{{"mu", m},
              {"C0", fit.C0},
              {"argmax_mode", fit.argmax_mode},
              {"growth_exponent", fit.growth_exponent},
              {"super_polynomial", fit.super_polynomial},
              {"spectrum", values}}
             .dump(2)
      << '\n';
  return 0;
}

int cmd_verify(const std::string& conj_path, const std::string& scenario_path, std::ostream& out) {
  const Scenario s = load_scenario(scenario_path);
  const Conjugacy conj = conjugacy_from_json(read_json_file(conj_path), s.system.nerve());
  const double residual = conjugacy_residual(conj, s.system);
  const bool passed = residual <= s.params.conjugacy_tol;
  out << json{{"residual", residual}, {"tol", s.params.conjugacy_tol}, {"passed", passed}}.dump(2) << '\n';
  return passed ? 0 : exit_code(ErrorKind::VerificationFailed);
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linearization of circle-diffeomorphism cocycles by KAM iteration", "kamlin"};
  app.require_subcommand(1);

  std::string scenario_path, conj_path, out_dir = ".", example_name, example_out;
  bool no_strict = false;
  long iters = 1L << 17;
  std::optional<int> modes;
  std::optional<double> mu;

  auto* run_cmd = app.add_subcommand("run", "run the KAM iteration and write trace, conjugacy and diagnostics");
  run_cmd->add_option("scenario", scenario_path, "scenario JSON")->required();
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_flag("--no-strict", no_strict, "log certificate failures instead of aborting");

  auto* gate_cmd = app.add_subcommand("gate", "check the initial smallness gate");
  gate_cmd->add_option("scenario", scenario_path, "scenario JSON")->required();

  auto* rot_cmd = app.add_subcommand("rotnum", "per-edge rotation numbers against the edge phases");
  rot_cmd->add_option("scenario", scenario_path, "scenario JSON")->required();
  rot_cmd->add_option("--iters", iters, "orbit length")->check(CLI::Range(1000L, 1L << 30));

  auto* dioph_cmd = app.add_subcommand("dioph", "amplification spectrum and Diophantine constant fit");
  dioph_cmd->add_option("scenario", scenario_path, "scenario JSON")->required();
  dioph_cmd->add_option("--modes", modes, "largest mode")->check(CLI::PositiveNumber);
  dioph_cmd->add_option("--mu", mu, "Diophantine exponent");

  auto* verify_cmd = app.add_subcommand("verify", "check a conjugacy against a scenario");
  verify_cmd->add_option("conjugacy", conj_path, "conjugacy JSON")->required();
  verify_cmd->add_option("scenario", scenario_path, "scenario JSON")->required();

  auto* example_cmd = app.add_subcommand("example", "write a built-in scenario");
  example_cmd->add_option("name", example_name, "flagship | linear | resonant | genus2 | genus2-inconsistent")
      ->required();
  example_cmd->add_option("output", example_out, "destination JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return cmd_run(scenario_path, out_dir, no_strict, out, err);
    if (*gate_cmd) return cmd_gate(scenario_path, out);
    if (*rot_cmd) return cmd_rotnum(scenario_path, iters, out);
    if (*dioph_cmd) return cmd_dioph(scenario_path, modes, mu, out);
    if (*verify_cmd) return cmd_verify(conj_path, scenario_path, out);
    if (*example_cmd) {
      write_text_file(example_out, to_json(example_scenario(example_name)).dump(2) + "\n");
      return 0;
    }
  } catch (const Error& e) {
    err << "kamlin: " << to_string(e.kind()) << ": " << e.what() << '\n';
    out << diagnostics_json(e, "").dump(2) << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "kamlin: " << e.what() << '\n';
    return exit_code(ErrorKind::InvalidScenario);
  }
  return 2;
}

}  // namespace kamlin
