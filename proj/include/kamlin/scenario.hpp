#pragma once

// Scenario documents, their JSON form, the built-in builders and the
// genus-2 simultaneous-linearization extraction.

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kamlin/kam_engine.hpp"

namespace kamlin {

using json = nlohmann::json;

inline constexpr int kScenarioSchema = 1;

/// Parameters as written in a scenario; omitted constants are resolved by
/// resolve_params().
struct ScenarioParams {
  std::optional<double> C0;
  double mu = 2.0;
  double sigma0 = 1.0;
  std::optional<double> eta0;
  int N = 64;
  double tol = 1e-10;
  int max_iter = 40;
  bool strict_schedule = true;
  double coboundary_tol = 1e-2;
  double conjugacy_tol = 1e-8;
};

struct ScenarioOutputs {
  bool trace_csv = true;
  bool trace_json = true;
  bool conjugacy_json = true;
  bool diagnostics_json = true;
};

struct Scenario {
  std::string name;
  TransitionSystem system;
  ScenarioParams params;
  ScenarioOutputs outputs;
};

/// Fills C0 from the amplification spectrum over |n| <= N when absent and
/// eta0 with 0.95 of its admissible bound when absent.
KamParams resolve_params(const Scenario& scenario);

// JSON forms --------------------------------------------------------------

json to_json(const LaurentSeries& s);
LaurentSeries series_from_json(const json& j);

json to_json(const CircleDiffeo& f);
CircleDiffeo diffeo_from_json(const json& j);

json to_json(const Scenario& s);
/// Throws InvalidScenario on schema problems; map and nerve validation
/// errors propagate with their own kinds.
Scenario scenario_from_json(const json& j);

json to_json(const IterationTrace& trace);
json to_json(const Conjugacy& conj);
/// Rebuilds a conjugacy whose linear cocycle lives on `nerve`.
Conjugacy conjugacy_from_json(const json& j, const Nerve& nerve);

json diagnostics_json(const std::optional<Error>& failure, const std::string& success_message);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Builders ----------------------------------------------------------------

/// One chart, one self-loop with phase 2 pi theta and the given hat.
Scenario build_single_chart(double theta, const LaurentSeries& hat, double sigma0);

/// Charts {0, 1, 2}; edges 0 -> j labelled "+" carrying f_j and labelled
/// "-" carrying the identity; no triples.
Scenario build_genus2(const CircleDiffeo& f1, const CircleDiffeo& f2, double sigma0);

/// f_j = psi^{-1} o R_{2 pi theta_j} o psi with a common psi = w exp(psi_hat):
/// the simultaneously linearizable pair used for the genus-2 runs.
std::array<CircleDiffeo, 2> consistent_pair(double theta1, double theta2, const LaurentSeries& psi_hat,
                                            double sigma0);

/// The single-chart golden-mean scenario with c_1 = -conj(c_{-1}) = eps.
Scenario flagship_scenario(double eps = 1e-4);

struct SimultaneousLinearization {
  CircleDiffeo psi0;
  std::array<double, 2> rotations{};   // phi_plus - phi_minus, in [0, 2pi)
  double chart_residual = 0.0;         // |Phi_j(t_minus u) - Phi_0(u)|
  std::array<double, 2> residuals{};   // |Phi_0^{-1}(f_j(Phi_0(u))) - e^{i rotation} u|
};

/// Collapses the genus-2 conjugacy onto chart 0 and verifies that Phi_0
/// linearizes both f_j at 128 unit-circle samples. Throws ExtractionFailed.
SimultaneousLinearization extract_simultaneous(const Conjugacy& conj, const Scenario& scenario,
                                               double tol = 1e-8);

}  // namespace kamlin
