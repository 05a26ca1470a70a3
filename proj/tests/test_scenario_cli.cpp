#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "kamlin/cli.hpp"
#include "kamlin/scenario.hpp"

using namespace kamlin;
namespace fs = std::filesystem;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;
const double kSilver = std::sqrt(2.0) - 1.0;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kamlin_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path write_scenario(const fs::path& dir, const Scenario& s) {
  const fs::path p = dir / "scenario.json";
  write_text_file(p, to_json(s).dump(2));
  return p;
}

std::vector<TraceRow> without_wall_time(std::vector<TraceRow> rows) {
  for (auto& r : rows) r.wall_ms = 0.0;
  return rows;
}

bool same_rows(const std::vector<TraceRow>& a, const std::vector<TraceRow>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.m != y.m || x.sigma != y.sigma || x.eta != y.eta || x.delta != y.delta || x.max_hat_norm != y.max_hat_norm ||
        x.worst_mode_residual != y.worst_mode_residual || x.tail_mass != y.tail_mass)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("series and maps survive a JSON round trip") {
  const LaurentSeries s = LaurentSeries(5, 0.7).with_coeff(2, cplx(0.1, -0.3)).with_coeff(-4, cplx(1e-17, 2.0));
  const LaurentSeries back = series_from_json(to_json(s));
  CHECK(back.truncation() == 5);
  CHECK(back.width() == 0.7);
  for (int n = -5; n <= 5; ++n) CHECK(back.coeff(n) == s.coeff(n));

  const CircleDiffeo f(1.25, LaurentSeries(3, 1.0).with_coeff(1, cplx(1e-3, 2e-3)).with_coeff(-1, cplx(-1e-3, 2e-3)));
  const CircleDiffeo g = diffeo_from_json(to_json(f));
  CHECK(g.phase() == f.phase());
  CHECK(g.hat().coeff(-1) == f.hat().coeff(-1));

  CHECK_THROWS_AS(series_from_json(json{{"N", 2}, {"sigma", 1.0}, {"coeffs", {{3, 1.0, 0.0}}}}), Error);
  CHECK_THROWS_AS(series_from_json(json{{"sigma", 1.0}}), Error);
}

TEST_CASE("scenario round trip gives a bit-identical trace") {
  const Scenario s = flagship_scenario();
  const Scenario back = scenario_from_json(json::parse(to_json(s).dump()));
  CHECK(back.name == s.name);
  CHECK(back.params.eta0 == s.params.eta0);
  CHECK(back.params.strict_schedule == s.params.strict_schedule);
  const RunResult a = run(s.system, resolve_params(s));
  const RunResult b = run(back.system, resolve_params(back));
  REQUIRE(a.converged);
  CHECK(same_rows(without_wall_time(a.trace.rows), without_wall_time(b.trace.rows)));
}

TEST_CASE("scenario loading rejects malformed documents") {
  json j = to_json(flagship_scenario());
  j["schema"] = 2;
  CHECK_THROWS_AS(scenario_from_json(j), Error);
  j = to_json(flagship_scenario());
  j["edges"][0]["to"] = 7;
  CHECK_THROWS_AS(scenario_from_json(j), Error);
  j = to_json(flagship_scenario());
  j["edges"][0]["hat"]["coeffs"] = json::array({json::array({1, 1e-4, 0.0})});
  try {
    scenario_from_json(j);
    FAIL("expected an invalid map");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotACircleMap);
  }
}

TEST_CASE("single-chart builder") {
  const Scenario s = build_single_chart(kGolden, LaurentSeries(8, 1.0), 1.0);
  CHECK(s.system.nerve().chart_count() == 1);
  CHECK(s.system.nerve().edge_count() == 1);
  CHECK(s.system.transition(0).phase() == doctest::Approx(kTwoPi * kGolden));
  const RunResult res = run(s.system, resolve_params(s));
  CHECK(res.converged);
  CHECK(res.trace.rows.size() == 1);

  CHECK_THROWS_AS(build_single_chart(kGolden, LaurentSeries::monomial(4, 1.0, 1, 0.1), 1.0), Error);

  // theta = 1/2 with a second harmonic resonates at n = 2
  const Scenario half = build_single_chart(0.5, LaurentSeries(8, 1.0).with_coeff(2, 1e-4).with_coeff(-2, -1e-4), 1.0);
  try {
    resolve_params(half);
    FAIL("expected resonance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResonantMode);
    CHECK(e.mode == 2);
  }
}

TEST_CASE("genus-2 builder and rigid extraction") {
  const Scenario s = build_genus2(CircleDiffeo::rotation(kTwoPi * kGolden, 8, 1.0),
                                  CircleDiffeo::rotation(kTwoPi * kSilver, 8, 1.0), 1.0);
  const Nerve& n = s.system.nerve();
  CHECK(n.chart_count() == 3);
  CHECK(n.edge_count() == 4);
  CHECK(n.triples().empty());
  const RunResult res = run(s.system, resolve_params(s));
  REQUIRE(res.converged);
  CHECK(res.trace.rows.size() == 1);
  const auto ext = extract_simultaneous(*res.conjugacy, s);
  CHECK(ext.psi0.hat().is_zero());
  CHECK(ext.rotations[0] == doctest::Approx(kTwoPi * kGolden).epsilon(1e-15));
  CHECK(ext.rotations[1] == doctest::Approx(kTwoPi * kSilver).epsilon(1e-15));
}

TEST_CASE("consistent genus-2 pair is linearized by one coordinate change") {
  const LaurentSeries psi_hat = LaurentSeries(64, 1.0).with_coeff(1, 1e-4).with_coeff(-1, -1e-4);
  const auto pair = consistent_pair(kGolden, kSilver, psi_hat, 1.0);
  Scenario s = build_genus2(pair[0], pair[1], 1.0);
  s.params.eta0 = 0.05;
  s.params.strict_schedule = false;
  const RunResult res = run(s.system, resolve_params(s));
  REQUIRE(res.converged);
  const auto ext = extract_simultaneous(*res.conjugacy, s);
  CHECK(ext.chart_residual <= 1e-8);
  CHECK(ext.residuals[0] <= 1e-8);
  CHECK(ext.residuals[1] <= 1e-8);
  // the common coordinate change is psi^{-1} up to a rotation of the circle
  const CircleDiffeo psi(0.0, psi_hat);
  for (const cplx& u : unit_circle_points(16))
    CHECK(std::abs(std::abs(psi(ext.psi0(u))) - 1.0) <= 1e-12);
}

TEST_CASE("inconsistent genus-2 data fails at the first mode") {
  const LaurentSeries hat = LaurentSeries(64, 1.0).with_coeff(1, 1e-4).with_coeff(-1, -1e-4);
  Scenario s = build_genus2(CircleDiffeo(kTwoPi * kGolden, hat), CircleDiffeo(kTwoPi * kSilver, hat), 1.0);
  s.params.eta0 = 0.05;
  s.params.strict_schedule = false;
  const RunResult res = run(s.system, resolve_params(s));
  REQUIRE(res.failure.has_value());
  CHECK(res.failure->kind() == ErrorKind::CoboundaryFailure);
  CHECK(res.failure->mode == 1);
  CHECK_FALSE(res.conjugacy.has_value());
}

TEST_CASE("exit codes are a function of the outcome class") {
  for (int k = 0; k <= static_cast<int>(ErrorKind::ExtractionFailed); ++k) {
    const auto kind = static_cast<ErrorKind>(k);
    const int code = exit_code(kind);
    CHECK((code == 2 || code == 3));
    CHECK(to_string(kind) != "unknown");
  }
  CHECK(exit_code(ErrorKind::InvalidScenario) == 2);
  CHECK(exit_code(ErrorKind::ResonantMode) == 3);
}

TEST_CASE("cli run on a linear scenario") {
  const fs::path dir = scratch("linear");
  const fs::path sc = write_scenario(dir, build_single_chart(kGolden, LaurentSeries(8, 1.0), 1.0));
  const auto r = cli({"run", sc.string(), "--out", (dir / "out").string()});
  CHECK(r.code == 0);
  const json diag = read_json_file(dir / "out" / "diagnostics.json");
  CHECK(diag["outcome"] == "ok");
  std::ifstream csv(dir / "out" / "trace.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 2);

  const auto v = cli({"verify", (dir / "out" / "conjugacy.json").string(), sc.string()});
  CHECK(v.code == 0);
}

TEST_CASE("cli run, verify and gate on the flagship") {
  const fs::path dir = scratch("flagship");
  const fs::path sc = write_scenario(dir, flagship_scenario());
  const auto r = cli({"run", sc.string(), "--out", dir.string()});
  CHECK(r.code == 0);
  const json trace = read_json_file(dir / "trace.json");
  CHECK(trace["rows"].size() >= 2);
  CHECK(cli({"verify", (dir / "conjugacy.json").string(), sc.string()}).code == 0);

  const auto g = cli({"gate", sc.string()});
  CHECK(g.code == 3);
  CHECK(json::parse(g.out)["passed"] == false);

  // strict mode refuses the same input
  json strict = to_json(flagship_scenario());
  strict["params"]["strict_schedule"] = true;
  write_text_file(dir / "strict.json", strict.dump());
  const auto rs = cli({"run", (dir / "strict.json").string(), "--out", (dir / "strict").string()});
  CHECK(rs.code == 3);
  CHECK(read_json_file(dir / "strict" / "diagnostics.json")["outcome"] == "gate_failed");
  CHECK(cli({"run", (dir / "strict.json").string(), "--out", (dir / "loose").string(), "--no-strict"}).code == 0);
}

TEST_CASE("cli dioph reproduces the golden-mean small divisors") {
  const fs::path dir = scratch("dioph");
  const fs::path sc = write_scenario(dir, flagship_scenario());
  const auto r = cli({"dioph", sc.string(), "--modes", "40", "--mu", "2"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["spectrum"].size() == 80);
  for (const auto& entry : j["spectrum"]) {
    const int n = entry[0].get<int>();
    const double expected = 1.0 / std::abs(2.0 * std::sin(kPi * n * kGolden));
    CHECK(entry[1].get<double>() == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("cli reports resonance with mode and loop") {
  const fs::path dir = scratch("resonant");
  Scenario s = build_single_chart(1.0 / 3.0, LaurentSeries(16, 1.0).with_coeff(3, 1e-4).with_coeff(-3, -1e-4), 1.0);
  const fs::path sc = write_scenario(dir, s);
  const auto r = cli({"run", sc.string(), "--out", dir.string()});
  CHECK(r.code == 3);
  const json diag = read_json_file(dir / "diagnostics.json");
  CHECK(diag["outcome"] == "resonant_mode");
  CHECK(diag["mode"] == 3);
  CHECK(diag["loop"] == json::array({0}));
}

TEST_CASE("cli rotnum and validation errors") {
  const fs::path dir = scratch("rotnum");
  const fs::path sc = write_scenario(dir, build_single_chart(kGolden, LaurentSeries(8, 1.0), 1.0));
  const auto r = cli({"rotnum", sc.string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)[0]["rotation_number"].get<double>() == doctest::Approx(kGolden).epsilon(1e-12));

  write_text_file(dir / "broken.json", "{ not json");
  CHECK(cli({"run", (dir / "broken.json").string(), "--out", dir.string()}).code == 2);
  CHECK(cli({"gate", (dir / "missing.json").string()}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);
}

TEST_CASE("installed binary exit codes") {
  const char* bin = std::getenv("KAMLIN_CLI");
  if (!bin) return;
  const fs::path dir = scratch("binary");
  const fs::path sc = dir / "resonant.json";
  const std::string base = std::string(bin);
  REQUIRE(std::system((base + " example resonant " + sc.string()).c_str()) == 0);
  const int status = std::system((base + " run " + sc.string() + " --out " + dir.string() + " 2>/dev/null").c_str());
  CHECK(WEXITSTATUS(status) == 3);
}
