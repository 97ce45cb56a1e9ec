#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "swingmpc/caseio.hpp"
#include "swingmpc/output.hpp"
#include "swingmpc/runner.hpp"
#include "swingmpc/scenario.hpp"
#include "testutil.hpp"

using namespace swingmpc;
using testutil::fixture;

namespace {

ScenarioSpec toy_spec(ControllerKind kind) {
  ScenarioSpec spec = load_scenario(fixture("scenarios/toy_loss.cfg"));
  spec.controller = kind;
  spec.sim.horizon = 3.0;  // keep unit tests quick
  spec.vsm_tuned = false;
  spec.vsm_gains = {5.0, 40.0};
  return spec;
}

// Minimal CSV reader for the self-containedness check.
std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header->push_back(cell);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("bundled toy case loads with three machines and one ibr") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  CHECK(kase.name == "toy3");
  CHECK(kase.net.buses.n_machines() == 3);
  CHECK(kase.net.buses.n_ibrs() == 1);
  CHECK(kase.net.size() == 4);
  // The hub was eliminated; the reduced net is lossless all-to-all.
  CHECK(kase.net.g.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(kase.net.b(0, 1) == doctest::Approx(25.0 / 19.0).epsilon(1e-12));
  CHECK(kase.net.b(0, 3) == doctest::Approx(20.0 / 19.0).epsilon(1e-12));
}

TEST_CASE("the 39-bus fixture loads and is connected") {
  const LoadedCase kase = load_case(fixture("cases/ne39.case"));
  CHECK(kase.net.buses.n_machines() == 10);
  CHECK(kase.net.buses.n_ibrs() == 1);
  CHECK(kase.net.size() == 11);
  CHECK(kase.params.inertia.sum() > 500.0);
}

TEST_CASE("negative inertia in a case file is rejected") {
  std::istringstream in(
      "nodes 2\n"
      "node 0 machine 1.0 m -1.0 d 0.5 droop 0.05 tau_g 0.5\n"
      "node 1 machine 1.0 m 1.0 d 0.5 droop 0.05 tau_g 0.5\n"
      "branch 0 1 0.0 -5.0\n"
      "slack 0\n");
  CHECK_THROWS_AS(parse_case(in, "inline"), CaseValidationError);
}

TEST_CASE("parse errors carry file and line number") {
  std::istringstream in(
      "nodes 2\n"
      "node 0 machine 1.0 m 1 d 0.5 droop 0.05 tau_g 0.5\n"
      "node 1 bus\n"
      "branch 0 oops 0.0 -5.0\n"
      "slack 0\n");
  CHECK_THROWS_WITH_AS(parse_case(in, "inline"), doctest::Contains("inline:4:"),
                       CaseParseError);
}

TEST_CASE("disconnected cases are rejected") {
  std::istringstream in(
      "nodes 3\n"
      "node 0 machine 1.0 m 1 d 0.5 droop 0.05 tau_g 0.5\n"
      "node 1 machine 1.0 m 1 d 0.5 droop 0.05 tau_g 0.5\n"
      "node 2 machine 1.0 m 1 d 0.5 droop 0.05 tau_g 0.5\n"
      "branch 0 1 0.0 -5.0\n"
      "shunt 2 0.1 -0.1\n"
      "slack 0\n");
  CHECK_THROWS_AS(parse_case(in, "inline"), CaseValidationError);
}

TEST_CASE("write_case round-trips the reduced matrices") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  const std::string tmp = "roundtrip_toy3.case";
  write_case(kase, tmp);
  const LoadedCase again = load_case(tmp);
  CHECK((again.net.g - kase.net.g).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((again.net.b - kase.net.b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((again.net.emf - kase.net.emf).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.params.inertia - kase.params.inertia).cwiseAbs().maxCoeff() == 0.0);
  CHECK(again.net.buses.machines == kase.net.buses.machines);
  std::remove(tmp.c_str());
}

TEST_CASE("scenario files parse into a full spec") {
  const ScenarioSpec spec = load_scenario(fixture("scenarios/toy_loss.cfg"));
  CHECK(spec.name == "toy_loss");
  CHECK(spec.controller == ControllerKind::Mipc);
  CHECK(spec.schedule.size() == 1);
  CHECK(spec.schedule[0].power == doctest::Approx(0.3));
  CHECK(spec.sim.control_period == doctest::Approx(0.02));
  CHECK(spec.use_observer);
  CHECK(spec.vsm_grid().size() == 36);
  CHECK(spec.p_max(0) == doctest::Approx(0.25));
}

TEST_CASE("unknown scenario keys are errors with line numbers") {
  std::istringstream in(
      "[scenario]\n"
      "case = cases/toy3.case\n"
      "controler = mipc\n");
  CHECK_THROWS_WITH_AS(parse_scenario(in, "inline", ""), doctest::Contains("inline:3"),
                       ConfigError);
}

TEST_CASE("no controller and no disturbance yields a quiet run") {
  ScenarioSpec spec = toy_spec(ControllerKind::None);
  spec.schedule.clear();
  spec.sim.horizon = 1.0;
  const RunResult result = run_scenario(spec);
  CHECK(result.metrics.nadir == 0.0);
  CHECK(result.metrics.max_rocof == 0.0);
  CHECK(result.metrics.violations == 0);
}

TEST_CASE("runs are deterministic bit for bit") {
  ScenarioSpec spec = toy_spec(ControllerKind::Mipc);
  spec.sim.noise_omega = 1e-3;
  spec.sim.noise_delta = 1e-3;
  const RunResult a = run_scenario(spec);
  const RunResult b = run_scenario(spec);
  CHECK(a.metrics.objective == b.metrics.objective);
  CHECK(a.metrics.nadir == b.metrics.nadir);
  CHECK((a.traj.omega - b.traj.omega).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.dhat - b.dhat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("metrics are recomputable from the emitted trajectory csv") {
  ScenarioSpec spec = toy_spec(ControllerKind::Vsm);
  const RunResult result = run_scenario(spec);
  const std::string tmp = "traj_check.csv";
  write_trajectory_csv(tmp, result);

  std::vector<std::string> header;
  const auto rows = read_csv(tmp, &header);
  REQUIRE(rows.size() == static_cast<size_t>(result.traj.samples()));

  // Rebuild the omega block from the file and recompute nadir and objective.
  Index omega0 = -1;
  for (size_t c = 0; c < header.size(); ++c)
    if (header[c] == "omega_0") omega0 = static_cast<Index>(c);
  REQUIRE(omega0 > 0);
  Trajectory rebuilt;
  rebuilt.time.resize(static_cast<Index>(rows.size()));
  rebuilt.omega.resize(static_cast<Index>(rows.size()), 3);
  for (size_t r = 0; r < rows.size(); ++r) {
    rebuilt.time(static_cast<Index>(r)) = rows[r][0];
    for (Index i = 0; i < 3; ++i)
      rebuilt.omega(static_cast<Index>(r), i) = rows[r][static_cast<size_t>(omega0 + i)];
  }
  CHECK(std::abs(rebuilt.omega.minCoeff() - result.metrics.nadir) < 1e-12);
  const double objective = control_objective(rebuilt, spec.sim.control_period);
  CHECK(std::abs(objective - result.metrics.objective) <
        1e-9 * (1.0 + result.metrics.objective));
  std::remove(tmp.c_str());
}

TEST_CASE("comparison requires a shared scenario core") {
  ScenarioSpec a = toy_spec(ControllerKind::None);
  ScenarioSpec b = toy_spec(ControllerKind::Vsm);
  b.sim.seed = a.sim.seed + 1;
  CHECK_THROWS_AS(compare({a, b}), ConfigError);
}

TEST_CASE("comparison on one spec yields a single row") {
  const Comparison cmp = compare({toy_spec(ControllerKind::None)});
  CHECK(cmp.runs.size() == 1);
  CHECK(cmp.labels[0] == "none");
  const std::string table = comparison_table(cmp);
  CHECK(table.find("objective") != std::string::npos);
}

TEST_CASE("identical controller variants see the same realization") {
  const Comparison cmp =
      compare(controller_variants(toy_spec(ControllerKind::None), {ControllerKind::None,
                                                                   ControllerKind::None}));
  CHECK(cmp.runs[0].metrics.objective == cmp.runs[1].metrics.objective);
  CHECK(cmp.runs[0].metrics.nadir == cmp.runs[1].metrics.nadir);
}

TEST_CASE("vsm support lifts the nadir above the unsupported run") {
  const Comparison cmp = compare(controller_variants(
      toy_spec(ControllerKind::None), {ControllerKind::None, ControllerKind::Vsm}));
  CHECK(cmp.runs[1].metrics.nadir > cmp.runs[0].metrics.nadir);
}

TEST_CASE("named matrix text round-trips") {
  std::mt19937_64 rng(41);
  const Mat m = testutil::randn_mat(rng, 4, 7);
  std::stringstream ss;
  write_named_matrix(ss, "test_m", m);
  write_named_matrix(ss, "second", Mat::Identity(2, 2));
  const auto back = read_named_matrices(ss);
  REQUIRE(back.count("test_m") == 1);
  REQUIRE(back.count("second") == 1);
  CHECK((back.at("test_m") - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("qp debug dump round-trips through the matrix text format") {
  std::mt19937_64 rng(43);
  QpProblem<double> p;
  p.H = Mat::Identity(3, 3);
  p.f = testutil::randn_vec(rng, 3);
  p.L = testutil::randn_mat(rng, 4, 3);
  p.w = testutil::randn_vec(rng, 4);
  std::stringstream ss;
  dump_qp(ss, p);
  const auto back = read_named_matrices(ss);
  CHECK((back.at("H") - p.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.at("f") - p.f).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.at("L") - p.L).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.at("w") - p.w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("metrics text and json carry the headline numbers") {
  ScenarioSpec spec = toy_spec(ControllerKind::Vsm);
  spec.sim.horizon = 1.0;
  const RunResult result = run_scenario(spec);
  const std::string text = metrics_text(result);
  CHECK(text.find("nadir = ") != std::string::npos);
  CHECK(text.find("controller = vsm") != std::string::npos);
  const std::string json = metrics_json(result);
  CHECK(json.find("\"controller\":\"vsm\"") != std::string::npos);
}

TEST_CASE("svg plots are written for a finished run") {
  ScenarioSpec spec = toy_spec(ControllerKind::Mipc);
  spec.sim.horizon = 1.0;
  const RunResult result = run_scenario(spec);
  write_plots(".", result);
  for (const char* name : {"omega.svg", "p_ibr.svg", "dhat.svg"}) {
    std::ifstream f(name);
    CHECK(f.good());
    std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("polyline") != std::string::npos);
    std::remove(name);
  }
}
