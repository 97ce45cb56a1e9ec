#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "swingmpc/caseio.hpp"
#include "swingmpc/plant.hpp"
#include "testutil.hpp"

using namespace swingmpc;
using testutil::fixture;
using testutil::random_network;
using testutil::randn_vec;

namespace {

MachineParams lone_machine_params(double m, double d) {
  MachineParams p;
  p.inertia = Vec::Constant(1, m);
  p.damping = Vec::Constant(1, d);
  p.droop = Vec::Constant(1, 0.05);
  p.gov_tau = Vec::Constant(1, 0.5);
  p.agc_gain = 0.0;
  return p;
}

ReducedNetwork lone_machine_net() {
  BusSets buses;
  buses.machines = {0};
  buses.slack = 0;
  return make_reduced_network(Mat::Zero(1, 1), Mat::Zero(1, 1), Vec::Ones(1), buses);
}

}  // namespace

TEST_CASE("equilibrium is a fixed point of the swing step") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  PlantState s = equilibrium_state(kase.net, kase.params);
  const PlantState next = step_swing(s, kase.net, kase.params, Vec::Zero(3), 0.01);
  CHECK(next.omega.cwiseAbs().maxCoeff() < 1e-14);
  CHECK((next.delta - s.delta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one euler step of an uncoupled machine") {
  const ReducedNetwork net = lone_machine_net();
  const MachineParams params = lone_machine_params(1.0, 0.0);
  PlantState s = equilibrium_state(net, params);
  s.p_mech_base = Vec::Constant(1, 0.1);  // P_m - dP = 0.1 with dP = 0
  const PlantState next = step_swing(s, net, params, Vec::Zero(1), 0.01);
  CHECK(next.omega(0) == doctest::Approx(0.001).epsilon(1e-14));
  CHECK(next.delta(0) == doctest::Approx(0.01 * params.base_speed * 0.001).epsilon(1e-12));
}

TEST_CASE("governor state converges to -omega/droop") {
  const MachineParams params = lone_machine_params(1.0, 0.0);
  PlantState s;
  s.delta = Vec::Zero(1);
  s.omega = Vec::Constant(1, -0.01);
  s.p_mech_base = Vec::Zero(1);
  s.gov_power = Vec::Zero(1);
  s.ibr_angle = Vec(0);
  for (int k = 0; k < 20000; ++k) {
    governor_agc(s, params, 0.001);
    s.omega(0) = -0.01;  // hold the frequency constant
  }
  CHECK(s.gov_power(0) == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("omega at zero leaves mechanical power unchanged") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  PlantState s = equilibrium_state(kase.net, kase.params);
  const Vec before = s.p_mech();
  governor_agc(s, kase.params, 0.01);
  CHECK((s.p_mech() - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("agc returns a single machine to nominal frequency after a load step") {
  const ReducedNetwork net = lone_machine_net();
  MachineParams params = lone_machine_params(4.0, 1.0);
  params.agc_gain = 2.0;
  DisturbanceSchedule schedule{{0.5, 1e9, 0, 0.1}};
  SimConfig sim;
  sim.horizon = 80.0;
  sim.control_period = 0.02;
  sim.substep = 0.002;
  const Trajectory traj = simulate(net, params, schedule, Controller(), sim);
  CHECK(std::abs(traj.omega(traj.samples() - 1, 0)) < 1e-4);
  // Governor has taken over the full deficit at the end.
  CHECK(traj.p_mech(traj.samples() - 1, 0) == doctest::Approx(0.1).epsilon(1e-2));
}

TEST_CASE("ibr setpoint tracking") {
  Mat b = Mat::Zero(2, 2);
  b(0, 1) = b(1, 0) = 1.0;
  BusSets buses;
  buses.machines = {0};
  buses.ibrs = {1};
  buses.slack = 0;
  const ReducedNetwork net = make_reduced_network(Mat::Zero(2, 2), b, Vec::Ones(2), buses);

  SUBCASE("already solved input returns unchanged") {
    const Vec u0 = Vec::Constant(1, 0.2);
    const Vec p = ac_power_ibrs(net, Vec::Zero(1), u0).total();
    const Vec u = track_ibr_setpoints(net, Vec::Zero(1), p, u0);
    CHECK(u(0) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("single branch inverts the sine") {
    const Vec u =
        track_ibr_setpoints(net, Vec::Zero(1), Vec::Constant(1, 0.5), Vec::Zero(1));
    CHECK(u(0) == doctest::Approx(std::asin(0.5)).epsilon(1e-10));
  }
  SUBCASE("infeasible setpoint raises") {
    CHECK_THROWS_AS(
        track_ibr_setpoints(net, Vec::Zero(1), Vec::Constant(1, 2.0), Vec::Zero(1)),
        SimulationError);
  }
}

TEST_CASE("two-ibr tracking drives the residual below 1e-10") {
  std::mt19937_64 rng(3);
  const ReducedNetwork net = random_network(rng, 2, 2, false);
  const Vec delta = randn_vec(rng, 2, 0.05);
  const Vec p0 = ac_power_ibrs(net, delta, Vec::Zero(2)).total();
  const Vec p_cmd = p0 + randn_vec(rng, 2, 0.1);
  const Vec u = track_ibr_setpoints(net, delta, p_cmd, Vec::Zero(2));
  CHECK((ac_power_ibrs(net, delta, u).total() - p_cmd).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("step-halving: trajectories converge at first order") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  DisturbanceSchedule schedule{{0.1, 10.0, 0, 0.2}};

  auto run = [&](double substep) {
    SimConfig sim;
    sim.horizon = 1.0;
    sim.control_period = 0.02;
    sim.substep = substep;
    return simulate(kase.net, kase.params, schedule, Controller(), sim);
  };
  const Trajectory a = run(0.002);
  const Trajectory b = run(0.001);
  const Trajectory c = run(0.0005);

  auto sup_diff = [](const Trajectory& coarse, const Trajectory& fine, Index ratio) {
    double worst = 0.0;
    for (Index s = 0; s < coarse.samples(); ++s)
      worst = std::max(worst,
                       (coarse.omega.row(s) - fine.omega.row(s * ratio)).lpNorm<Eigen::Infinity>());
    return worst;
  };
  const double e1 = sup_diff(a, b, 2);
  const double e2 = sup_diff(b, c, 2);
  CHECK(e1 > 0.0);
  CHECK(e1 / e2 > 1.5);  // first-order: halving the step roughly halves the error
  CHECK(e1 / e2 < 3.0);
}

TEST_CASE("lossless power bookkeeping holds at every substep") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  DisturbanceSchedule schedule{{0.2, 5.0, 1, 0.25}};
  SimConfig sim;
  sim.horizon = 2.0;
  sim.control_period = 0.02;
  sim.substep = 0.002;
  const Trajectory traj = simulate(kase.net, kase.params, schedule, Controller(), sim);

  const Vec m = kase.params.inertia;
  const Vec d = kase.params.damping;
  for (Index s = 0; s + 1 < traj.samples(); ++s) {
    const double h = traj.time(s + 1) - traj.time(s);
    double balance = 0.0;
    for (Index i = 0; i < 3; ++i) {
      const double omega_dot = (traj.omega(s + 1, i) - traj.omega(s, i)) / h;
      balance += traj.p_mech(s + 1, i) - traj.disturbance(s, i) - d(i) * traj.omega(s, i) -
                 m(i) * omega_dot;
    }
    balance += traj.ibr_power.row(s).sum();
    CHECK(std::abs(balance) < 1e-10);
  }
}

TEST_CASE("empty schedule with no controller stays at equilibrium") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  SimConfig sim;
  sim.horizon = 1.0;
  sim.control_period = 0.02;
  sim.substep = 0.002;
  const Trajectory traj = simulate(kase.net, kase.params, {}, Controller(), sim);
  CHECK(traj.omega.cwiseAbs().maxCoeff() < 1e-13);
  CHECK(traj.samples() == 501);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  const LoadedCase kase = load_case(fixture("cases/toy3.case"));
  DisturbanceSchedule schedule{{0.3, 10.0, 2, 0.15}};
  SimConfig sim;
  sim.horizon = 1.0;
  sim.control_period = 0.02;
  sim.substep = 0.002;
  sim.seed = 77;
  sim.noise_omega = 1e-3;

  // A controller that feeds the (noisy) measurement back into its command so
  // the noise stream matters.
  auto controller = [&](const ControlInput& in) {
    return Vec::Constant(1, 0.05 * in.omega_meas.sum());
  };
  const Trajectory a = simulate(kase.net, kase.params, schedule, controller, sim);
  const Trajectory b = simulate(kase.net, kase.params, schedule, controller, sim);
  CHECK((a.omega - b.omega).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.ibr_power - b.ibr_power).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite dynamics raise a tagged simulation error") {
  const ReducedNetwork net = lone_machine_net();
  const MachineParams params = lone_machine_params(1.0, 0.0);
  PlantState s = equilibrium_state(net, params);
  const Vec bad = Vec::Constant(1, std::numeric_limits<double>::infinity());
  CHECK_THROWS_WITH_AS(step_swing(s, net, params, bad, 0.01),
                       doctest::Contains("diverged"), SimulationError);
}

TEST_CASE("schedule validation rejects bad windows and indices") {
  CHECK_THROWS_AS(validate_schedule({{2.0, 1.0, 0, 0.1}}, 3), ConfigError);
  CHECK_THROWS_AS(validate_schedule({{0.0, 1.0, 5, 0.1}}, 3), ConfigError);
  const DisturbanceSchedule ok{{1.0, 2.0, 0, 0.1}, {1.5, 3.0, 0, 0.2}};
  CHECK(disturbance_at(ok, 1.7, 1)(0) == doctest::Approx(0.3));
  CHECK(disturbance_at(ok, 0.5, 1)(0) == 0.0);
  CHECK(disturbance_at(ok, 2.0, 1)(0) == doctest::Approx(0.2));  // [start, end)
}
