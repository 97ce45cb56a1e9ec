#include "swingmpc/plant.hpp"

#include <Eigen/LU>

#include <cmath>
#include <random>
#include <sstream>

namespace swingmpc {

void MachineParams::validate() const {
  const Index m = n();
  if (damping.size() != m || droop.size() != m || gov_tau.size() != m)
    throw CaseValidationError("machine params: per-machine vectors must share one length");
  if (m == 0) throw CaseValidationError("machine params: at least one machine required");
  if ((inertia.array() <= 0).any())
    throw CaseValidationError("machine params: inertia must be positive");
  if ((damping.array() < 0).any())
    throw CaseValidationError("machine params: damping must be non-negative");
  if ((droop.array() <= 0).any())
    throw CaseValidationError("machine params: droop must be positive");
  if ((gov_tau.array() <= 0).any())
    throw CaseValidationError("machine params: governor time constant must be positive");
  if (base_speed <= 0) throw CaseValidationError("machine params: base speed must be positive");
  if (agc_gain < 0) throw CaseValidationError("machine params: agc gain must be non-negative");
}

void validate_schedule(const DisturbanceSchedule& schedule, Index n_machines) {
  for (const auto& ev : schedule) {
    if (ev.start < 0 || !(ev.start < ev.end))
      throw ConfigError("disturbance: times must satisfy 0 <= start < end");
    if (ev.machine < 0 || ev.machine >= n_machines)
      throw ConfigError("disturbance: machine index out of range");
  }
}

Vec disturbance_at(const DisturbanceSchedule& schedule, double t, Index n_machines) {
  Vec dp = Vec::Zero(n_machines);
  for (const auto& ev : schedule)
    if (t >= ev.start && t < ev.end) dp(ev.machine) += ev.power;
  return dp;
}

PlantState equilibrium_state(const ReducedNetwork& net, const MachineParams& params) {
  params.validate();
  require(params.n() == net.buses.n_machines(),
          "equilibrium_state: params must match machine count");
  PlantState s;
  s.delta = Vec::Zero(net.buses.n_machines());
  s.omega = Vec::Zero(net.buses.n_machines());
  s.ibr_angle = Vec::Zero(net.buses.n_ibrs());
  s.p_mech_base = ac_power_machines(net, s.delta, s.ibr_angle).total();
  s.gov_power = Vec::Zero(net.buses.n_machines());
  return s;
}

void governor_agc(PlantState& state, const MachineParams& params, double h) {
  const Index n = params.n();
  const double total_inertia = params.inertia.sum();
  const double coi = params.inertia.dot(state.omega) / total_inertia;
  state.agc_integrator += h * params.agc_gain * (-coi);
  for (Index i = 0; i < n; ++i) {
    const double share = params.inertia(i) / total_inertia * state.agc_integrator;
    const double target = -state.omega(i) / params.droop(i) + share;
    state.gov_power(i) += h / params.gov_tau(i) * (target - state.gov_power(i));
  }
}

PlantState step_swing(const PlantState& state, const ReducedNetwork& net,
                      const MachineParams& params, const Vec& disturbance, double h) {
  require(h > 0, "step_swing: step size must be positive");
  require(disturbance.size() == params.n(), "step_swing: disturbance must match machine count");
  const Vec p_elec = ac_power_machines(net, state.delta, state.ibr_angle).total();
  PlantState next = state;
  const Vec p_mech = state.p_mech();
  next.omega = state.omega.array() +
               h / params.inertia.array() *
                   (p_mech.array() - p_elec.array() -
                    params.damping.array() * state.omega.array() - disturbance.array());
  next.delta = state.delta + h * params.base_speed * next.omega;
  next.t = state.t + h;
  if (!next.omega.allFinite() || !next.delta.allFinite()) {
    std::ostringstream msg;
    msg << "simulation diverged at t = " << state.t << " (step " << h << ")";
    throw SimulationError(msg.str());
  }
  return next;
}

Vec track_ibr_setpoints(const ReducedNetwork& net, const Vec& delta, const Vec& p_cmd,
                        Vec u_init) {
  const Index ni = net.buses.n_ibrs();
  require(p_cmd.size() == ni && u_init.size() == ni,
          "track_ibr_setpoints: command/guess must match ibr count");
  require(delta.size() == net.buses.n_machines(),
          "track_ibr_setpoints: delta must match machine count");
  if (ni == 0) return u_init;

  // Machine angles by reduced-node index, for Jacobian assembly.
  Vec theta_mach = Vec::Zero(net.size());
  for (Index i = 0; i < delta.size(); ++i) theta_mach(net.buses.machines[i]) = delta(i);

  constexpr int kMaxIter = 50;
  constexpr double kTol = 1e-10;
  Vec u = std::move(u_init);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Vec residual = ac_power_ibrs(net, delta, u).total() - p_cmd;
    if (residual.lpNorm<Eigen::Infinity>() < kTol) return u;

    // Jacobian dP_ibr/du from the AC flow terms.
    Mat jac = Mat::Zero(ni, ni);
    for (Index a = 0; a < ni; ++a) {
      const Index k = net.buses.ibrs[a];
      for (Index j : net.buses.machines) {
        const double d = u(a) - theta_mach(j);
        jac(a, a) += net.emf(k) * net.emf(j) *
                     (-net.g(k, j) * std::sin(d) + net.b(k, j) * std::cos(d));
      }
      for (Index c = 0; c < ni; ++c) {
        if (c == a) continue;
        const Index j = net.buses.ibrs[c];
        const double d = u(a) - u(c);
        const double coupling = net.emf(k) * net.emf(j) *
                                (-net.g(k, j) * std::sin(d) + net.b(k, j) * std::cos(d));
        jac(a, a) += coupling;
        jac(a, c) -= coupling;
      }
    }
    Eigen::PartialPivLU<Mat> lu(jac);
    const Vec du = lu.solve(residual);
    if (!du.allFinite()) break;
    u -= du;
  }
  throw SimulationError("infeasible-setpoint: ibr power tracking did not converge");
}

Trajectory simulate(const ReducedNetwork& net, const MachineParams& params,
                    const DisturbanceSchedule& schedule, const Controller& controller,
                    const SimConfig& sim) {
  params.validate();
  validate_schedule(schedule, params.n());
  const double substep = sim.substep > 0 ? sim.substep : sim.control_period / 10.0;
  require(sim.horizon > 0 && sim.control_period > 0 && substep > 0,
          "simulate: horizon, control period and substep must be positive");
  const double ratio = sim.control_period / substep;
  const Index steps_per = static_cast<Index>(std::llround(ratio));
  if (steps_per < 1 || std::abs(ratio - static_cast<double>(steps_per)) > 1e-9)
    throw ConfigError("simulate: control period must be a positive multiple of the substep");
  const Index n_ctrl = static_cast<Index>(std::llround(sim.horizon / sim.control_period));
  require(n_ctrl >= 1, "simulate: horizon must cover at least one control period");

  const Index n = params.n();
  const Index ni = net.buses.n_ibrs();
  const Index samples = n_ctrl * steps_per + 1;

  Trajectory traj;
  traj.time.resize(samples);
  traj.delta.resize(samples, n);
  traj.omega.resize(samples, n);
  traj.p_mech.resize(samples, n);
  traj.p_elec.resize(samples, n);
  traj.disturbance.resize(samples, n);
  traj.ibr_angle.resize(samples, ni);
  traj.ibr_power.resize(samples, ni);
  traj.p_cmd.resize(samples, ni);

  PlantState state = equilibrium_state(net, params);
  const Vec p_nominal = ac_power_ibrs(net, state.delta, state.ibr_angle).total();
  Vec p_cmd = p_nominal;

  std::mt19937_64 rng(sim.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto record = [&](Index row) {
    traj.time(row) = state.t;
    traj.delta.row(row) = state.delta;
    traj.omega.row(row) = state.omega;
    traj.p_mech.row(row) = state.p_mech();
    traj.p_elec.row(row) = ac_power_machines(net, state.delta, state.ibr_angle).total();
    traj.disturbance.row(row) = disturbance_at(schedule, state.t, n);
    traj.ibr_angle.row(row) = state.ibr_angle;
    traj.ibr_power.row(row) = ac_power_ibrs(net, state.delta, state.ibr_angle).total();
    traj.p_cmd.row(row) = p_cmd;
  };
  record(0);

  Index row = 1;
  for (Index k = 0; k < n_ctrl; ++k) {
    // Measurement noise is always drawn so the stream does not depend on the
    // controller choice.
    ControlInput input;
    input.t = state.t;
    input.omega_meas = state.omega;
    input.ddelta_meas = state.delta;
    for (Index i = 0; i < n; ++i) input.omega_meas(i) += sim.noise_omega * gauss(rng);
    for (Index i = 0; i < n; ++i) input.ddelta_meas(i) += sim.noise_delta * gauss(rng);
    input.p_cmd_prev = p_cmd;

    if (controller) {
      Vec requested = controller(input);
      require(requested.size() == ni, "simulate: controller must command every ibr");
      try {
        state.ibr_angle = track_ibr_setpoints(net, state.delta, requested, state.ibr_angle);
        p_cmd = std::move(requested);
      } catch (const SimulationError&) {
        ++traj.tracking_fallbacks;  // keep the previous feasible command
      }
    }

    for (Index s = 0; s < steps_per; ++s, ++row) {
      const Vec dp = disturbance_at(schedule, state.t, n);
      governor_agc(state, params, substep);
      try {
        state = step_swing(state, net, params, dp, substep);
        state.ibr_angle = track_ibr_setpoints(net, state.delta, p_cmd, state.ibr_angle);
      } catch (const SimulationError& e) {
        std::ostringstream msg;
        msg << e.what() << " [control step " << k << ", substep " << s << "]";
        throw SimulationError(msg.str());
      }
      record(row);
    }
  }
  return traj;
}

}  // namespace swingmpc
