#pragma once

#include <functional>
#include <vector>

#include "swingmpc/netmodel.hpp"
#include "swingmpc/types.hpp"

namespace swingmpc {

/// Per-machine swing and governor parameters plus the system-wide constants.
struct MachineParams {
  Vec inertia;        ///< m_i, p.u. s^2
  Vec damping;        ///< d_i, p.u.
  Vec droop;          ///< R_i, p.u. frequency per p.u. power
  Vec gov_tau;        ///< governor time constant, s
  double base_speed = 2.0 * kPi * 60.0;  ///< rad/s
  double agc_gain = 0.0;  ///< K_agc, p.u./s, shared integral action

  Index n() const { return inertia.size(); }
  void validate() const;
};

/// Full simulator state. `p_mech_base` is the constant scheduled mechanical
/// power; governor and AGC act on top of it (p_mech = p_mech_base + gov_power).
struct PlantState {
  double t = 0.0;
  Vec delta;          ///< rotor angles, rad
  Vec omega;          ///< speed deviations, p.u.
  Vec p_mech_base;    ///< scheduled mechanical power, p.u.
  Vec gov_power;      ///< governor state P_G, p.u.
  double agc_integrator = 0.0;
  Vec ibr_angle;      ///< IBR source angles u, rad

  Vec p_mech() const { return p_mech_base + gov_power; }
};

/// One additive power disturbance: positive `power` is a deficit (loss of
/// generation or added load) at the given machine over [start, end).
struct Disturbance {
  double start = 0.0;
  double end = 0.0;
  Index machine = 0;
  double power = 0.0;
};
using DisturbanceSchedule = std::vector<Disturbance>;

void validate_schedule(const DisturbanceSchedule& schedule, Index n_machines);

/// Sum of active disturbances per machine at time t.
Vec disturbance_at(const DisturbanceSchedule& schedule, double t, Index n_machines);

/// Equilibrium at the zero-angle operating point: mechanical power balances
/// the AC flows there, governors relaxed, IBR angles zero. The corresponding
/// nominal IBR injections are ac_power_ibrs(net, 0, 0).
PlantState equilibrium_state(const ReducedNetwork& net, const MachineParams& params);

/// Forward-Euler governor + AGC update (modifies gov_power, agc_integrator).
/// Governor: dP_G = (-omega/R + agc_share - P_G) / tau; the AGC integrator
/// acts on the inertia-weighted average frequency and participates in
/// proportion to machine inertia.
void governor_agc(PlantState& state, const MachineParams& params, double h);

/// One swing step: omega by forward Euler on the power balance, delta by
/// delta+ = delta + h * base_speed * omega+ (the freshly updated speed).
/// Uses the state's current p_mech and IBR angles.
/// Throws SimulationError (tagged with the timestep) when the state leaves
/// the finite range.
PlantState step_swing(const PlantState& state, const ReducedNetwork& net,
                      const MachineParams& params, const Vec& disturbance, double h);

/// Newton solve for IBR angles such that ac_power_ibrs(net, delta, u) equals
/// `p_cmd` to 1e-10. Throws SimulationError("infeasible-setpoint ...") when
/// Newton does not converge within 50 iterations.
Vec track_ibr_setpoints(const ReducedNetwork& net, const Vec& delta, const Vec& p_cmd,
                        Vec u_init);

/// What a controller observes at a control instant. Angle measurements are
/// deviations from the zero-angle nominal point; noise is already applied.
struct ControlInput {
  double t = 0.0;
  Vec omega_meas;
  Vec ddelta_meas;
  Vec p_cmd_prev;
};

/// Controller callback: returns absolute IBR power commands (p.u. per IBR)
/// held (zero-order) until the next control instant. An empty std::function
/// means no support: commands stay at the nominal injections.
using Controller = std::function<Vec(const ControlInput&)>;

struct SimConfig {
  double horizon = 10.0;        ///< s
  double control_period = 0.02; ///< s; must be a positive multiple of substep
  double substep = 0.0;         ///< s; 0 selects control_period / 10
  unsigned long seed = 0;
  double noise_omega = 0.0;     ///< std of additive measurement noise, p.u.
  double noise_delta = 0.0;     ///< std of additive angle measurement noise, rad
};

/// Sampled closed-loop run, one row per plant substep (plus the initial row).
struct Trajectory {
  Vec time;
  Mat delta, omega, p_mech, p_elec;  ///< samples x |G|
  Mat ibr_angle, ibr_power, p_cmd;   ///< samples x |I|
  Mat disturbance;                   ///< samples x |G|
  Index samples() const { return time.size(); }
  Index tracking_fallbacks = 0;  ///< control commands kept at previous value
};

/// Closed-loop simulation: the controller runs every control period, the
/// plant advances on substeps, IBR power is held between control instants by
/// re-solving the IBR angles each substep. Measurement noise is drawn from a
/// seeded generator at every control instant in fixed order, so two runs of
/// the same config are bit-identical and two controllers on the same seed see
/// the same noise stream.
Trajectory simulate(const ReducedNetwork& net, const MachineParams& params,
                    const DisturbanceSchedule& schedule, const Controller& controller,
                    const SimConfig& sim);

}  // namespace swingmpc
