#pragma once

#include <vector>

#include "swingmpc/plant.hpp"
#include "swingmpc/types.hpp"

namespace swingmpc {

/// Virtual synchronous machine gains: power proportional to ROCOF (virtual
/// inertia K_m) and to frequency deviation (virtual damping K_d).
struct VsmGains {
  double inertia_gain = 0.0;  ///< K_m, p.u. s
  double damping_gain = 0.0;  ///< K_d, p.u.
};

/// Center-of-inertia frequency deviation: inertia-weighted mean of omega.
double coi_frequency(const Vec& omega, const Vec& inertia);

/// dP = K_m (coi - prev_coi)/h + K_d coi. A negative frequency deviation
/// yields a negative dP; the command subtracts it from the set-point so
/// under-frequency raises injection.
double vsm_power_delta(double coi, double prev_coi, double h, const VsmGains& gains);

/// Resource limits shared with MIPC so controller comparisons are fair.
struct IbrLimits {
  Vec p_min, p_max;      ///< absolute bounds, p.u. per IBR
  Vec energy_budget;     ///< p.u. s per IBR, +inf disables
};

/// Stateful VSM control law matching the plant's Controller signature. Every
/// IBR receives the same delta-power on top of its own nominal set-point,
/// clamped to the shared power bounds and energy budget. The one-sample
/// ROCOF memory starts at zero (equilibrium start); an optional first-order
/// low-pass (time constant in seconds, 0 = off) smooths the ROCOF estimate.
class VsmController {
public:
  VsmController(VsmGains gains, const Vec& inertia, Vec p_nominal, IbrLimits limits,
                double period, double rocof_filter_tau = 0.0);

  Vec operator()(const ControlInput& input);

private:
  VsmGains gains_;
  Vec inertia_;
  Vec p_nominal_;
  IbrLimits limits_;
  double period_;
  double filter_tau_;
  double prev_coi_ = 0.0;
  double rocof_filtered_ = 0.0;
  Vec energy_used_;
};

struct VsmTuneInput {
  const ReducedNetwork& net;
  const MachineParams& params;
  const DisturbanceSchedule& schedule;
  SimConfig sim;
  IbrLimits limits;
  double rocof_filter_tau = 0.0;
};

/// Grid search over gains, scoring each closed-loop run with the shared
/// control objective (sum |omega|^2 + (1/h) sum |d omega|^2 at control
/// instants). Returns the argmin; ties break toward smaller K_m then smaller
/// K_d. Throws TuningError when every grid point diverges.
VsmGains tune_vsm(const VsmTuneInput& input, const std::vector<VsmGains>& grid,
                  double* best_objective = nullptr);

}  // namespace swingmpc
