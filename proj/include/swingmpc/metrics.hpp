#pragma once

#include "swingmpc/plant.hpp"
#include "swingmpc/types.hpp"

namespace swingmpc {

/// Scalar summary of one closed-loop run. Every value is recomputable from
/// the trajectory samples alone (plus the control period and limits used).
struct RunMetrics {
  double nadir = 0.0;          ///< most negative omega over machines and time, p.u.
  double max_rocof = 0.0;      ///< max |omega step difference| / substep, p.u./s
  double settling_time = 0.0;  ///< last instant with ||omega||_inf above the band, s
  double objective = 0.0;      ///< sum ||omega||^2 + (1/h) sum ||d omega||^2 at control instants
  double energy_used = 0.0;    ///< summed per-IBR peak deployed energy, p.u. s
  Index violations = 0;        ///< samples violating power or energy limits
  double settling_band = 5e-4; ///< p.u.
};

/// The controller-comparison objective, evaluated at control instants
/// (stride = control_period / substep): sum_{k>=1} ||omega_k||^2
/// + (1/h) ||omega_k - omega_{k-1}||^2.
double control_objective(const Trajectory& traj, double control_period);

/// Full metric set. `p_nominal`, bounds and budget define the violation
/// audit; pass +inf bounds to skip. `band` falls back to 5e-4 when <= 0.
RunMetrics compute_metrics(const Trajectory& traj, double control_period, double band,
                           const Vec& p_nominal, const Vec& p_min, const Vec& p_max,
                           const Vec& energy_budget);

}  // namespace swingmpc
