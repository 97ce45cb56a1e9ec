#include "swingmpc/metrics.hpp"

#include <cmath>

namespace swingmpc {

double control_objective(const Trajectory& traj, double control_period) {
  require(traj.samples() >= 2, "control_objective: trajectory too short");
  const double substep = traj.time(1) - traj.time(0);
  const Index stride = static_cast<Index>(std::llround(control_period / substep));
  require(stride >= 1 && std::abs(control_period - stride * substep) < 1e-9,
          "control_objective: control period must align with the sampling");

  double objective = 0.0;
  Vec prev = traj.omega.row(0);
  for (Index s = stride; s < traj.samples(); s += stride) {
    const Vec omega = traj.omega.row(s);
    objective += omega.squaredNorm() + (omega - prev).squaredNorm() / control_period;
    prev = omega;
  }
  return objective;
}

RunMetrics compute_metrics(const Trajectory& traj, double control_period, double band,
                           const Vec& p_nominal, const Vec& p_min, const Vec& p_max,
                           const Vec& energy_budget) {
  RunMetrics m;
  m.settling_band = band > 0 ? band : 5e-4;
  m.objective = control_objective(traj, control_period);
  m.nadir = traj.omega.minCoeff();

  const Index samples = traj.samples();
  for (Index s = 1; s < samples; ++s) {
    const double dt = traj.time(s) - traj.time(s - 1);
    const double step = (traj.omega.row(s) - traj.omega.row(s - 1)).lpNorm<Eigen::Infinity>();
    m.max_rocof = std::max(m.max_rocof, step / dt);
  }

  m.settling_time = 0.0;
  for (Index s = 0; s < samples; ++s)
    if (traj.omega.row(s).lpNorm<Eigen::Infinity>() > m.settling_band)
      m.settling_time = traj.time(s);

  const Index ni = traj.ibr_power.cols();
  const double tol = 1e-9;
  Vec used = Vec::Zero(ni);
  Vec peak = Vec::Zero(ni);
  for (Index s = 1; s < samples; ++s) {
    const double dt = traj.time(s) - traj.time(s - 1);
    bool violated = false;
    for (Index k = 0; k < ni; ++k) {
      const double p = traj.ibr_power(s, k);
      if (p < p_min(k) - tol || p > p_max(k) + tol) violated = true;
      used(k) += dt * (p - p_nominal(k));
      peak(k) = std::max(peak(k), used(k));
      if (std::isfinite(energy_budget(k)) && used(k) > energy_budget(k) + tol) violated = true;
    }
    if (violated) ++m.violations;
  }
  m.energy_used = peak.sum();
  return m;
}

}  // namespace swingmpc
