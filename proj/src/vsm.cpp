#include "swingmpc/vsm.hpp"

#include <cmath>
#include <limits>

#include "swingmpc/metrics.hpp"

namespace swingmpc {

double coi_frequency(const Vec& omega, const Vec& inertia) {
  require(omega.size() == inertia.size() && omega.size() > 0,
          "coi_frequency: needs a non-empty matching machine set");
  const double total = inertia.sum();
  require(total > 0, "coi_frequency: total inertia must be positive");
  return inertia.dot(omega) / total;
}

double vsm_power_delta(double coi, double prev_coi, double h, const VsmGains& gains) {
  require(h > 0, "vsm_power_delta: step size must be positive");
  return gains.inertia_gain * (coi - prev_coi) / h + gains.damping_gain * coi;
}

VsmController::VsmController(VsmGains gains, const Vec& inertia, Vec p_nominal,
                             IbrLimits limits, double period, double rocof_filter_tau)
    : gains_(gains), inertia_(inertia), p_nominal_(std::move(p_nominal)),
      limits_(std::move(limits)), period_(period), filter_tau_(rocof_filter_tau) {
  require(period_ > 0, "vsm: control period must be positive");
  if (gains_.inertia_gain < 0 || gains_.damping_gain < 0)
    throw ConfigError("vsm: gains must be non-negative");
  energy_used_ = Vec::Zero(p_nominal_.size());
}

Vec VsmController::operator()(const ControlInput& input) {
  const double coi = coi_frequency(input.omega_meas, inertia_);
  double rocof = (coi - prev_coi_) / period_;
  if (filter_tau_ > 0) {
    rocof_filtered_ += period_ / filter_tau_ * (rocof - rocof_filtered_);
    rocof = rocof_filtered_;
  }
  prev_coi_ = coi;
  const double dp = gains_.inertia_gain * rocof + gains_.damping_gain * coi;

  Vec cmd(p_nominal_.size());
  for (Index k = 0; k < cmd.size(); ++k) {
    double c = p_nominal_(k) - dp;
    c = std::min(std::max(c, limits_.p_min(k)), limits_.p_max(k));
    if (std::isfinite(limits_.energy_budget(k))) {
      // Never schedule past the remaining budget over the coming period.
      const double headroom = (limits_.energy_budget(k) - energy_used_(k)) / period_;
      c = std::min(c, p_nominal_(k) + std::max(0.0, headroom));
    }
    energy_used_(k) += period_ * (c - p_nominal_(k));
    cmd(k) = c;
  }
  return cmd;
}

VsmGains tune_vsm(const VsmTuneInput& input, const std::vector<VsmGains>& grid,
                  double* best_objective) {
  if (grid.empty()) throw TuningError("tune_vsm: empty gain grid");

  const Vec p_nominal =
      ac_power_ibrs(input.net, Vec::Zero(input.net.buses.n_machines()),
                    Vec::Zero(input.net.buses.n_ibrs()))
          .total();

  VsmGains best{};
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const VsmGains& gains : grid) {
    double score = std::numeric_limits<double>::infinity();
    try {
      VsmController controller(gains, input.params.inertia, p_nominal, input.limits,
                               input.sim.control_period, input.rocof_filter_tau);
      const Trajectory traj =
          simulate(input.net, input.params, input.schedule, controller, input.sim);
      score = control_objective(traj, input.sim.control_period);
    } catch (const SimulationError&) {
      continue;  // diverged grid point
    }
    if (!std::isfinite(score)) continue;
    const bool better =
        !found || score < best_score ||
        (score == best_score && (gains.inertia_gain < best.inertia_gain ||
                                 (gains.inertia_gain == best.inertia_gain &&
                                  gains.damping_gain < best.damping_gain)));
    if (better) {
      best = gains;
      best_score = score;
      found = true;
    }
  }
  if (!found) throw TuningError("tune_vsm: every grid point diverged");
  if (best_objective) *best_objective = best_score;
  return best;
}

}  // namespace swingmpc
