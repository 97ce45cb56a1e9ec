#pragma once

#include <map>
#include <string>
#include <vector>

#include "swingmpc/mipc.hpp"
#include "swingmpc/observer.hpp"
#include "swingmpc/plant.hpp"
#include "swingmpc/types.hpp"
#include "swingmpc/vsm.hpp"

namespace swingmpc {

enum class ControllerKind { None, Vsm, Mipc };

std::string to_string(ControllerKind kind);

/// Everything a run needs: case reference, disturbance schedule, controller
/// block, observer settings, noise, and simulation timing. Built by
/// load_scenario from the sectioned key = value format; unknown keys are
/// errors, not warnings.
struct ScenarioSpec {
  std::string name;
  std::string case_path;  ///< resolved relative to the scenario file
  ControllerKind controller = ControllerKind::None;

  DisturbanceSchedule schedule;
  SimConfig sim;

  // Shared IBR resource limits (absolute powers; +-inf disables a bound).
  Vec p_min, p_max, energy_budget, rate_limit;

  // MIPC block.
  Index mipc_horizon = 20;
  double q1_scale = 1.0;
  double q2_scale = -1.0;  ///< < 0 selects the default h
  bool use_observer = false;
  bool feed_disturbance = true;

  // Observer block.
  MeasuredChannels channels = MeasuredChannels::OmegaAndDelta;
  std::vector<bool> comm_mask;  ///< empty = all generators
  double obs_q_state = 1e-6;
  double obs_q_dist = 1e-2;
  double obs_r_floor = 1e-8;

  // VSM block.
  VsmGains vsm_gains{};
  std::vector<double> vsm_grid_km, vsm_grid_kd;
  bool vsm_tuned = false;  ///< run the grid search before simulating
  double rocof_filter_tau = 0.0;

  double settling_band = 5e-4;

  /// Limits broadcast to `n` IBRs (scalar entries in the file apply to all).
  IbrLimits limits(Index n_ibrs) const;
  MipcConfig mipc_config(Index n_ibrs) const;
  std::vector<VsmGains> vsm_grid() const;
};

ScenarioSpec load_scenario(const std::string& path);
ScenarioSpec parse_scenario(std::istream& in, const std::string& label,
                            const std::string& base_dir);

}  // namespace swingmpc
