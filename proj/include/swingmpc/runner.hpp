#pragma once

#include <string>
#include <vector>

#include "swingmpc/caseio.hpp"
#include "swingmpc/metrics.hpp"
#include "swingmpc/scenario.hpp"

namespace swingmpc {

/// One completed run: the trajectory, its metric summary and, when the
/// controller produced them, the per-step solver log and observer series
/// (expanded to one row per trajectory sample, zero before the first update).
struct RunResult {
  ScenarioSpec spec;
  std::string case_name;
  Trajectory traj;
  RunMetrics metrics;
  VsmGains vsm_gains_used{};
  bool vsm_was_tuned = false;
  std::vector<MipcStepLog> mipc_log;
  Mat dhat;        ///< samples x n, empty unless the observer ran
  Mat innovation;  ///< samples x ny, empty unless the observer ran
};

/// Deterministic closed-loop run of one scenario (same spec, same seed:
/// bit-identical outputs). Independent runs are safe to execute in parallel.
RunResult run_scenario(const ScenarioSpec& spec);

/// Same, with the case already loaded (used by tuning and comparisons).
RunResult run_scenario(const ScenarioSpec& spec, const LoadedCase& kase);

struct Comparison {
  std::vector<std::string> labels;
  std::vector<RunResult> runs;
};

/// Runs each spec on the shared scenario core. The specs must agree on
/// everything except the controller blocks (same case, schedule, seed,
/// timing, noise and limits); a mismatch raises ConfigError.
Comparison compare(const std::vector<ScenarioSpec>& specs);

/// Convenience: variants of one base spec with different controllers.
std::vector<ScenarioSpec> controller_variants(const ScenarioSpec& base,
                                              const std::vector<ControllerKind>& kinds);

}  // namespace swingmpc
