#include "swingmpc/runner.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace swingmpc {

namespace {

// Expands per-control-step rows to per-sample rows: sample 0 predates the
// first control action and stays zero; control step k covers the following
// steps_per samples.
Mat expand_to_samples(const std::vector<Vec>& per_step, Index samples, Index steps_per) {
  if (per_step.empty()) return Mat();
  Mat out = Mat::Zero(samples, per_step.front().size());
  for (Index s = 1; s < samples; ++s) {
    const Index k = (s - 1) / steps_per;
    if (k < static_cast<Index>(per_step.size())) out.row(s) = per_step[static_cast<size_t>(k)];
  }
  return out;
}

}  // namespace

RunResult run_scenario(const ScenarioSpec& spec) {
  return run_scenario(spec, load_case(spec.case_path));
}

RunResult run_scenario(const ScenarioSpec& spec, const LoadedCase& kase) {
  const ReducedNetwork& net = kase.net;
  const Index n = net.buses.n_machines();
  const Index ni = net.buses.n_ibrs();
  validate_schedule(spec.schedule, n);

  RunResult result;
  result.spec = spec;
  result.case_name = kase.name;

  const IbrLimits limits = spec.limits(ni);
  const Vec p_nominal = ac_power_ibrs(net, Vec::Zero(n), Vec::Zero(ni)).total();

  Controller controller;  // stays empty for ControllerKind::None
  std::unique_ptr<VsmController> vsm;
  std::unique_ptr<MipcController> mipc;
  std::unique_ptr<Observer> observer;
  SusceptancePartition part;
  std::vector<Vec> dhat_steps, innov_steps;

  switch (spec.controller) {
    case ControllerKind::None:
      break;
    case ControllerKind::Vsm: {
      VsmGains gains = spec.vsm_gains;
      if (spec.vsm_tuned) {
        VsmTuneInput tune{net, kase.params, spec.schedule, spec.sim, limits,
                          spec.rocof_filter_tau};
        gains = tune_vsm(tune, spec.vsm_grid());
        result.vsm_was_tuned = true;
      }
      result.vsm_gains_used = gains;
      vsm = std::make_unique<VsmController>(gains, kase.params.inertia, p_nominal, limits,
                                            spec.sim.control_period, spec.rocof_filter_tau);
      controller = [&vsm = *vsm](const ControlInput& in) { return vsm(in); };
      break;
    }
    case ControllerKind::Mipc: {
      part = dc_partition(net);
      const LinearModel model =
          build_linear_model(part, kase.params, spec.sim.control_period);
      MipcConfig cfg = spec.mipc_config(ni);
      if (spec.q1_scale != 1.0) cfg.Q1 = spec.q1_scale * Mat::Identity(n, n);
      if (spec.q2_scale >= 0.0) cfg.Q2 = spec.q2_scale * Mat::Identity(n, n);
      mipc = std::make_unique<MipcController>(net, part, model, cfg);

      if (spec.use_observer) {
        CommMask mask;
        if (spec.comm_mask.empty())
          mask = CommMask::all(n);
        else
          mask.measured = spec.comm_mask;
        mask.validate(n);
        const AugmentedModel aug = build_augmented(model, mask, spec.channels);
        Mat qw = Mat::Identity(aug.nx + aug.nd, aug.nx + aug.nd);
        qw.topLeftCorner(aug.nx, aug.nx) *= spec.obs_q_state;
        qw.bottomRightCorner(aug.nd, aug.nd) *= spec.obs_q_dist;
        const double var_omega = spec.sim.noise_omega * spec.sim.noise_omega;
        const double var_delta = spec.sim.noise_delta * spec.sim.noise_delta;
        Mat rv = Mat::Zero(aug.ny, aug.ny);
        const Index per = spec.channels == MeasuredChannels::OmegaAndDelta ? 2 : 1;
        for (Index r = 0; r < aug.ny; ++r) {
          const double var = (per == 2 && r % 2 == 1) ? var_delta : var_omega;
          rv(r, r) = std::max(var, spec.obs_r_floor);
        }
        const Mat gain = compute_gain(aug, qw, rv);
        observer = std::make_unique<Observer>(aug, gain);
        if (cfg.feed_disturbance) mipc->use_augmented_model(aug.A, aug.B);

        controller = [&obs = *observer, &ctrl = *mipc, mask, spec, n, &dhat_steps,
                      &innov_steps](const ControlInput& in) {
          Vec y(obs.model().ny);
          Index row = 0;
          for (Index i = 0; i < n; ++i) {
            if (!mask.measured[static_cast<size_t>(i)]) continue;
            y(row++) = in.omega_meas(i);
            if (spec.channels == MeasuredChannels::OmegaAndDelta) y(row++) = in.ddelta_meas(i);
          }
          const Vec innov = obs.correct(y);
          const Vec est = spec.feed_disturbance ? obs.state().stacked() : obs.state().xhat;
          const Vec cmd = ctrl.step(in.t, est);
          obs.advance(ctrl.last_action());
          // Disturbance states exist for measured machines; log them in
          // machine order with zeros elsewhere.
          Vec dhat_full = Vec::Zero(n);
          Index col = 0;
          for (Index i = 0; i < n; ++i)
            if (mask.measured[static_cast<size_t>(i)]) dhat_full(i) = obs.state().dhat(col++);
          dhat_steps.push_back(dhat_full);
          innov_steps.push_back(innov);
          return cmd;
        };
      } else {
        controller = [&ctrl = *mipc, n](const ControlInput& in) {
          Vec est(2 * n);
          est << in.omega_meas, in.ddelta_meas;
          return ctrl.step(in.t, est);
        };
      }
      break;
    }
  }

  result.traj = simulate(net, kase.params, spec.schedule, controller, spec.sim);
  result.metrics =
      compute_metrics(result.traj, spec.sim.control_period, spec.settling_band, p_nominal,
                      limits.p_min, limits.p_max, limits.energy_budget);
  if (mipc) result.mipc_log = mipc->log();

  const double substep = spec.sim.substep > 0 ? spec.sim.substep : spec.sim.control_period / 10;
  const Index steps_per = static_cast<Index>(std::llround(spec.sim.control_period / substep));
  result.dhat = expand_to_samples(dhat_steps, result.traj.samples(), steps_per);
  result.innovation = expand_to_samples(innov_steps, result.traj.samples(), steps_per);
  return result;
}

std::vector<ScenarioSpec> controller_variants(const ScenarioSpec& base,
                                              const std::vector<ControllerKind>& kinds) {
  std::vector<ScenarioSpec> out;
  for (ControllerKind kind : kinds) {
    ScenarioSpec spec = base;
    spec.controller = kind;
    out.push_back(std::move(spec));
  }
  return out;
}

Comparison compare(const std::vector<ScenarioSpec>& specs) {
  require(!specs.empty(), "compare: at least one spec required");
  const ScenarioSpec& first = specs.front();
  for (const ScenarioSpec& s : specs) {
    bool same_core =
        s.case_path == first.case_path && s.sim.seed == first.sim.seed &&
        s.sim.horizon == first.sim.horizon &&
        s.sim.control_period == first.sim.control_period &&
        s.sim.substep == first.sim.substep && s.sim.noise_omega == first.sim.noise_omega &&
        s.sim.noise_delta == first.sim.noise_delta &&
        s.schedule.size() == first.schedule.size();
    for (size_t e = 0; same_core && e < s.schedule.size(); ++e) {
      const Disturbance &a = s.schedule[e], &b = first.schedule[e];
      same_core = a.start == b.start && a.end == b.end && a.machine == b.machine &&
                  a.power == b.power;
    }
    if (!same_core)
      throw ConfigError("compare: specs must differ only in their controller blocks");
  }

  const LoadedCase kase = load_case(first.case_path);
  Comparison cmp;
  for (const ScenarioSpec& s : specs) {
    cmp.labels.push_back(to_string(s.controller));
    cmp.runs.push_back(run_scenario(s, kase));
  }
  return cmp;
}

}  // namespace swingmpc
