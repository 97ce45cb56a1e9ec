#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "swingmpc/output.hpp"
#include "swingmpc/runner.hpp"

namespace fs = std::filesystem;
using namespace swingmpc;

namespace {

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void emit_run_artifacts(const RunResult& result, const std::string& out_dir,
                        const std::string& format, bool plots) {
  ensure_dir(out_dir);
  const fs::path base(out_dir);
  write_trajectory_csv((base / "trajectory.csv").string(), result);
  if (format == "json-lines")
    write_file((base / "metrics.jsonl").string(), metrics_json(result) + "\n");
  else
    write_file((base / "metrics.txt").string(), metrics_text(result));
  if (!result.mipc_log.empty())
    write_mipc_log((base / "mipc_log.txt").string(), result.mipc_log);
  if (plots) write_plots(out_dir, result);
}

void apply_seed_override(ScenarioSpec& spec, const CLI::Option* opt, unsigned long seed) {
  if (opt->count() > 0) spec.sim.seed = seed;
}

int run_command(const std::string& scenario, const std::string& out_dir,
                const std::string& format, bool plots, const CLI::Option* seed_opt,
                unsigned long seed) {
  ScenarioSpec spec = load_scenario(scenario);
  apply_seed_override(spec, seed_opt, seed);
  const RunResult result = run_scenario(spec);
  emit_run_artifacts(result, out_dir, format, plots);
  std::cout << metrics_text(result);
  return 0;
}

int compare_command(const std::string& scenario, const std::vector<std::string>& controllers,
                    const std::string& out_dir, const std::string& format, bool plots,
                    const CLI::Option* seed_opt, unsigned long seed) {
  ScenarioSpec base = load_scenario(scenario);
  apply_seed_override(base, seed_opt, seed);
  std::vector<ControllerKind> kinds;
  for (const std::string& c : controllers) {
    if (c == "none")
      kinds.push_back(ControllerKind::None);
    else if (c == "vsm")
      kinds.push_back(ControllerKind::Vsm);
    else if (c == "mipc")
      kinds.push_back(ControllerKind::Mipc);
    else
      throw ConfigError("unknown controller '" + c + "' (use none|vsm|mipc)");
  }
  const Comparison cmp = compare(controller_variants(base, kinds));
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_file((fs::path(out_dir) / "comparison.txt").string(), comparison_text(cmp));
    for (size_t i = 0; i < cmp.runs.size(); ++i) {
      const std::string sub = (fs::path(out_dir) / cmp.labels[i]).string();
      emit_run_artifacts(cmp.runs[i], sub, format, plots);
    }
  }
  std::cout << comparison_table(cmp);
  return 0;
}

int tune_command(const std::string& scenario, const std::string& out_dir,
                 const CLI::Option* seed_opt, unsigned long seed) {
  ScenarioSpec spec = load_scenario(scenario);
  apply_seed_override(spec, seed_opt, seed);
  if (spec.vsm_grid_km.empty() || spec.vsm_grid_kd.empty())
    throw ConfigError("tune-vsm: the scenario must provide vsm grid_km and grid_kd");
  const LoadedCase kase = load_case(spec.case_path);
  VsmTuneInput input{kase.net, kase.params, spec.schedule, spec.sim,
                     spec.limits(kase.net.buses.n_ibrs()), spec.rocof_filter_tau};
  double best_objective = 0.0;
  const VsmGains best = tune_vsm(input, spec.vsm_grid(), &best_objective);
  std::ostringstream out;
  out.precision(12);
  out << "# swingmpc vsm tuning\n";
  out << "km = " << best.inertia_gain << "\n";
  out << "kd = " << best.damping_gain << "\n";
  out << "objective = " << best_objective << "\n";
  out << "grid_km =";
  for (double v : spec.vsm_grid_km) out << ' ' << v;
  out << "\ngrid_kd =";
  for (double v : spec.vsm_grid_kd) out << ' ' << v;
  out << "\n";
  std::cout << out.str();
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_file((fs::path(out_dir) / "vsm_gains.txt").string(), out.str());
  }
  return 0;
}

int validate_command(const std::string& case_path) {
  const LoadedCase kase = load_case(case_path);
  std::cout << "case '" << kase.name << "' ok: " << kase.net.buses.n_machines()
            << " machines, " << kase.net.buses.n_ibrs() << " ibrs, "
            << kase.net.size() << " reduced nodes\n";
  return 0;
}

int emit_command(const std::string& case_path, Index horizon, double period,
                 const std::string& out_path) {
  const LoadedCase kase = load_case(case_path);
  const SusceptancePartition part = dc_partition(kase.net);
  const LinearModel model = build_linear_model(part, kase.params, period);
  PredictionBundle bundle = build_prediction(model, horizon);
  const Index n = model.n_machines;
  build_cost(bundle, Mat::Identity(n, n), period * Mat::Identity(n, n), model.C, period);

  Mat px = Mat::Zero(model.n_ibrs, 2 * n);
  px.middleCols(n, n) = part.ig;
  const PowerMap pmap = build_power_map(bundle, px, part.ii);

  std::ofstream out(out_path);
  if (!out) throw ConfigError(out_path + ": cannot open for writing");
  out << "# swingmpc model matrices: case " << kase.name << ", N = " << horizon
      << ", h = " << period << "\n";
  write_named_matrix(out, "A", model.A);
  write_named_matrix(out, "B_u", model.B_u);
  write_named_matrix(out, "B_d", model.B_d);
  write_named_matrix(out, "C", model.C);
  write_named_matrix(out, "B_gg", part.gg);
  write_named_matrix(out, "B_gi", part.gi);
  write_named_matrix(out, "B_ig", part.ig);
  write_named_matrix(out, "B_ii", part.ii);
  write_named_matrix(out, "S", bundle.S);
  write_named_matrix(out, "M_pred", bundle.M_pred);
  write_named_matrix(out, "Theta", bundle.Theta);
  write_named_matrix(out, "Gamma", bundle.Gamma);
  write_named_matrix(out, "G", bundle.G);
  write_named_matrix(out, "F", bundle.F);
  write_named_matrix(out, "H", bundle.H);
  write_named_matrix(out, "P_on_u", pmap.on_u);
  write_named_matrix(out, "P_on_x0", pmap.on_x0);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swingmpc: frequency-stability workbench for low-inertia grids"};
  app.require_subcommand(1);

  std::string scenario, case_path, out_dir, format = "csv";
  std::vector<std::string> controllers = {"none", "vsm", "mipc"};
  unsigned long seed = 0;
  bool plots = false;
  Index horizon = 20;
  double period = 0.02;
  std::string matrix_out = "matrices.txt";

  auto* run = app.add_subcommand("run", "run one scenario and emit its artifacts");
  run->add_option("--scenario", scenario, "scenario config file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  auto* run_seed = run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--format", format, "metrics format: csv | json-lines")
      ->check(CLI::IsMember({"csv", "json-lines"}));
  run->add_flag("--plots", plots, "also write SVG plots");

  auto* cmp = app.add_subcommand("compare", "run several controllers on one scenario core");
  cmp->add_option("--scenario", scenario, "scenario config file")->required();
  cmp->add_option("--controllers", controllers, "controllers to compare")->delimiter(',');
  cmp->add_option("--out", out_dir, "output directory");
  auto* cmp_seed = cmp->add_option("--seed", seed, "override the scenario seed");
  cmp->add_option("--format", format, "metrics format: csv | json-lines")
      ->check(CLI::IsMember({"csv", "json-lines"}));
  cmp->add_flag("--plots", plots, "also write SVG plots");

  auto* tune = app.add_subcommand("tune-vsm", "grid-search the vsm gains of a scenario");
  tune->add_option("--scenario", scenario, "scenario config file")->required();
  tune->add_option("--out", out_dir, "output directory");
  auto* tune_seed = tune->add_option("--seed", seed, "override the scenario seed");

  auto* val = app.add_subcommand("validate-case", "parse and validate a case file");
  val->add_option("--case", case_path, "case file")->required();

  auto* emit = app.add_subcommand("emit-matrices", "dump the controller model matrices");
  emit->add_option("--case", case_path, "case file")->required();
  emit->add_option("--horizon", horizon, "prediction steps N");
  emit->add_option("--period", period, "control period h in seconds");
  emit->add_option("--out", matrix_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return run_command(scenario, out_dir, format, plots, run_seed, seed);
    if (cmp->parsed())
      return compare_command(scenario, controllers, out_dir, format, plots, cmp_seed, seed);
    if (tune->parsed()) return tune_command(scenario, out_dir, tune_seed, seed);
    if (val->parsed()) return validate_command(case_path);
    if (emit->parsed()) return emit_command(case_path, horizon, period, matrix_out);
  } catch (const Error& e) {
    std::cerr << "error (" << e.category() << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
