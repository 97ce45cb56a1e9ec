#include "swingmpc/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace swingmpc {

namespace {

std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.11e", v);
  return buf;
}

void header_block(std::ostream& out, const char* stem, Index count) {
  for (Index i = 0; i < count; ++i) out << ',' << stem << '_' << i;
}

std::string status_name(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIterations: return "max-iterations";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "?";
}

}  // namespace

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  out << content;
}

void write_trajectory_csv(const std::string& path, const RunResult& result) {
  const Trajectory& traj = result.traj;
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");

  const Index n = traj.omega.cols();
  const Index ni = traj.ibr_power.cols();
  out << "t";
  header_block(out, "delta", n);
  header_block(out, "omega", n);
  header_block(out, "p_mech", n);
  header_block(out, "p_elec", n);
  header_block(out, "u", ni);
  header_block(out, "p_cmd", ni);
  header_block(out, "p_ibr", ni);
  header_block(out, "dp", n);
  if (result.dhat.size() > 0) header_block(out, "dhat", result.dhat.cols());
  if (result.innovation.size() > 0) header_block(out, "innov", result.innovation.cols());
  out << '\n';

  for (Index s = 0; s < traj.samples(); ++s) {
    out << fmt12(traj.time(s));
    auto row = [&](const Mat& m) {
      for (Index c = 0; c < m.cols(); ++c) out << ',' << fmt12(m(s, c));
    };
    row(traj.delta);
    row(traj.omega);
    row(traj.p_mech);
    row(traj.p_elec);
    row(traj.ibr_angle);
    row(traj.p_cmd);
    row(traj.ibr_power);
    row(traj.disturbance);
    if (result.dhat.size() > 0) row(result.dhat);
    if (result.innovation.size() > 0) row(result.innovation);
    out << '\n';
  }
}

namespace {

void metric_pairs(const RunResult& r, std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream num;
  num.precision(12);
  auto put = [&](const std::string& k, double v) {
    num.str("");
    num << v;
    kv.emplace_back(k, num.str());
  };
  kv.emplace_back("scenario", r.spec.name);
  kv.emplace_back("case", r.case_name);
  kv.emplace_back("controller", to_string(r.spec.controller));
  put("seed", static_cast<double>(r.spec.sim.seed));
  put("horizon_s", r.spec.sim.horizon);
  put("control_period_s", r.spec.sim.control_period);
  put("settling_band", r.metrics.settling_band);
  put("nadir", r.metrics.nadir);
  put("max_rocof", r.metrics.max_rocof);
  put("settling_time_s", r.metrics.settling_time);
  put("objective", r.metrics.objective);
  put("energy_used", r.metrics.energy_used);
  put("violations", static_cast<double>(r.metrics.violations));
  put("tracking_fallbacks", static_cast<double>(r.traj.tracking_fallbacks));
  if (r.spec.controller == ControllerKind::Vsm) {
    put("vsm_km", r.vsm_gains_used.inertia_gain);
    put("vsm_kd", r.vsm_gains_used.damping_gain);
    kv.emplace_back("vsm_tuned", r.vsm_was_tuned ? "true" : "false");
    if (r.vsm_was_tuned) {
      std::ostringstream grid;
      grid << "km {";
      for (double v : r.spec.vsm_grid_km) grid << ' ' << v;
      grid << " } kd {";
      for (double v : r.spec.vsm_grid_kd) grid << ' ' << v;
      grid << " }";
      kv.emplace_back("vsm_grid", grid.str());
    }
  }
  if (r.spec.controller == ControllerKind::Mipc) {
    put("mipc_horizon_steps", static_cast<double>(r.spec.mipc_horizon));
    kv.emplace_back("observer", r.spec.use_observer ? "on" : "off");
    Index fallbacks = 0;
    for (const auto& e : r.mipc_log) fallbacks += e.fallback ? 1 : 0;
    put("qp_fallbacks", static_cast<double>(fallbacks));
  }
}

}  // namespace

std::string metrics_text(const RunResult& result) {
  std::vector<std::pair<std::string, std::string>> kv;
  metric_pairs(result, kv);
  std::ostringstream out;
  out << "# swingmpc run metrics\n";
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return out.str();
}

std::string metrics_json(const RunResult& result) {
  nlohmann::json j;
  j["scenario"] = result.spec.name;
  j["case"] = result.case_name;
  j["controller"] = to_string(result.spec.controller);
  j["seed"] = result.spec.sim.seed;
  j["nadir"] = result.metrics.nadir;
  j["max_rocof"] = result.metrics.max_rocof;
  j["settling_time_s"] = result.metrics.settling_time;
  j["objective"] = result.metrics.objective;
  j["energy_used"] = result.metrics.energy_used;
  j["violations"] = result.metrics.violations;
  j["settling_band"] = result.metrics.settling_band;
  if (result.spec.controller == ControllerKind::Vsm) {
    j["vsm_km"] = result.vsm_gains_used.inertia_gain;
    j["vsm_kd"] = result.vsm_gains_used.damping_gain;
  }
  return j.dump();
}

void write_mipc_log(const std::string& path, const std::vector<MipcStepLog>& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  out << "# t status iterations active_rows fallback stationarity feasibility complementarity\n";
  out.precision(12);
  for (const auto& e : log) {
    out << e.t << ' ' << status_name(e.status) << ' ' << e.iterations << ' ' << e.active_rows
        << ' ' << (e.fallback ? 1 : 0) << ' ' << e.residuals.stationarity << ' '
        << e.residuals.feasibility << ' ' << e.residuals.complementarity << '\n';
  }
}

namespace {

struct MetricColumn {
  std::string name;
  std::vector<double> values;
  bool lower_is_better;
};

std::vector<MetricColumn> comparison_columns(const Comparison& cmp) {
  std::vector<MetricColumn> cols = {
      {"objective", {}, true}, {"nadir", {}, false},       {"max_rocof", {}, true},
      {"settling_s", {}, true}, {"energy_used", {}, true}, {"violations", {}, true},
  };
  for (const RunResult& r : cmp.runs) {
    cols[0].values.push_back(r.metrics.objective);
    cols[1].values.push_back(r.metrics.nadir);
    cols[2].values.push_back(r.metrics.max_rocof);
    cols[3].values.push_back(r.metrics.settling_time);
    cols[4].values.push_back(r.metrics.energy_used);
    cols[5].values.push_back(static_cast<double>(r.metrics.violations));
  }
  return cols;
}

size_t winner_of(const MetricColumn& col) {
  size_t best = 0;
  for (size_t i = 1; i < col.values.size(); ++i) {
    const bool better = col.lower_is_better ? col.values[i] < col.values[best]
                                            : col.values[i] > col.values[best];
    if (better) best = i;
  }
  return best;
}

}  // namespace

std::string comparison_table(const Comparison& cmp) {
  const auto cols = comparison_columns(cmp);
  std::ostringstream out;
  out << std::left << std::setw(12) << "controller";
  for (const auto& c : cols) out << std::right << std::setw(14) << c.name;
  out << '\n';
  for (size_t i = 0; i < cmp.runs.size(); ++i) {
    out << std::left << std::setw(12) << cmp.labels[i];
    for (const auto& c : cols) {
      std::ostringstream cell;
      cell.precision(5);
      cell << c.values[i];
      if (cmp.runs.size() > 1 && winner_of(c) == i) cell << '*';
      out << std::right << std::setw(14) << cell.str();
    }
    out << '\n';
  }
  if (cmp.runs.size() > 1) out << "(* best per metric)\n";
  return out.str();
}

std::string comparison_text(const Comparison& cmp) {
  std::ostringstream out;
  out << "# swingmpc comparison\n";
  const auto cols = comparison_columns(cmp);
  for (size_t i = 0; i < cmp.runs.size(); ++i) {
    out << "[" << cmp.labels[i] << "]\n";
    out.precision(12);
    for (const auto& c : cols) {
      out << c.name << " = " << c.values[i];
      if (cmp.runs.size() > 1 && winner_of(c) == i) out << "  # best";
      out << '\n';
    }
  }
  return out.str();
}

void write_svg_series(const std::string& path, const std::string& title,
                      const std::string& y_label, const Vec& time, const Mat& series,
                      const std::vector<std::string>& labels) {
  require(series.rows() == time.size(), "svg: series rows must match time");
  const int width = 860, height = 480, ml = 70, mr = 160, mt = 40, mb = 50;
  const double x0 = time.minCoeff(), x1 = time.maxCoeff();
  double y0 = series.minCoeff(), y1 = series.maxCoeff();
  if (y1 - y0 < 1e-12) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;

  auto px = [&](double t) { return ml + (t - x0) / (x1 - x0) * (width - ml - mr); };
  auto py = [&](double v) { return height - mb - (v - y0) / (y1 - y0) * (height - mt - mb); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' viewBox='0 0 " << width << ' ' << height << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";

  // Axes with a handful of ticks.
  out << "<g stroke='#333' stroke-width='1'>";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
      << "'/>";
  out << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
      << height - mb << "'/></g>\n";
  out << "<g font-size='11' fill='#333'>";
  for (int k = 0; k <= 5; ++k) {
    const double tx = x0 + k * (x1 - x0) / 5;
    const double vy = y0 + k * (y1 - y0) / 5;
    out << "<text x='" << px(tx) << "' y='" << height - mb + 16 << "' text-anchor='middle'>"
        << std::setprecision(4) << tx << "</text>";
    out << "<text x='" << ml - 8 << "' y='" << py(vy) + 4 << "' text-anchor='end'>"
        << std::setprecision(4) << vy << "</text>";
  }
  out << "<text x='" << ml - 50 << "' y='" << (mt + height - mb) / 2
      << "' transform='rotate(-90 " << ml - 50 << ' ' << (mt + height - mb) / 2
      << ")' text-anchor='middle'>" << y_label << "</text></g>\n";

  // Decimate long series; a plot needs no more than ~2000 points per line.
  const Index stride = std::max<Index>(1, time.size() / 2000);
  for (Index c = 0; c < series.cols(); ++c) {
    out << "<polyline fill='none' stroke='" << palette[c % 10] << "' stroke-width='1.3' points='";
    for (Index s = 0; s < time.size(); s += stride)
      out << px(time(s)) << ',' << py(series(s, c)) << ' ';
    if ((time.size() - 1) % stride != 0)
      out << px(time(time.size() - 1)) << ',' << py(series(time.size() - 1, c));
    out << "'/>\n";
    const std::string label =
        c < static_cast<Index>(labels.size()) ? labels[static_cast<size_t>(c)] : "";
    out << "<text x='" << width - mr + 12 << "' y='" << mt + 16 * (c + 1) << "' font-size='12' fill='"
        << palette[c % 10] << "'>" << label << "</text>\n";
  }
  out << "</svg>\n";
}

void write_plots(const std::string& out_dir, const RunResult& result) {
  namespace fs = std::filesystem;
  auto label_block = [](const char* stem, Index count) {
    std::vector<std::string> out;
    for (Index i = 0; i < count; ++i) out.push_back(std::string(stem) + "_" + std::to_string(i));
    return out;
  };
  write_svg_series((fs::path(out_dir) / "omega.svg").string(), "speed deviation", "omega (p.u.)",
                   result.traj.time, result.traj.omega,
                   label_block("omega", result.traj.omega.cols()));
  write_svg_series((fs::path(out_dir) / "p_ibr.svg").string(), "IBR output power", "P (p.u.)",
                   result.traj.time, result.traj.ibr_power,
                   label_block("p_ibr", result.traj.ibr_power.cols()));
  if (result.dhat.size() > 0)
    write_svg_series((fs::path(out_dir) / "dhat.svg").string(), "disturbance estimate",
                     "d_hat (p.u.)", result.traj.time, result.dhat,
                     label_block("dhat", result.dhat.cols()));
}

void write_named_matrix(std::ostream& out, const std::string& name, const Mat& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  out.precision(17);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
}

void dump_qp(std::ostream& out, const QpProblem<double>& p) {
  write_named_matrix(out, "H", p.H);
  write_named_matrix(out, "f", p.f);
  write_named_matrix(out, "L", p.L);
  write_named_matrix(out, "w", p.w);
}

std::map<std::string, Mat> read_named_matrices(std::istream& in) {
  std::map<std::string, Mat> out;
  std::string kw;
  while (in >> kw) {
    if (kw.front() == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (kw != "matrix") throw ConfigError("matrix text: expected 'matrix', got '" + kw + "'");
    std::string name;
    Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols))
      throw ConfigError("matrix text: malformed header");
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        if (!(in >> m(r, c))) throw ConfigError("matrix text: truncated body for " + name);
    out[name] = std::move(m);
  }
  return out;
}

}  // namespace swingmpc
