#include "swingmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace swingmpc {

namespace {

struct Entry {
  std::vector<std::string> values;  ///< one per occurrence (repeatable keys)
  int line = 0;
};

/// Sectioned key = value document with consumption tracking: any key that is
/// never consumed is reported as unknown, so typos in control parameters
/// cannot pass silently.
class ConfigDoc {
public:
  ConfigDoc(std::istream& in, std::string label) : label_(std::move(label)) {
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      const auto first = raw.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = raw.find_last_not_of(" \t\r");
      std::string text = raw.substr(first, last - first + 1);
      if (text.front() == '[') {
        if (text.back() != ']') fail(line_no, "unterminated section header");
        section = text.substr(1, text.size() - 2);
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
      std::string key = trim(text.substr(0, eq));
      std::string value = trim(text.substr(eq + 1));
      if (key.empty()) fail(line_no, "empty key");
      Entry& e = entries_[section + "." + key];
      e.values.push_back(value);
      e.line = line_no;
    }
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    std::ostringstream out;
    out << label_ << ":" << line << ": " << msg;
    throw ConfigError(out.str());
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def) {
    consumed_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    return it->second.values.back();
  }

  double get_double(const std::string& key, double def) {
    consumed_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    return parse_double(it->second.values.back(), it->second.line);
  }

  bool get_bool(const std::string& key, bool def) {
    consumed_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    const std::string& v = it->second.values.back();
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    fail(it->second.line, "expected a boolean for '" + key + "', got '" + v + "'");
  }

  std::vector<double> get_list(const std::string& key) {
    consumed_.insert(key);
    std::vector<double> out;
    auto it = entries_.find(key);
    if (it == entries_.end()) return out;
    std::istringstream ls(it->second.values.back());
    for (std::string tok; ls >> tok;) out.push_back(parse_double(tok, it->second.line));
    return out;
  }

  std::vector<std::vector<double>> get_rows(const std::string& key) {
    consumed_.insert(key);
    std::vector<std::vector<double>> out;
    auto it = entries_.find(key);
    if (it == entries_.end()) return out;
    for (const std::string& v : it->second.values) {
      std::istringstream ls(v);
      std::vector<double> row;
      for (std::string tok; ls >> tok;) row.push_back(parse_double(tok, it->second.line));
      out.push_back(std::move(row));
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, entry] : entries_) {
      if (consumed_.count(key)) continue;
      std::ostringstream out;
      out << label_ << ":" << entry.line << ": unknown key '" << key << "'";
      throw ConfigError(out.str());
    }
  }

private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
  }

  double parse_double(const std::string& tok, int line) const {
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    try {
      size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail(line, "expected a number, got '" + tok + "'");
    }
  }

  std::string label_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> consumed_;
};

}  // namespace

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::None: return "none";
    case ControllerKind::Vsm: return "vsm";
    case ControllerKind::Mipc: return "mipc";
  }
  return "?";
}

IbrLimits ScenarioSpec::limits(Index n_ibrs) const {
  IbrLimits l;
  const double inf = std::numeric_limits<double>::infinity();
  l.p_min = p_min.size() ? p_min : Vec::Constant(n_ibrs, -inf);
  l.p_max = p_max.size() ? p_max : Vec::Constant(n_ibrs, inf);
  l.energy_budget = energy_budget.size() ? energy_budget : Vec::Constant(n_ibrs, inf);
  auto fit = [&](Vec& v, const char* what) {
    if (v.size() == 1 && n_ibrs != 1) v = Vec::Constant(n_ibrs, v(0));
    if (v.size() != n_ibrs) throw ConfigError(std::string(what) + ": wrong ibr count");
  };
  fit(l.p_min, "p_min");
  fit(l.p_max, "p_max");
  fit(l.energy_budget, "energy_budget");
  return l;
}

MipcConfig ScenarioSpec::mipc_config(Index n_ibrs) const {
  MipcConfig cfg;
  cfg.horizon = mipc_horizon;
  const IbrLimits l = limits(n_ibrs);
  cfg.p_min = l.p_min;
  cfg.p_max = l.p_max;
  cfg.energy_budget = l.energy_budget;
  const double inf = std::numeric_limits<double>::infinity();
  cfg.rate_limit = rate_limit.size() ? rate_limit : Vec::Constant(n_ibrs, inf);
  if (cfg.rate_limit.size() == 1 && n_ibrs != 1)
    cfg.rate_limit = Vec::Constant(n_ibrs, cfg.rate_limit(0));
  if (cfg.rate_limit.size() != n_ibrs) throw ConfigError("rate_limit: wrong ibr count");
  cfg.feed_disturbance = feed_disturbance;
  return cfg;
}

std::vector<VsmGains> ScenarioSpec::vsm_grid() const {
  std::vector<VsmGains> grid;
  for (double km : vsm_grid_km)
    for (double kd : vsm_grid_kd) grid.push_back({km, kd});
  return grid;
}

ScenarioSpec parse_scenario(std::istream& in, const std::string& label,
                            const std::string& base_dir) {
  ConfigDoc doc(in, label);
  ScenarioSpec spec;

  spec.name = doc.get_string("scenario.name", "scenario");
  const std::string case_rel = doc.get_string("scenario.case", "");
  if (case_rel.empty()) throw ConfigError(label + ": [scenario] case is required");
  std::filesystem::path p(case_rel);
  spec.case_path = p.is_absolute() || base_dir.empty()
                       ? p.string()
                       : (std::filesystem::path(base_dir) / p).string();

  const std::string ctrl = doc.get_string("scenario.controller", "none");
  if (ctrl == "none")
    spec.controller = ControllerKind::None;
  else if (ctrl == "vsm")
    spec.controller = ControllerKind::Vsm;
  else if (ctrl == "mipc")
    spec.controller = ControllerKind::Mipc;
  else
    throw ConfigError(label + ": unknown controller '" + ctrl + "'");

  spec.sim.horizon = doc.get_double("scenario.horizon", 10.0);
  spec.sim.control_period = doc.get_double("scenario.control_period", 0.02);
  spec.sim.substep = doc.get_double("scenario.substep", 0.0);
  spec.sim.seed = static_cast<unsigned long>(doc.get_double("scenario.seed", 0));
  spec.settling_band = doc.get_double("scenario.settling_band", 5e-4);

  for (const auto& row : doc.get_rows("disturbance.event")) {
    if (row.size() != 4)
      throw ConfigError(label + ": disturbance event needs 'start end machine dP'");
    Disturbance ev;
    ev.start = row[0];
    ev.end = row[1];
    ev.machine = static_cast<Index>(std::llround(row[2]));
    ev.power = row[3];
    spec.schedule.push_back(ev);
  }

  spec.sim.noise_omega = doc.get_double("noise.omega_std", 0.0);
  spec.sim.noise_delta = doc.get_double("noise.delta_std", 0.0);

  auto to_vec = [](const std::vector<double>& v) {
    return v.empty() ? Vec() : Vec(Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size())));
  };
  spec.p_min = to_vec(doc.get_list("limits.p_min"));
  spec.p_max = to_vec(doc.get_list("limits.p_max"));
  spec.energy_budget = to_vec(doc.get_list("limits.energy_budget"));
  spec.rate_limit = to_vec(doc.get_list("limits.rate_limit"));

  spec.mipc_horizon = static_cast<Index>(doc.get_double("mipc.horizon_steps", 20));
  spec.q1_scale = doc.get_double("mipc.q1_scale", 1.0);
  spec.q2_scale = doc.get_double("mipc.q2_scale", -1.0);
  spec.use_observer = doc.get_bool("mipc.use_observer", false);
  spec.feed_disturbance = doc.get_bool("mipc.feed_disturbance", true);

  const std::string channels = doc.get_string("observer.channels", "omega_delta");
  if (channels == "omega")
    spec.channels = MeasuredChannels::Omega;
  else if (channels == "omega_delta")
    spec.channels = MeasuredChannels::OmegaAndDelta;
  else
    throw ConfigError(label + ": unknown observer channels '" + channels + "'");
  for (double v : doc.get_list("observer.mask")) spec.comm_mask.push_back(v != 0.0);
  spec.obs_q_state = doc.get_double("observer.q_state", 1e-6);
  spec.obs_q_dist = doc.get_double("observer.q_dist", 1e-2);
  spec.obs_r_floor = doc.get_double("observer.r_floor", 1e-8);

  spec.vsm_gains.inertia_gain = doc.get_double("vsm.km", 0.0);
  spec.vsm_gains.damping_gain = doc.get_double("vsm.kd", 0.0);
  spec.vsm_grid_km = doc.get_list("vsm.grid_km");
  spec.vsm_grid_kd = doc.get_list("vsm.grid_kd");
  spec.vsm_tuned = doc.get_bool("vsm.tuned", !spec.vsm_grid_km.empty());
  spec.rocof_filter_tau = doc.get_double("vsm.rocof_filter_tau", 0.0);

  doc.finish();
  if (spec.vsm_tuned && (spec.vsm_grid_km.empty() || spec.vsm_grid_kd.empty()))
    throw ConfigError(label + ": vsm tuning requires grid_km and grid_kd");
  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_scenario(in, path, dir);
}

}  // namespace swingmpc
