#include "swingmpc/caseio.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace swingmpc {

namespace {

struct NodeDecl {
  enum class Kind { Bus, Machine, Ibr } kind = Kind::Bus;
  double emf = 1.0;
  double m = 0, d = 0, droop = 0, tau = 0;
  bool declared = false;
};

[[noreturn]] void fail(const std::string& label, int line, const std::string& msg) {
  std::ostringstream out;
  out << label << ":" << line << ": " << msg;
  throw CaseParseError(out.str());
}

double to_double(const std::string& tok, const std::string& label, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(label, line, "expected a number, got '" + tok + "'");
  }
}

Index to_index(const std::string& tok, const std::string& label, int line) {
  try {
    size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
    return static_cast<Index>(v);
  } catch (const std::exception&) {
    fail(label, line, "expected a non-negative integer, got '" + tok + "'");
  }
}

// Connectivity of the reduced graph over branch weights; a disconnected
// island would make the DC Laplacian multiply singular.
void check_connected(const ReducedNetwork& net) {
  const Index n = net.size();
  std::vector<bool> seen(static_cast<size_t>(n), false);
  std::vector<Index> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    const Index i = queue.back();
    queue.pop_back();
    for (Index j = 0; j < n; ++j) {
      if (j == i || seen[static_cast<size_t>(j)]) continue;
      if (std::abs(net.b(i, j)) > 1e-12 || std::abs(net.g(i, j)) > 1e-12) {
        seen[static_cast<size_t>(j)] = true;
        queue.push_back(j);
      }
    }
  }
  for (bool s : seen)
    if (!s) throw CaseValidationError("case: reduced network is not connected");
}

}  // namespace

LoadedCase parse_case(std::istream& in, const std::string& label) {
  std::string name = "unnamed";
  double base_speed = 2.0 * kPi * 60.0;
  double agc_gain = 0.0;
  Index n_nodes = -1;
  Index slack_node = -1;
  std::vector<NodeDecl> nodes;
  CMat ybus;

  auto need_nodes = [&](int line) {
    if (n_nodes < 0) fail(label, line, "'nodes <count>' must come before this entry");
  };
  auto node_in_range = [&](Index i, int line) {
    if (i >= n_nodes) fail(label, line, "node index out of range");
  };
  auto add_series = [&](Index i, Index j, std::complex<double> y) {
    ybus(i, i) += y;
    ybus(j, j) += y;
    ybus(i, j) -= y;
    ybus(j, i) -= y;
  };

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& kw = tok[0];

    if (kw == "name" && tok.size() == 2) {
      name = tok[1];
    } else if (kw == "base_speed" && tok.size() == 2) {
      base_speed = to_double(tok[1], label, line_no);
    } else if (kw == "agc_gain" && tok.size() == 2) {
      agc_gain = to_double(tok[1], label, line_no);
    } else if (kw == "nodes" && tok.size() == 2) {
      if (n_nodes >= 0) fail(label, line_no, "duplicate 'nodes' entry");
      n_nodes = to_index(tok[1], label, line_no);
      if (n_nodes < 1) fail(label, line_no, "at least one node required");
      nodes.assign(static_cast<size_t>(n_nodes), NodeDecl{});
      ybus = CMat::Zero(n_nodes, n_nodes);
    } else if (kw == "node") {
      need_nodes(line_no);
      if (tok.size() < 3) fail(label, line_no, "node needs '<id> <bus|machine|ibr> ...'");
      const Index id = to_index(tok[1], label, line_no);
      node_in_range(id, line_no);
      NodeDecl& nd = nodes[static_cast<size_t>(id)];
      if (nd.declared) fail(label, line_no, "node declared twice");
      nd.declared = true;
      if (tok[2] == "bus") {
        if (tok.size() != 3) fail(label, line_no, "bus nodes take no extra fields");
      } else if (tok[2] == "ibr") {
        nd.kind = NodeDecl::Kind::Ibr;
        if (tok.size() == 4)
          nd.emf = to_double(tok[3], label, line_no);
        else if (tok.size() != 3)
          fail(label, line_no, "ibr node takes at most an emf magnitude");
      } else if (tok[2] == "machine") {
        nd.kind = NodeDecl::Kind::Machine;
        // node <id> machine <emf> m <v> d <v> droop <v> tau_g <v>
        if (tok.size() != 12) fail(label, line_no, "machine node needs emf and m/d/droop/tau_g");
        nd.emf = to_double(tok[3], label, line_no);
        std::map<std::string, double> kv;
        for (size_t p = 4; p + 1 < tok.size(); p += 2)
          kv[tok[p]] = to_double(tok[p + 1], label, line_no);
        for (const char* key : {"m", "d", "droop", "tau_g"})
          if (!kv.count(key)) fail(label, line_no, std::string("machine is missing '") + key + "'");
        nd.m = kv["m"];
        nd.d = kv["d"];
        nd.droop = kv["droop"];
        nd.tau = kv["tau_g"];
      } else {
        fail(label, line_no, "unknown node kind '" + tok[2] + "'");
      }
    } else if (kw == "branch") {
      need_nodes(line_no);
      if (tok.size() != 5) fail(label, line_no, "branch needs '<i> <j> <g> <b>'");
      const Index i = to_index(tok[1], label, line_no);
      const Index j = to_index(tok[2], label, line_no);
      node_in_range(i, line_no);
      node_in_range(j, line_no);
      if (i == j) fail(label, line_no, "branch endpoints must differ");
      add_series(i, j, {to_double(tok[3], label, line_no), to_double(tok[4], label, line_no)});
    } else if (kw == "line") {
      need_nodes(line_no);
      if (tok.size() != 5 && tok.size() != 6)
        fail(label, line_no, "line needs '<i> <j> <r> <x> [b_charging]'");
      const Index i = to_index(tok[1], label, line_no);
      const Index j = to_index(tok[2], label, line_no);
      node_in_range(i, line_no);
      node_in_range(j, line_no);
      if (i == j) fail(label, line_no, "line endpoints must differ");
      const double r = to_double(tok[3], label, line_no);
      const double x = to_double(tok[4], label, line_no);
      const double z2 = r * r + x * x;
      if (z2 <= 0) fail(label, line_no, "line impedance must be non-zero");
      add_series(i, j, {r / z2, -x / z2});
      if (tok.size() == 6) {
        const double bc = to_double(tok[5], label, line_no);
        ybus(i, i) += std::complex<double>(0, bc / 2);
        ybus(j, j) += std::complex<double>(0, bc / 2);
      }
    } else if (kw == "shunt") {
      need_nodes(line_no);
      if (tok.size() != 4) fail(label, line_no, "shunt needs '<i> <g> <b>'");
      const Index i = to_index(tok[1], label, line_no);
      node_in_range(i, line_no);
      ybus(i, i) += std::complex<double>(to_double(tok[2], label, line_no),
                                         to_double(tok[3], label, line_no));
    } else if (kw == "load") {
      need_nodes(line_no);
      if (tok.size() != 4) fail(label, line_no, "load needs '<i> <P> <Q>'");
      const Index i = to_index(tok[1], label, line_no);
      node_in_range(i, line_no);
      // Constant-impedance conversion at 1 p.u. voltage: y = P - jQ.
      ybus(i, i) += std::complex<double>(to_double(tok[2], label, line_no),
                                         -to_double(tok[3], label, line_no));
    } else if (kw == "slack") {
      need_nodes(line_no);
      if (tok.size() != 2) fail(label, line_no, "slack needs '<node-id>'");
      slack_node = to_index(tok[1], label, line_no);
      node_in_range(slack_node, line_no);
    } else {
      fail(label, line_no, "unknown keyword '" + kw + "'");
    }
  }

  if (n_nodes < 0) fail(label, line_no, "missing 'nodes' entry");
  for (Index i = 0; i < n_nodes; ++i)
    if (!nodes[static_cast<size_t>(i)].declared) {
      std::ostringstream msg;
      msg << "node " << i << " was never declared";
      fail(label, line_no, msg.str());
    }
  if (slack_node < 0) fail(label, line_no, "missing 'slack' entry");

  // Retained = machine nodes then IBR nodes, in id order.
  std::vector<Index> retained;
  BusSets buses;
  std::vector<double> emf;
  MachineParams params;
  std::vector<double> m, d, droop, tau;
  for (Index i = 0; i < n_nodes; ++i) {
    const NodeDecl& nd = nodes[static_cast<size_t>(i)];
    if (nd.kind != NodeDecl::Kind::Machine) continue;
    if (i == slack_node) buses.slack = static_cast<Index>(buses.machines.size());
    buses.machines.push_back(static_cast<Index>(retained.size()));
    retained.push_back(i);
    emf.push_back(nd.emf);
    m.push_back(nd.m);
    d.push_back(nd.d);
    droop.push_back(nd.droop);
    tau.push_back(nd.tau);
  }
  if (nodes[static_cast<size_t>(slack_node)].kind != NodeDecl::Kind::Machine)
    throw CaseValidationError("case: slack must be a machine node");
  for (Index i = 0; i < n_nodes; ++i) {
    const NodeDecl& nd = nodes[static_cast<size_t>(i)];
    if (nd.kind != NodeDecl::Kind::Ibr) continue;
    buses.ibrs.push_back(static_cast<Index>(retained.size()));
    retained.push_back(i);
    emf.push_back(nd.emf);
  }

  LoadedCase out;
  out.name = name;
  out.net = kron_reduce(ybus, retained,
                        Eigen::Map<const Vec>(emf.data(), static_cast<Index>(emf.size())),
                        buses);
  check_connected(out.net);
  out.params.inertia = Eigen::Map<const Vec>(m.data(), static_cast<Index>(m.size()));
  out.params.damping = Eigen::Map<const Vec>(d.data(), static_cast<Index>(d.size()));
  out.params.droop = Eigen::Map<const Vec>(droop.data(), static_cast<Index>(droop.size()));
  out.params.gov_tau = Eigen::Map<const Vec>(tau.data(), static_cast<Index>(tau.size()));
  out.params.base_speed = base_speed;
  out.params.agc_gain = agc_gain;
  out.params.validate();
  return out;
}

LoadedCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseParseError(path + ": cannot open case file");
  return parse_case(in, path);
}

void write_case(const LoadedCase& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CaseParseError(path + ": cannot open for writing");
  out.precision(17);
  const Index n = c.net.size();
  out << "# already-reduced case written by swingmpc\n";
  out << "name " << c.name << "\n";
  out << "base_speed " << c.params.base_speed << "\n";
  out << "agc_gain " << c.params.agc_gain << "\n";
  out << "nodes " << n << "\n";
  Index mi = 0;
  for (Index i = 0; i < n; ++i) {
    bool machine = false;
    for (Index g : c.net.buses.machines) machine |= (g == i);
    if (machine) {
      out << "node " << i << " machine " << c.net.emf(i) << " m " << c.params.inertia(mi)
          << " d " << c.params.damping(mi) << " droop " << c.params.droop(mi) << " tau_g "
          << c.params.gov_tau(mi) << "\n";
      ++mi;
    } else {
      out << "node " << i << " ibr " << c.net.emf(i) << "\n";
    }
  }
  out << "slack " << c.net.buses.machines[static_cast<size_t>(c.net.buses.slack)] << "\n";
  // Off-diagonal entries map back to series branches (y = -Y_ij); the row sum
  // recovers the bus shunt, so a reload reproduces the same matrices.
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      out << "branch " << i << " " << j << " " << -c.net.g(i, j) << " " << -c.net.b(i, j)
          << "\n";
  for (Index i = 0; i < n; ++i) {
    const double gs = c.net.g.row(i).sum();
    const double bs = c.net.b.row(i).sum();
    out << "shunt " << i << " " << gs << " " << bs << "\n";
  }
}

}  // namespace swingmpc
