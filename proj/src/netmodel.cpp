#include "swingmpc/netmodel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace swingmpc {

namespace {

void check_bus_sets(const BusSets& buses, Index n) {
  if (buses.machines.empty())
    throw CaseValidationError("bus sets: at least one machine is required");
  std::unordered_set<Index> seen;
  for (Index i : buses.machines) {
    if (i < 0 || i >= n) throw CaseValidationError("bus sets: machine index out of range");
    if (!seen.insert(i).second) throw CaseValidationError("bus sets: duplicate node index");
  }
  for (Index i : buses.ibrs) {
    if (i < 0 || i >= n) throw CaseValidationError("bus sets: ibr index out of range");
    if (!seen.insert(i).second)
      throw CaseValidationError("bus sets: machine and ibr sets must be disjoint");
  }
  if (static_cast<Index>(seen.size()) != n)
    throw CaseValidationError("bus sets: every reduced node must be tagged machine or ibr");
  if (buses.slack < 0 || buses.slack >= buses.n_machines())
    throw CaseValidationError("bus sets: slack must index into the machine set");
}

// Assembles the full angle vector over reduced nodes from per-set angles.
Vec full_angles(const ReducedNetwork& net, const Vec& delta, const Vec& u) {
  require(delta.size() == net.buses.n_machines(), "angle vector must match machine count");
  require(u.size() == net.buses.n_ibrs(), "ibr angle vector must match ibr count");
  Vec theta = Vec::Zero(net.size());
  for (Index i = 0; i < delta.size(); ++i) theta(net.buses.machines[i]) = delta(i);
  for (Index k = 0; k < u.size(); ++k) theta(net.buses.ibrs[k]) = u(k);
  return theta;
}

double branch_power(const ReducedNetwork& net, Index i, Index j, const Vec& theta) {
  const double d = theta(i) - theta(j);
  return net.emf(i) * net.emf(j) *
         (net.g(i, j) * std::cos(d) + net.b(i, j) * std::sin(d));
}

}  // namespace

ReducedNetwork make_reduced_network(Mat g, Mat b, Vec emf, BusSets buses) {
  const Index n = emf.size();
  if (g.rows() != n || g.cols() != n || b.rows() != n || b.cols() != n)
    throw CaseValidationError("reduced network: admittance blocks must be |N| x |N|");
  const double scale = std::max({1.0, g.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  if (((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) ||
      ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale))
    throw CaseValidationError("reduced network: admittance matrices must be symmetric");
  if ((emf.array() <= 0.0).any())
    throw CaseValidationError("reduced network: emf magnitudes must be positive");
  check_bus_sets(buses, n);
  ReducedNetwork net;
  net.g = 0.5 * (g + g.transpose());
  net.b = 0.5 * (b + b.transpose());
  net.emf = std::move(emf);
  net.buses = std::move(buses);
  return net;
}

ReducedNetwork kron_reduce(const CMat& ybus, const std::vector<Index>& retained,
                           Vec emf, BusSets buses) {
  const Index n = ybus.rows();
  require(ybus.cols() == n, "kron_reduce: ybus must be square");
  const Index nr = static_cast<Index>(retained.size());
  require(emf.size() == nr, "kron_reduce: emf must match retained count");

  std::vector<bool> keep(static_cast<size_t>(n), false);
  for (Index i : retained) {
    require(i >= 0 && i < n, "kron_reduce: retained index out of range");
    keep[static_cast<size_t>(i)] = true;
  }
  std::vector<Index> eliminated;
  for (Index i = 0; i < n; ++i)
    if (!keep[static_cast<size_t>(i)]) eliminated.push_back(i);
  const Index ne = static_cast<Index>(eliminated.size());

  CMat yrr(nr, nr), yre(nr, ne), yer(ne, nr), yee(ne, ne);
  for (Index a = 0; a < nr; ++a) {
    for (Index c = 0; c < nr; ++c) yrr(a, c) = ybus(retained[a], retained[c]);
    for (Index c = 0; c < ne; ++c) yre(a, c) = ybus(retained[a], eliminated[c]);
  }
  for (Index a = 0; a < ne; ++a) {
    for (Index c = 0; c < nr; ++c) yer(a, c) = ybus(eliminated[a], retained[c]);
    for (Index c = 0; c < ne; ++c) yee(a, c) = ybus(eliminated[a], eliminated[c]);
  }

  CMat yred = yrr;
  if (ne > 0) {
    Eigen::FullPivLU<CMat> lu(yee);
    if (!lu.isInvertible()) {
      std::ostringstream msg;
      msg << "kron_reduce: eliminated bus block is singular (buses";
      for (Index i : eliminated) msg << ' ' << i;
      msg << "); the passive subnetwork has no unique voltage solution";
      throw ReductionError(msg.str());
    }
    yred -= yre * lu.solve(yer);
  }

  return make_reduced_network(yred.real(), yred.imag(), std::move(emf), std::move(buses));
}

MachinePower ac_power_machines(const ReducedNetwork& net, const Vec& delta, const Vec& u) {
  const Vec theta = full_angles(net, delta, u);
  const Index ng = net.buses.n_machines();
  MachinePower out{Vec::Zero(ng), Vec::Zero(ng)};
  for (Index a = 0; a < ng; ++a) {
    const Index i = net.buses.machines[a];
    for (Index j : net.buses.machines) out.to_machines(a) += branch_power(net, i, j, theta);
    for (Index j : net.buses.ibrs) out.to_ibrs(a) += branch_power(net, i, j, theta);
  }
  return out;
}

IbrPower ac_power_ibrs(const ReducedNetwork& net, const Vec& delta, const Vec& u) {
  const Vec theta = full_angles(net, delta, u);
  const Index ni = net.buses.n_ibrs();
  IbrPower out{Vec::Zero(ni), Vec::Zero(ni)};
  for (Index a = 0; a < ni; ++a) {
    const Index k = net.buses.ibrs[a];
    for (Index j : net.buses.machines) out.to_machines(a) += branch_power(net, k, j, theta);
    for (Index j : net.buses.ibrs) out.to_ibrs(a) += branch_power(net, k, j, theta);
  }
  return out;
}

SusceptancePartition dc_partition(const ReducedNetwork& net) {
  const Index n = net.size();
  // Branch weights |Ei Ej| b_ij; the diagonal of `b` (self-susceptance from the
  // reduction) is not a branch and is excluded from the DC model.
  Mat w = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j) w(i, j) = net.emf(i) * net.emf(j) * net.b(i, j);

  Mat lap = -w;
  lap.diagonal() = w.rowwise().sum();

  const auto& gsel = net.buses.machines;
  const auto& isel = net.buses.ibrs;
  const Index ng = net.buses.n_machines();
  const Index ni = net.buses.n_ibrs();
  SusceptancePartition part;
  part.gg.resize(ng, ng);
  part.gi.resize(ng, ni);
  part.ig.resize(ni, ng);
  part.ii.resize(ni, ni);
  for (Index a = 0; a < ng; ++a) {
    for (Index c = 0; c < ng; ++c) part.gg(a, c) = lap(gsel[a], gsel[c]);
    for (Index c = 0; c < ni; ++c) part.gi(a, c) = lap(gsel[a], isel[c]);
  }
  for (Index a = 0; a < ni; ++a) {
    for (Index c = 0; c < ng; ++c) part.ig(a, c) = lap(isel[a], gsel[c]);
    for (Index c = 0; c < ni; ++c) part.ii(a, c) = lap(isel[a], isel[c]);
  }
  return part;
}

Vec dc_power_machines(const SusceptancePartition& part, const Vec& ddelta, const Vec& u) {
  require(ddelta.size() == part.gg.rows() && u.size() == part.gi.cols(),
          "dc_power_machines: angle dimensions must match partition");
  return part.gg * ddelta + part.gi * u;
}

Vec dc_power_ibrs(const SusceptancePartition& part, const Vec& ddelta, const Vec& u) {
  require(ddelta.size() == part.ig.cols() && u.size() == part.ii.cols(),
          "dc_power_ibrs: angle dimensions must match partition");
  return part.ig * ddelta + part.ii * u;
}

}  // namespace swingmpc
