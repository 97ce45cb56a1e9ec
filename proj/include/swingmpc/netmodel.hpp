#pragma once

#include <vector>

#include "swingmpc/types.hpp"

namespace swingmpc {

/// Partition of the reduced network's nodes into synchronous machines and
/// inverter-based resources (IBRs). Indices refer to rows/columns of the
/// reduced admittance matrices and are fixed at construction; every matrix
/// built downstream uses the same ordering.
struct BusSets {
  std::vector<Index> machines;  ///< ordered node indices of machine internal buses
  std::vector<Index> ibrs;      ///< ordered node indices of IBR buses
  Index slack = 0;              ///< position within `machines` of the angle reference

  Index n_machines() const { return static_cast<Index>(machines.size()); }
  Index n_ibrs() const { return static_cast<Index>(ibrs.size()); }
  Index n_total() const { return n_machines() + n_ibrs(); }
};

/// Kron-reduced network: symmetric admittance-matrix entries g + j*b over the
/// retained (generating) nodes, plus constant internal emf magnitudes.
///
/// Sign convention: `b(i, j)` for i != j is the susceptance matrix entry, so a
/// single inductive line of reactance X between i and j gives b(i, j) = 1/X > 0
/// and the familiar flow P_i = |Ei Ej| b(i, j) sin(theta_i - theta_j).
struct ReducedNetwork {
  Mat g;        ///< conductance matrix entries, |N| x |N|, symmetric
  Mat b;        ///< susceptance matrix entries, |N| x |N|, symmetric
  Vec emf;      ///< |E_i|, per unit, all > 0
  BusSets buses;

  Index size() const { return emf.size(); }
};

/// Laplacian blocks of the DC (linearized, lossless) model. The branch weight
/// between nodes i and j is |Ei Ej| b(i, j) evaluated at the nominal point, so
/// downstream consumers see plain susceptance-weighted Laplacian blocks:
/// off-diagonals are -|Ei Ej| b(i, j) and diagonals make the assembled matrix
/// [gg gi; ig ii] have zero row sums.
struct SusceptancePartition {
  Mat gg;  ///< machine-machine block, |G| x |G|, symmetric
  Mat gi;  ///< machine-IBR block, |G| x |I|
  Mat ig;  ///< IBR-machine block = gi transposed
  Mat ii;  ///< IBR-IBR block, |I| x |I|, symmetric
};

/// Machine electrical output split by neighbour set (injections, per unit).
struct MachinePower {
  Vec to_machines;  ///< P_eG: flow toward other machines (incl. self-conductance loss)
  Vec to_ibrs;      ///< P_eI: flow toward IBRs
  Vec total() const { return to_machines + to_ibrs; }
};

/// IBR output split by neighbour set (injections, per unit).
struct IbrPower {
  Vec to_machines;  ///< flow toward machines
  Vec to_ibrs;      ///< flow toward other IBRs (incl. self-conductance loss)
  Vec total() const { return to_machines + to_ibrs; }
};

/// Validates invariants (symmetry, positive emf, index sets disjoint and in
/// range, slack valid) and returns the network. Throws CaseValidationError.
ReducedNetwork make_reduced_network(Mat g, Mat b, Vec emf, BusSets buses);

/// Schur-complement elimination of the non-retained buses of a full complex
/// bus admittance matrix: Y_red = Y_rr - Y_re Y_ee^{-1} Y_er.
///
/// `retained` lists the kept bus indices in the order they will occupy in the
/// result; `emf` and `buses` describe the retained nodes in that order.
/// Throws ReductionError when the eliminated block is singular (the message
/// names the offending bus group).
ReducedNetwork kron_reduce(const CMat& ybus, const std::vector<Index>& retained,
                           Vec emf, BusSets buses);

/// AC electrical power injected by each machine, split into machine-neighbour
/// and IBR-neighbour parts. `delta` holds machine rotor angles (rad), `u` IBR
/// angles (rad), both in bus-set order.
MachinePower ac_power_machines(const ReducedNetwork& net, const Vec& delta, const Vec& u);

/// AC power injected by each IBR, split into machine-neighbour and
/// IBR-neighbour parts.
IbrPower ac_power_ibrs(const ReducedNetwork& net, const Vec& delta, const Vec& u);

/// Builds the susceptance Laplacian blocks of the DC model at the zero-angle
/// operating point. Self-susceptances b(i, i) of the reduced matrix do not
/// enter; diagonals are row sums of the branch weights.
SusceptancePartition dc_partition(const ReducedNetwork& net);

/// Linearized machine power deviation: gg * ddelta + gi * u.
Vec dc_power_machines(const SusceptancePartition& part, const Vec& ddelta, const Vec& u);

/// Linearized IBR power: ig * ddelta + ii * u.
Vec dc_power_ibrs(const SusceptancePartition& part, const Vec& ddelta, const Vec& u);

}  // namespace swingmpc
