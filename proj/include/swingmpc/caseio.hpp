#pragma once

#include <iosfwd>
#include <string>

#include "swingmpc/netmodel.hpp"
#include "swingmpc/plant.hpp"
#include "swingmpc/types.hpp"

namespace swingmpc {

/// A loaded study case: the Kron-reduced generating network plus swing and
/// governor parameters, ready for simulation and controller synthesis.
struct LoadedCase {
  std::string name;
  ReducedNetwork net;
  MachineParams params;
};

/// Reads the line-oriented case format (see docs/case-format in the README)
/// and Kron-reduces the described network onto its machine and IBR nodes.
/// Parse problems raise CaseParseError with "file:line:" prefixes; violated
/// model invariants raise CaseValidationError.
///
/// Keywords: name, base_speed, agc_gain, nodes, node, branch, line, shunt,
/// load, slack. `branch` takes a series admittance g + jb; `line` takes
/// impedance r + jx with optional total charging susceptance; `load` becomes
/// a constant-impedance shunt evaluated at 1 p.u. voltage.
LoadedCase load_case(const std::string& path);
LoadedCase parse_case(std::istream& in, const std::string& label);

/// Writes an already-reduced case so that load_case reproduces the same
/// matrices: one branch per off-diagonal entry plus a bus shunt per node.
void write_case(const LoadedCase& c, const std::string& path);

}  // namespace swingmpc
