#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "swingmpc/runner.hpp"

namespace swingmpc {

/// Trajectory CSV: header row then one row per substep, columns
///   t, delta_*, omega_*, p_mech_*, p_elec_*, u_*, p_cmd_*, p_ibr_*, dp_*,
/// plus dhat_* and innov_* when the observer ran. Values are printed with 12
/// significant digits, so identical runs produce identical files.
void write_trajectory_csv(const std::string& path, const RunResult& result);

/// Structured-text metrics document (key = value plus run metadata).
std::string metrics_text(const RunResult& result);

/// Single-line JSON form of the same document.
std::string metrics_json(const RunResult& result);

/// Per-control-step MIPC solver log as structured text.
void write_mipc_log(const std::string& path, const std::vector<MipcStepLog>& log);

/// Comparison table, aligned for the console; flags the winner per metric.
std::string comparison_table(const Comparison& cmp);

/// Same content as structured text (one section per controller).
std::string comparison_text(const Comparison& cmp);

/// Minimal static SVG line chart; one polyline per column of `series`.
void write_svg_series(const std::string& path, const std::string& title,
                      const std::string& y_label, const Vec& time, const Mat& series,
                      const std::vector<std::string>& labels);

/// Writes omega/p_ibr (and dhat when present) plots next to `prefix`.
void write_plots(const std::string& out_dir, const RunResult& result);

// Documented text matrix exchange format:
//   matrix <name> <rows> <cols>
//   <one whitespace-separated row per line, %.17g>
void write_named_matrix(std::ostream& out, const std::string& name, const Mat& m);
std::map<std::string, Mat> read_named_matrices(std::istream& in);

/// Dumps a QP (H, f, L, w) in the matrix text format for offline inspection.
void dump_qp(std::ostream& out, const QpProblem<double>& p);

void write_file(const std::string& path, const std::string& content);

}  // namespace swingmpc
