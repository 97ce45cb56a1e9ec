#pragma once

#include <optional>
#include <vector>

#include "swingmpc/netmodel.hpp"
#include "swingmpc/plant.hpp"
#include "swingmpc/qpsolver.hpp"
#include "swingmpc/types.hpp"

namespace swingmpc {

/// Discrete-time linearized swing model in deviation coordinates, state
/// x = [d_omega; d_delta] (size 2n), input u = IBR angle deviations, output
/// y = d_omega.
///
/// The matrices are the exact Jacobian of one plant step, so the speed row is
/// scaled by h/m_i and the angle row chains through the freshly updated speed
/// (delta+ = delta + h * omega_b * omega+):
///
///   A = [ I - h M^-1 D        -h M^-1 Bgg      ]      B_u = [ -h M^-1 Bgi      ]
///       [ h wb (I - h M^-1 D)  I - h^2 wb M^-1 Bgg ]        [ -h^2 wb M^-1 Bgi ]
///
/// and B_d = [-h M^-1; -h^2 wb M^-1] for additive power disturbances.
struct LinearModel {
  Mat A;    ///< 2n x 2n
  Mat B_u;  ///< 2n x |I|
  Mat B_d;  ///< 2n x n
  Mat C;    ///< n x 2n, selects d_omega
  double h = 0.0;
  Index n_machines = 0;
  Index n_ibrs = 0;
};

LinearModel build_linear_model(const SusceptancePartition& part, const MachineParams& params,
                               double h);

/// Condensed N-step prediction of x+ = A x + B u:
///   stacked x = S u + M_pred x0,           rows t = 0..N (row 0 of S is zero)
///   Theta = S[0:N-1] - S[1:N] row blocks,  Gamma likewise from M_pred,
/// plus the condensed quadratic J = 1/2 x0' G x0 + x0' F u + 1/2 u' H u once
/// build_cost has run. Immutable after construction; shareable across threads.
struct PredictionBundle {
  Index N = 0, nx = 0, nu = 0;
  Mat S;       ///< (N+1) nx x N nu
  Mat M_pred;  ///< (N+1) nx x nx
  Mat Theta;   ///< N nx x N nu
  Mat Gamma;   ///< N nx x nx

  // Set by build_cost. H carries the +1e-9 I regularization the solver needs
  // against the Laplacian's rotational null direction; H_raw is the exact
  // condensed Hessian and satisfies the quadratic identity to round-off.
  Mat G, F, H, H_raw;
  Mat Qhat1;  ///< C' Q1 C, applied on block rows 1..N
  Mat Qhat2;  ///< C' Q2 C / h^2, applied on every difference row
};

/// Builds S, M_pred, Theta, Gamma for any (A, B) pair; the augmented
/// observer model reuses this with its own matrices.
PredictionBundle build_prediction(const Mat& A, const Mat& B, Index N);
inline PredictionBundle build_prediction(const LinearModel& model, Index N) {
  return build_prediction(model.A, model.B_u, N);
}

/// Condenses the stacked objective
///   sum_{t=1..N} y_t' Q1 y_t + sum_{t=0..N-1} dy_t' Q2 dy_t,
/// with y = C x and dy_t = (y_{t+1} - y_t) / h, into G, F, H on the bundle.
/// H is symmetrized and regularized by +1e-9 I to absorb the rotational
/// null direction of the susceptance Laplacian; a factorization failure after
/// that raises ModelError.
void build_cost(PredictionBundle& bundle, const Mat& Q1, const Mat& Q2, const Mat& C, double h);

/// u* = -H^{-1} F' x0 through a positive-definite factorization.
Vec solve_unconstrained(const Mat& H, const Mat& F, const Vec& x0);

/// Stacked linear map from (u sequence, x0) to the per-step IBR powers over
/// the horizon: P = on_u * u + on_x0 * x0, with row block t (t = 0..N-1)
/// equal to px x_t + pu u_t along the predicted trajectory.
struct PowerMap {
  Index N = 0, np = 0;
  Mat on_u;   ///< N np x N nu
  Mat on_x0;  ///< N np x nx
};

/// `px` maps the model state to per-step power (e.g. [0 B_ig] padded with
/// zeros for augmented states), `pu` maps the step input (B_ii).
PowerMap build_power_map(const PredictionBundle& bundle, const Mat& px, const Mat& pu);

enum class RowKind { PowerLower, PowerUpper, Energy, RateDown, RateUp };

/// Inequality rows L u <= W + V x0 with per-row provenance.
struct ConstraintStack {
  Mat L;
  Vec W;
  Mat V;
  std::vector<RowKind> kinds;

  Index rows() const { return L.rows(); }
  static ConstraintStack empty(Index n_u, Index n_x);
  void append(const ConstraintStack& other);
};

/// Horizon, weights and resource limits of the controller. Power bounds are
/// absolute commanded powers; the builders subtract the nominal injections so
/// the QP sees bounds on the linearized deviation. Energy is a true budget in
/// p.u.-seconds on the deviation (rows carry the factor h); the rate limit
/// bounds |P_t - P_{t+1}| per control step. Infinities disable rows.
struct MipcConfig {
  Index horizon = 20;
  Mat Q1;  ///< n x n; empty selects I
  Mat Q2;  ///< n x n; empty selects h * I (equal frequency/ROCOF weighting)
  Vec p_min, p_max;      ///< per IBR, p.u.
  Vec energy_budget;     ///< per IBR, p.u. s
  Vec rate_limit;        ///< per IBR, p.u. per step
  bool feed_disturbance = true;  ///< include d_hat in the free response when estimated
};

/// Power rows: -P~ u <= -(p_min - p0) + B~p2 x0 and P~ u <= (p_max - p0) - B~p2 x0,
/// skipping infinite bounds. `p_dev_min/max` are already nominal-relative.
ConstraintStack build_power_constraints(const PowerMap& map, const Vec& p_dev_min,
                                        const Vec& p_dev_max);

/// Energy rows: h * (every prefix sum of per-step power) <= budget, one row
/// per prefix length per IBR; and two-sided rate rows |P_t - P_{t+1}| <= eps.
ConstraintStack build_energy_rate_constraints(const PowerMap& map, const Vec& energy_budget,
                                              const Vec& rate_limit, double h);

/// Per-control-step solver diagnostics, appended to the run log.
struct MipcStepLog {
  double t = 0.0;
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
  Index active_rows = 0;
  bool fallback = false;
  KktReport<double> residuals;
};

/// Receding-horizon controller: build once, call `step` at every control
/// instant with the current state estimate ([omega; delta] deviations, plus
/// the disturbance estimate when the augmented model is enabled). The first
/// optimized angle block is pushed through the nonlinear IBR power equations
/// to produce absolute power commands, clamped to the configured bounds.
class MipcController {
public:
  MipcController(const ReducedNetwork& net, const SusceptancePartition& part,
                 const LinearModel& model, MipcConfig cfg);

  /// Switches the prediction to the augmented observer model (state
  /// [omega; delta; d_hat]); `a_aug`/`b_aug` come from observer::build_augmented.
  void use_augmented_model(const Mat& a_aug, const Mat& b_aug);

  /// Estimate size must match the active model (2n, or 2n + n_d when
  /// augmented). Returns absolute power commands per IBR.
  Vec step(double t, const Vec& estimate);

  Index state_size() const { return bundle_.nx; }
  const PredictionBundle& bundle() const { return bundle_; }
  const ConstraintStack& constraints() const { return stack_; }
  const Vec& nominal_power() const { return p_nominal_; }
  /// First angle block of the latest solve; feeds the observer prediction.
  const Vec& last_action() const { return last_u0_; }
  const std::vector<MipcStepLog>& log() const { return log_; }

private:
  void rebuild(const Mat& a, const Mat& b, Index nd);

  const ReducedNetwork& net_;
  SusceptancePartition part_;
  LinearModel model_;
  MipcConfig cfg_;
  Vec p_nominal_;
  PredictionBundle bundle_;
  ConstraintStack stack_;
  std::vector<std::pair<Index, Index>> energy_rows_;  ///< (row, ibr) pairs
  Vec energy_used_;
  std::optional<Vec> warm_;
  Vec last_u0_;
  std::vector<MipcStepLog> log_;
};

}  // namespace swingmpc
