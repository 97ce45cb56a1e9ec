#pragma once

#include <vector>

#include "swingmpc/mipc.hpp"
#include "swingmpc/types.hpp"

namespace swingmpc {

/// Which state channels a communicating generator reports.
enum class MeasuredChannels { Omega, OmegaAndDelta };

/// Per-generator communication availability for a run; static within a run.
struct CommMask {
  std::vector<bool> measured;

  Index count() const;
  void validate(Index n_machines) const;
  static CommMask all(Index n_machines);
};

/// Selection matrix picking the measured channels out of x = [omega; delta].
Mat measurement_matrix(const CommMask& mask, MeasuredChannels channels, Index n_machines);

/// Constant-disturbance augmentation of the linear model:
///   [x; d]+ = [A B_d; 0 I] [x; d] + [B_u; 0] u,    y = [C_meas C_d] [x; d].
struct AugmentedModel {
  Mat A;  ///< (2n + nd) square
  Mat B;  ///< (2n + nd) x |I|
  Mat C;  ///< ny x (2n + nd)
  Index nx = 0;  ///< original state size 2n
  Index nd = 0;
  Index ny = 0;
};

/// Assembles the augmented matrices from an explicit disturbance input map
/// `b_d` and measurement pair (c_meas, c_d), and verifies detectability of
/// (A_aug, C_aug) with a PBH rank test on every marginal or unstable mode.
/// Throws ModelError naming the undetectable disturbance directions.
AugmentedModel build_augmented(const LinearModel& model, const Mat& b_d, const Mat& c_meas,
                               const Mat& c_d);

/// Masked pure-input-disturbance form (C_d = 0). Disturbance columns cover
/// the *measured* machines only: a constant disturbance at a silent machine
/// is indistinguishable from a shift of its (unmeasured) angle, so modelling
/// it would fail the PBH test; what its effect aliases into is still
/// captured by the measured machines' disturbance states.
AugmentedModel build_augmented(const LinearModel& model, const CommMask& mask,
                               MeasuredChannels channels);

/// Steady-state Kalman filter gain K = P C' (C P C' + R)^{-1} with P from the
/// filtering Riccati equation. The closed-loop matrix (I - K C) A is asserted
/// Schur stable (spectral radius < 1).
Mat compute_gain(const AugmentedModel& aug, const Mat& q_process, const Mat& r_meas);

/// Spectral radius of (I - K C) A, the estimation-error transition matrix.
double error_spectral_radius(const AugmentedModel& aug, const Mat& gain);

/// Augmented estimate [x_hat; d_hat]; `posterior` tells which half-step the
/// value belongs to so predict/update alternate strictly.
struct ObserverState {
  Vec xhat;  ///< 2n
  Vec dhat;  ///< nd
  bool posterior = true;

  Vec stacked() const;
  static ObserverState zero(Index nx, Index nd);
};

/// Time update: [x; d]+ = A_aug [x; d] + B_aug u; the disturbance block is
/// carried constant by construction.
ObserverState predict(const ObserverState& state, const AugmentedModel& aug, const Vec& u);

/// Measurement update: posterior = prior + K (y - C_aug prior).
ObserverState update(const ObserverState& prior, const AugmentedModel& aug, const Mat& gain,
                     const Vec& y, Vec* innovation = nullptr);

/// Fixed-gain observer bound to one run: strict predict/update alternation,
/// gain precomputed once for the run's mask.
class Observer {
public:
  Observer(AugmentedModel aug, Mat gain);

  /// Feeds a measurement, returns the innovation y - y_hat.
  Vec correct(const Vec& y);
  /// Advances the estimate with the applied input.
  void advance(const Vec& u);

  const ObserverState& state() const { return state_; }
  const AugmentedModel& model() const { return aug_; }
  const Mat& gain() const { return gain_; }

private:
  AugmentedModel aug_;
  Mat gain_;
  ObserverState state_;
};

}  // namespace swingmpc
