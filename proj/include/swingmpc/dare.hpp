#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>

#include <cmath>

#include "swingmpc/types.hpp"

namespace swingmpc {

/// Steady-state a-priori covariance of the filtering discrete algebraic
/// Riccati equation
///   P = A P A' - A P C' (C P C' + R)^{-1} C P A' + Q,
/// computed with the structure-preserving doubling iteration (quadratic
/// convergence; each sweep squares the closed-loop horizon). Throws
/// ModelError when the iteration fails to settle, which happens when the
/// pair is not detectable or Q/R are degenerate.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_filter_dare(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& C,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& Q,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& R,
    int max_sweeps = 200, Scalar tol = Scalar(1e-14)) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = A.rows();
  require(A.cols() == n && C.cols() == n && Q.rows() == n && Q.cols() == n,
          "solve_filter_dare: square dimensions inconsistent");
  require(R.rows() == C.rows() && R.cols() == C.rows(), "solve_filter_dare: R must match outputs");

  // The filter equation is the control DARE of the dual pair (A', C'), so run
  // the doubling recursion on E = A', G = C' R^{-1} C, H = Q; H converges to P.
  Matrix E = A.transpose();
  Matrix G = C.transpose() * R.llt().solve(C);
  Matrix H = Q;

  const Matrix eye = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::PartialPivLU<Matrix> w(eye + G * H);
    const Matrix winv_e = w.solve(E);                    // (I + G H)^{-1} E
    const Matrix h_winv_e = H * winv_e;                  // H (I + G H)^{-1} E
    const Matrix g_next = G + E * w.solve(G * E.transpose());
    const Matrix h_next = H + E.transpose() * h_winv_e;
    const Matrix e_next = E * winv_e;

    const Scalar delta = (h_next - H).cwiseAbs().maxCoeff();
    const Scalar scale = Scalar(1) + H.cwiseAbs().maxCoeff();
    E = e_next;
    G = Scalar(0.5) * (g_next + g_next.transpose());
    H = Scalar(0.5) * (h_next + h_next.transpose());
    if (!H.allFinite()) throw ModelError("solve_filter_dare: iteration diverged");
    if (delta <= tol * scale) return H;
  }
  throw ModelError("solve_filter_dare: no convergence; check detectability of (A, C)");
}

}  // namespace swingmpc
