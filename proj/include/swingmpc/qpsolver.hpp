#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "swingmpc/types.hpp"

namespace swingmpc {

/// Dense convex quadratic program
///   minimize 1/2 u' H u + f' u   subject to   L u <= w,
/// with H symmetric positive definite. L may have zero rows (unconstrained).
template <typename Scalar = double>
struct QpProblem {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix H;
  Vector f;
  Matrix L;
  Vector w;

  Index n_vars() const { return H.rows(); }
  Index n_rows() const { return L.rows(); }
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

template <typename Scalar = double>
struct KktReport {
  Scalar stationarity = 0;    ///< || H u + f + L' lambda ||_inf
  Scalar feasibility = 0;     ///< max(0, max_i (L u - w)_i)
  Scalar complementarity = 0; ///< || lambda .* (L u - w) ||_inf
  Scalar worst() const { return std::max({stationarity, feasibility, complementarity}); }
};

template <typename Scalar = double>
struct QpSolution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector u;
  Vector lambda;  ///< one multiplier per row of L, zero on inactive rows
  QpStatus status = QpStatus::Optimal;
  KktReport<Scalar> residuals;
  int iterations = 0;
  std::vector<Index> certificate_rows;  ///< rows witnessing infeasibility, when detected
};

template <typename Scalar = double>
struct QpOptions {
  Scalar tol = Scalar(1e-8);
  int max_iter = 0;  ///< 0 selects the default 10 * (vars + rows)
  std::optional<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> warm_start;
};

/// Evaluates the three KKT residual norms of a candidate primal/dual pair.
template <typename Scalar>
KktReport<Scalar> check_kkt(const QpProblem<Scalar>& p,
                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& u,
                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& lambda) {
  KktReport<Scalar> r;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad = p.H * u + p.f;
  if (p.n_rows() > 0) grad += p.L.transpose() * lambda;
  r.stationarity = grad.template lpNorm<Eigen::Infinity>();
  if (p.n_rows() > 0) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> slack = p.L * u - p.w;
    r.feasibility = std::max(Scalar(0), slack.maxCoeff());
    r.complementarity = (lambda.array() * slack.array()).abs().maxCoeff();
  }
  return r;
}

namespace qpdetail {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct CoreResult {
  VectorX<Scalar> x;
  VectorX<Scalar> lambda;  ///< full-length, zero on rows outside the final working set
  int iterations = 0;
  bool converged = false;
  std::vector<Index> working;
};

/// Primal active-set iteration (null-space form) from a feasible start.
/// The working set is refactorized each step; problem sizes here are small
/// enough that incremental QR updates would not pay for their complexity.
template <typename Scalar>
CoreResult<Scalar> active_set_minimize(const MatrixX<Scalar>& H, const VectorX<Scalar>& f,
                                       const MatrixX<Scalar>& L, const VectorX<Scalar>& w,
                                       VectorX<Scalar> x, std::vector<Index> working,
                                       Scalar tol, int max_iter) {
  const Index n = H.rows();
  const Index m = L.rows();
  CoreResult<Scalar> res;
  res.lambda = VectorX<Scalar>::Zero(m);

  std::vector<char> in_working(static_cast<size_t>(m), 0);
  for (Index r : working) in_working[static_cast<size_t>(r)] = 1;

  VectorX<Scalar> lambda_w;
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    const Index q = static_cast<Index>(working.size());
    MatrixX<Scalar> lw(q, n);
    for (Index a = 0; a < q; ++a) lw.row(a) = L.row(working[static_cast<size_t>(a)]);

    VectorX<Scalar> grad = H * x + f;
    VectorX<Scalar> p = VectorX<Scalar>::Zero(n);

    Eigen::HouseholderQR<MatrixX<Scalar>> qr;
    if (q > 0) qr.compute(lw.transpose());
    if (q < n) {
      MatrixX<Scalar> z;
      if (q > 0) {
        MatrixX<Scalar> qfull = qr.householderQ() * MatrixX<Scalar>::Identity(n, n);
        z = qfull.rightCols(n - q);
      } else {
        z = MatrixX<Scalar>::Identity(n, n);
      }
      MatrixX<Scalar> hz = z.transpose() * H * z;
      Eigen::LLT<MatrixX<Scalar>> llt(hz);
      if (llt.info() != Eigen::Success)
        throw ModelError("qp solve: reduced Hessian factorization failed");
      p.noalias() = z * llt.solve((-(z.transpose() * grad)).eval());
    }

    // The within-working-set Newton step is exact up to round-off, so a
    // near-machine threshold decides stationarity; `tol` only classifies
    // multiplier signs and feasibility.
    const Scalar step_tol =
        Scalar(1e-12) * (Scalar(1) + x.template lpNorm<Eigen::Infinity>());
    if (p.template lpNorm<Eigen::Infinity>() <= step_tol) {
      // Stationary on the working set; inspect multipliers.
      if (q == 0) {
        res.converged = true;
        break;
      }
      // lw' * lambda = -grad in least squares via the QR of lw'.
      lambda_w = qr.solve(-grad);
      Index drop = -1;
      Scalar most_negative = -tol;
      for (Index a = 0; a < q; ++a) {
        if (lambda_w(a) < most_negative) {
          most_negative = lambda_w(a);
          drop = a;
        }
      }
      if (drop < 0) {
        for (Index a = 0; a < q; ++a)
          res.lambda(working[static_cast<size_t>(a)]) = std::max(Scalar(0), lambda_w(a));
        res.converged = true;
        break;
      }
      in_working[static_cast<size_t>(working[static_cast<size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    // Line search toward the Newton point; the first blocking row joins the set.
    Scalar alpha = Scalar(1);
    Index blocker = -1;
    const Scalar pnorm = p.template lpNorm<Eigen::Infinity>();
    for (Index i = 0; i < m; ++i) {
      if (in_working[static_cast<size_t>(i)]) continue;
      const Scalar d = L.row(i).dot(p);
      const Scalar dir_tol =
          Scalar(1e-12) * std::max(Scalar(1), L.row(i).template lpNorm<Eigen::Infinity>() * pnorm);
      if (d <= dir_tol) continue;
      const Scalar gap = w(i) - L.row(i).dot(x);
      const Scalar cand = std::max(Scalar(0), gap / d);
      if (cand < alpha) {
        alpha = cand;
        blocker = i;
      }
    }

    x += alpha * p;
    if (blocker >= 0) {
      // Reject rows that are linearly dependent on the current working set;
      // such a row cannot define a new direction and would break the QR rank.
      MatrixX<Scalar> trial(static_cast<Index>(working.size()) + 1, n);
      for (Index a = 0; a < static_cast<Index>(working.size()); ++a)
        trial.row(a) = L.row(working[static_cast<size_t>(a)]);
      trial.row(trial.rows() - 1) = L.row(blocker);
      Eigen::ColPivHouseholderQR<MatrixX<Scalar>> rank_qr(trial.transpose());
      rank_qr.setThreshold(Scalar(1e-10));
      if (rank_qr.rank() == trial.rows()) {
        working.push_back(blocker);
        in_working[static_cast<size_t>(blocker)] = 1;
      }
    }
  }

  res.x = std::move(x);
  res.working = std::move(working);
  return res;
}

/// Independent subset of the rows active at `x`, in ascending row order,
/// capped at n entries so the working-set QR stays overdetermined-free.
template <typename Scalar>
std::vector<Index> initial_working_set(const MatrixX<Scalar>& L, const VectorX<Scalar>& w,
                                       const VectorX<Scalar>& x, Scalar act_tol) {
  const Index n = L.cols();
  std::vector<Index> out;
  MatrixX<Scalar> rows(0, n);
  for (Index i = 0; i < L.rows(); ++i) {
    if (std::abs(L.row(i).dot(x) - w(i)) > act_tol) continue;
    if (static_cast<Index>(out.size()) == n) break;
    MatrixX<Scalar> trial(rows.rows() + 1, n);
    trial.topRows(rows.rows()) = rows;
    trial.row(rows.rows()) = L.row(i);
    Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(trial.transpose());
    qr.setThreshold(Scalar(1e-10));
    if (qr.rank() < trial.rows()) continue;
    rows.swap(trial);
    out.push_back(i);
  }
  return out;
}

}  // namespace qpdetail

/// Solves the QP with a primal active-set method. Infeasible starts are
/// handled by a regularized minimax-slack phase that either produces a
/// feasible point or an (approximate) infeasibility certificate. The result
/// carries KKT residuals; `status == Optimal` guarantees all of them are
/// below `opts.tol` scaled by the problem data.
template <typename Scalar = double>
QpSolution<Scalar> solve(const QpProblem<Scalar>& p, const QpOptions<Scalar>& opts = {}) {
  using Matrix = qpdetail::MatrixX<Scalar>;
  using Vector = qpdetail::VectorX<Scalar>;

  const Index n = p.n_vars();
  const Index m = p.n_rows();
  require(p.H.cols() == n && p.f.size() == n, "qp solve: H/f dimensions inconsistent");
  require(p.L.cols() == (m > 0 ? n : p.L.cols()) && p.w.size() == m,
          "qp solve: L/w dimensions inconsistent");

  const Scalar hscale = std::max(Scalar(1), p.H.cwiseAbs().maxCoeff());
  if ((p.H - p.H.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * hscale)
    throw ModelError("qp solve: H must be symmetric to 1e-12");

  Eigen::LLT<Matrix> hllt(p.H);
  if (hllt.info() != Eigen::Success)
    throw ModelError("qp solve: H is not positive definite");

  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * static_cast<int>(n + m);
  QpSolution<Scalar> sol;

  Vector u_unc = hllt.solve(-p.f);
  if (m == 0) {
    sol.u = std::move(u_unc);
    sol.lambda.resize(0);
    sol.iterations = 1;
    sol.residuals = check_kkt(p, sol.u, sol.lambda);
    sol.status = QpStatus::Optimal;
    return sol;
  }

  const Scalar wscale = std::max(Scalar(1), p.w.template lpNorm<Eigen::Infinity>());
  const Scalar feas_tol = std::max(opts.tol, Scalar(1e-9)) * wscale;
  auto feasible = [&](const Vector& x) {
    return ((p.L * x - p.w).array() <= feas_tol).all();
  };

  Vector x0;
  int phase1_iters = 0;
  if (opts.warm_start && opts.warm_start->size() == n && feasible(*opts.warm_start)) {
    x0 = *opts.warm_start;
  } else if (feasible(u_unc)) {
    x0 = std::move(u_unc);
  } else if (feasible(Vector::Zero(n))) {
    x0 = Vector::Zero(n);
  } else {
    // Phase 1: minimize t subject to L x - t <= w and t >= 0 (plus a tiny
    // regularizer keeping the Hessian PD); t* stays 0 exactly when a
    // feasible point exists, so the handoff point keeps a moderate scale.
    const Scalar sigma = Scalar(1e-8);
    Matrix h1 = sigma * Matrix::Identity(n + 1, n + 1);
    Vector f1 = Vector::Zero(n + 1);
    f1(n) = Scalar(1);
    Matrix l1 = Matrix::Zero(m + 1, n + 1);
    l1.topLeftCorner(m, n) = p.L;
    l1.col(n).head(m).setConstant(Scalar(-1));
    l1(m, n) = Scalar(-1);
    Vector w1(m + 1);
    w1.head(m) = p.w;
    w1(m) = Scalar(0);
    Vector t0(n + 1);
    t0.setZero();
    t0(n) = std::max(Scalar(0), (-p.w).maxCoeff()) + Scalar(1);
    auto ph = qpdetail::active_set_minimize<Scalar>(h1, f1, l1, w1, t0, {}, opts.tol,
                                                    10 * static_cast<int>(n + 1 + m));
    phase1_iters = ph.iterations;
    if (ph.x(n) > feas_tol) {
      sol.status = QpStatus::Infeasible;
      sol.u = ph.x.head(n);
      sol.lambda = Vector::Zero(m);
      sol.iterations = ph.iterations;
      for (Index i = 0; i < m; ++i)
        if (std::abs(p.L.row(i).dot(sol.u) - ph.x(n) - p.w(i)) <= feas_tol)
          sol.certificate_rows.push_back(i);
      sol.residuals = check_kkt(p, sol.u, sol.lambda);
      return sol;
    }
    x0 = ph.x.head(n);
    // The relaxed point can still sit a hair outside; project it exactly
    // onto the rows it presses against (minimum-norm correction).
    std::vector<Index> tight;
    for (Index i = 0; i < m; ++i)
      if (p.L.row(i).dot(x0) - p.w(i) > -feas_tol) tight.push_back(i);
    if (!tight.empty()) {
      Matrix lt(static_cast<Index>(tight.size()), n);
      Vector rt(static_cast<Index>(tight.size()));
      for (Index a = 0; a < lt.rows(); ++a) {
        lt.row(a) = p.L.row(tight[static_cast<size_t>(a)]);
        rt(a) = p.w(tight[static_cast<size_t>(a)]) - p.L.row(tight[static_cast<size_t>(a)]).dot(x0);
      }
      x0 += lt.transpose() *
            (lt * lt.transpose()).completeOrthogonalDecomposition().solve(rt);
    }
  }

  // Rows join the initial working set only when the start point sits on them
  // to near round-off; anything looser freezes an offset into the solution.
  const Scalar act_tol = Scalar(1e-11) * wscale;
  std::vector<Index> working = qpdetail::initial_working_set(p.L, p.w, x0, act_tol);
  auto core = qpdetail::active_set_minimize<Scalar>(p.H, p.f, p.L, p.w, std::move(x0),
                                                    std::move(working), opts.tol, max_iter);

  sol.u = std::move(core.x);
  sol.lambda = std::move(core.lambda);
  sol.iterations = phase1_iters + core.iterations;
  sol.residuals = check_kkt(p, sol.u, sol.lambda);
  sol.status = core.converged ? QpStatus::Optimal : QpStatus::MaxIterations;
  return sol;
}

}  // namespace swingmpc
