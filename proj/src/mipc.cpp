#include "swingmpc/mipc.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace swingmpc {

LinearModel build_linear_model(const SusceptancePartition& part, const MachineParams& params,
                               double h) {
  const Index n = part.gg.rows();
  const Index ni = part.gi.cols();
  require(params.n() == n, "build_linear_model: params must match partition");
  require(h > 0, "build_linear_model: step size must be positive");
  if ((params.inertia.array() <= 0).any())
    throw ModelError("build_linear_model: zero or negative inertia");

  const Vec minv = params.inertia.cwiseInverse();
  const double wb = params.base_speed;

  const Mat a_ww = Mat::Identity(n, n) - h * (minv.asDiagonal() * Mat(params.damping.asDiagonal()));
  const Mat a_wd = -h * (minv.asDiagonal() * part.gg);
  const Mat b_w = -h * (minv.asDiagonal() * part.gi);
  const Mat bd_w = (-h * minv).asDiagonal();

  LinearModel m;
  m.h = h;
  m.n_machines = n;
  m.n_ibrs = ni;
  m.A.setZero(2 * n, 2 * n);
  m.A.topLeftCorner(n, n) = a_ww;
  m.A.topRightCorner(n, n) = a_wd;
  m.A.bottomLeftCorner(n, n) = h * wb * a_ww;
  m.A.bottomRightCorner(n, n) = Mat::Identity(n, n) + h * wb * a_wd;
  m.B_u.setZero(2 * n, ni);
  m.B_u.topRows(n) = b_w;
  m.B_u.bottomRows(n) = h * wb * b_w;
  m.B_d.setZero(2 * n, n);
  m.B_d.topRows(n) = bd_w;
  m.B_d.bottomRows(n) = h * wb * bd_w;
  m.C.setZero(n, 2 * n);
  m.C.leftCols(n).setIdentity();
  return m;
}

PredictionBundle build_prediction(const Mat& A, const Mat& B, Index N) {
  require(N >= 1, "build_prediction: horizon must be at least one step");
  const Index nx = A.rows();
  const Index nu = B.cols();
  require(A.cols() == nx && B.rows() == nx, "build_prediction: A/B dimensions inconsistent");

  PredictionBundle bundle;
  bundle.N = N;
  bundle.nx = nx;
  bundle.nu = nu;
  bundle.S.setZero((N + 1) * nx, N * nu);
  bundle.M_pred.setZero((N + 1) * nx, nx);

  // Powers of A fill M_pred block rows and the lower-triangular blocks of S:
  // block (t, k) of S is A^{t-1-k} B.
  std::vector<Mat> apow(static_cast<size_t>(N) + 1);
  apow[0] = Mat::Identity(nx, nx);
  for (Index t = 1; t <= N; ++t) apow[static_cast<size_t>(t)] = A * apow[static_cast<size_t>(t - 1)];

  for (Index t = 0; t <= N; ++t) {
    bundle.M_pred.middleRows(t * nx, nx) = apow[static_cast<size_t>(t)];
    for (Index k = 0; k < t; ++k)
      bundle.S.block(t * nx, k * nu, nx, nu) = apow[static_cast<size_t>(t - 1 - k)] * B;
  }

  bundle.Theta = bundle.S.topRows(N * nx) - bundle.S.bottomRows(N * nx);
  bundle.Gamma = bundle.M_pred.topRows(N * nx) - bundle.M_pred.bottomRows(N * nx);
  return bundle;
}

void build_cost(PredictionBundle& bundle, const Mat& Q1, const Mat& Q2, const Mat& C, double h) {
  const Index nx = bundle.nx;
  const Index N = bundle.N;
  const Index ny = C.rows();
  require(C.cols() == nx, "build_cost: output matrix width must match the state");
  require(Q1.rows() == ny && Q1.cols() == ny && Q2.rows() == ny && Q2.cols() == ny,
          "build_cost: weights must match the output dimension");
  require(h > 0, "build_cost: step size must be positive");

  bundle.Qhat1 = C.transpose() * Q1 * C;
  // The ROCOF rows are differences divided by h, so the per-block weight
  // carries 1/h^2; with Q2 = h I this reproduces the (1/h) |dy|^2 objective.
  bundle.Qhat2 = C.transpose() * Q2 * C / (h * h);

  // Block-diagonal stacked weights; block row 0 of the output weight is zero
  // (the x0 term is constant in u and excluded from the objective window).
  Mat qt1 = Mat::Zero((N + 1) * nx, (N + 1) * nx);
  for (Index t = 1; t <= N; ++t) qt1.block(t * nx, t * nx, nx, nx) = bundle.Qhat1;
  Mat qt2 = Mat::Zero(N * nx, N * nx);
  for (Index t = 0; t < N; ++t) qt2.block(t * nx, t * nx, nx, nx) = bundle.Qhat2;

  bundle.G = bundle.M_pred.transpose() * qt1 * bundle.M_pred +
             bundle.Gamma.transpose() * qt2 * bundle.Gamma;
  bundle.F = bundle.M_pred.transpose() * qt1 * bundle.S +
             bundle.Gamma.transpose() * qt2 * bundle.Theta;
  Mat H = bundle.S.transpose() * qt1 * bundle.S + bundle.Theta.transpose() * qt2 * bundle.Theta;
  bundle.H_raw = 0.5 * (H + H.transpose());
  bundle.H = bundle.H_raw;
  bundle.H.diagonal().array() += 1e-9;

  Eigen::LLT<Mat> llt(bundle.H);
  if (llt.info() != Eigen::Success)
    throw ModelError("build_cost: condensed Hessian is not positive definite");
}

Vec solve_unconstrained(const Mat& H, const Mat& F, const Vec& x0) {
  require(F.rows() == x0.size() && F.cols() == H.rows(),
          "solve_unconstrained: F must map the state to the input sequence");
  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success)
    throw ModelError("solve_unconstrained: H factorization failed");
  return llt.solve(-(F.transpose() * x0));
}

PowerMap build_power_map(const PredictionBundle& bundle, const Mat& px, const Mat& pu) {
  const Index np = px.rows();
  require(px.cols() == bundle.nx, "build_power_map: state map width must match the model");
  require(pu.rows() == np && pu.cols() == bundle.nu,
          "build_power_map: input map must be per-step consistent");

  PowerMap map;
  map.N = bundle.N;
  map.np = np;
  map.on_u.setZero(bundle.N * np, bundle.N * bundle.nu);
  map.on_x0.setZero(bundle.N * np, bundle.nx);
  for (Index t = 0; t < bundle.N; ++t) {
    // Step t holds input u_t while the state is x_t (rows t of the stack).
    map.on_u.middleRows(t * np, np) = px * bundle.S.middleRows(t * bundle.nx, bundle.nx);
    map.on_u.block(t * np, t * bundle.nu, np, bundle.nu) += pu;
    map.on_x0.middleRows(t * np, np) = px * bundle.M_pred.middleRows(t * bundle.nx, bundle.nx);
  }
  return map;
}

ConstraintStack ConstraintStack::empty(Index n_u, Index n_x) {
  ConstraintStack s;
  s.L.resize(0, n_u);
  s.W.resize(0);
  s.V.resize(0, n_x);
  return s;
}

void ConstraintStack::append(const ConstraintStack& other) {
  require(L.cols() == other.L.cols() && V.cols() == other.V.cols(),
          "constraint stack: incompatible widths");
  const Index r0 = rows();
  const Index r1 = other.rows();
  Mat l(r0 + r1, L.cols());
  l << L, other.L;
  Vec w(r0 + r1);
  w << W, other.W;
  Mat v(r0 + r1, V.cols());
  v << V, other.V;
  L = std::move(l);
  W = std::move(w);
  V = std::move(v);
  kinds.insert(kinds.end(), other.kinds.begin(), other.kinds.end());
}

namespace {

bool is_finite(double v) { return std::isfinite(v); }

ConstraintStack from_rows(Index n_u, Index n_x, const std::vector<Eigen::RowVectorXd>& lrows,
                          const std::vector<Eigen::RowVectorXd>& vrows,
                          const std::vector<double>& wvals, std::vector<RowKind> kinds) {
  ConstraintStack s = ConstraintStack::empty(n_u, n_x);
  const Index r = static_cast<Index>(lrows.size());
  s.L.resize(r, n_u);
  s.V.resize(r, n_x);
  s.W.resize(r);
  for (Index i = 0; i < r; ++i) {
    s.L.row(i) = lrows[static_cast<size_t>(i)];
    s.V.row(i) = vrows[static_cast<size_t>(i)];
    s.W(i) = wvals[static_cast<size_t>(i)];
  }
  s.kinds = std::move(kinds);
  return s;
}

}  // namespace

ConstraintStack build_power_constraints(const PowerMap& map, const Vec& p_dev_min,
                                        const Vec& p_dev_max) {
  require(p_dev_min.size() == map.np && p_dev_max.size() == map.np,
          "build_power_constraints: bounds must be per ibr");
  std::vector<Eigen::RowVectorXd> lrows, vrows;
  std::vector<double> wvals;
  std::vector<RowKind> kinds;
  for (Index t = 0; t < map.N; ++t) {
    for (Index k = 0; k < map.np; ++k) {
      const Index r = t * map.np + k;
      if (is_finite(p_dev_min(k))) {
        lrows.emplace_back(-map.on_u.row(r));
        vrows.emplace_back(map.on_x0.row(r));
        wvals.push_back(-p_dev_min(k));
        kinds.push_back(RowKind::PowerLower);
      }
      if (is_finite(p_dev_max(k))) {
        lrows.emplace_back(map.on_u.row(r));
        vrows.emplace_back(-map.on_x0.row(r));
        wvals.push_back(p_dev_max(k));
        kinds.push_back(RowKind::PowerUpper);
      }
    }
  }
  return from_rows(map.on_u.cols(), map.on_x0.cols(), lrows, vrows, wvals, std::move(kinds));
}

ConstraintStack build_energy_rate_constraints(const PowerMap& map, const Vec& energy_budget,
                                              const Vec& rate_limit, double h) {
  require(energy_budget.size() == map.np && rate_limit.size() == map.np,
          "build_energy_rate_constraints: limits must be per ibr");
  require(h > 0, "build_energy_rate_constraints: step size must be positive");
  std::vector<Eigen::RowVectorXd> lrows, vrows;
  std::vector<double> wvals;
  std::vector<RowKind> kinds;

  for (Index k = 0; k < map.np; ++k) {
    if (!is_finite(energy_budget(k))) continue;
    Eigen::RowVectorXd lsum = Eigen::RowVectorXd::Zero(map.on_u.cols());
    Eigen::RowVectorXd vsum = Eigen::RowVectorXd::Zero(map.on_x0.cols());
    for (Index t = 0; t < map.N; ++t) {
      const Index r = t * map.np + k;
      lsum += h * map.on_u.row(r);
      vsum += h * map.on_x0.row(r);
      lrows.emplace_back(lsum);
      vrows.emplace_back(-vsum);
      wvals.push_back(energy_budget(k));
      kinds.push_back(RowKind::Energy);
    }
  }

  for (Index k = 0; k < map.np; ++k) {
    if (!is_finite(rate_limit(k))) continue;
    for (Index t = 0; t + 1 < map.N; ++t) {
      const Index r0 = t * map.np + k;
      const Index r1 = (t + 1) * map.np + k;
      const Eigen::RowVectorXd ldiff = map.on_u.row(r0) - map.on_u.row(r1);
      const Eigen::RowVectorXd vdiff = map.on_x0.row(r0) - map.on_x0.row(r1);
      // Decline P_t - P_{t+1} <= eps and rise P_{t+1} - P_t <= eps.
      lrows.emplace_back(ldiff);
      vrows.emplace_back(-vdiff);
      wvals.push_back(rate_limit(k));
      kinds.push_back(RowKind::RateDown);
      lrows.emplace_back(-ldiff);
      vrows.emplace_back(vdiff);
      wvals.push_back(rate_limit(k));
      kinds.push_back(RowKind::RateUp);
    }
  }
  return from_rows(map.on_u.cols(), map.on_x0.cols(), lrows, vrows, wvals, std::move(kinds));
}

MipcController::MipcController(const ReducedNetwork& net, const SusceptancePartition& part,
                               const LinearModel& model, MipcConfig cfg)
    : net_(net), part_(part), model_(model), cfg_(std::move(cfg)) {
  const Index ni = model.n_ibrs;
  require(cfg_.horizon >= 1, "mipc: horizon must be at least one step");
  auto fill = [&](Vec& v, double def) {
    if (v.size() == 0) v = Vec::Constant(ni, def);
    require(v.size() == ni, "mipc: per-ibr limit vectors must match the ibr count");
  };
  const double inf = std::numeric_limits<double>::infinity();
  fill(cfg_.p_min, -inf);
  fill(cfg_.p_max, inf);
  fill(cfg_.energy_budget, inf);
  fill(cfg_.rate_limit, inf);
  if ((cfg_.p_min.array() > cfg_.p_max.array()).any())
    throw ConfigError("mipc: p_min must not exceed p_max");

  p_nominal_ = ac_power_ibrs(net_, Vec::Zero(model.n_machines), Vec::Zero(ni)).total();
  rebuild(model_.A, model_.B_u, 0);
}

void MipcController::use_augmented_model(const Mat& a_aug, const Mat& b_aug) {
  const Index nd = a_aug.rows() - 2 * model_.n_machines;
  require(nd >= 0 && b_aug.rows() == a_aug.rows() && b_aug.cols() == model_.n_ibrs,
          "mipc: augmented model dimensions inconsistent");
  rebuild(a_aug, b_aug, nd);
}

void MipcController::rebuild(const Mat& a, const Mat& b, Index nd) {
  const Index n = model_.n_machines;
  const Index ni = model_.n_ibrs;
  bundle_ = build_prediction(a, b, cfg_.horizon);

  Mat q1 = cfg_.Q1.size() > 0 ? cfg_.Q1 : Mat::Identity(n, n);
  Mat q2 = cfg_.Q2.size() > 0 ? cfg_.Q2 : Mat(model_.h * Mat::Identity(n, n));
  Mat c = Mat::Zero(n, 2 * n + nd);
  c.leftCols(n).setIdentity();
  build_cost(bundle_, q1, q2, c, model_.h);

  // Per-step IBR power map: [0 B_ig 0] on the state, B_ii on the input.
  Mat px = Mat::Zero(ni, 2 * n + nd);
  px.middleCols(n, n) = part_.ig;
  const PowerMap pmap = build_power_map(bundle_, px, part_.ii);

  stack_ = ConstraintStack::empty(bundle_.N * bundle_.nu, bundle_.nx);
  stack_.append(build_power_constraints(pmap, cfg_.p_min - p_nominal_, cfg_.p_max - p_nominal_));
  stack_.append(build_energy_rate_constraints(pmap, cfg_.energy_budget, cfg_.rate_limit, model_.h));

  // Energy rows are re-tightened each step by the budget already consumed;
  // remember which IBR each one belongs to. The builder emits them grouped
  // per finite-budget IBR, one row per prefix length.
  energy_rows_.clear();
  std::vector<Index> budgeted;
  for (Index k = 0; k < ni; ++k)
    if (std::isfinite(cfg_.energy_budget(k))) budgeted.push_back(k);
  Index seen = 0;
  for (Index r = 0; r < stack_.rows(); ++r) {
    if (stack_.kinds[static_cast<size_t>(r)] != RowKind::Energy) continue;
    energy_rows_.emplace_back(r, budgeted[static_cast<size_t>(seen / bundle_.N)]);
    ++seen;
  }
  energy_used_ = Vec::Zero(ni);
  warm_.reset();
}

Vec MipcController::step(double t, const Vec& estimate) {
  require(estimate.size() == bundle_.nx, "mipc step: estimate size must match the model");
  const Index n = model_.n_machines;
  const Index ni = model_.n_ibrs;

  MipcStepLog entry;
  entry.t = t;
  Vec useq;
  if (stack_.rows() == 0) {
    useq = solve_unconstrained(bundle_.H, bundle_.F, estimate);
    entry.iterations = 0;
  } else {
    Vec w_eff = stack_.W + stack_.V * estimate;
    for (const auto& [row, ibr] : energy_rows_)
      w_eff(row) -= energy_used_(ibr);
    QpProblem<double> qp{bundle_.H, bundle_.F.transpose() * estimate, stack_.L,
                         std::move(w_eff)};
    QpOptions<double> opts;
    opts.warm_start = warm_;
    QpSolution<double> sol = solve(qp, opts);
    entry.status = sol.status;
    entry.iterations = sol.iterations;
    entry.residuals = sol.residuals;
    for (Index i = 0; i < sol.lambda.size(); ++i)
      if (sol.lambda(i) > 0) ++entry.active_rows;
    if (sol.status == QpStatus::Optimal || sol.status == QpStatus::MaxIterations) {
      useq = std::move(sol.u);
      entry.fallback = sol.status != QpStatus::Optimal;
    } else {
      useq = solve_unconstrained(bundle_.H, bundle_.F, estimate);
      entry.fallback = true;
    }
    if (entry.fallback == false) {
      // Shift one step for the next warm start, repeating the tail block.
      Vec shifted(useq.size());
      shifted.head(useq.size() - ni) = useq.tail(useq.size() - ni);
      shifted.tail(ni) = useq.tail(ni);
      warm_ = std::move(shifted);
    } else {
      warm_.reset();
    }
  }

  // First action into the nonlinear power flow at the estimated angles.
  last_u0_ = useq.head(ni);
  const Vec ddelta = estimate.segment(n, n);
  Vec cmd = ac_power_ibrs(net_, ddelta, last_u0_).total();
  cmd = cmd.cwiseMax(cfg_.p_min).cwiseMin(cfg_.p_max);
  // Final guard against the remaining budget: the QP bounded the linearized
  // power, but the command is the AC evaluation and may sit a hair above it.
  for (Index k = 0; k < ni; ++k) {
    if (!std::isfinite(cfg_.energy_budget(k))) continue;
    const double headroom = (cfg_.energy_budget(k) - energy_used_(k)) / model_.h;
    cmd(k) = std::min(cmd(k), p_nominal_(k) + std::max(0.0, headroom));
  }
  energy_used_ += model_.h * (cmd - p_nominal_);
  log_.push_back(entry);
  return cmd;
}

}  // namespace swingmpc
