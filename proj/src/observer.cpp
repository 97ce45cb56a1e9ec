#include "swingmpc/observer.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <sstream>

#include "swingmpc/dare.hpp"

namespace swingmpc {

Index CommMask::count() const {
  Index c = 0;
  for (bool m : measured)
    if (m) ++c;
  return c;
}

void CommMask::validate(Index n_machines) const {
  if (static_cast<Index>(measured.size()) != n_machines)
    throw ConfigError("comm mask: one flag per generator required");
  if (count() == 0) throw ConfigError("comm mask: at least one generator must be measured");
}

CommMask CommMask::all(Index n_machines) {
  CommMask m;
  m.measured.assign(static_cast<size_t>(n_machines), true);
  return m;
}

Mat measurement_matrix(const CommMask& mask, MeasuredChannels channels, Index n_machines) {
  mask.validate(n_machines);
  const Index per = channels == MeasuredChannels::OmegaAndDelta ? 2 : 1;
  Mat c = Mat::Zero(per * mask.count(), 2 * n_machines);
  Index row = 0;
  for (Index i = 0; i < n_machines; ++i) {
    if (!mask.measured[static_cast<size_t>(i)]) continue;
    c(row++, i) = 1.0;  // omega channel
    if (per == 2) c(row++, n_machines + i) = 1.0;  // delta channel
  }
  return c;
}

namespace {

// PBH test: (A, C) is detectable iff [A - lambda I; C] has full column rank
// for every eigenvalue with |lambda| >= 1.
void check_detectability(const Mat& a, const Mat& c, Index nx, Index nd) {
  Eigen::EigenSolver<Mat> eig(a);
  const Index n = a.rows();
  for (Index k = 0; k < n; ++k) {
    const std::complex<double> lambda = eig.eigenvalues()(k);
    if (std::abs(lambda) < 1.0 - 1e-9) continue;
    CMat pencil(n + c.rows(), n);
    pencil.topRows(n) = a.cast<std::complex<double>>();
    pencil.topRows(n).diagonal().array() -= lambda;
    pencil.bottomRows(c.rows()) = c.cast<std::complex<double>>();
    Eigen::ColPivHouseholderQR<CMat> qr(pencil);
    qr.setThreshold(1e-10);
    if (qr.rank() < n) {
      // Name the disturbance directions carried by the unobservable mode.
      const CVec v = eig.eigenvectors().col(k);
      std::ostringstream msg;
      msg << "observer: augmented pair undetectable at eigenvalue " << lambda
          << "; unobservable disturbance components:";
      for (Index i = 0; i < nd; ++i)
        if (std::abs(v(nx + i)) > 1e-6) msg << " d[" << i << "]";
      throw ModelError(msg.str());
    }
  }
}

}  // namespace

AugmentedModel build_augmented(const LinearModel& model, const Mat& b_d, const Mat& c_meas,
                               const Mat& c_d) {
  const Index nx = 2 * model.n_machines;
  const Index nd = b_d.cols();
  require(b_d.rows() == nx || nd == 0, "build_augmented: B_d must act on the state");
  require(c_meas.cols() == nx, "build_augmented: measurement matrix width must be 2n");
  require(c_d.rows() == c_meas.rows() && (c_d.cols() == nd || nd == 0),
          "build_augmented: C_d must match the disturbance dimension");

  AugmentedModel aug;
  aug.nx = nx;
  aug.nd = nd;
  aug.ny = c_meas.rows();
  aug.A.setZero(nx + nd, nx + nd);
  aug.A.topLeftCorner(nx, nx) = model.A;
  if (nd > 0) aug.A.topRightCorner(nx, nd) = b_d;
  aug.A.bottomRightCorner(nd, nd).setIdentity();
  aug.B.setZero(nx + nd, model.B_u.cols());
  aug.B.topRows(nx) = model.B_u;
  aug.C.resize(aug.ny, nx + nd);
  aug.C.leftCols(nx) = c_meas;
  aug.C.rightCols(nd) = c_d;

  check_detectability(aug.A, aug.C, nx, nd);
  return aug;
}

AugmentedModel build_augmented(const LinearModel& model, const CommMask& mask,
                               MeasuredChannels channels) {
  mask.validate(model.n_machines);
  const Mat c_meas = measurement_matrix(mask, channels, model.n_machines);
  Mat b_d(2 * model.n_machines, mask.count());
  Index col = 0;
  for (Index i = 0; i < model.n_machines; ++i)
    if (mask.measured[static_cast<size_t>(i)]) b_d.col(col++) = model.B_d.col(i);
  return build_augmented(model, b_d, c_meas, Mat::Zero(c_meas.rows(), b_d.cols()));
}

Mat compute_gain(const AugmentedModel& aug, const Mat& q_process, const Mat& r_meas) {
  const Index n = aug.A.rows();
  require(q_process.rows() == n && q_process.cols() == n,
          "compute_gain: process covariance must match the augmented state");
  require(r_meas.rows() == aug.ny && r_meas.cols() == aug.ny,
          "compute_gain: measurement covariance must match the output");

  const Mat p = solve_filter_dare<double>(aug.A, aug.C, q_process, r_meas);
  const Mat s = aug.C * p * aug.C.transpose() + r_meas;
  const Mat gain = (s.llt().solve(aug.C * p)).transpose();

  const double radius = error_spectral_radius(aug, gain);
  if (!(radius < 1.0)) {
    std::ostringstream msg;
    msg << "compute_gain: estimation error dynamics unstable (spectral radius " << radius << ")";
    throw ModelError(msg.str());
  }
  return gain;
}

double error_spectral_radius(const AugmentedModel& aug, const Mat& gain) {
  const Mat closed =
      (Mat::Identity(aug.A.rows(), aug.A.rows()) - gain * aug.C) * aug.A;
  return closed.eigenvalues().cwiseAbs().maxCoeff();
}

Vec ObserverState::stacked() const {
  Vec z(xhat.size() + dhat.size());
  z << xhat, dhat;
  return z;
}

ObserverState ObserverState::zero(Index nx, Index nd) {
  ObserverState s;
  s.xhat = Vec::Zero(nx);
  s.dhat = Vec::Zero(nd);
  s.posterior = true;
  return s;
}

ObserverState predict(const ObserverState& state, const AugmentedModel& aug, const Vec& u) {
  require(u.size() == aug.B.cols(), "observer predict: input size mismatch");
  const Vec z = aug.A * state.stacked() + aug.B * u;
  ObserverState next;
  next.xhat = z.head(aug.nx);
  next.dhat = z.tail(aug.nd);
  next.posterior = false;
  return next;
}

ObserverState update(const ObserverState& prior, const AugmentedModel& aug, const Mat& gain,
                     const Vec& y, Vec* innovation) {
  require(y.size() == aug.ny, "observer update: measurement size mismatch");
  require(gain.rows() == aug.nx + aug.nd && gain.cols() == aug.ny,
          "observer update: gain built for a different mask");
  const Vec innov = y - aug.C * prior.stacked();
  const Vec z = prior.stacked() + gain * innov;
  if (innovation) *innovation = innov;
  ObserverState post;
  post.xhat = z.head(aug.nx);
  post.dhat = z.tail(aug.nd);
  post.posterior = true;
  return post;
}

Observer::Observer(AugmentedModel aug, Mat gain)
    : aug_(std::move(aug)), gain_(std::move(gain)),
      state_(ObserverState::zero(aug_.nx, aug_.nd)) {
  require(gain_.rows() == aug_.nx + aug_.nd && gain_.cols() == aug_.ny,
          "observer: gain dimensions must match the model");
}

Vec Observer::correct(const Vec& y) {
  Vec innov;
  // The very first call treats the initial state as the prior.
  state_.posterior = false;
  state_ = update(state_, aug_, gain_, y, &innov);
  return innov;
}

void Observer::advance(const Vec& u) { state_ = predict(state_, aug_, u); }

}  // namespace swingmpc
