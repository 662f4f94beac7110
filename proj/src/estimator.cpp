#include "relloc/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace relloc::ekf {

namespace {

bool is_finite(const EkfState& s) {
  return std::isfinite(s.x_hat.x) && std::isfinite(s.x_hat.y) && std::isfinite(s.x_hat.psi) &&
         s.P.allFinite();
}

}  // namespace

Mat6 input_noise(double q_v, double q_r) {
  Eigen::Matrix<double, 6, 1> d;
  d << q_v * q_v, q_v * q_v, q_r * q_r, q_v * q_v, q_v * q_v, q_r * q_r;
  return d.asDiagonal();
}

EkfState initialize(const Mat3& P0, const Mat6& Q, double R) {
  if (!P0.allFinite() || (P0 - P0.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("initialize: P0 must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(P0);
  if (eig.eigenvalues().minCoeff() < -1e-9) {
    throw std::invalid_argument("initialize: P0 must be positive semidefinite");
  }
  if (!(Q.diagonal().array() > 0.0).all() || !(R > 0.0)) {
    throw std::invalid_argument("initialize: Q and R entries must be > 0");
  }
  EkfState s;
  s.P = P0;
  s.Q = Q;
  s.R = R;
  return s;
}

EkfState initialize() {
  return initialize(Eigen::Vector3d(10.0, 10.0, 0.1).asDiagonal(), input_noise(0.25, 0.4), 0.1 * 0.1);
}

Mat3 jacobian_A(const RelativeState& x, const InputVector& u, double dt) {
  const double c = std::cos(x.psi), s = std::sin(x.psi);
  const double vx = u.v_j.vx, vy = u.v_j.vy;
  Mat3 a;
  a << 1.0, u.r_i * dt, (-s * vx - c * vy) * dt,  //
      -u.r_i * dt, 1.0, (c * vx - s * vy) * dt,   //
      0.0, 0.0, 1.0;
  return a;
}

Mat36 jacobian_B(const RelativeState& x, double dt) {
  const double c = std::cos(x.psi), s = std::sin(x.psi);
  Mat36 b;
  b << -1.0, 0.0, x.y, c, -s, 0.0,  //
      0.0, -1.0, -x.x, s, c, 0.0,   //
      0.0, 0.0, -1.0, 0.0, 0.0, 1.0;
  return b * dt;
}

double observe_range(const RelativeState& x, double h_i, double h_j) {
  const double dh = h_j - h_i;
  return std::sqrt(x.x * x.x + x.y * x.y + dh * dh);
}

std::optional<Row3> jacobian_H(const RelativeState& x, double h_i, double h_j) {
  const double z = observe_range(x, h_i, h_j);
  if (!(z >= kMinRange)) return std::nullopt;
  return Row3(x.x / z, x.y / z, 0.0);
}

Mat3 condition_covariance(const Mat3& P) {
  const Mat3 sym = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
  if (eig.eigenvalues().minCoeff() >= kEigenFloor) return sym;
  const Eigen::Vector3d clamped = eig.eigenvalues().cwiseMax(kEigenFloor);
  Mat3 out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

EkfState predict(const EkfState& s, const InputVector& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be > 0");
  EkfState out = s;
  out.x_hat = integrate_step(s.x_hat, u, dt);
  const Mat3 a = jacobian_A(s.x_hat, u, dt);
  const Mat36 b = jacobian_B(s.x_hat, dt);
  out.P = a * s.P * a.transpose() + b * s.Q * b.transpose();
  if (!is_finite(out)) throw FilterFault("predict produced non-finite state", out);
  out.P = condition_covariance(out.P);
  return out;
}

UpdateResult update(const EkfState& s, const RangeObservation& obs, bool gate) {
  UpdateResult res{s};
  const auto h = jacobian_H(s.x_hat, obs.h_i, obs.h_j);
  if (!h) {
    res.outcome = UpdateOutcome::SkippedDegenerate;
    return res;
  }
  const double innovation = obs.d - observe_range(s.x_hat, obs.h_i, obs.h_j);
  const double var = (*h * s.P * h->transpose())(0, 0) + s.R;
  res.innovation = innovation;
  res.innovation_var = var;
  if (!(var > 0.0) || !std::isfinite(var)) throw FilterFault("innovation variance not positive", s);
  if (gate && std::abs(innovation) > kGateSigmas * std::sqrt(var)) {
    res.outcome = UpdateOutcome::RejectedGate;
    return res;
  }
  const Eigen::Vector3d k = s.P * h->transpose() / var;
  res.state.x_hat = RelativeState::from(s.x_hat.vec() + k * innovation);
  res.state.P = (Mat3::Identity() - k * *h) * s.P;
  if (!is_finite(res.state)) throw FilterFault("update produced non-finite state", res.state);
  res.state.P = condition_covariance(res.state.P);
  return res;
}

void PairFilter::predict(const InputVector& u, double dt) { state_ = ekf::predict(state_, u, dt); }

UpdateOutcome PairFilter::update(const RangeObservation& obs) {
  if (obs.t < last_obs_t_) ++out_of_order_;
  last_obs_t_ = std::max(last_obs_t_, obs.t);
  const bool release = gating_ && gate_release_ > 0 && reject_run_ >= gate_release_;
  auto res = ekf::update(state_, obs, gating_ && !release);
  switch (res.outcome) {
    case UpdateOutcome::Applied:
      ++applied_;
      if (release) ++released_;
      reject_run_ = 0;
      state_ = std::move(res.state);
      break;
    case UpdateOutcome::SkippedDegenerate:
      ++skipped_;
      break;
    case UpdateOutcome::RejectedGate:
      ++rejected_;
      ++reject_run_;
      break;
  }
  return res.outcome;
}

}  // namespace relloc::ekf
