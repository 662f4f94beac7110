#include "relloc/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relloc {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void check_attitude(const Attitude& att) {
  if (!std::isfinite(att.theta) || !std::isfinite(att.phi)) {
    throw std::invalid_argument("attitude must be finite");
  }
  if (std::abs(att.theta) >= kHalfPi || std::abs(att.phi) >= kHalfPi) {
    throw std::invalid_argument("attitude out of range: |theta| and |phi| must be < pi/2");
  }
}

}  // namespace

RelativeState RelativeState::from(const Vec3& v) { return {v.x(), v.y(), wrap_angle(v.z())}; }

InputVector::Vec6 InputVector::vec() const {
  Vec6 u;
  u << v_i.vx, v_i.vy, r_i, v_j.vx, v_j.vy, r_j;
  return u;
}

InputVector InputVector::from(const Vec6& u) {
  return {{u(0), u(1)}, u(2), {u(3), u(4)}, u(5)};
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(a, two_pi);  // [-pi, pi]
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

Mat3 body_to_horizontal_rotation(const Attitude& att) {
  const double ct = std::cos(att.theta), st = std::sin(att.theta);
  const double cp = std::cos(att.phi), sp = std::sin(att.phi);
  Mat3 m;
  m << ct, 0.0, st,        //
      sp * st, cp, -ct * sp,  //
      -cp * st, sp, cp * ct;
  return m;
}

HorizontalVelocity body_to_horizontal_velocity(const Vec3& v_body, const Attitude& att) {
  if (!v_body.allFinite()) throw std::invalid_argument("body velocity must be finite");
  check_attitude(att);
  const Vec3 v = body_to_horizontal_rotation(att) * v_body;
  return {v.x(), v.y()};
}

double body_to_horizontal_yaw_rate(const BodyRates& rates, const Attitude& att, YawRateMode mode) {
  if (!std::isfinite(rates.p_bar) || !std::isfinite(rates.r_bar)) {
    throw std::invalid_argument("body rates must be finite");
  }
  if (mode == YawRateMode::Passthrough) return rates.r_bar;
  check_attitude(att);
  const double cphi = std::cos(att.phi);
  return -std::sin(att.theta) / cphi * rates.p_bar + std::cos(att.theta) / cphi * rates.r_bar;
}

Mat2 rotation(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Mat2 skew() {
  Mat2 s;
  s << 0.0, -1.0, 1.0, 0.0;
  return s;
}

Vec3 relative_dynamics(const RelativeState& x, const InputVector& u) {
  const Vec2 p = x.position();
  const Vec2 pd = rotation(x.psi) * u.v_j.vec() - u.v_i.vec() - u.r_i * (skew() * p);
  return {pd.x(), pd.y(), u.r_j - u.r_i};
}

RelativeState integrate_step(const RelativeState& x, const InputVector& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_step: dt must be > 0");
  return RelativeState::from(x.vec() + relative_dynamics(x, u) * dt);
}

}  // namespace relloc
