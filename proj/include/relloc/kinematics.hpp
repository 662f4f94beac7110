#pragma once

#include <Eigen/Core>

namespace relloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Pitch (theta) and roll (phi) of a robot, radians. Both must stay inside
/// (-pi/2, pi/2); the yaw-rate transform divides by cos(phi).
struct Attitude {
  double theta{0.0};
  double phi{0.0};
};

/// Gyroscope roll and yaw rates in the body frame, rad/s.
struct BodyRates {
  double p_bar{0.0};
  double r_bar{0.0};
};

/// Velocity in a robot's horizontal frame (vertical Z, yaw-aligned XY), m/s.
struct HorizontalVelocity {
  double vx{0.0};
  double vy{0.0};

  Vec2 vec() const { return {vx, vy}; }
  static HorizontalVelocity from(const Vec2& v) { return {v.x(), v.y()}; }
};

/// Pose of robot j expressed in robot i's horizontal frame.
/// psi is kept in (-pi, pi] by every operation that produces one.
struct RelativeState {
  double x{0.0};
  double y{0.0};
  double psi{0.0};

  Vec2 position() const { return {x, y}; }
  Vec3 vec() const { return {x, y, psi}; }
  static RelativeState from(const Vec3& v);
};

/// Inputs of one (i, j) pair: horizontal velocities and yaw rates of both robots.
struct InputVector {
  HorizontalVelocity v_i;
  double r_i{0.0};
  HorizontalVelocity v_j;
  double r_j{0.0};

  using Vec6 = Eigen::Matrix<double, 6, 1>;
  Vec6 vec() const;
  static InputVector from(const Vec6& u);
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Applies the 2x3 X-Y rotation (rows of R_x(phi) * R_y(theta)) to a body velocity.
/// Throws std::invalid_argument for non-finite input or |theta|, |phi| >= pi/2.
HorizontalVelocity body_to_horizontal_velocity(const Vec3& v_body, const Attitude& att);

enum class YawRateMode {
  Transform,    ///< r = -sin(theta)/cos(phi) p_bar + cos(theta)/cos(phi) r_bar
  Passthrough,  ///< r = r_bar, valid for small attitudes
};

/// Horizontal-frame yaw rate from gyroscope rates.
///
/// The transform deliberately leaves out the body pitch-rate contribution
/// that a full Euler-rate conversion carries; with q_bar = 0 or small tilt
/// the two agree. Throws std::invalid_argument when cos(phi) vanishes.
double body_to_horizontal_yaw_rate(const BodyRates& rates, const Attitude& att,
                                   YawRateMode mode = YawRateMode::Transform);

/// Full 3x3 body-to-horizontal rotation, R_x(phi) * R_y(theta). Its top two rows
/// are the matrix used by body_to_horizontal_velocity.
Mat3 body_to_horizontal_rotation(const Attitude& att);

/// Planar rotation from j's horizontal frame into i's.
Mat2 rotation(double psi);

/// The constant skew matrix [[0, -1], [1, 0]].
Mat2 skew();

/// Continuous relative motion (x_dot, y_dot, psi_dot) of robot j seen from robot i.
Vec3 relative_dynamics(const RelativeState& x, const InputVector& u);

/// One forward-Euler step of relative_dynamics; psi re-wrapped. dt must be > 0.
RelativeState integrate_step(const RelativeState& x, const InputVector& u, double dt);

}  // namespace relloc
