#pragma once

#include <cstdint>

#include "relloc/kinematics.hpp"
#include "relloc/sim/config.hpp"

namespace relloc::sim {

/// Velocity and yaw-rate command in the robot's own horizontal frame.
struct Command {
  HorizontalVelocity v;
  double r{0.0};
};

struct StartupSample {
  Vec2 v;          ///< velocity in the frame the maneuver is flown in
  double r{0.0};   ///< yaw rate
};

/// Start-up excitation as a pure function of (seed, t): every period a velocity of
/// magnitude v_max with a uniform heading and a yaw rate from [-r_max, r_max] are drawn.
/// The velocity is flown for the first half of the period and its negation for the second,
/// so each period nets zero displacement.
StartupSample random_startup_input(std::uint64_t seed, double t, double v_max, double r_max, double period);

/// Caps the norm of v at v_max.
Vec2 saturate(const Vec2& v, double v_max);

/// k_p e + k_d e_dot + k_i e_int, saturated at v_max.
Vec2 formation_control(const Vec2& e, const Vec2& e_dot, const Vec2& e_int, const PidGains& gains, double v_max);

/// Stateful PID around formation_control. The integral is frozen while the command
/// saturates and clamped to |k_i * integral| <= v_max; the differentiated error is low-passed.
class FormationPid {
 public:
  FormationPid(PidGains gains, double v_max, double derivative_alpha = 0.2)
      : gains_(gains), v_max_(v_max), alpha_(derivative_alpha) {}

  Vec2 step(const Vec2& error, double dt);
  const Vec2& integral() const { return integral_; }
  void reset();

 private:
  PidGains gains_;
  double v_max_;
  double alpha_;
  Vec2 integral_{Vec2::Zero()};
  Vec2 prev_error_{Vec2::Zero()};
  Vec2 derivative_{Vec2::Zero()};
  bool primed_{false};
};

}  // namespace relloc::sim
