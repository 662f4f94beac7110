#include "relloc/sim/control.hpp"

#include <cmath>
#include <numbers>

#include "relloc/random.hpp"

namespace relloc::sim {

StartupSample random_startup_input(std::uint64_t seed, double t, double v_max, double r_max, double period) {
  const double k = std::floor(t / period);
  const double phase = t - k * period;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(k))));
  // Full speed along a random heading: slower draws carry less range information.
  const double angle = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double r = uniform(rng, -r_max, r_max);
  const Vec2 v(v_max * std::cos(angle), v_max * std::sin(angle));
  return {phase < 0.5 * period ? v : Vec2(-v), r};
}

Vec2 saturate(const Vec2& v, double v_max) {
  const double n = v.norm();
  if (n <= v_max || n == 0.0) return v;
  return v * (v_max / n);
}

Vec2 formation_control(const Vec2& e, const Vec2& e_dot, const Vec2& e_int, const PidGains& g, double v_max) {
  return saturate(g.kp * e + g.kd * e_dot + g.ki * e_int, v_max);
}

Vec2 FormationPid::step(const Vec2& error, double dt) {
  if (primed_) {
    derivative_ = (1.0 - alpha_) * derivative_ + alpha_ * (error - prev_error_) / dt;
  }
  prev_error_ = error;
  primed_ = true;
  const Vec2 candidate = integral_ + error * dt;
  const Vec2 raw = gains_.kp * error + gains_.kd * derivative_ + gains_.ki * candidate;
  if (raw.norm() <= v_max_) integral_ = candidate;
  if (gains_.ki > 0.0) integral_ = saturate(integral_, v_max_ / gains_.ki);
  return formation_control(error, derivative_, integral_, gains_, v_max_);
}

void FormationPid::reset() {
  integral_.setZero();
  prev_error_.setZero();
  derivative_.setZero();
  primed_ = false;
}

}  // namespace relloc::sim
