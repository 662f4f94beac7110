#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relloc/kinematics.hpp"
#include "relloc/ranging.hpp"

namespace relloc::sim {

enum class Phase {
  RandomStartup,
  Formation,
  LeaderFollower,
  Hover,
  FormationLock,     ///< all robots share one world-frame velocity, zero yaw rate
  TargetStationary,  ///< robot 2 hovers while the others keep the start-up maneuver
};

std::string to_string(Phase p);
std::optional<Phase> phase_from_string(const std::string& s);

struct PhaseEntry {
  Phase phase{Phase::RandomStartup};
  double start{0.0};
};

struct PidGains {
  double kp = 0.8;
  double kd = 0.1;
  double ki = 0.05;
};

/// Targets for robots 2..N, each an offset from robot 1 expressed in robot 1's frame.
struct FormationSpec {
  std::vector<Vec2> offsets;
  PidGains gains;
};

struct GateSpec {
  double distance = 4.0;  ///< along the leader path from where it starts moving, m
  double width = 0.8;
};

struct LeaderSpec {
  Vec2 follower_offset{-1.0, 0.0};  ///< in the leader's frame
  double hold = 10.0;               ///< leader hovers this long before moving, s
  double speed = 0.3;               ///< m/s along the leader's heading
  double path_length = 6.0;         ///< m
  GateSpec gate;
  double settle = 5.0;  ///< excluded from the offset-hold error after motion starts, s
};

struct EstimatorSettings {
  Vec3 p0{10.0, 10.0, 0.1};
  double q_v = 0.25;
  double q_r = 0.4;
  double r_d = 0.1;
  bool gating = true;
  /// 0 updates on every ranging event; otherwise the newest range per pair is applied at this rate.
  double update_rate_hz = 0.0;
};

struct ConvergenceCriterion {
  double pos_tol = 0.3;   ///< m, on |(e_x, e_y)|
  double yaw_tol = 0.2;   ///< rad
  double hold = 5.0;      ///< s the criterion must hold without interruption
};

struct ScenarioConfig {
  int robots = 2;
  double dt = 0.01;
  double duration = 80.0;
  std::uint64_t seed = 1;
  double v_max = 1.0;
  int truth_substeps = 10;

  double startup_period = 2.0;
  double startup_yaw_rate_max = 0.5;

  double sigma_v = 0.25;
  double sigma_r = 0.01;
  double height = 1.0;
  double height_jitter = 0.01;
  double tilt_per_speed = 0.0;  ///< pitch/roll per m/s of commanded velocity, rad
  YawRateMode yaw_rate_mode = YawRateMode::Transform;

  ranging::ChannelModel channel = simulation_channel();
  double slot_time = ranging::kDefaultSlotTime;
  std::size_t median_window = 5;
  bool bias_correction = false;

  EstimatorSettings estimator;
  std::vector<PhaseEntry> phases{{Phase::RandomStartup, 0.0}};
  FormationSpec formation;
  LeaderSpec leader;

  /// Initial placement; when empty, robot 1 sits at the origin with zero yaw and the
  /// others are drawn uniformly in [-spread, spread]^2 and [-yaw_spread, yaw_spread].
  std::vector<Vec2> initial_positions;
  std::vector<double> initial_yaws;
  double initial_spread = 3.0;
  double initial_yaw_spread = 1.0;

  ConvergenceCriterion convergence;
  double mae_window = 20.0;
  double trace_rate_hz = 10.0;

  /// Gaussian range noise 0.1 m, no bias, no outliers: the simulation-study channel.
  static ranging::ChannelModel simulation_channel();

  /// Throws ConfigError (line 0) describing the first violated constraint.
  void validate() const;
  Phase phase_at(double t) const;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line) : std::runtime_error(msg), line_(line) {}
  /// 1-based line in the source file, 0 when not tied to one.
  int line() const { return line_; }

 private:
  int line_;
};

ScenarioConfig parse_config(const std::string& yaml_text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Olympic-ring-like offsets for robots 2..5 around robot 1 (top middle ring).
std::vector<Vec2> olympic_offsets();

}  // namespace relloc::sim
