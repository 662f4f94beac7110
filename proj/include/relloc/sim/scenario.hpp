#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "relloc/sim/config.hpp"
#include "relloc/sim/control.hpp"
#include "relloc/sim/metrics.hpp"
#include "relloc/sim/world.hpp"

namespace relloc::sim {

/// Optional CSV sinks; null streams are skipped.
struct TraceStreams {
  std::ostream* trajectory = nullptr;
  std::ostream* estimates = nullptr;
  std::ostream* ranging = nullptr;
};

inline constexpr const char* kTrajectorySchema = "# relloc trajectory v1";
inline constexpr const char* kEstimatesSchema = "# relloc estimates v1";

/// Initial truth: configured placement, or robot 1 at the origin and the rest uniform
/// in the configured spread.
std::vector<RobotTruth> initial_truth(const ScenarioConfig& cfg, Rng& rng);

/// Leader path bookkeeping for the LeaderFollower phase.
struct LeaderTrack {
  bool moving_started{false};
  Vec2 origin{Vec2::Zero()};  ///< leader position when it starts moving
  double heading{0.0};
  double prev_along{0.0};
  bool prev_valid{false};
  std::optional<double> gate_lateral;  ///< follower's lateral offset where it crossed the gate line
  std::optional<double> gate_time;
};

/// Phase-driven command generation on top of a World, with per-step error recording.
/// Copyable, so a pre-converged run can be branched into several continuations.
class Scenario {
 public:
  Scenario(const ScenarioConfig& cfg, std::uint64_t seed);
  Scenario(const ScenarioConfig& cfg, std::vector<RobotTruth> init, std::uint64_t seed);

  void step();
  void run_until(double t_end);

  /// Enters `p` at the current time.
  void switch_phase(Phase p);
  Phase phase() const { return phase_; }
  double phase_start() const { return phase_start_; }

  const World& world() const { return world_; }
  const ScenarioConfig& config() const { return cfg_; }
  double time() const { return world_.time(); }

  /// Error samples of pair (i, j), one per step.
  const std::vector<ErrorSample>& errors(int i, int j) const;
  const LeaderTrack& leader() const { return leader_; }
  const std::vector<Command>& last_commands() const { return commands_; }

  void attach(const TraceStreams& streams);

 private:
  std::vector<Command> compute_commands();
  Command startup_command(int id, double t_rel) const;
  Command follower_command(int id, const Vec2& offset, bool feedforward);
  void update_phase();
  void record();

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  World world_;
  Phase phase_;
  double phase_start_{0.0};
  std::size_t next_config_phase_{1};
  std::vector<FormationPid> pids_;
  std::vector<Command> commands_;
  std::vector<std::vector<ErrorSample>> errors_;
  LeaderTrack leader_;
  TraceStreams trace_;
  std::uint64_t trace_every_{1};
};

}  // namespace relloc::sim
