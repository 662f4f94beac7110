#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "relloc/sim/config.hpp"
#include "relloc/sim/metrics.hpp"
#include "relloc/sim/scenario.hpp"

namespace relloc::sim {

/// Runs fn(k) for k in [0, count) on up to `threads` workers (0: hardware concurrency).
/// Each call must only touch its own slot of any shared output.
void parallel_for(int count, const std::function<void(int)>& fn, unsigned threads = 0);

struct TrialResult {
  int trial{0};
  std::uint64_t seed{0};
  RelativeState initial_truth;  ///< X_12 at t = 0
  std::optional<double> convergence_time;
  Mae mae;
};

struct ConvergenceStudyResult {
  std::vector<TrialResult> trials;
  double duration{0.0};

  /// Mean convergence time with unconverged trials counted at the full duration.
  double mean_convergence_time() const;
  double fraction_converged_by(double t) const;
};

/// Seeded trials of the start-up maneuver from random initial relative states; the
/// estimate of robot 1 about robot 2 is scored.
ConvergenceStudyResult convergence_study(const ScenarioConfig& cfg, int trials, unsigned threads = 0);

enum class FlightRegime { Normal, FormationLock, TargetStationary };
const char* to_string(FlightRegime r);

struct RegimeOutcome {
  std::vector<Mae> mae;       ///< one per converged trial
  double max_abs_det{0.0};    ///< |det O| on true state and inputs, max over all steps
  double max_position_error{0.0};
};

struct UnobservableStudyResult {
  RegimeOutcome normal;
  RegimeOutcome formation_lock;
  RegimeOutcome target_stationary;
  std::vector<double> switch_times;  ///< when each converged trial left the start-up phase
  int unconverged{0};
  double regime_duration{0.0};

  const RegimeOutcome& of(FlightRegime r) const;
};

/// Converges each trial with the start-up maneuver, then branches the same world into
/// normal flight, formation lock and a hovering peer for `regime_duration` seconds.
UnobservableStudyResult unobservable_study(const ScenarioConfig& cfg, int trials, double regime_duration = 20.0,
                                           double max_startup = 120.0, unsigned threads = 0);

struct FollowerError {
  int robot{0};
  double mean_abs_x{0.0};  ///< true offset minus commanded, robot 1's frame, final window
  double mean_abs_y{0.0};
};

struct FormationResult {
  std::vector<FollowerError> followers;
  double window{0.0};
  double min_separation{0.0};
  double max_axis_error() const;
};

/// Runs the configured phases (start-up then Formation) and scores the final `window` seconds.
FormationResult run_formation(const ScenarioConfig& cfg, const TraceStreams& trace = {}, double window = 5.0);

struct LeaderResult {
  bool gate_passed{false};
  std::optional<double> gate_lateral;
  double offset_hold_error{0.0};  ///< mean |true offset - commanded| while the leader moves, after settling
  double final_offset_error{0.0};
  bool leader_moved{false};
};

/// Runs the configured phases (start-up then LeaderFollower) for robot 2 following robot 1.
LeaderResult run_leader_follower(const ScenarioConfig& cfg, const TraceStreams& trace = {});

}  // namespace relloc::sim
