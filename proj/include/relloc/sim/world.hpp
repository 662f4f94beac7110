#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relloc/estimator.hpp"
#include "relloc/random.hpp"
#include "relloc/ranging.hpp"
#include "relloc/sim/config.hpp"
#include "relloc/sim/control.hpp"

namespace relloc::sim {

/// Ground truth of one simulated robot. Global pose is for range synthesis and
/// metrics only; it never reaches an estimator.
struct RobotTruth {
  Vec2 pos{Vec2::Zero()};
  double yaw{0.0};
  double height{1.0};
  HorizontalVelocity vel;  ///< horizontal-frame velocity
  double yaw_rate{0.0};
  Attitude attitude;
};

/// Pose of robot b in robot a's horizontal frame.
RelativeState relative_truth(const RobotTruth& a, const RobotTruth& b);

/// Inputs of pair (a, b) computed from truth (noise free).
InputVector true_inputs(const RobotTruth& a, const RobotTruth& b);

/// Raised when the world state turns non-finite; carries a state dump.
class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Range event after the per-pair median filter and bias correction.
struct ProcessedEvent {
  ranging::ExchangeResult exchange;
  double d_filtered{0.0};
  double d_corrected{0.0};
};

/// Deterministic multi-robot world: truth propagation, sensing, the ranging loop, and
/// one pair filter per ordered (i, j).
class World {
 public:
  World(const ScenarioConfig& cfg, std::vector<RobotTruth> robots, std::uint64_t seed);

  /// Applies the commands for one dt and runs sensing, ranging and estimation.
  void step(const std::vector<Command>& commands);

  double time() const { return static_cast<double>(steps_) * dt_; }
  std::uint64_t steps() const { return steps_; }
  int size() const { return static_cast<int>(robots_.size()); }

  // Robot ids are 1-based throughout.
  const RobotTruth& robot(int id) const { return robots_.at(id - 1); }
  RelativeState truth(int i, int j) const { return relative_truth(robot(i), robot(j)); }
  const ekf::PairFilter& filter(int i, int j) const { return filters_.at(index(i, j)); }
  RelativeState estimate(int i, int j) const { return filter(i, j).estimate(); }
  /// Robot i's latest own sensed velocity, yaw rate and height.
  const ranging::Payload& sensed(int i) const { return sensed_.at(i - 1); }
  /// Latest payload of robot j that robot i received over the radio.
  const ranging::Payload& peer_payload(int i, int j) const { return peer_payload_.at(index(i, j)); }
  /// Yaw accumulated by robot i since the start, as its own gyro integration would give.
  double odometry_yaw(int i) const { return robot(i).yaw - start_yaw_.at(i - 1); }

  /// Events delivered in the most recent step, in time order.
  const std::vector<ProcessedEvent>& last_events() const { return last_events_; }
  const ranging::Scheduler& scheduler() const { return scheduler_; }

 private:
  std::size_t index(int i, int j) const;
  ranging::Payload sense(const RobotTruth& r);
  void check_finite() const;

  ScenarioConfig cfg_;
  double dt_;
  std::vector<RobotTruth> robots_;
  std::vector<double> start_yaw_;
  Rng rng_;
  ranging::Scheduler scheduler_;
  std::vector<ranging::RangeProcessor> processors_;  // per unordered pair
  std::vector<ekf::PairFilter> filters_;             // per ordered pair
  std::vector<ranging::Payload> sensed_;
  std::vector<ranging::Payload> peer_payload_;
  std::vector<std::optional<ekf::RangeObservation>> latest_obs_;  // fixed-rate mode
  std::vector<ProcessedEvent> last_events_;
  std::uint64_t steps_{0};
  std::uint64_t update_ticks_{0};
};

}  // namespace relloc::sim
