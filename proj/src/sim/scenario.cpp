#include "relloc/sim/scenario.hpp"

#include <cmath>
#include <iomanip>

#include "relloc/observability.hpp"

namespace relloc::sim {

namespace {

constexpr std::uint64_t kStartupStream = 0xA000;
constexpr std::uint64_t kLockStream = 0xB000;

}  // namespace

std::vector<RobotTruth> initial_truth(const ScenarioConfig& cfg, Rng& rng) {
  std::vector<RobotTruth> robots(static_cast<std::size_t>(cfg.robots));
  for (int k = 0; k < cfg.robots; ++k) {
    auto& r = robots[k];
    r.height = cfg.height;
    if (!cfg.initial_positions.empty()) {
      r.pos = cfg.initial_positions[k];
    } else if (k > 0) {
      r.pos = {uniform(rng, -cfg.initial_spread, cfg.initial_spread),
               uniform(rng, -cfg.initial_spread, cfg.initial_spread)};
    }
    if (!cfg.initial_yaws.empty()) {
      r.yaw = wrap_angle(cfg.initial_yaws[k]);
    } else if (k > 0) {
      r.yaw = uniform(rng, -cfg.initial_yaw_spread, cfg.initial_yaw_spread);
    }
  }
  return robots;
}

Scenario::Scenario(const ScenarioConfig& cfg, std::uint64_t seed)
    : Scenario(cfg,
               [&] {
                 Rng rng(mix_seed(seed, 1));
                 return initial_truth(cfg, rng);
               }(),
               seed) {}

Scenario::Scenario(const ScenarioConfig& cfg, std::vector<RobotTruth> init, std::uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      world_(cfg, std::move(init), mix_seed(seed, 2)),
      phase_(cfg.phases.front().phase),
      pids_(static_cast<std::size_t>(cfg.robots), FormationPid(cfg.formation.gains, cfg.v_max)),
      commands_(static_cast<std::size_t>(cfg.robots)),
      errors_(static_cast<std::size_t>(cfg.robots * cfg.robots)) {
  trace_every_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(1.0 / (cfg.trace_rate_hz * cfg.dt))));
}

const std::vector<ErrorSample>& Scenario::errors(int i, int j) const {
  if (i < 1 || j < 1 || i > cfg_.robots || j > cfg_.robots || i == j) throw std::out_of_range("Scenario: bad pair");
  return errors_[static_cast<std::size_t>((i - 1) * cfg_.robots + (j - 1))];
}

void Scenario::attach(const TraceStreams& streams) {
  trace_ = streams;
  if (trace_.trajectory) *trace_.trajectory << kTrajectorySchema << "\nt,robot,x,y,yaw,height,vx,vy,r,phase\n";
  if (trace_.estimates) {
    *trace_.estimates << kEstimatesSchema << "\nt,i,j,est_x,est_y,est_psi,true_x,true_y,true_psi,det_O\n";
  }
  if (trace_.ranging) ranging::TraceWriter{*trace_.ranging};
}

void Scenario::switch_phase(Phase p) {
  phase_ = p;
  phase_start_ = time();
  for (auto& pid : pids_) pid.reset();
  leader_ = {};
}

void Scenario::update_phase() {
  while (next_config_phase_ < cfg_.phases.size() && cfg_.phases[next_config_phase_].start <= time() + 1e-9) {
    switch_phase(cfg_.phases[next_config_phase_].phase);
    ++next_config_phase_;
  }
}

Command Scenario::startup_command(int id, double t_rel) const {
  const auto s = random_startup_input(mix_seed(seed_, kStartupStream + id), t_rel, cfg_.v_max,
                                      cfg_.startup_yaw_rate_max, cfg_.startup_period);
  // The maneuver is flown in the robot's odometry frame, so it nets zero displacement.
  const Vec2 body = rotation(world_.odometry_yaw(id)).transpose() * s.v;
  return {HorizontalVelocity::from(body), s.r};
}

Command Scenario::follower_command(int id, const Vec2& offset, bool feedforward) {
  const RelativeState est = world_.estimate(id, 1);
  const Mat2 rot = rotation(est.psi);
  const Vec2 target = -(rot * offset);  // desired position of robot 1 in robot id's frame
  const Vec2 error = est.position() - target;
  Vec2 v = pids_[id - 1].step(error, cfg_.dt);
  if (feedforward) v += rot * world_.peer_payload(id, 1).v.vec();
  return {HorizontalVelocity::from(saturate(v, cfg_.v_max)), 0.0};
}

std::vector<Command> Scenario::compute_commands() {
  const int n = cfg_.robots;
  const double t_rel = time() - phase_start_;
  std::vector<Command> cmds(static_cast<std::size_t>(n));
  switch (phase_) {
    case Phase::RandomStartup:
      for (int id = 1; id <= n; ++id) cmds[id - 1] = startup_command(id, t_rel);
      break;
    case Phase::Hover:
      break;
    case Phase::TargetStationary:
      for (int id = 1; id <= n; ++id) {
        if (id != 2) cmds[id - 1] = startup_command(id, t_rel);
      }
      break;
    case Phase::FormationLock: {
      const Vec2 v_world = random_startup_input(mix_seed(seed_, kLockStream), t_rel, cfg_.v_max, 0.0,
                                                cfg_.startup_period).v;
      for (int id = 1; id <= n; ++id) {
        cmds[id - 1] = {HorizontalVelocity::from(rotation(world_.robot(id).yaw).transpose() * v_world), 0.0};
      }
      break;
    }
    case Phase::Formation:
      for (int id = 2; id <= n; ++id) {
        const Vec2 offset = id - 2 < static_cast<int>(cfg_.formation.offsets.size())
                                ? cfg_.formation.offsets[id - 2]
                                : Vec2(-1.5 * (id - 1), 0.0);
        cmds[id - 1] = follower_command(id, offset, false);
      }
      break;
    case Phase::LeaderFollower: {
      const auto& l = cfg_.leader;
      const double moving_for = t_rel - l.hold;
      if (moving_for >= 0.0 && moving_for * l.speed < l.path_length) {
        if (!leader_.moving_started) {
          leader_.moving_started = true;
          leader_.origin = world_.robot(1).pos;
          leader_.heading = world_.robot(1).yaw;
        }
        cmds[0] = {{l.speed, 0.0}, 0.0};
      }
      for (int id = 2; id <= n; ++id) {
        const Vec2 offset = id == 2 ? l.follower_offset
                            : id - 2 < static_cast<int>(cfg_.formation.offsets.size())
                                ? cfg_.formation.offsets[id - 2]
                                : l.follower_offset * (id - 1);
        cmds[id - 1] = follower_command(id, offset, true);
      }
      break;
    }
  }
  return cmds;
}

void Scenario::step() {
  update_phase();
  commands_ = compute_commands();
  world_.step(commands_);
  record();
}

void Scenario::run_until(double t_end) {
  while (time() < t_end - 1e-9) step();
}

void Scenario::record() {
  const int n = cfg_.robots;
  const double t = time();
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i == j) continue;
      errors_[static_cast<std::size_t>((i - 1) * n + (j - 1))].push_back(
          error_sample(t, world_.estimate(i, j), world_.truth(i, j)));
    }
  }

  if (phase_ == Phase::LeaderFollower && leader_.moving_started && n >= 2 && !leader_.gate_lateral) {
    const Vec2 q = rotation(leader_.heading).transpose() * (world_.robot(2).pos - leader_.origin);
    const double gate = cfg_.leader.gate.distance;
    if (leader_.prev_valid && leader_.prev_along < gate && q.x() >= gate) {
      leader_.gate_lateral = q.y();
      leader_.gate_time = t;
    }
    leader_.prev_along = q.x();
    leader_.prev_valid = true;
  }

  if (trace_.ranging) {
    ranging::TraceWriter w{*trace_.ranging, ranging::TraceWriter::NoHeader{}};
    for (const auto& e : world_.last_events()) w.write(e.exchange, e.d_filtered, e.d_corrected);
  }
  if (world_.steps() % trace_every_ != 0) return;
  if (trace_.trajectory) {
    auto& os = *trace_.trajectory;
    os << std::setprecision(8);
    for (int id = 1; id <= n; ++id) {
      const auto& r = world_.robot(id);
      os << t << ',' << id << ',' << r.pos.x() << ',' << r.pos.y() << ',' << r.yaw << ',' << r.height << ','
         << r.vel.vx << ',' << r.vel.vy << ',' << r.yaw_rate << ',' << to_string(phase_) << '\n';
    }
  }
  if (trace_.estimates) {
    auto& os = *trace_.estimates;
    os << std::setprecision(8);
    for (int i = 1; i <= n; ++i) {
      for (int j = 1; j <= n; ++j) {
        if (i == j) continue;
        const auto est = world_.estimate(i, j);
        const auto tr = world_.truth(i, j);
        const double det = obs::determinant_O(tr, true_inputs(world_.robot(i), world_.robot(j))).matrix;
        os << t << ',' << i << ',' << j << ',' << est.x << ',' << est.y << ',' << est.psi << ',' << tr.x << ','
           << tr.y << ',' << tr.psi << ',' << det << '\n';
      }
    }
  }
}

}  // namespace relloc::sim
