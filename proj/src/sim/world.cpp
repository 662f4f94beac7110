#include "relloc/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <type_traits>

namespace relloc::sim {

// Only relative quantities may cross into the estimator.
static_assert(!std::is_constructible_v<ekf::RangeObservation, RobotTruth>);
static_assert(!std::is_constructible_v<InputVector, RobotTruth>);

namespace {

std::size_t unordered_index(int a, int b, int n) {
  const int lo = std::min(a, b) - 1, hi = std::max(a, b) - 1;
  // Row-major upper triangle without the diagonal.
  return static_cast<std::size_t>(lo * n - lo * (lo + 1) / 2 + (hi - lo - 1));
}

double distance3d(const RobotTruth& a, const RobotTruth& b) {
  const Vec2 d = b.pos - a.pos;
  const double dh = b.height - a.height;
  return std::sqrt(d.squaredNorm() + dh * dh);
}

Attitude tilt_for(const HorizontalVelocity& v, double gain) {
  constexpr double kMaxTilt = 0.5;
  return {std::clamp(gain * v.vx, -kMaxTilt, kMaxTilt), std::clamp(-gain * v.vy, -kMaxTilt, kMaxTilt)};
}

}  // namespace

RelativeState relative_truth(const RobotTruth& a, const RobotTruth& b) {
  const Vec2 p = rotation(a.yaw).transpose() * (b.pos - a.pos);
  return {p.x(), p.y(), wrap_angle(b.yaw - a.yaw)};
}

InputVector true_inputs(const RobotTruth& a, const RobotTruth& b) {
  return {a.vel, a.yaw_rate, b.vel, b.yaw_rate};
}

World::World(const ScenarioConfig& cfg, std::vector<RobotTruth> robots, std::uint64_t seed)
    : cfg_(cfg),
      dt_(cfg.dt),
      robots_(std::move(robots)),
      rng_(seed),
      scheduler_(static_cast<int>(robots_.size()), cfg.slot_time) {
  cfg_.validate();
  const int n = size();
  if (n != cfg.robots) throw std::invalid_argument("World: robot count does not match config");
  for (const auto& r : robots_) start_yaw_.push_back(r.yaw);

  const auto& e = cfg.estimator;
  const ekf::EkfState init = ekf::initialize(e.p0.asDiagonal(), ekf::input_noise(e.q_v, e.q_r), e.r_d * e.r_d);
  for (int k = 0; k < n * n; ++k) filters_.emplace_back(init, e.gating);
  processors_.assign(static_cast<std::size_t>(n * (n - 1) / 2),
                     ranging::RangeProcessor(cfg.median_window, cfg.bias_correction, cfg.channel.bias_slope,
                                             cfg.channel.bias_offset));
  for (const auto& r : robots_) sensed_.push_back({{}, 0.0, r.height});
  peer_payload_.assign(static_cast<std::size_t>(n * n), ranging::Payload{{}, 0.0, cfg.height});
  latest_obs_.assign(static_cast<std::size_t>(n * n), std::nullopt);
}

std::size_t World::index(int i, int j) const {
  const int n = size();
  if (i < 1 || j < 1 || i > n || j > n || i == j) throw std::out_of_range("World: bad robot pair");
  return static_cast<std::size_t>((i - 1) * n + (j - 1));
}

ranging::Payload World::sense(const RobotTruth& r) {
  // What the onboard sensors report in the body frame, then mapped back to the
  // horizontal frame the way the robot itself does it.
  const Mat3 m = body_to_horizontal_rotation(r.attitude);
  const Vec3 v_body = m.transpose() * Vec3(r.vel.vx, r.vel.vy, 0.0);
  const Vec3 w_body = m.transpose() * Vec3(0.0, 0.0, r.yaw_rate);
  const HorizontalVelocity v = body_to_horizontal_velocity(v_body, r.attitude);
  const double yaw_rate = body_to_horizontal_yaw_rate({w_body.x(), w_body.z()}, r.attitude, cfg_.yaw_rate_mode);

  ranging::Payload p;
  p.v = {v.vx + gaussian(rng_, cfg_.sigma_v), v.vy + gaussian(rng_, cfg_.sigma_v)};
  p.r = yaw_rate + gaussian(rng_, cfg_.sigma_r);
  p.h = r.height + gaussian(rng_, cfg_.height_jitter);
  return p;
}

void World::step(const std::vector<Command>& commands) {
  const int n = size();
  if (static_cast<int>(commands.size()) != n) throw std::invalid_argument("World::step: one command per robot");
  const double t0 = time();

  for (int k = 0; k < n; ++k) {
    auto& r = robots_[k];
    const Vec2 v = saturate(commands[k].v.vec(), cfg_.v_max);
    r.vel = HorizontalVelocity::from(v);
    r.yaw_rate = commands[k].r;
    r.attitude = tilt_for(r.vel, cfg_.tilt_per_speed);
  }
  check_finite();
  for (int k = 0; k < n; ++k) sensed_[k] = sense(robots_[k]);

  std::vector<ranging::ExchangeResult> exchanges;
  const int sub = cfg_.truth_substeps;
  const double h = dt_ / sub;
  for (int s = 0; s < sub; ++s) {
    for (auto& r : robots_) {
      r.pos += rotation(r.yaw) * r.vel.vec() * h;
      r.yaw = wrap_angle(r.yaw + r.yaw_rate * h);
    }
    const double tau = t0 + (s + 1) * h;
    while (scheduler_.peek().t_end <= tau + 1e-12) {
      const ranging::Slot slot = scheduler_.advance();
      const auto& a = robots_[slot.pair.a - 1];
      const auto& b = robots_[slot.pair.b - 1];
      exchanges.push_back(ranging::simulate_exchange(slot, cfg_.channel, distance3d(a, b), sensed_[slot.pair.a - 1],
                                                     sensed_[slot.pair.b - 1], rng_));
    }
  }
  ++steps_;
  const double t1 = time();

  last_events_.clear();
  std::vector<std::vector<ekf::RangeObservation>> pending(static_cast<std::size_t>(n * n));
  for (const auto& ex : exchanges) {
    ProcessedEvent pe{ex};
    if (!ex.dropped) {
      const auto& e = ex.event;
      const int a = e.pair.a, b = e.pair.b;
      const auto out = processors_[unordered_index(a, b, n)].process(e.d_raw);
      pe.d_filtered = out.filtered;
      pe.d_corrected = out.corrected;
      peer_payload_[index(a, b)] = e.payload_b;
      peer_payload_[index(b, a)] = e.payload_a;
      pending[index(a, b)].push_back({out.corrected, sensed_[a - 1].h, e.payload_b.h, e.t});
      pending[index(b, a)].push_back({out.corrected, sensed_[b - 1].h, e.payload_a.h, e.t});
    }
    last_events_.push_back(pe);
  }

  const double rate = cfg_.estimator.update_rate_hz;
  bool tick = false;
  if (rate > 0.0) {
    const auto due = static_cast<std::uint64_t>(std::floor(t1 * rate + 1e-9));
    tick = due > update_ticks_;
    update_ticks_ = due;
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i == j) continue;
      const std::size_t ij = index(i, j);
      const auto& own = sensed_[i - 1];
      const auto& peer = peer_payload_[ij];
      auto& f = filters_[ij];
      f.predict({own.v, own.r, peer.v, peer.r}, dt_);
      if (rate > 0.0) {
        if (!pending[ij].empty()) latest_obs_[ij] = pending[ij].back();
        if (tick && latest_obs_[ij]) {
          f.update(*latest_obs_[ij]);
          latest_obs_[ij].reset();
        }
      } else {
        for (const auto& obs : pending[ij]) f.update(obs);
      }
    }
  }
  check_finite();
}

void World::check_finite() const {
  bool ok = true;
  for (const auto& r : robots_) {
    ok = ok && r.pos.allFinite() && std::isfinite(r.yaw) && std::isfinite(r.height) && std::isfinite(r.vel.vx) &&
         std::isfinite(r.vel.vy) && std::isfinite(r.yaw_rate);
  }
  for (const auto& f : filters_) {
    const auto& s = f.state();
    ok = ok && std::isfinite(s.x_hat.x) && std::isfinite(s.x_hat.y) && std::isfinite(s.x_hat.psi) && s.P.allFinite();
  }
  if (ok) return;
  std::ostringstream dump;
  dump << "non-finite world state at t=" << time() << '\n';
  for (int k = 0; k < size(); ++k) {
    const auto& r = robots_[k];
    dump << "  robot " << k + 1 << ": pos=(" << r.pos.x() << ", " << r.pos.y() << ") yaw=" << r.yaw
         << " h=" << r.height << " v=(" << r.vel.vx << ", " << r.vel.vy << ") r=" << r.yaw_rate << '\n';
  }
  for (int i = 1; i <= size(); ++i) {
    for (int j = 1; j <= size(); ++j) {
      if (i == j) continue;
      const auto& x = filter(i, j).estimate();
      dump << "  filter " << i << "->" << j << ": (" << x.x << ", " << x.y << ", " << x.psi << ")\n";
    }
  }
  throw SimulationFault(dump.str());
}

}  // namespace relloc::sim
