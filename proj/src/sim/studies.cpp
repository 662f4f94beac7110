#include "relloc/sim/studies.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "relloc/observability.hpp"

namespace relloc::sim {

void parallel_for(int count, const std::function<void(int)>& fn, unsigned threads) {
  if (count <= 0) return;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
  if (threads == 1) {
    for (int k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int k = next++; k < count; k = next++) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

ScenarioConfig startup_only(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.phases = {{Phase::RandomStartup, 0.0}};
  return c;
}

Vec2 true_offset(const World& w, int id) {
  return rotation(w.robot(1).yaw).transpose() * (w.robot(id).pos - w.robot(1).pos);
}

double min_separation(const World& w) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 1; a <= w.size(); ++a) {
    for (int b = a + 1; b <= w.size(); ++b) best = std::min(best, (w.robot(a).pos - w.robot(b).pos).norm());
  }
  return best;
}

}  // namespace

double ConvergenceStudyResult::mean_convergence_time() const {
  if (trials.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : trials) sum += t.convergence_time.value_or(duration);
  return sum / static_cast<double>(trials.size());
}

double ConvergenceStudyResult::fraction_converged_by(double t) const {
  if (trials.empty()) return 0.0;
  const auto n = std::count_if(trials.begin(), trials.end(),
                               [t](const TrialResult& r) { return r.convergence_time && *r.convergence_time <= t; });
  return static_cast<double>(n) / static_cast<double>(trials.size());
}

ConvergenceStudyResult convergence_study(const ScenarioConfig& cfg, int trials, unsigned threads) {
  if (trials < 1) throw std::invalid_argument("convergence_study: trials must be >= 1");
  const ScenarioConfig c = startup_only(cfg);
  ConvergenceStudyResult out;
  out.duration = c.duration;
  out.trials.resize(static_cast<std::size_t>(trials));
  parallel_for(
      trials,
      [&](int k) {
        const std::uint64_t seed = mix_seed(c.seed, static_cast<std::uint64_t>(k));
        Scenario s(c, seed);
        TrialResult r;
        r.trial = k;
        r.seed = seed;
        r.initial_truth = s.world().truth(1, 2);
        s.run_until(c.duration);
        const auto m = evaluate(s.errors(1, 2), c.convergence, c.mae_window);
        r.convergence_time = m.convergence_time;
        r.mae = m.mae;
        out.trials[k] = r;
      },
      threads);
  return out;
}

const char* to_string(FlightRegime r) {
  switch (r) {
    case FlightRegime::Normal: return "normal";
    case FlightRegime::FormationLock: return "formation_lock";
    case FlightRegime::TargetStationary: return "target_stationary";
  }
  return "?";
}

const RegimeOutcome& UnobservableStudyResult::of(FlightRegime r) const {
  switch (r) {
    case FlightRegime::Normal: return normal;
    case FlightRegime::FormationLock: return formation_lock;
    case FlightRegime::TargetStationary: return target_stationary;
  }
  return normal;
}

UnobservableStudyResult unobservable_study(const ScenarioConfig& cfg, int trials, double regime_duration,
                                           double max_startup, unsigned threads) {
  if (trials < 1) throw std::invalid_argument("unobservable_study: trials must be >= 1");
  const ScenarioConfig c = startup_only(cfg);

  struct Slot {
    bool converged{false};
    double switch_time{0.0};
    std::array<Mae, 3> mae;
    std::array<double, 3> max_det{};
    std::array<double, 3> max_err{};
  };
  std::vector<Slot> slots(static_cast<std::size_t>(trials));

  parallel_for(
      trials,
      [&](int k) {
        Scenario s(c, mix_seed(c.seed, static_cast<std::uint64_t>(k)));
        std::optional<double> run_start;
        while (s.time() < max_startup) {
          s.step();
          const auto& e = s.errors(1, 2).back();
          if (e.position() < c.convergence.pos_tol && std::abs(e.epsi) < c.convergence.yaw_tol) {
            if (!run_start) run_start = e.t;
            if (e.t - *run_start >= c.convergence.hold - 1e-9) break;
          } else {
            run_start.reset();
          }
        }
        if (!run_start || s.time() - *run_start < c.convergence.hold - 1e-9) return;

        Slot& slot = slots[k];
        slot.converged = true;
        slot.switch_time = s.time();
        const std::array regimes{FlightRegime::Normal, FlightRegime::FormationLock, FlightRegime::TargetStationary};
        for (std::size_t r = 0; r < regimes.size(); ++r) {
          Scenario branch = s;
          if (regimes[r] == FlightRegime::FormationLock) branch.switch_phase(Phase::FormationLock);
          if (regimes[r] == FlightRegime::TargetStationary) branch.switch_phase(Phase::TargetStationary);
          const double t_end = slot.switch_time + regime_duration;
          while (branch.time() < t_end - 1e-9) {
            branch.step();
            const auto& w = branch.world();
            const double det = obs::determinant_O(w.truth(1, 2), true_inputs(w.robot(1), w.robot(2))).matrix;
            slot.max_det[r] = std::max(slot.max_det[r], std::abs(det));
            slot.max_err[r] = std::max(slot.max_err[r], branch.errors(1, 2).back().position());
          }
          slot.mae[r] = mae_over(branch.errors(1, 2), slot.switch_time + 1e-9, t_end + 1e-9);
        }
      },
      threads);

  UnobservableStudyResult out;
  out.regime_duration = regime_duration;
  RegimeOutcome* outcomes[3] = {&out.normal, &out.formation_lock, &out.target_stationary};
  for (const auto& slot : slots) {
    if (!slot.converged) {
      ++out.unconverged;
      continue;
    }
    out.switch_times.push_back(slot.switch_time);
    for (int r = 0; r < 3; ++r) {
      outcomes[r]->mae.push_back(slot.mae[r]);
      outcomes[r]->max_abs_det = std::max(outcomes[r]->max_abs_det, slot.max_det[r]);
      outcomes[r]->max_position_error = std::max(outcomes[r]->max_position_error, slot.max_err[r]);
    }
  }
  return out;
}

double FormationResult::max_axis_error() const {
  double m = 0.0;
  for (const auto& f : followers) m = std::max({m, f.mean_abs_x, f.mean_abs_y});
  return m;
}

FormationResult run_formation(const ScenarioConfig& cfg, const TraceStreams& trace, double window) {
  Scenario s(cfg, cfg.seed);
  s.attach(trace);
  const int n = cfg.robots;
  FormationResult out;
  out.window = window;
  out.min_separation = std::numeric_limits<double>::infinity();
  for (int id = 2; id <= n; ++id) out.followers.push_back({id, 0.0, 0.0});
  std::size_t samples = 0;
  while (s.time() < cfg.duration - 1e-9) {
    s.step();
    const auto& w = s.world();
    out.min_separation = std::min(out.min_separation, min_separation(w));
    if (s.phase() != Phase::Formation || s.time() < cfg.duration - window - 1e-9) continue;
    ++samples;
    for (int id = 2; id <= n; ++id) {
      const Vec2 target = id - 2 < static_cast<int>(cfg.formation.offsets.size()) ? cfg.formation.offsets[id - 2]
                                                                                  : Vec2(-1.5 * (id - 1), 0.0);
      const Vec2 err = true_offset(w, id) - target;
      out.followers[id - 2].mean_abs_x += std::abs(err.x());
      out.followers[id - 2].mean_abs_y += std::abs(err.y());
    }
  }
  if (samples == 0) throw std::invalid_argument("run_formation: the Formation phase does not cover the final window");
  for (auto& f : out.followers) {
    f.mean_abs_x /= static_cast<double>(samples);
    f.mean_abs_y /= static_cast<double>(samples);
  }
  return out;
}

LeaderResult run_leader_follower(const ScenarioConfig& cfg, const TraceStreams& trace) {
  Scenario s(cfg, cfg.seed);
  s.attach(trace);
  const auto& l = cfg.leader;
  LeaderResult out;
  double err_sum = 0.0;
  std::size_t samples = 0;
  while (s.time() < cfg.duration - 1e-9) {
    s.step();
    if (s.phase() != Phase::LeaderFollower) continue;
    const double err = (true_offset(s.world(), 2) - l.follower_offset).norm();
    out.final_offset_error = err;
    const double moving_for = s.time() - s.phase_start() - l.hold;
    const double move_end = l.speed > 0.0 ? l.path_length / l.speed : 0.0;
    if (moving_for >= l.settle && moving_for <= move_end) {
      err_sum += err;
      ++samples;
    }
  }
  out.leader_moved = s.leader().moving_started && l.speed > 0.0;
  out.offset_hold_error = samples ? err_sum / static_cast<double>(samples) : out.final_offset_error;
  out.gate_lateral = s.leader().gate_lateral;
  out.gate_passed = out.gate_lateral && std::abs(*out.gate_lateral) <= 0.5 * l.gate.width;
  return out;
}

}  // namespace relloc::sim
