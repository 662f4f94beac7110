#include "relloc/sim/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace relloc::sim {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <typename T>
T as(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has the wrong type", line_of(n));
  }
}

Vec2 as_vec2(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence() || n.size() != 2) throw ConfigError("'" + key + "' must be a 2-element list", line_of(n));
  return {as<double>(n[0], key), as<double>(n[1], key)};
}

/// Walks a mapping, dispatching each key to a handler and rejecting unknown keys.
void visit(const YAML::Node& map, const std::string& where,
           const std::map<std::string, std::function<void(const YAML::Node&)>>& handlers) {
  if (!map.IsMap()) throw ConfigError("'" + where + "' must be a mapping", line_of(map));
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    auto it = handlers.find(key);
    if (it == handlers.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where, line_of(kv.first));
    }
    it->second(kv.second);
  }
}

template <typename T>
std::function<void(const YAML::Node&)> into(T& dst, const std::string& key) {
  return [&dst, key](const YAML::Node& n) { dst = as<T>(n, key); };
}

void parse_gains(const YAML::Node& n, PidGains& g) {
  visit(n, "gains", {{"kp", into(g.kp, "kp")}, {"kd", into(g.kd, "kd")}, {"ki", into(g.ki, "ki")}});
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::RandomStartup: return "RandomStartup";
    case Phase::Formation: return "Formation";
    case Phase::LeaderFollower: return "LeaderFollower";
    case Phase::Hover: return "Hover";
    case Phase::FormationLock: return "FormationLock";
    case Phase::TargetStationary: return "TargetStationary";
  }
  return "?";
}

std::optional<Phase> phase_from_string(const std::string& s) {
  for (Phase p : {Phase::RandomStartup, Phase::Formation, Phase::LeaderFollower, Phase::Hover,
                  Phase::FormationLock, Phase::TargetStationary}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

ranging::ChannelModel ScenarioConfig::simulation_channel() {
  ranging::ChannelModel c;
  c.sigma_d = 0.1;
  c.bias_enabled = false;
  c.outlier_prob = 0.0;
  c.drop_prob = 0.0;
  return c;
}

Phase ScenarioConfig::phase_at(double t) const {
  Phase current = phases.front().phase;
  for (const auto& e : phases) {
    if (e.start <= t + 1e-12) current = e.phase;
  }
  return current;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m, 0); };
  if (robots < 2) fail("robots must be >= 2");
  if (!(dt > 0.0)) fail("dt must be > 0");
  if (!(duration > 0.0)) fail("duration must be > 0");
  if (!(v_max > 0.0)) fail("v_max must be > 0");
  if (truth_substeps < 1) fail("truth_substeps must be >= 1");
  if (!(startup_period > 0.0)) fail("startup.period must be > 0");
  if (sigma_v < 0.0 || sigma_r < 0.0 || height_jitter < 0.0) fail("noise deviations must be >= 0");
  if (!(height > 0.0)) fail("height must be > 0");
  if (!(slot_time > 0.0)) fail("ranging.slot_time must be > 0");
  if (median_window < 1) fail("ranging.median_window must be >= 1");
  if (phases.empty()) fail("phases must not be empty");
  for (std::size_t k = 1; k < phases.size(); ++k) {
    if (!(phases[k].start > phases[k - 1].start)) fail("phases must be strictly time-ordered");
  }
  if (phases.front().start != 0.0) fail("first phase must start at 0");
  const auto& e = estimator;
  if (!(e.q_v > 0.0) || !(e.q_r > 0.0) || !(e.r_d > 0.0)) fail("estimator noise parameters must be > 0");
  if ((e.p0.array() < 0.0).any()) fail("estimator.P0 must be non-negative");
  if (e.update_rate_hz < 0.0) fail("estimator.update_rate_hz must be >= 0");
  try {
    channel.validate();
  } catch (const std::invalid_argument& ex) {
    fail(ex.what());
  }
  const auto& g = formation.gains;
  if (g.kp < 0.0 || g.kd < 0.0 || g.ki < 0.0) fail("PID gains must be >= 0");
  for (const auto& o : formation.offsets) {
    if (!o.allFinite()) fail("formation offsets must be finite");
  }
  if (!initial_positions.empty() && static_cast<int>(initial_positions.size()) != robots) {
    fail("initial.positions must list every robot");
  }
  if (!initial_yaws.empty() && static_cast<int>(initial_yaws.size()) != robots) {
    fail("initial.yaws must list every robot");
  }
  if (!(trace_rate_hz > 0.0)) fail("trace_rate_hz must be > 0");
}

ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError(ex.msg, ex.mark.line + 1);
  }
  ScenarioConfig c;
  if (root.IsNull()) return c;

  int robots_line = 0;
  int phases_line = 0;
  std::optional<bool> bias_correction;
  visit(root, "config", {
      {"robots", [&](const YAML::Node& n) { c.robots = as<int>(n, "robots"); robots_line = line_of(n); }},
      {"dt", into(c.dt, "dt")},
      {"duration", into(c.duration, "duration")},
      {"seed", into(c.seed, "seed")},
      {"v_max", into(c.v_max, "v_max")},
      {"truth_substeps", into(c.truth_substeps, "truth_substeps")},
      {"trace_rate_hz", into(c.trace_rate_hz, "trace_rate_hz")},
      {"mae_window", into(c.mae_window, "mae_window")},
      {"tilt_per_speed", into(c.tilt_per_speed, "tilt_per_speed")},
      {"yaw_rate_mode", [&](const YAML::Node& n) {
         const auto s = as<std::string>(n, "yaw_rate_mode");
         if (s == "transform") c.yaw_rate_mode = YawRateMode::Transform;
         else if (s == "passthrough") c.yaw_rate_mode = YawRateMode::Passthrough;
         else throw ConfigError("yaw_rate_mode must be 'transform' or 'passthrough'", line_of(n));
       }},
      {"startup", [&](const YAML::Node& n) {
         visit(n, "startup", {{"period", into(c.startup_period, "period")},
                              {"yaw_rate_max", into(c.startup_yaw_rate_max, "yaw_rate_max")}});
       }},
      {"input_noise", [&](const YAML::Node& n) {
         visit(n, "input_noise", {{"sigma_v", into(c.sigma_v, "sigma_v")}, {"sigma_r", into(c.sigma_r, "sigma_r")}});
       }},
      {"height", [&](const YAML::Node& n) {
         visit(n, "height", {{"nominal", into(c.height, "nominal")}, {"jitter", into(c.height_jitter, "jitter")}});
       }},
      {"channel", [&](const YAML::Node& n) {
         auto& ch = c.channel;
         visit(n, "channel", {{"sigma_d", into(ch.sigma_d, "sigma_d")},
                              {"bias", into(ch.bias_enabled, "bias")},
                              {"bias_slope", into(ch.bias_slope, "bias_slope")},
                              {"bias_offset", into(ch.bias_offset, "bias_offset")},
                              {"outlier_prob", into(ch.outlier_prob, "outlier_prob")},
                              {"outlier_min", into(ch.outlier_min, "outlier_min")},
                              {"outlier_max", into(ch.outlier_max, "outlier_max")},
                              {"drop_prob", into(ch.drop_prob, "drop_prob")}});
       }},
      {"ranging", [&](const YAML::Node& n) {
         visit(n, "ranging", {{"slot_time", into(c.slot_time, "slot_time")},
                              {"median_window", into(c.median_window, "median_window")},
                              {"bias_correction", [&](const YAML::Node& v) {
                                 bias_correction = as<bool>(v, "bias_correction");
                               }}});
       }},
      {"estimator", [&](const YAML::Node& n) {
         auto& e = c.estimator;
         visit(n, "estimator", {
             {"P0", [&](const YAML::Node& v) {
                if (!v.IsSequence() || v.size() != 3) throw ConfigError("'P0' must be a 3-element list", line_of(v));
                e.p0 = {as<double>(v[0], "P0"), as<double>(v[1], "P0"), as<double>(v[2], "P0")};
              }},
             {"q_v", into(e.q_v, "q_v")},
             {"q_r", into(e.q_r, "q_r")},
             {"r_d", into(e.r_d, "r_d")},
             {"gating", into(e.gating, "gating")},
             {"update_rate_hz", into(e.update_rate_hz, "update_rate_hz")}});
       }},
      {"phases", [&](const YAML::Node& n) {
         phases_line = line_of(n);
         if (!n.IsSequence() || n.size() == 0) throw ConfigError("'phases' must be a non-empty list", line_of(n));
         c.phases.clear();
         for (const auto& item : n) {
           PhaseEntry e;
           bool named = false;
           visit(item, "phase", {
               {"name", [&](const YAML::Node& v) {
                  auto p = phase_from_string(as<std::string>(v, "name"));
                  if (!p) throw ConfigError("unknown phase '" + v.as<std::string>() + "'", line_of(v));
                  e.phase = *p;
                  named = true;
                }},
               {"start", into(e.start, "start")}});
           if (!named) throw ConfigError("phase entry needs a 'name'", line_of(item));
           if (!c.phases.empty() && !(e.start > c.phases.back().start)) {
             throw ConfigError("phases must be strictly time-ordered", line_of(item));
           }
           c.phases.push_back(e);
         }
       }},
      {"formation", [&](const YAML::Node& n) {
         visit(n, "formation", {
             {"offsets", [&](const YAML::Node& v) {
                if (v.IsScalar() && v.as<std::string>() == "olympic") {
                  c.formation.offsets = olympic_offsets();
                  return;
                }
                if (!v.IsSequence()) throw ConfigError("'offsets' must be a list or 'olympic'", line_of(v));
                c.formation.offsets.clear();
                for (const auto& o : v) c.formation.offsets.push_back(as_vec2(o, "offsets"));
              }},
             {"gains", [&](const YAML::Node& v) { parse_gains(v, c.formation.gains); }}});
       }},
      {"leader", [&](const YAML::Node& n) {
         auto& l = c.leader;
         visit(n, "leader", {
             {"follower_offset", [&](const YAML::Node& v) { l.follower_offset = as_vec2(v, "follower_offset"); }},
             {"hold", into(l.hold, "hold")},
             {"speed", into(l.speed, "speed")},
             {"path_length", into(l.path_length, "path_length")},
             {"settle", into(l.settle, "settle")},
             {"gate", [&](const YAML::Node& v) {
                visit(v, "gate", {{"distance", into(l.gate.distance, "distance")}, {"width", into(l.gate.width, "width")}});
              }}});
       }},
      {"initial", [&](const YAML::Node& n) {
         visit(n, "initial", {
             {"positions", [&](const YAML::Node& v) {
                if (!v.IsSequence()) throw ConfigError("'positions' must be a list", line_of(v));
                for (const auto& p : v) c.initial_positions.push_back(as_vec2(p, "positions"));
              }},
             {"yaws", into(c.initial_yaws, "yaws")},
             {"spread", into(c.initial_spread, "spread")},
             {"yaw_spread", into(c.initial_yaw_spread, "yaw_spread")}});
       }},
      {"convergence", [&](const YAML::Node& n) {
         auto& cc = c.convergence;
         visit(n, "convergence", {{"pos_tol", into(cc.pos_tol, "pos_tol")},
                                  {"yaw_tol", into(cc.yaw_tol, "yaw_tol")},
                                  {"hold", into(cc.hold, "hold")}});
       }},
  });

  // Correct for bias exactly when the channel applies one, unless told otherwise.
  c.bias_correction = bias_correction.value_or(c.channel.bias_enabled);

  try {
    c.validate();
  } catch (const ConfigError& ex) {
    // Anchor the two structural checks most often hit to their lines.
    const std::string msg = ex.what();
    int line = 0;
    if (msg.rfind("robots", 0) == 0 || msg.find("every robot") != std::string::npos) line = robots_line;
    if (msg.rfind("phases", 0) == 0 || msg.rfind("first phase", 0) == 0) line = phases_line;
    throw ConfigError(msg, line);
  }
  if (!c.formation.offsets.empty() && static_cast<int>(c.formation.offsets.size()) != c.robots - 1) {
    throw ConfigError("formation.offsets needs one entry per robot 2..N", robots_line);
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<Vec2> olympic_offsets() {
  // Five rings: three on top (robot 1 in the middle), two below.
  return {{-2.0, 0.0}, {2.0, 0.0}, {-1.0, -1.2}, {1.0, -1.2}};
}

}  // namespace relloc::sim
