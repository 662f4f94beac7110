#include <algorithm>
#include <array>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "internal.hpp"
#include "relloc/random.hpp"
#include "relloc/sim/config.hpp"

namespace relloc::cli {

using sim::ConfigError;

namespace {

constexpr std::array<const char*, 9> kAxes{"x", "y", "psi", "vi_x", "vi_y", "r_i", "vj_x", "vj_y", "r_j"};

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <typename T>
T as(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has the wrong type", line_of(n));
  }
}

GridSpec::Axis parse_axis(const YAML::Node& n, const std::string& name) {
  GridSpec::Axis a;
  if (n.IsScalar()) {
    a.min = a.max = as<double>(n, name);
    return a;
  }
  if (!n.IsSequence() || n.size() < 2 || n.size() > 3) {
    throw ConfigError("axis '" + name + "' must be a number or [min, max] / [min, max, steps]", line_of(n));
  }
  a.min = as<double>(n[0], name);
  a.max = as<double>(n[1], name);
  if (n.size() == 3) {
    const long steps = as<long>(n[2], name);
    if (steps < 1) throw ConfigError("axis '" + name + "' needs at least one step", line_of(n[2]));
    a.steps = static_cast<std::size_t>(steps);
  } else {
    a.steps = 2;
  }
  if (!(a.max >= a.min)) throw ConfigError("axis '" + name + "' has max < min", line_of(n));
  return a;
}

double axis_value(const GridSpec::Axis& a, std::size_t k) {
  if (a.steps <= 1) return a.min;
  return a.min + (a.max - a.min) * static_cast<double>(k) / static_cast<double>(a.steps - 1);
}

GridPoint make_point(const std::array<double, 9>& v, GridConstraint c) {
  GridPoint p;
  p.x = {v[0], v[1], wrap_angle(v[2])};
  p.u = {{v[3], v[4]}, v[5], {v[6], v[7]}, v[8]};
  switch (c) {
    case GridConstraint::None:
      break;
    case GridConstraint::FormationLock: {
      // R(psi) v_j = v_i with both yaw rates zero.
      const Vec2 vj = rotation(p.x.psi).transpose() * p.u.v_i.vec();
      p.u.v_j = HorizontalVelocity::from(vj);
      p.u.r_i = 0.0;
      p.u.r_j = 0.0;
      break;
    }
    case GridConstraint::TargetStationary:
      p.u.v_j = {0.0, 0.0};
      break;
  }
  return p;
}

}  // namespace

GridSpec parse_grid(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError(ex.msg, ex.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("grid spec must be a mapping", line_of(root));

  GridSpec g;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const YAML::Node& n = kv.second;
    if (key == "mode") {
      const auto m = as<std::string>(n, key);
      if (m == "grid") g.mode = GridSpec::Mode::Grid;
      else if (m == "random") g.mode = GridSpec::Mode::Random;
      else throw ConfigError("mode must be 'grid' or 'random'", line_of(n));
    } else if (key == "constraint") {
      const auto c = as<std::string>(n, key);
      if (c == "none") g.constraint = GridConstraint::None;
      else if (c == "formation_lock") g.constraint = GridConstraint::FormationLock;
      else if (c == "target_stationary") g.constraint = GridConstraint::TargetStationary;
      else throw ConfigError("constraint must be none, formation_lock or target_stationary", line_of(n));
    } else if (key == "samples") {
      const long s = as<long>(n, key);
      if (s < 1) throw ConfigError("samples must be >= 1", line_of(n));
      g.samples = static_cast<std::size_t>(s);
    } else if (key == "seed") {
      g.seed = as<std::uint64_t>(n, key);
    } else if (key == "thresholds") {
      if (!n.IsMap()) throw ConfigError("'thresholds' must be a mapping", line_of(n));
      auto& t = g.thresholds;
      const std::map<std::string, double*> fields{{"det", &t.det},
                                                  {"baseline", &t.baseline},
                                                  {"target_speed", &t.target_speed},
                                                  {"relative_speed", &t.relative_speed},
                                                  {"yaw_rate", &t.yaw_rate},
                                                  {"rank_rel_tol", &t.rank_rel_tol}};
      for (const auto& f : n) {
        const auto name = f.first.as<std::string>();
        auto it = fields.find(name);
        if (it == fields.end()) throw ConfigError("unknown key '" + name + "' in thresholds", line_of(f.first));
        *it->second = as<double>(f.second, name);
      }
    } else if (key == "axes") {
      if (!n.IsMap()) throw ConfigError("'axes' must be a mapping", line_of(n));
      for (const auto& a : n) {
        const auto name = a.first.as<std::string>();
        if (std::find(kAxes.begin(), kAxes.end(), name) == kAxes.end()) {
          throw ConfigError("unknown axis '" + name + "'", line_of(a.first));
        }
        g.axes[name] = parse_axis(a.second, name);
      }
    } else {
      throw ConfigError("unknown key '" + key + "' in grid spec", line_of(kv.first));
    }
  }

  if (g.mode == GridSpec::Mode::Grid) {
    double total = 1.0;
    for (const auto& [name, a] : g.axes) total *= static_cast<double>(a.steps);
    if (total > static_cast<double>(kMaxGridPoints)) {
      throw ConfigError("grid expands to more than " + std::to_string(kMaxGridPoints) + " points", line_of(root["axes"]));
    }
  } else if (g.samples > kMaxGridPoints) {
    throw ConfigError("samples exceeds " + std::to_string(kMaxGridPoints), line_of(root["samples"]));
  }
  return g;
}

GridSpec load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

std::vector<GridPoint> expand_grid(const GridSpec& spec) {
  std::array<GridSpec::Axis, 9> axes{};
  for (std::size_t k = 0; k < kAxes.size(); ++k) {
    auto it = spec.axes.find(kAxes[k]);
    if (it != spec.axes.end()) axes[k] = it->second;
  }

  std::vector<GridPoint> out;
  if (spec.mode == GridSpec::Mode::Random) {
    Rng rng(spec.seed);
    out.reserve(spec.samples);
    for (std::size_t s = 0; s < spec.samples; ++s) {
      std::array<double, 9> v{};
      for (std::size_t k = 0; k < axes.size(); ++k) v[k] = uniform(rng, axes[k].min, axes[k].max);
      out.push_back(make_point(v, spec.constraint));
    }
    return out;
  }

  std::array<std::size_t, 9> idx{};
  while (true) {
    std::array<double, 9> v{};
    for (std::size_t k = 0; k < axes.size(); ++k) v[k] = axis_value(axes[k], idx[k]);
    out.push_back(make_point(v, spec.constraint));
    // Odometer increment, last axis fastest.
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].steps) break;
      idx[k] = 0;
      if (k == 0) return out;
    }
  }
}

}  // namespace relloc::cli
