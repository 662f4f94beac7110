#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "internal.hpp"
#include "relloc/cli.hpp"
#include "relloc/estimator.hpp"
#include "relloc/sim/studies.hpp"

namespace relloc::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

/// A config problem tied to the file it came from.
struct ConfigFailure {
  std::string path;
  int line;
  std::string message;
};

sim::ScenarioConfig load_scenario(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw ConfigFailure{path, 0, "no such file"};
  try {
    return sim::load_config(path);
  } catch (const sim::ConfigError& e) {
    throw ConfigFailure{path, e.line(), e.what()};
  }
}

json assertion(const std::string& name, double value, const std::string& op, double threshold) {
  bool ok = false;
  if (op == "<") ok = value < threshold;
  else if (op == "<=") ok = value <= threshold;
  else if (op == ">") ok = value > threshold;
  else if (op == ">=") ok = value >= threshold;
  return {{"name", name}, {"value", value}, {"op", op}, {"threshold", threshold}, {"passed", ok}};
}

bool all_passed(const json& assertions) {
  return std::all_of(assertions.begin(), assertions.end(), [](const json& a) { return a["passed"].get<bool>(); });
}

int finish(bool assert_requested, const json& assertions, std::ostream& out) {
  for (const auto& a : assertions) {
    out << (a["passed"].get<bool>() ? "ok   " : "FAIL ") << a["name"].get<std::string>() << ": "
        << a["value"].get<double>() << ' ' << a["op"].get<std::string>() << ' ' << a["threshold"].get<double>()
        << '\n';
  }
  if (assert_requested && !all_passed(assertions)) return kAssertionFailed;
  return kSuccess;
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

json mae_json(const sim::Mae& m) { return {{"x", m.x}, {"y", m.y}, {"psi", m.psi}, {"samples", m.samples}}; }

// ---------------------------------------------------------------- converge

struct ConvergeArgs {
  std::string config;
  std::string out;
  int trials = 50;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool check = false;
  double max_mean = 20.0;
  double min_fraction = 0.9;
  double by = 60.0;
};

int cmd_converge(const ConvergeArgs& a, std::ostream& out) {
  const auto started = Clock::now();
  auto cfg = load_scenario(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.trials < 1) throw UsageError("--trials must be >= 1");

  const auto study = sim::convergence_study(cfg, a.trials, a.threads);

  OutputDir dir(a.out);
  auto& csv = dir.open("trials.csv");
  csv << "# relloc convergence-trials v1\n"
      << "trial,seed,x0,y0,psi0,converged,convergence_time,mae_x,mae_y,mae_psi\n"
      << std::setprecision(10);
  json rows = json::array();
  std::vector<double> times;
  for (const auto& t : study.trials) {
    csv << t.trial << ',' << t.seed << ',' << t.initial_truth.x << ',' << t.initial_truth.y << ','
        << t.initial_truth.psi << ',' << (t.convergence_time ? 1 : 0) << ',';
    if (t.convergence_time) csv << *t.convergence_time;
    csv << ',' << t.mae.x << ',' << t.mae.y << ',' << t.mae.psi << '\n';
    if (t.convergence_time) times.push_back(*t.convergence_time);
    rows.push_back({{"trial", t.trial},
                    {"seed", t.seed},
                    {"convergence_time", t.convergence_time ? json(*t.convergence_time) : json(nullptr)},
                    {"mae", mae_json(t.mae)}});
  }

  const double mean = study.mean_convergence_time();
  const double frac = study.fraction_converged_by(a.by);
  json assertions = json::array({assertion("mean convergence time [s]", mean, "<", a.max_mean),
                                 assertion("fraction converged by " + num(a.by) + " s", frac, ">=",
                                           a.min_fraction)});
  json summary = {{"schema", "relloc convergence-summary v1"},
                  {"trials", a.trials},
                  {"seed", cfg.seed},
                  {"duration_s", study.duration},
                  {"mean_convergence_time_s", mean},
                  {"mean_is_censored_at_duration", true},
                  {"converged_by_s", a.by},
                  {"fraction_converged_by", frac},
                  {"unconverged", a.trials - static_cast<int>(times.size())},
                  {"median_convergence_time_s", times.empty() ? json(nullptr) : json(sim::median(times))},
                  {"assertions", assertions},
                  {"per_trial", rows}};
  dir.write("summary.json", summary.dump(2) + "\n");

  json manifest = base_manifest("converge", a.config, cfg.seed, started);
  manifest["trials"] = a.trials;
  dir.commit(manifest);

  out << "converge: " << a.trials << " trials, mean convergence " << mean << " s, " << frac * 100.0
      << "% converged by " << a.by << " s\n";
  return finish(a.check, assertions, out);
}

// ---------------------------------------------------------------- observe

struct ObserveArgs {
  std::string grid;
  std::string out;
};

int cmd_observe(const ObserveArgs& a, std::ostream& out) {
  const auto started = Clock::now();
  if (!fs::exists(a.grid)) throw ConfigFailure{a.grid, 0, "no such file"};
  GridSpec spec;
  try {
    spec = load_grid(a.grid);
  } catch (const sim::ConfigError& e) {
    throw ConfigFailure{a.grid, e.line(), e.what()};
  }
  const auto points = expand_grid(spec);

  OutputDir dir(a.out);
  auto& csv = dir.open("observability.csv");
  csv << "# relloc observability v1\n"
      << "index,x,y,psi,vi_x,vi_y,r_i,vj_x,vj_y,r_j,det,det_closed_form,rank,flags\n"
      << std::setprecision(12);

  std::map<std::string, std::size_t> flag_counts;
  std::map<int, std::size_t> rank_counts;
  std::size_t observable = 0;
  double max_abs_det = 0.0, max_discrepancy = 0.0, max_rel_discrepancy = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    const auto r = obs::analyze(p.x, p.u, spec.thresholds);
    const std::string flags = r.flags.to_string();
    csv << k << ',' << p.x.x << ',' << p.x.y << ',' << p.x.psi << ',' << p.u.v_i.vx << ',' << p.u.v_i.vy << ','
        << p.u.r_i << ',' << p.u.v_j.vx << ',' << p.u.v_j.vy << ',' << p.u.r_j << ',' << r.det.matrix << ','
        << r.det.closed_form << ',' << r.rank << ',' << flags << '\n';
    ++flag_counts[flags];
    ++rank_counts[r.rank];
    if (r.flags.has(obs::Regime::Observable)) ++observable;
    max_abs_det = std::max(max_abs_det, std::abs(r.det.matrix));
    const double diff = std::abs(r.det.matrix - r.det.closed_form);
    max_discrepancy = std::max(max_discrepancy, diff);
    const double scale = std::max({std::abs(r.det.matrix), std::abs(r.det.closed_form), 1e-300});
    if (std::abs(r.det.matrix) > 1e-9) max_rel_discrepancy = std::max(max_rel_discrepancy, diff / scale);
  }

  json ranks = json::object();
  for (const auto& [rank, n] : rank_counts) ranks[std::to_string(rank)] = n;
  const double frac = points.empty() ? 0.0 : static_cast<double>(observable) / static_cast<double>(points.size());
  json summary = {{"schema", "relloc observability-summary v1"},
                  {"points", points.size()},
                  {"observable_fraction", frac},
                  {"flag_counts", flag_counts},
                  {"rank_counts", ranks},
                  {"max_abs_det", max_abs_det},
                  {"determinant_discrepancy",
                   {{"max_abs", max_discrepancy}, {"max_rel_where_det_above_1e-9", max_rel_discrepancy}}}};
  dir.write("summary.json", summary.dump(2) + "\n");
  json manifest = base_manifest("observe", a.grid, spec.seed, started);
  dir.commit(manifest);

  out << "observe: " << points.size() << " points, " << frac * 100.0 << "% observable, max |det - closed form| "
      << max_discrepancy << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- formation / leader

struct ScenarioArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool check = false;
  double window = 5.0;
  double max_error = 0.2;
};

bool has_phase(const sim::ScenarioConfig& cfg, sim::Phase p) {
  return std::any_of(cfg.phases.begin(), cfg.phases.end(), [p](const sim::PhaseEntry& e) { return e.phase == p; });
}

int cmd_formation(const ScenarioArgs& a, std::ostream& out) {
  const auto started = Clock::now();
  auto cfg = load_scenario(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!has_phase(cfg, sim::Phase::Formation)) throw ConfigFailure{a.config, 0, "config has no Formation phase"};
  if (cfg.phase_at(cfg.duration - a.window) != sim::Phase::Formation) {
    throw ConfigFailure{a.config, 0, "the Formation phase must cover the final --window seconds"};
  }

  OutputDir dir(a.out);
  sim::TraceStreams trace{&dir.open("trajectory.csv"), &dir.open("estimates.csv"), nullptr};
  const auto r = sim::run_formation(cfg, trace, a.window);

  json followers = json::array();
  for (const auto& f : r.followers) {
    followers.push_back({{"robot", f.robot}, {"mean_abs_error_x", f.mean_abs_x}, {"mean_abs_error_y", f.mean_abs_y}});
  }
  json assertions = json::array({assertion("max per-axis offset error [m]", r.max_axis_error(), "<", a.max_error)});
  json summary = {{"schema", "relloc formation-summary v1"},
                  {"robots", cfg.robots},
                  {"seed", cfg.seed},
                  {"window_s", r.window},
                  {"followers", followers},
                  {"max_axis_error", r.max_axis_error()},
                  {"min_separation", r.min_separation},
                  {"assertions", assertions}};
  dir.write("summary.json", summary.dump(2) + "\n");
  dir.commit(base_manifest("formation", a.config, cfg.seed, started));

  out << "formation: " << cfg.robots << " robots, max per-axis offset error " << r.max_axis_error() << " m\n";
  return finish(a.check, assertions, out);
}

int cmd_leader(const ScenarioArgs& a, std::ostream& out) {
  const auto started = Clock::now();
  auto cfg = load_scenario(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!has_phase(cfg, sim::Phase::LeaderFollower)) {
    throw ConfigFailure{a.config, 0, "config has no LeaderFollower phase"};
  }

  OutputDir dir(a.out);
  sim::TraceStreams trace{&dir.open("trajectory.csv"), &dir.open("estimates.csv"), nullptr};
  const auto r = sim::run_leader_follower(cfg, trace);

  json assertions = json::array({assertion("gate passed", r.gate_passed ? 1.0 : 0.0, ">=", 1.0),
                                 assertion("offset-hold error [m]", r.offset_hold_error, "<", a.max_error)});
  json summary = {{"schema", "relloc leader-summary v1"},
                  {"seed", cfg.seed},
                  {"gate_passed", r.gate_passed},
                  {"gate_lateral_offset", r.gate_lateral ? json(*r.gate_lateral) : json(nullptr)},
                  {"gate_width", cfg.leader.gate.width},
                  {"offset_hold_error", r.offset_hold_error},
                  {"final_offset_error", r.final_offset_error},
                  {"leader_moved", r.leader_moved},
                  {"assertions", assertions}};
  dir.write("summary.json", summary.dump(2) + "\n");
  dir.commit(base_manifest("leader", a.config, cfg.seed, started));

  out << "leader: gate " << (r.gate_passed ? "passed" : "missed") << ", offset-hold error " << r.offset_hold_error
      << " m\n";
  return finish(a.check, assertions, out);
}

// ---------------------------------------------------------------- unobservable

struct UnobservableArgs {
  std::string config;
  std::string out;
  int trials = 50;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  double regime_duration = 20.0;
  double max_startup = 120.0;
  bool check = false;
};

int cmd_unobservable(const UnobservableArgs& a, std::ostream& out) {
  const auto started = Clock::now();
  auto cfg = load_scenario(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.trials < 1) throw UsageError("--trials must be >= 1");

  const auto r = sim::unobservable_study(cfg, a.trials, a.regime_duration, a.max_startup, a.threads);

  OutputDir dir(a.out);
  auto& csv = dir.open("regimes.csv");
  csv << "# relloc unobservable-regimes v1\nrow,regime,mae_x,mae_y,mae_psi\n" << std::setprecision(10);
  json regimes = json::object();
  for (auto reg : {sim::FlightRegime::Normal, sim::FlightRegime::FormationLock, sim::FlightRegime::TargetStationary}) {
    const auto& o = r.of(reg);
    std::vector<double> x, y, psi;
    for (std::size_t k = 0; k < o.mae.size(); ++k) {
      const auto& m = o.mae[k];
      csv << k << ',' << sim::to_string(reg) << ',' << m.x << ',' << m.y << ',' << m.psi << '\n';
      x.push_back(m.x);
      y.push_back(m.y);
      psi.push_back(m.psi);
    }
    auto stats = [](const std::vector<double>& v) -> json {
      if (v.empty()) return nullptr;
      double sum = 0.0;
      for (double d : v) sum += d;
      return {{"mean", sum / static_cast<double>(v.size())}, {"median", sim::median(v)}};
    };
    regimes[sim::to_string(reg)] = {{"x", stats(x)},
                                    {"y", stats(y)},
                                    {"psi", stats(psi)},
                                    {"max_abs_det", o.max_abs_det},
                                    {"max_position_error", o.max_position_error}};
  }

  json assertions = json::array();
  if (!r.normal.mae.empty()) {
    const auto& n = regimes["normal"];
    const auto& l = regimes["formation_lock"];
    const auto& t = regimes["target_stationary"];
    for (const char* axis : {"x", "y"}) {
      assertions.push_back(assertion(std::string("formation_lock mean MAE ") + axis + " [m]",
                                     l[axis]["mean"].get<double>(), "<", 0.2));
    }
    assertions.push_back(assertion("target_stationary psi median / normal psi median",
                                   t["psi"]["median"].get<double>() / n["psi"]["median"].get<double>(), ">", 1.0));
    for (const char* axis : {"x", "y"}) {
      assertions.push_back(assertion(std::string("target_stationary / normal median MAE ") + axis,
                                     t[axis]["median"].get<double>() / n[axis]["median"].get<double>(), "<=", 1.5));
    }
  } else {
    assertions.push_back(assertion("converged trials", 0.0, ">", 0.0));
  }

  json summary = {{"schema", "relloc unobservable-summary v1"},
                  {"trials", a.trials},
                  {"seed", cfg.seed},
                  {"unconverged", r.unconverged},
                  {"regime_duration_s", r.regime_duration},
                  {"switch_times_s", r.switch_times},
                  {"regimes", regimes},
                  {"assertions", assertions}};
  dir.write("summary.json", summary.dump(2) + "\n");
  json manifest = base_manifest("unobservable", a.config, cfg.seed, started);
  manifest["trials"] = a.trials;
  dir.commit(manifest);

  out << "unobservable: " << a.trials - r.unconverged << " of " << a.trials << " trials converged before branching\n";
  return finish(a.check, assertions, out);
}

// ---------------------------------------------------------------- ranging

struct RangingArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
};

int cmd_ranging(const RangingArgs& a, std::ostream& out) {
  const auto started = Clock::now();
  auto cfg = load_scenario(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.duration) {
    if (!(*a.duration > 0.0)) throw UsageError("--duration must be > 0");
    cfg.duration = *a.duration;
  }

  OutputDir dir(a.out);
  sim::Scenario s(cfg, cfg.seed);
  s.attach({nullptr, nullptr, &dir.open("ranging.csv")});

  std::size_t exchanges = 0, dropped = 0, outliers = 0;
  double raw = 0.0, filtered = 0.0, corrected = 0.0;
  while (s.time() < cfg.duration - 1e-9) {
    s.step();
    for (const auto& e : s.world().last_events()) {
      ++exchanges;
      if (e.exchange.dropped) {
        ++dropped;
        continue;
      }
      const auto& ev = e.exchange.event;
      if (ev.outlier) ++outliers;
      raw += std::abs(ev.d_raw - ev.d_true);
      filtered += std::abs(e.d_filtered - ev.d_true);
      corrected += std::abs(e.d_corrected - ev.d_true);
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, exchanges - dropped));
  json summary = {{"schema", "relloc ranging-summary v1"},
                  {"robots", cfg.robots},
                  {"seed", cfg.seed},
                  {"slot_time_s", cfg.slot_time},
                  {"pair_frequency_hz", ranging::pair_frequency(cfg.robots, cfg.slot_time)},
                  {"exchanges", exchanges},
                  {"dropped", dropped},
                  {"outliers", outliers},
                  {"mae_raw", raw / n},
                  {"mae_filtered", filtered / n},
                  {"mae_corrected", corrected / n}};
  dir.write("summary.json", summary.dump(2) + "\n");
  dir.commit(base_manifest("ranging", a.config, cfg.seed, started));

  out << "ranging: " << exchanges << " exchanges, MAE raw " << raw / n << " m, corrected " << corrected / n << " m\n";
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"relloc: UWB relative localization for robot swarms"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  ConvergeArgs conv;
  auto* c = app.add_subcommand("converge", "Seeded convergence study of the start-up maneuver");
  c->add_option("config", conv.config, "Scenario YAML (defaults reproduce the simulation study)");
  c->add_option("--out", conv.out, "Output directory")->required();
  c->add_option("--trials", conv.trials, "Number of trials")->capture_default_str();
  c->add_option("--seed", conv.seed, "Base seed (overrides the config)");
  c->add_option("--threads", conv.threads, "Worker threads, 0 for all cores")->capture_default_str();
  c->add_flag("--assert", conv.check, "Exit 2 when a threshold is missed");
  c->add_option("--max-mean-convergence", conv.max_mean, "Mean convergence time bound [s]")->capture_default_str();
  c->add_option("--min-converged-fraction", conv.min_fraction, "Required converged fraction")->capture_default_str();
  c->add_option("--converged-by", conv.by, "Deadline for the converged fraction [s]")->capture_default_str();

  ObserveArgs ob;
  auto* o = app.add_subcommand("observe", "Sweep an observability grid");
  o->add_option("--grid", ob.grid, "Grid YAML")->required();
  o->add_option("--out", ob.out, "Output directory")->required();

  ScenarioArgs form;
  auto* f = app.add_subcommand("formation", "Start-up then PID formation flight");
  f->add_option("config", form.config, "Scenario YAML")->required();
  f->add_option("--out", form.out, "Output directory")->required();
  f->add_option("--seed", form.seed, "Seed (overrides the config)");
  f->add_option("--window", form.window, "Final window scored [s]")->capture_default_str();
  f->add_flag("--assert", form.check, "Exit 2 when a threshold is missed");
  f->add_option("--max-axis-error", form.max_error, "Per-axis offset error bound [m]")->capture_default_str();

  ScenarioArgs lead;
  lead.max_error = 0.3;
  auto* l = app.add_subcommand("leader", "Start-up then leader-follower flight through a gate");
  l->add_option("config", lead.config, "Scenario YAML")->required();
  l->add_option("--out", lead.out, "Output directory")->required();
  l->add_option("--seed", lead.seed, "Seed (overrides the config)");
  l->add_flag("--assert", lead.check, "Exit 2 when a threshold is missed");
  l->add_option("--max-hold-error", lead.max_error, "Offset-hold error bound [m]")->capture_default_str();

  UnobservableArgs un;
  auto* u = app.add_subcommand("unobservable", "Normal flight vs formation lock vs hovering peer");
  u->add_option("config", un.config, "Scenario YAML (defaults reproduce the simulation study)");
  u->add_option("--out", un.out, "Output directory")->required();
  u->add_option("--trials", un.trials, "Number of trials")->capture_default_str();
  u->add_option("--seed", un.seed, "Base seed (overrides the config)");
  u->add_option("--threads", un.threads, "Worker threads, 0 for all cores")->capture_default_str();
  u->add_option("--regime-duration", un.regime_duration, "Seconds flown in each regime")->capture_default_str();
  u->add_option("--max-startup", un.max_startup, "Start-up time cap [s]")->capture_default_str();
  u->add_flag("--assert", un.check, "Exit 2 when a threshold is missed");

  RangingArgs rg;
  auto* r = app.add_subcommand("ranging", "Trace the ranging pipeline over a scenario run");
  r->add_option("config", rg.config, "Scenario YAML");
  r->add_option("--out", rg.out, "Output directory")->required();
  r->add_option("--seed", rg.seed, "Seed (overrides the config)");
  r->add_option("--duration", rg.duration, "Simulated time [s] (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (c->parsed()) return cmd_converge(conv, out);
    if (o->parsed()) return cmd_observe(ob, out);
    if (f->parsed()) return cmd_formation(form, out);
    if (l->parsed()) return cmd_leader(lead, out);
    if (u->parsed()) return cmd_unobservable(un, out);
    if (r->parsed()) return cmd_ranging(rg, out);
  } catch (const ConfigFailure& e) {
    err << e.path;
    if (e.line > 0) err << ':' << e.line;
    err << ": error: " << e.message << '\n';
    return kUsageError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const sim::SimulationFault& e) {
    err << "internal fault: " << e.what() << '\n';
    return kInternalFault;
  } catch (const ekf::FilterFault& e) {
    err << "internal fault: " << e.what() << '\n';
    return kInternalFault;
  } catch (const std::exception& e) {
    err << "internal fault: " << e.what() << '\n';
    return kInternalFault;
  }
  return kUsageError;
}

}  // namespace relloc::cli
