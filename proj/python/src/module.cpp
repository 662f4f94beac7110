#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "relloc/estimator.hpp"
#include "relloc/kinematics.hpp"
#include "relloc/observability.hpp"
#include "relloc/ranging.hpp"
#include "relloc/sim/studies.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace relloc {
namespace {

void bind_kinematics(py::module_& m) {
  py::class_<Attitude>(m, "Attitude")
      .def(py::init<double, double>(), "theta"_a = 0.0, "phi"_a = 0.0)
      .def_readwrite("theta", &Attitude::theta)
      .def_readwrite("phi", &Attitude::phi);

  py::class_<BodyRates>(m, "BodyRates")
      .def(py::init<double, double>(), "p_bar"_a = 0.0, "r_bar"_a = 0.0)
      .def_readwrite("p_bar", &BodyRates::p_bar)
      .def_readwrite("r_bar", &BodyRates::r_bar);

  py::class_<HorizontalVelocity>(m, "HorizontalVelocity")
      .def(py::init<double, double>(), "vx"_a = 0.0, "vy"_a = 0.0)
      .def_readwrite("vx", &HorizontalVelocity::vx)
      .def_readwrite("vy", &HorizontalVelocity::vy)
      .def("vec", &HorizontalVelocity::vec)
      .def("__repr__", [](const HorizontalVelocity& v) {
        return "HorizontalVelocity(vx=" + std::to_string(v.vx) + ", vy=" + std::to_string(v.vy) + ")";
      });

  py::class_<RelativeState>(m, "RelativeState")
      .def(py::init<double, double, double>(), "x"_a = 0.0, "y"_a = 0.0, "psi"_a = 0.0)
      .def_readwrite("x", &RelativeState::x)
      .def_readwrite("y", &RelativeState::y)
      .def_readwrite("psi", &RelativeState::psi)
      .def("vec", &RelativeState::vec)
      .def("position", &RelativeState::position)
      .def("__repr__", [](const RelativeState& s) {
        return "RelativeState(x=" + std::to_string(s.x) + ", y=" + std::to_string(s.y) +
               ", psi=" + std::to_string(s.psi) + ")";
      });

  py::class_<InputVector>(m, "InputVector")
      .def(py::init([](const HorizontalVelocity& v_i, double r_i, const HorizontalVelocity& v_j, double r_j) {
             return InputVector{v_i, r_i, v_j, r_j};
           }),
           "v_i"_a = HorizontalVelocity{}, "r_i"_a = 0.0, "v_j"_a = HorizontalVelocity{}, "r_j"_a = 0.0)
      .def_readwrite("v_i", &InputVector::v_i)
      .def_readwrite("r_i", &InputVector::r_i)
      .def_readwrite("v_j", &InputVector::v_j)
      .def_readwrite("r_j", &InputVector::r_j)
      .def("vec", &InputVector::vec)
      .def_static("from_vec", &InputVector::from, "u"_a);

  py::enum_<YawRateMode>(m, "YawRateMode")
      .value("Transform", YawRateMode::Transform)
      .value("Passthrough", YawRateMode::Passthrough);

  m.def("wrap_angle", &wrap_angle, "a"_a);
  m.def("body_to_horizontal_velocity", &body_to_horizontal_velocity, "v_body"_a, "attitude"_a);
  m.def("body_to_horizontal_yaw_rate", &body_to_horizontal_yaw_rate, "rates"_a, "attitude"_a,
        "mode"_a = YawRateMode::Transform);
  m.def("rotation", &rotation, "psi"_a);
  m.def("relative_dynamics", &relative_dynamics, "x"_a, "u"_a);
  m.def("integrate_step", &integrate_step, "x"_a, "u"_a, "dt"_a);
}

void bind_estimator(py::module_& parent) {
  auto m = parent.def_submodule("ekf", "Range-based extended Kalman filter");
  using namespace ekf;

  py::class_<EkfState>(m, "EkfState")
      .def_readwrite("x_hat", &EkfState::x_hat)
      .def_readwrite("P", &EkfState::P)
      .def_readwrite("Q", &EkfState::Q)
      .def_readwrite("R", &EkfState::R);

  py::class_<RangeObservation>(m, "RangeObservation")
      .def(py::init<double, double, double, double>(), "d"_a, "h_i"_a = 0.0, "h_j"_a = 0.0, "t"_a = 0.0)
      .def_readwrite("d", &RangeObservation::d)
      .def_readwrite("h_i", &RangeObservation::h_i)
      .def_readwrite("h_j", &RangeObservation::h_j)
      .def_readwrite("t", &RangeObservation::t);

  py::enum_<UpdateOutcome>(m, "UpdateOutcome")
      .value("Applied", UpdateOutcome::Applied)
      .value("SkippedDegenerate", UpdateOutcome::SkippedDegenerate)
      .value("RejectedGate", UpdateOutcome::RejectedGate);

  py::class_<UpdateResult>(m, "UpdateResult")
      .def_readonly("state", &UpdateResult::state)
      .def_readonly("outcome", &UpdateResult::outcome)
      .def_readonly("innovation", &UpdateResult::innovation)
      .def_readonly("innovation_var", &UpdateResult::innovation_var);

  py::register_exception<FilterFault>(m, "FilterFault", PyExc_RuntimeError);

  m.def("input_noise", &input_noise, "q_v"_a, "q_r"_a);
  m.def("initialize", py::overload_cast<const Mat3&, const Mat6&, double>(&initialize), "P0"_a, "Q"_a, "R"_a);
  m.def("initialize", py::overload_cast<>(&initialize));
  m.def("jacobian_A", &jacobian_A, "x"_a, "u"_a, "dt"_a);
  m.def("jacobian_B", &jacobian_B, "x"_a, "dt"_a);
  m.def("jacobian_H", &jacobian_H, "x"_a, "h_i"_a = 0.0, "h_j"_a = 0.0);
  m.def("observe_range", &observe_range, "x"_a, "h_i"_a = 0.0, "h_j"_a = 0.0);
  m.def("condition_covariance", &condition_covariance, "P"_a);
  m.def("predict", &predict, "state"_a, "u"_a, "dt"_a);
  m.def("update", &update, "state"_a, "obs"_a, "gate"_a = true);

  py::class_<PairFilter>(m, "PairFilter")
      .def(py::init<>())
      .def(py::init<EkfState, bool, int>(), "init"_a, "gating"_a = true, "gate_release"_a = kGateRelease)
      .def("predict", &PairFilter::predict, "u"_a, "dt"_a)
      .def("update", &PairFilter::update, "obs"_a)
      .def_property_readonly("state", &PairFilter::state)
      .def_property_readonly("estimate", &PairFilter::estimate)
      .def_property_readonly("updates_applied", &PairFilter::updates_applied)
      .def_property_readonly("updates_skipped", &PairFilter::updates_skipped)
      .def_property_readonly("updates_rejected", &PairFilter::updates_rejected)
      .def_property_readonly("gate_releases", &PairFilter::gate_releases);
}

void bind_observability(py::module_& parent) {
  auto m = parent.def_submodule("obs", "Observability analysis of the relative state");
  using namespace obs;

  py::class_<Thresholds>(m, "Thresholds")
      .def(py::init<>())
      .def_readwrite("det", &Thresholds::det)
      .def_readwrite("baseline", &Thresholds::baseline)
      .def_readwrite("target_speed", &Thresholds::target_speed)
      .def_readwrite("relative_speed", &Thresholds::relative_speed)
      .def_readwrite("yaw_rate", &Thresholds::yaw_rate)
      .def_readwrite("rank_rel_tol", &Thresholds::rank_rel_tol);

  py::class_<Determinant>(m, "Determinant")
      .def_readonly("matrix", &Determinant::matrix)
      .def_readonly("closed_form", &Determinant::closed_form);

  py::class_<ObservabilityReport>(m, "ObservabilityReport")
      .def_readonly("O", &ObservabilityReport::O)
      .def_readonly("det", &ObservabilityReport::det)
      .def_readonly("rank", &ObservabilityReport::rank)
      .def_property_readonly("flags", [](const ObservabilityReport& r) { return r.flags.to_string(); });

  m.def("lie_gradients", &lie_gradients, "x"_a, "u"_a);
  m.def("observability_matrix", &observability_matrix, "x"_a, "u"_a);
  m.def("determinant_O", &determinant_O, "x"_a, "u"_a);
  m.def("numeric_rank", &numeric_rank, "m"_a, "rel_tol"_a = 1e-10);
  m.def(
      "classify_regime",
      [](const RelativeState& x, const InputVector& u, const Thresholds& th) {
        return classify_regime(x, u, th).to_string();
      },
      "x"_a, "u"_a, "thresholds"_a = Thresholds{});
  m.def("analyze", &analyze, "x"_a, "u"_a, "thresholds"_a = Thresholds{});
}

void bind_ranging(py::module_& parent) {
  auto m = parent.def_submodule("ranging", "Token-loop ranging schedule and range processing");
  using namespace ranging;

  m.def("build_schedule", [](int n) {
    std::vector<std::pair<int, int>> out;
    for (const auto& p : build_schedule(n)) out.emplace_back(p.a, p.b);
    return out;
  }, "n"_a);
  m.def("pair_frequency", &pair_frequency, "n"_a, "slot_time"_a = kDefaultSlotTime);
  m.def("calibrate_slot_time", &calibrate_slot_time, "n_anchor"_a = 6, "rate_hz"_a = 20.0);
  m.def("median", [](const std::vector<double>& w) { return median(w); }, "window"_a);
  m.def("bias_correct", &bias_correct, "d_filtered"_a, "slope"_a = 0.072, "offset"_a = 0.62);
  m.attr("DEFAULT_SLOT_TIME") = kDefaultSlotTime;

  py::class_<RangeProcessor>(m, "RangeProcessor")
      .def(py::init<std::size_t, bool, double, double>(), "window"_a = 5, "correct_bias"_a = true,
           "slope"_a = 0.072, "offset"_a = 0.62)
      .def("process", [](RangeProcessor& p, double d) {
        const auto o = p.process(d);
        return py::make_tuple(o.filtered, o.corrected);
      }, "d_raw"_a);
}

void bind_studies(py::module_& parent) {
  auto m = parent.def_submodule("sim", "Swarm simulation studies");
  using namespace sim;

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("robots", &ScenarioConfig::robots)
      .def_readwrite("duration", &ScenarioConfig::duration)
      .def_readwrite("seed", &ScenarioConfig::seed);

  py::class_<Mae>(m, "Mae")
      .def_readonly("x", &Mae::x)
      .def_readonly("y", &Mae::y)
      .def_readonly("psi", &Mae::psi);

  py::class_<TrialResult>(m, "TrialResult")
      .def_readonly("trial", &TrialResult::trial)
      .def_readonly("seed", &TrialResult::seed)
      .def_readonly("initial_truth", &TrialResult::initial_truth)
      .def_readonly("convergence_time", &TrialResult::convergence_time)
      .def_readonly("mae", &TrialResult::mae);

  py::class_<ConvergenceStudyResult>(m, "ConvergenceStudyResult")
      .def_readonly("trials", &ConvergenceStudyResult::trials)
      .def_readonly("duration", &ConvergenceStudyResult::duration)
      .def("mean_convergence_time", &ConvergenceStudyResult::mean_convergence_time)
      .def("fraction_converged_by", &ConvergenceStudyResult::fraction_converged_by, "t"_a);

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("load_config", &load_config, "path"_a);
  m.def("convergence_study", &convergence_study, "config"_a, "trials"_a, "threads"_a = 0,
        py::call_guard<py::gil_scoped_release>());
}

}  // namespace
}  // namespace relloc

PYBIND11_MODULE(_core, m) {
  m.doc() = "Range-based relative localization for aerial swarms";
  m.attr("__version__") = RELLOC_VERSION;
  relloc::bind_kinematics(m);
  relloc::bind_estimator(m);
  relloc::bind_observability(m);
  relloc::bind_ranging(m);
  relloc::bind_studies(m);
}
