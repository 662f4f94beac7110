#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "relloc/kinematics.hpp"

namespace relloc::ekf {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Row3 = Eigen::RowVector3d;

/// Geometry below this predicted range makes the observation Jacobian meaningless.
inline constexpr double kMinRange = 1e-6;
/// Innovations beyond this many standard deviations are rejected.
inline constexpr double kGateSigmas = 6.0;
/// Eigenvalue floor applied to P after every step.
inline constexpr double kEigenFloor = 1e-12;

struct EkfState {
  RelativeState x_hat;
  Mat3 P{Mat3::Identity()};
  Mat6 Q{Mat6::Identity()};
  double R{1.0};  ///< range noise variance, m^2
};

struct RangeObservation {
  double d{0.0};    ///< measured distance, m
  double h_i{0.0};  ///< own height, m
  double h_j{0.0};  ///< peer height, m
  double t{0.0};    ///< timestamp, s
};

/// Raised when the filter produces or is handed numerically broken state.
class FilterFault : public std::runtime_error {
 public:
  FilterFault(const std::string& what, EkfState state)
      : std::runtime_error(what), state_(std::move(state)) {}
  const EkfState& state() const { return state_; }

 private:
  EkfState state_;
};

/// Diagonal input-noise covariance built from velocity and yaw-rate deviations.
Mat6 input_noise(double q_v, double q_r);

/// Filter start-up: zero relative state, the given covariances.
/// Throws std::invalid_argument if P0 is not symmetric PSD or Q/R are not positive.
EkfState initialize(const Mat3& P0, const Mat6& Q, double R);

/// Default start-up: P0 = diag(10, 10, 0.1), q_v = 0.25, q_r = 0.4, r_d = 0.1.
EkfState initialize();

/// dF/dX of the Euler step: identity plus dt-scaled rotation and yaw coupling terms.
Mat3 jacobian_A(const RelativeState& x, const InputVector& u, double dt);

/// dF/dU of the Euler step. Scaled by dt so it is the exact input derivative of
/// integrate_step.
Mat36 jacobian_B(const RelativeState& x, double dt);

/// sqrt(x^2 + y^2 + (h_j - h_i)^2).
double observe_range(const RelativeState& x, double h_i, double h_j);

/// [x/z, y/z, 0]; std::nullopt when z < kMinRange.
std::optional<Row3> jacobian_H(const RelativeState& x, double h_i, double h_j);

/// Symmetrizes P and clamps its eigenvalues at kEigenFloor.
Mat3 condition_covariance(const Mat3& P);

/// Euler prediction of x_hat, P <- A P A' + B Q B'. Throws FilterFault on non-finite output.
EkfState predict(const EkfState& s, const InputVector& u, double dt);

enum class UpdateOutcome {
  Applied,
  SkippedDegenerate,  ///< predicted range below kMinRange
  RejectedGate,       ///< innovation outside kGateSigmas
};

struct UpdateResult {
  EkfState state;
  UpdateOutcome outcome{UpdateOutcome::Applied};
  double innovation{0.0};
  double innovation_var{0.0};
};

/// Range update. Throws FilterFault when the innovation variance is not positive.
UpdateResult update(const EkfState& s, const RangeObservation& obs, bool gate = true);

/// Consecutive gate rejections after which the next measurement is applied ungated.
/// A filter that has drifted far from the truth would otherwise reject every range
/// from then on and never recover.
inline constexpr int kGateRelease = 10;

/// Stateful wrapper for one (i, j) estimator as a robot runs it: predicts at the input
/// rate and applies range updates in timestamp order.
class PairFilter {
 public:
  PairFilter() : PairFilter(initialize()) {}
  /// gate_release <= 0 keeps the gate closed no matter how many rejections pile up.
  explicit PairFilter(EkfState init, bool gating = true, int gate_release = kGateRelease)
      : state_(std::move(init)), gating_(gating), gate_release_(gate_release) {}

  void predict(const InputVector& u, double dt);
  UpdateOutcome update(const RangeObservation& obs);

  const EkfState& state() const { return state_; }
  const RelativeState& estimate() const { return state_.x_hat; }

  std::uint64_t updates_applied() const { return applied_; }
  std::uint64_t updates_skipped() const { return skipped_; }
  std::uint64_t updates_rejected() const { return rejected_; }
  /// Updates applied ungated after a run of kGateRelease rejections.
  std::uint64_t gate_releases() const { return released_; }
  /// Observations arriving with a timestamp earlier than the last one applied.
  std::uint64_t out_of_order() const { return out_of_order_; }

 private:
  EkfState state_;
  bool gating_{true};
  int gate_release_{kGateRelease};
  int reject_run_{0};
  double last_obs_t_{-1e300};
  std::uint64_t applied_{0};
  std::uint64_t skipped_{0};
  std::uint64_t rejected_{0};
  std::uint64_t out_of_order_{0};
  std::uint64_t released_{0};
};

}  // namespace relloc::ekf
