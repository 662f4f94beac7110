#pragma once

#include <array>
#include <string>

#include "relloc/estimator.hpp"
#include "relloc/kinematics.hpp"

namespace relloc::obs {

using Row3 = Eigen::RowVector3d;

enum class Regime : unsigned {
  None = 0,
  ZeroBaseline = 1u << 0,
  TargetStationary = 1u << 1,
  FormationLock = 1u << 2,
  Observable = 1u << 3,
};

/// Bit set of Regime values.
class RegimeFlags {
 public:
  RegimeFlags() = default;
  void set(Regime r) { bits_ |= static_cast<unsigned>(r); }
  bool has(Regime r) const { return (bits_ & static_cast<unsigned>(r)) != 0; }
  bool empty() const { return bits_ == 0; }
  unsigned bits() const { return bits_; }
  /// '|'-joined names, "none" when empty.
  std::string to_string() const;

  bool operator==(const RegimeFlags&) const = default;

 private:
  unsigned bits_{0};
};

struct Thresholds {
  double det = 1e-6;            ///< |det O| above this counts as observable
  double baseline = 0.05;       ///< m
  double target_speed = 0.01;   ///< m/s
  double relative_speed = 0.01; ///< m/s
  double yaw_rate = 0.01;       ///< rad/s
  double rank_rel_tol = 1e-10;  ///< singular values below sigma_max * tol are dropped
};

/// Gradients of the zeroth, first and second Lie derivatives of h = p'p/2 along
/// the relative dynamics, inputs held constant.
std::array<Row3, 3> lie_gradients(const RelativeState& x, const InputVector& u);

/// Rows are the three Lie-derivative gradients.
Mat3 observability_matrix(const RelativeState& x, const InputVector& u);

struct Determinant {
  double matrix;       ///< det of observability_matrix (authoritative)
  double closed_form;  ///< expanded expression along the psi column
};

Determinant determinant_O(const RelativeState& x, const InputVector& u);

/// Numerical rank by SVD, singular values below sigma_max * rel_tol dropped.
int numeric_rank(const Mat3& m, double rel_tol = 1e-10);

/// Flags degenerate regimes; Observable only when none is present and |det| > threshold.
RegimeFlags classify_regime(const RelativeState& x, const InputVector& u, const Thresholds& th = {});

struct ObservabilityReport {
  Mat3 O;
  Determinant det;
  int rank{0};
  RegimeFlags flags;
};

ObservabilityReport analyze(const RelativeState& x, const InputVector& u, const Thresholds& th = {});

}  // namespace relloc::obs
