#pragma once

#include <optional>
#include <span>
#include <vector>

#include "relloc/kinematics.hpp"
#include "relloc/sim/config.hpp"

namespace relloc::sim {

/// Estimate minus truth for one pair at time t; e_psi wrapped.
struct ErrorSample {
  double t{0.0};
  double ex{0.0};
  double ey{0.0};
  double epsi{0.0};

  double position() const;
};

ErrorSample error_sample(double t, const RelativeState& estimate, const RelativeState& truth);

/// First time after which the criterion holds without interruption for `hold` seconds.
/// Samples are assumed evenly spaced and time-ordered.
std::optional<double> convergence_time(std::span<const ErrorSample> series, const ConvergenceCriterion& c);

struct Mae {
  double x{0.0};
  double y{0.0};
  double psi{0.0};
  std::size_t samples{0};
};

/// Mean absolute error over samples with t in [t0, t1].
Mae mae_over(std::span<const ErrorSample> series, double t0, double t1);

struct ConvergenceMetric {
  std::vector<ErrorSample> series;
  std::optional<double> convergence_time;
  Mae mae;  ///< over [convergence_time, convergence_time + window]; zero samples if never converged
};

ConvergenceMetric evaluate(std::vector<ErrorSample> series, const ConvergenceCriterion& c, double mae_window);

double median(std::vector<double> v);
double percentile(std::vector<double> v, double q);

}  // namespace relloc::sim
