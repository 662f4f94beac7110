#include "relloc/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relloc::sim {

double ErrorSample::position() const { return std::hypot(ex, ey); }

ErrorSample error_sample(double t, const RelativeState& est, const RelativeState& truth) {
  return {t, est.x - truth.x, est.y - truth.y, wrap_angle(est.psi - truth.psi)};
}

std::optional<double> convergence_time(std::span<const ErrorSample> series, const ConvergenceCriterion& c) {
  std::optional<double> run_start;
  for (const auto& s : series) {
    const bool ok = s.position() < c.pos_tol && std::abs(s.epsi) < c.yaw_tol;
    if (!ok) {
      run_start.reset();
      continue;
    }
    if (!run_start) run_start = s.t;
    if (s.t - *run_start >= c.hold - 1e-9) return run_start;
  }
  return std::nullopt;
}

Mae mae_over(std::span<const ErrorSample> series, double t0, double t1) {
  Mae m;
  for (const auto& s : series) {
    if (s.t < t0 || s.t > t1) continue;
    m.x += std::abs(s.ex);
    m.y += std::abs(s.ey);
    m.psi += std::abs(s.epsi);
    ++m.samples;
  }
  if (m.samples > 0) {
    const double n = static_cast<double>(m.samples);
    m.x /= n;
    m.y /= n;
    m.psi /= n;
  }
  return m;
}

ConvergenceMetric evaluate(std::vector<ErrorSample> series, const ConvergenceCriterion& c, double mae_window) {
  ConvergenceMetric m;
  m.series = std::move(series);
  m.convergence_time = convergence_time(m.series, c);
  if (m.convergence_time) m.mae = mae_over(m.series, *m.convergence_time, *m.convergence_time + mae_window);
  return m;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

}  // namespace relloc::sim
