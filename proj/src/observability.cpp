#include "relloc/observability.hpp"

#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace relloc::obs {

std::string RegimeFlags::to_string() const {
  if (empty()) return "none";
  std::string out;
  auto add = [&](Regime r, const char* name) {
    if (!has(r)) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(Regime::ZeroBaseline, "ZeroBaseline");
  add(Regime::TargetStationary, "TargetStationary");
  add(Regime::FormationLock, "FormationLock");
  add(Regime::Observable, "Observable");
  return out;
}

std::array<Row3, 3> lie_gradients(const RelativeState& x, const InputVector& u) {
  const Vec2 p = x.position();
  const Vec2 vi = u.v_i.vec();
  const Vec2 vj = u.v_j.vec();
  const Mat2 R = rotation(x.psi);
  const Mat2 S = skew();

  // L0 = p'p/2
  Row3 g0(p.x(), p.y(), 0.0);

  // L1 = p'(R vj - vi); the r_i p'Sp term vanishes identically.
  const Vec2 rel = R * vj - vi;
  Row3 g1(rel.x(), rel.y(), p.dot(R * S * vj));

  // L2 = |vj|^2 - 2 vi'R vj + |vi|^2 + r_i vi'S p + r_j p'R S vj
  const Vec2 dp = u.r_i * (S.transpose() * vi) + u.r_j * (R * S * vj);
  const double dpsi = -2.0 * vi.dot(R * S * vj) - u.r_j * p.dot(R * vj);
  Row3 g2(dp.x(), dp.y(), dpsi);

  return {g0, g1, g2};
}

Mat3 observability_matrix(const RelativeState& x, const InputVector& u) {
  const auto g = lie_gradients(x, u);
  Mat3 o;
  o.row(0) = g[0];
  o.row(1) = g[1];
  o.row(2) = g[2];
  return o;
}

Determinant determinant_O(const RelativeState& x, const InputVector& u) {
  const Vec2 p = x.position();
  const Vec2 vi = u.v_i.vec();
  const Vec2 vj = u.v_j.vec();
  const Mat2 R = rotation(x.psi);
  const Mat2 S = skew();

  // -p'R S vj (vi'S r_i + r_j vj'S'R') S p - (2 vi'R S vj + p'R vj r_j)(-vi' + vj'R') S p
  const double alpha = p.dot(R * S * vj);
  const Eigen::RowVector2d b = u.r_i * vi.transpose() * S + u.r_j * vj.transpose() * S.transpose() * R.transpose();
  const double gamma = 2.0 * vi.dot(R * S * vj) + p.dot(R * vj) * u.r_j;
  const Eigen::RowVector2d rel = -vi.transpose() + vj.transpose() * R.transpose();
  const double closed = -alpha * (b * S * p)(0) - gamma * (rel * S * p)(0);

  return {observability_matrix(x, u).determinant(), closed};
}

int numeric_rank(const Mat3& m, double rel_tol) {
  Eigen::JacobiSVD<Mat3> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  if (!(smax > 0.0)) return 0;
  int rank = 0;
  for (int k = 0; k < 3; ++k) {
    if (sv(k) > smax * rel_tol) ++rank;
  }
  return rank;
}

RegimeFlags classify_regime(const RelativeState& x, const InputVector& u, const Thresholds& th) {
  RegimeFlags flags;
  const Vec2 vj = u.v_j.vec();
  if (x.position().norm() < th.baseline) flags.set(Regime::ZeroBaseline);
  if (vj.norm() < th.target_speed) flags.set(Regime::TargetStationary);
  const double rel = (rotation(x.psi) * vj - u.v_i.vec()).norm();
  if (rel < th.relative_speed && std::abs(u.r_i) < th.yaw_rate && std::abs(u.r_j) < th.yaw_rate) {
    flags.set(Regime::FormationLock);
  }
  if (flags.empty() && std::abs(determinant_O(x, u).matrix) > th.det) flags.set(Regime::Observable);
  return flags;
}

ObservabilityReport analyze(const RelativeState& x, const InputVector& u, const Thresholds& th) {
  ObservabilityReport r;
  r.O = observability_matrix(x, u);
  r.det = determinant_O(x, u);
  r.rank = numeric_rank(r.O, th.rank_rel_tol);
  r.flags = classify_regime(x, u, th);
  return r;
}

}  // namespace relloc::obs
