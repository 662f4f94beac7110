#include <cmath>
#include <functional>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "relloc/estimator.hpp"

namespace relloc::ekf {
namespace {

RelativeState state(const oracle::V3& a) { return RelativeState::from(Vec3(a[0], a[1], a[2])); }
InputVector input(const oracle::V6& a) { return {{a[0], a[1]}, a[2], {a[3], a[4]}, a[5]}; }

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

bool symmetric_psd(const Mat3& P) {
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(P);
  return eig.eigenvalues().minCoeff() >= -1e-9;
}

TEST(Initialize, DefaultsMatchSimulationStudy) {
  const EkfState s = initialize();
  EXPECT_EQ(s.x_hat.vec(), Vec3::Zero());
  EXPECT_EQ(s.P, Vec3(10, 10, 0.1).asDiagonal().toDenseMatrix());
  Eigen::Matrix<double, 6, 1> q;
  q << 0.0625, 0.0625, 0.16, 0.0625, 0.0625, 0.16;
  EXPECT_TRUE(s.Q.diagonal().isApprox(q, 1e-15));
  EXPECT_EQ((s.Q - Mat6(s.Q.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(s.R, 0.01);
}

TEST(Initialize, RejectsIndefiniteP0) {
  Mat3 p0 = Mat3::Identity();
  p0(2, 2) = -0.5;
  EXPECT_THROW(initialize(p0, input_noise(0.25, 0.4), 0.01), std::invalid_argument);
  Mat3 asym = Mat3::Identity();
  asym(0, 1) = 0.3;
  EXPECT_THROW(initialize(asym, input_noise(0.25, 0.4), 0.01), std::invalid_argument);
  EXPECT_THROW(initialize(Mat3::Identity(), input_noise(0.25, 0.4), 0.0), std::invalid_argument);
}

TEST(InputNoise, CustomVelocityDeviation) {
  Eigen::Matrix<double, 6, 1> q;
  q << 0.01, 0.01, 0.16, 0.01, 0.01, 0.16;
  EXPECT_TRUE(input_noise(0.1, 0.4).diagonal().isApprox(q, 1e-14));
}

TEST(JacobianA, ZeroInputIsIdentity) {
  EXPECT_EQ(jacobian_A({1.5, -2, 0.7}, {}, 0.01), Mat3::Identity());
}

TEST(JacobianA, YawCouplingEntries) {
  const Mat3 a = jacobian_A({2, 1, 0.4}, {{0.3, 0.2}, 1.0, {0, 0}, 0.5}, 0.01);
  EXPECT_DOUBLE_EQ(a(0, 1), 0.01);
  EXPECT_DOUBLE_EQ(a(1, 0), -0.01);
  EXPECT_EQ(a(0, 2), 0.0);
  EXPECT_EQ(a(1, 2), 0.0);
  EXPECT_EQ(a(2, 2), 1.0);
}

TEST(JacobianB, ZeroStateStructure) {
  Mat36 expected;
  expected << -1, 0, 0, 1, 0, 0,  //
      0, -1, 0, 0, 1, 0,          //
      0, 0, -1, 0, 0, 1;
  EXPECT_TRUE(jacobian_B({0, 0, 0}, 0.01).isApprox(expected * 0.01, 1e-15));
}

TEST(JacobianB, YawRateColumnCarriesSkewTerm) {
  const Mat36 b = jacobian_B({1.5, -0.7, 0.9}, 0.02);
  EXPECT_DOUBLE_EQ(b(0, 2), -0.7 * 0.02);
  EXPECT_DOUBLE_EQ(b(1, 2), -1.5 * 0.02);
}

// Finite differences of the wrapped Euler step stay clear of the +-pi seam.
oracle::V3 sample_state(oracle::Gen& gen) { return {gen.uniform(-4, 4), gen.uniform(-4, 4), gen.uniform(-3.0, 3.0)}; }

TEST(JacobianA, MatchesCentralDifferencesOfStep) {
  oracle::Gen gen(21);
  const double dt = 0.01;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto x = sample_state(gen);
    const auto u = input(gen.input());
    const std::function<std::array<double, 3>(const std::array<double, 3>&)> step = [&](const oracle::V3& p) {
      const auto y = integrate_step({p[0], p[1], p[2]}, u, dt);
      return std::array<double, 3>{y.x, y.y, p[2] + wrap_angle(y.psi - p[2])};
    };
    const auto num = oracle::numeric_jacobian<3, 3>(step, x, 1e-5);
    const Mat3 a = jacobian_A(state(x), u, dt);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) worst = std::max(worst, rel_err(a(r, c), num[r][c]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(JacobianB, MatchesCentralDifferencesOfStep) {
  oracle::Gen gen(22);
  const double dt = 0.01;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto x = sample_state(gen);
    const auto u0 = gen.input();
    const std::function<std::array<double, 3>(const std::array<double, 6>&)> step = [&](const oracle::V6& uu) {
      const auto y = integrate_step(state(x), input(uu), dt);
      return std::array<double, 3>{y.x, y.y, x[2] + wrap_angle(y.psi - x[2])};
    };
    const auto num = oracle::numeric_jacobian<3, 6>(step, u0, 1e-5);
    const Mat36 b = jacobian_B(state(x), dt);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 6; ++c) worst = std::max(worst, rel_err(b(r, c), num[r][c]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(ObserveRange, Examples) {
  EXPECT_DOUBLE_EQ(observe_range({3, 4, 1.2}, 1.0, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(observe_range({0, 0, -0.4}, 1.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(observe_range({1, 2, 0}, 0.5, 1.0), std::sqrt(5.25));
}

TEST(JacobianH, Examples) {
  const auto h = jacobian_H({3, 4, 0.3}, 1.0, 1.0);
  ASSERT_TRUE(h.has_value());
  EXPECT_DOUBLE_EQ((*h)(0), 0.6);
  EXPECT_DOUBLE_EQ((*h)(1), 0.8);
  EXPECT_EQ((*h)(2), 0.0);
  EXPECT_FALSE(jacobian_H({0, 0, 1.0}, 1.0, 1.0).has_value());
  EXPECT_FALSE(jacobian_H({1e-7, 0, 1.0}, 1.0, 1.0).has_value());
}

TEST(JacobianH, MatchesCentralDifferencesOfRange) {
  oracle::Gen gen(23);
  double worst = 0.0;
  int checked = 0;
  while (checked < 1000) {
    const auto x = gen.state();
    const double hi = gen.uniform(0.2, 2.0), hj = gen.uniform(0.2, 2.0);
    if (observe_range(state(x), hi, hj) <= 0.1) continue;
    const std::function<std::array<double, 1>(const std::array<double, 3>&)> z = [&](const oracle::V3& p) {
      return std::array<double, 1>{oracle::range(p, hj - hi)};
    };
    const auto num = oracle::numeric_jacobian<1, 3>(z, x, 1e-6);
    const auto h = jacobian_H(state(x), hi, hj);
    ASSERT_TRUE(h.has_value());
    EXPECT_EQ((*h)(2), 0.0);
    for (int c = 0; c < 3; ++c) worst = std::max(worst, rel_err((*h)(c), num[0][c]));
    ++checked;
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Predict, ZeroInputAndVanishingQKeepsState) {
  EkfState s = initialize(Vec3(2, 3, 0.5).asDiagonal(), input_noise(1e-150, 1e-150), 0.01);
  s.x_hat = {1.0, -2.0, 0.4};
  const EkfState n = predict(s, {}, 0.01);
  EXPECT_EQ(n.x_hat.vec(), s.x_hat.vec());
  EXPECT_NEAR((n.P - s.P).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Predict, DefaultCovarianceTraceGrows) {
  oracle::Gen gen(24);
  for (int k = 0; k < 200; ++k) {
    EkfState s = initialize();
    s.x_hat = state(gen.state());
    const EkfState n = predict(s, input(gen.input()), 0.01);
    EXPECT_GT(n.P.trace(), s.P.trace());
  }
}

TEST(Predict, SingleStepMatchesMatrixOracle) {
  EkfState s = initialize();
  s.x_hat = {1.0, 1.0, 0.2};
  const EkfState n = predict(s, {{0.1, 0.0}, 0.3, {0.2, 0.1}, -0.1}, 0.01);
  // Frozen from the plain-array oracle.
  EXPECT_NEAR(n.x_hat.x, 1.0037614638248875, 1e-12);
  EXPECT_NEAR(n.x_hat.y, 0.99837740523943141, 1e-12);
  EXPECT_NEAR(n.x_hat.psi, 0.19600000000000017, 1e-12);
  Mat3 p;
  p << 10.00011868972452, -1.6242624950146877e-05, -0.00015374052394313641,  //
      -1.6242624950146877e-05, 10.000118810275481, 0.00019214638248874223,   //
      -0.00015374052394313641, 0.00019214638248874223, 0.10003200000000001;
  EXPECT_LT((n.P - p).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predict, RejectsNonPositiveStepAndFaultsOnNaN) {
  EXPECT_THROW(predict(initialize(), {}, 0.0), std::invalid_argument);
  EkfState s = initialize();
  s.x_hat.x = NAN;
  EXPECT_THROW(predict(s, {{1, 0}, 0, {0, 0}, 0}, 0.01), FilterFault);
}

TEST(Update, ZeroInnovationKeepsStateAndShrinksTrace) {
  oracle::Gen gen(25);
  for (int k = 0; k < 500; ++k) {
    EkfState s = initialize();
    s.x_hat = state(gen.state());
    for (int j = 0; j < 5; ++j) s = predict(s, input(gen.input()), 0.01);
    const double hi = gen.uniform(0.5, 1.5), hj = gen.uniform(0.5, 1.5);
    const RangeObservation obs{observe_range(s.x_hat, hi, hj), hi, hj, 0.0};
    const auto res = update(s, obs);
    ASSERT_EQ(res.outcome, UpdateOutcome::Applied);
    EXPECT_EQ(res.state.x_hat.vec(), s.x_hat.vec());
    EXPECT_LE(res.state.P.trace(), s.P.trace() + 1e-12);
  }
}

TEST(Update, HugeRangeNoiseLeavesEstimateAlone) {
  EkfState s = initialize(Mat3::Identity(), input_noise(0.25, 0.4), 1e12);
  s.x_hat = {1.0, 2.0, 0.3};
  const auto res = update(s, {4.0, 1.0, 1.0, 0.0});
  EXPECT_LT((res.state.x_hat.vec() - s.x_hat.vec()).norm(), 1e-10);
}

TEST(Update, DegenerateGeometryIsSkipped) {
  EkfState s = initialize();
  const auto res = update(s, {1.0, 1.0, 1.0, 0.0});
  EXPECT_EQ(res.outcome, UpdateOutcome::SkippedDegenerate);
  EXPECT_EQ(res.state.x_hat.vec(), s.x_hat.vec());
  EXPECT_EQ(res.state.P, s.P);
}

TEST(Update, GateRejectsWildInnovation) {
  EkfState s = initialize(Mat3::Identity() * 0.01, input_noise(0.25, 0.4), 0.01);
  s.x_hat = {2.0, 0.0, 0.0};
  const auto res = update(s, {10.0, 1.0, 1.0, 0.0});
  EXPECT_EQ(res.outcome, UpdateOutcome::RejectedGate);
  EXPECT_EQ(res.state.x_hat.vec(), s.x_hat.vec());
  EXPECT_EQ(update(s, {10.0, 1.0, 1.0, 0.0}, false).outcome, UpdateOutcome::Applied);
}

TEST(Update, NonPositiveInnovationVarianceFaults) {
  EkfState s = initialize();
  s.x_hat = {1.0, 0.0, 0.0};
  s.P = Mat3::Zero();
  s.R = 0.0;
  EXPECT_THROW(update(s, {1.0, 0.0, 0.0, 0.0}), FilterFault);
}

TEST(Cycle, PredictUpdateMatchesIndependentEkf) {
  // Frozen values from the oracle for the simulation-study filter settings.
  EkfState s = initialize();
  s.x_hat = {1.0, 1.0, 0.2};
  s = predict(s, {{0.1, 0.0}, 0.3, {0.2, 0.1}, -0.1}, 0.01);
  const auto res = update(s, {2.0, 1.0, 1.0, 0.0});
  ASSERT_EQ(res.outcome, UpdateOutcome::Applied);
  EXPECT_NEAR(res.innovation, 0.58426890987288793, 1e-9);
  EXPECT_NEAR(res.state.x_hat.x, 1.4175976415916018, 1e-9);
  EXPECT_NEAR(res.state.x_hat.y, 1.4099938121301954, 1e-9);
  EXPECT_NEAR(res.state.x_hat.psi, 0.19600154670545988, 1e-9);
  Mat3 p;
  p << 4.9781976631663181, -4.995000247639422, -0.00017250986574586546,  //
      -4.995000247639422, 5.0319273396402036, 0.00017347771733182819,    //
      -0.00017250986574586546, 0.00017347771733182819, 0.10003199992984993;
  EXPECT_LT((res.state.P - p).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Cycle, RandomSequencesMatchIndependentEkf) {
  oracle::Gen gen(26);
  for (int trial = 0; trial < 50; ++trial) {
    oracle::Ekf ref;
    ref.x = gen.state(3.0);
    ref.P = {{{2.0, 0.1, 0.0}, {0.1, 1.5, 0.05}, {0.0, 0.05, 0.2}}};
    const double qv = gen.uniform(0.05, 0.5), qr = gen.uniform(0.05, 0.5);
    for (int i = 0; i < 6; ++i) ref.Q[i][i] = (i == 2 || i == 5) ? qr * qr : qv * qv;
    ref.R = 0.01;

    Mat3 p0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) p0(r, c) = ref.P[r][c];
    EkfState s = initialize(p0, input_noise(qv, qr), ref.R);
    s.x_hat = state(ref.x);
    ref.x[2] = s.x_hat.psi;

    for (int step = 0; step < 20; ++step) {
      const auto u = gen.input();
      ref.predict(u, 0.01);
      s = predict(s, input(u), 0.01);
      if (step % 4 == 3) {
        const double dh = gen.uniform(-0.3, 0.3);
        const double d = oracle::range(ref.x, dh) + gen.normal(0.1);
        ref.update(d, dh);
        const auto res = update(s, {d, 1.0, 1.0 + dh, 0.0}, false);
        s = res.state;
      }
    }
    EXPECT_NEAR(s.x_hat.x, ref.x[0], 1e-9);
    EXPECT_NEAR(s.x_hat.y, ref.x[1], 1e-9);
    EXPECT_NEAR(wrap_angle(s.x_hat.psi - ref.x[2]), 0.0, 1e-9);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.P(r, c), ref.P[r][c], 1e-9);
  }
}

TEST(ConditionCovariance, SymmetrizesAndFloorsEigenvalues) {
  Mat3 p;
  p << 1.0, 0.2, 0.0,  //
      0.2000001, 1.0, 0.0, 0.0, 0.0, -1e-6;
  const Mat3 c = condition_covariance(p);
  EXPECT_EQ((c - c.transpose()).cwiseAbs().maxCoeff(), 0.0);
  Eigen::SelfAdjointEigenSolver<Mat3> eig(c);
  EXPECT_GE(eig.eigenvalues().minCoeff(), kEigenFloor * 0.99);
}

TEST(Filter, CovarianceStaysSymmetricPsdOverLongRun) {
  oracle::Gen gen(27);
  EkfState s = initialize();
  oracle::V3 truth{2.0, -1.0, 0.5};
  int updates = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto u = gen.input();
    truth = oracle::euler(truth, u, 0.01);
    oracle::V6 noisy = u;
    for (double& v : noisy) v += gen.normal(0.1);
    s = predict(s, input(noisy), 0.01);
    ASSERT_TRUE(symmetric_psd(s.P)) << "after predict " << k;
    if (k % 3 == 0) {
      const auto res = update(s, {oracle::range(truth, 0.0) + gen.normal(0.1), 1.0, 1.0, k * 0.01});
      s = res.state;
      updates += res.outcome == UpdateOutcome::Applied;
      ASSERT_TRUE(symmetric_psd(s.P)) << "after update " << k;
    }
  }
  EXPECT_GT(updates, 3000);
}

TEST(PairFilter, CountsOutcomesAndOutOfOrderStamps) {
  PairFilter f(initialize(Mat3::Identity() * 0.01, input_noise(0.25, 0.4), 0.01));
  f.predict({{0.0, 0.0}, 0.0, {0.5, 0.0}, 0.0}, 0.01);
  EXPECT_EQ(f.update({0.005, 1.0, 1.0, 0.02}), UpdateOutcome::Applied);
  EXPECT_EQ(f.update({1.0, 1.0, 1.0, 0.01}), UpdateOutcome::RejectedGate);
  EXPECT_EQ(f.updates_applied(), 1u);
  EXPECT_EQ(f.updates_rejected(), 1u);
  EXPECT_EQ(f.out_of_order(), 1u);
}

TEST(PairFilter, ReleasesGateAfterRunOfRejections) {
  EkfState init = initialize(Mat3::Identity() * 0.01, input_noise(0.25, 0.4), 0.01);
  init.x_hat = {1.0, 0.0, 0.0};
  PairFilter f(init);
  for (int k = 0; k < kGateRelease; ++k) EXPECT_EQ(f.update({5.0, 1.0, 1.0, k * 0.01}), UpdateOutcome::RejectedGate);
  EXPECT_EQ(f.update({5.0, 1.0, 1.0, 1.0}), UpdateOutcome::Applied);
  EXPECT_EQ(f.gate_releases(), 1u);
  EXPECT_GT(f.estimate().x, 1.0);

  PairFilter closed(init, true, 0);
  for (int k = 0; k < 3 * kGateRelease; ++k) EXPECT_EQ(closed.update({5.0, 1.0, 1.0, k * 0.01}), UpdateOutcome::RejectedGate);
}

// Noise-free pair driven with piecewise-constant velocities and no yaw rates; the Euler
// step is exact for both orderings of the pair, so both filters see consistent data.
TEST(PairFilter, EstimatesAreConsistentUnderRelabeling) {
  oracle::Gen gen(28);
  const double dt = 0.01;
  Vec2 pi(0, 0), pj(2.0, -1.5);
  const double yi = 0.3, yj = -0.6;

  auto rel = [](const Vec2& a, double ya, const Vec2& b, double yb) {
    const Vec2 p = rotation(ya).transpose() * (b - a);
    return RelativeState{p.x(), p.y(), wrap_angle(yb - ya)};
  };
  const EkfState base = initialize(Vec3(1.0, 1.0, 0.1).asDiagonal(), input_noise(0.05, 0.05), 0.01 * 0.01);
  EkfState s_ij = base, s_ji = base;
  const auto t_ij = rel(pi, yi, pj, yj), t_ji = rel(pj, yj, pi, yi);
  s_ij.x_hat = {t_ij.x + 0.4, t_ij.y - 0.3, wrap_angle(t_ij.psi + 0.15)};
  s_ji.x_hat = {t_ji.x - 0.3, t_ji.y + 0.4, wrap_angle(t_ji.psi - 0.15)};
  PairFilter f_ij(s_ij), f_ji(s_ji);

  Vec2 vi = Vec2::Zero(), vj = Vec2::Zero();
  for (int k = 0; k < 30000; ++k) {
    if (k % 100 == 0) {
      vi = Vec2(gen.uniform(-0.5, 0.5), gen.uniform(-0.5, 0.5));
      vj = Vec2(gen.uniform(-0.5, 0.5), gen.uniform(-0.5, 0.5));
      // Keep the pair within a few metres.
      const Vec2 gap = pj - pi;
      if (gap.norm() > 4.0) vj -= 0.3 * rotation(yj).transpose() * gap.normalized();
    }
    pi += rotation(yi) * vi * dt;
    pj += rotation(yj) * vj * dt;
    f_ij.predict({HorizontalVelocity::from(vi), 0.0, HorizontalVelocity::from(vj), 0.0}, dt);
    f_ji.predict({HorizontalVelocity::from(vj), 0.0, HorizontalVelocity::from(vi), 0.0}, dt);
    const double d = (pj - pi).norm();
    f_ij.update({d, 1.0, 1.0, k * dt});
    f_ji.update({d, 1.0, 1.0, k * dt});
  }

  const RelativeState a = f_ij.estimate(), b = f_ji.estimate();
  const Vec2 mapped = -(rotation(a.psi).transpose() * a.position());
  EXPECT_NEAR(b.x, mapped.x(), 1e-6);
  EXPECT_NEAR(b.y, mapped.y(), 1e-6);
  EXPECT_NEAR(wrap_angle(b.psi + a.psi), 0.0, 1e-6);
}

}  // namespace
}  // namespace relloc::ekf
