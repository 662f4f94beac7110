import math

import numpy as np
import pytest

import relloc
from relloc import ekf, obs, ranging


def test_dynamics_of_target_moving_along_x():
    u = relloc.InputVector(v_j=relloc.HorizontalVelocity(1.0, 0.0))
    f = relloc.relative_dynamics(relloc.RelativeState(0.0, 0.0, 0.0), u)
    np.testing.assert_allclose(f, [1.0, 0.0, 0.0])


def test_integrate_step_wraps_yaw():
    u = relloc.InputVector(r_j=10.0)
    y = relloc.integrate_step(relloc.RelativeState(0.0, 0.0, 3.1), u, 0.01)
    assert y.psi == pytest.approx(3.2 - 2 * math.pi)


def test_level_attitude_projects_body_velocity():
    v = relloc.body_to_horizontal_velocity(np.array([0.3, -0.2, 1.0]), relloc.Attitude())
    assert (v.vx, v.vy) == (0.3, -0.2)


def test_filter_converges_on_stationary_pair():
    truth = relloc.RelativeState(2.0, 1.0, 0.3)
    f = ekf.PairFilter()
    u = relloc.InputVector(v_i=relloc.HorizontalVelocity(0.4, 0.0), r_i=0.1,
                           v_j=relloc.HorizontalVelocity(0.0, 0.3), r_j=-0.2)
    dt = 0.01
    for k in range(6000):
        t = k * dt
        u.v_i = relloc.HorizontalVelocity(0.5 * math.sin(0.7 * t), 0.5 * math.cos(0.5 * t))
        u.v_j = relloc.HorizontalVelocity(0.4 * math.cos(0.9 * t), -0.4 * math.sin(0.3 * t))
        truth = relloc.integrate_step(truth, u, dt)
        f.predict(u, dt)
        f.update(ekf.RangeObservation(ekf.observe_range(truth), t=t))
    est = f.estimate
    assert math.hypot(est.x - truth.x, est.y - truth.y) < 0.05
    assert abs(relloc.wrap_angle(est.psi - truth.psi)) < 0.05
    P = f.state.P
    np.testing.assert_allclose(P, P.T)
    assert np.linalg.eigvalsh(P).min() > 0.0


def test_update_rejects_gross_outlier():
    s = ekf.initialize()
    s.x_hat = relloc.RelativeState(1.0, 0.0, 0.0)
    s.P = np.eye(3) * 1e-4
    r = ekf.update(s, ekf.RangeObservation(50.0))
    assert r.outcome == ekf.UpdateOutcome.RejectedGate


def test_formation_lock_is_singular():
    x = relloc.RelativeState(1.5, -0.7, 0.9)
    v = np.array([0.4, 0.2])
    vj = relloc.rotation(x.psi).T @ v
    u = relloc.InputVector(v_i=relloc.HorizontalVelocity(*v), v_j=relloc.HorizontalVelocity(*vj))
    assert abs(obs.determinant_O(x, u).matrix) < 1e-9
    assert "FormationLock" in obs.classify_regime(x, u)


def test_generic_configuration_is_observable():
    x = relloc.RelativeState(1.0, 2.0, 0.3)
    u = relloc.InputVector(relloc.HorizontalVelocity(0.1, -0.2), 0.5, relloc.HorizontalVelocity(0.4, 0.1), -0.2)
    report = obs.analyze(x, u)
    assert report.rank == 3
    assert report.flags == "Observable"
    assert report.det.matrix == pytest.approx(report.det.closed_form, rel=1e-9)


def test_schedule_covers_every_pair_once():
    for n in range(2, 8):
        pairs = ranging.build_schedule(n)
        assert len(pairs) == n * (n - 1) // 2
        assert {frozenset(p) for p in pairs} == {frozenset((a, b)) for a in range(1, n + 1) for b in range(a + 1, n + 1)}
    assert ranging.pair_frequency(6) == pytest.approx(20.0)


def test_bias_correction_and_median():
    assert ranging.bias_correct(2.764) == pytest.approx(2.764 - (0.072 * 2.764 + 0.62))
    assert ranging.bias_correct(0.1) == 0.0
    assert ranging.median([5.0, 1.0, 3.0, 100.0, 2.0]) == 3.0


def test_short_convergence_study_is_deterministic():
    c = relloc.sim.ScenarioConfig()
    c.duration = 10.0
    a = relloc.sim.convergence_study(c, 2, 1)
    b = relloc.sim.convergence_study(c, 2, 2)
    assert [t.seed for t in a.trials] == [t.seed for t in b.trials]
    assert [t.mae.x for t in a.trials] == [t.mae.x for t in b.trials]
    assert a.duration == 10.0


def test_version_is_exposed():
    assert relloc.__version__ == "0.1.0"
