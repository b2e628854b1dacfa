import numpy as np
import pytest

from conditions.cones import Cone, ConeKind
from curvature.tensor import CurvatureTensor
from flow.integrator import Method, StepControl, blowup_time_estimate, integrate
from models.builders import constant_curvature
from utils.errors import BlowupReached, MaxStepsExceeded, RangeViolation


def kappa(t, kappa0=1.0, n=3):
    return kappa0 / (1.0 - 2.0 * (n - 1) * kappa0 * t)


def test_round_three_sphere_solution(settings):
    traj = integrate(constant_curvature(3, 1.0), 0.2, settings=settings)
    assert traj.final_time == pytest.approx(0.2, abs=1e-14)
    assert traj.final.allclose(constant_curvature(3, 5.0), atol=5e-6)
    for t, state in zip(traj.times, traj.states):
        assert state[0, 1, 0, 1] == pytest.approx(kappa(t), rel=1e-6)


def test_blowup_time_is_extrapolated(settings):
    with pytest.raises(BlowupReached) as exc:
        integrate(constant_curvature(3, 1.0), 0.3, settings=settings)
    assert exc.value.blowup_time == pytest.approx(0.25, abs=1e-6)
    traj = exc.value.trajectory
    assert traj.final_time < 0.25
    assert np.isfinite(traj.final.max_norm)


def test_zero_tensor_is_stationary(zero4, settings):
    traj = integrate(zero4, 1.0, settings=settings)
    assert traj.final.max_norm == 0.0
    assert traj.final_time == pytest.approx(1.0)


def test_negative_curvature_decays(settings):
    traj = integrate(constant_curvature(4, -1.0), 1.0, settings=settings)
    assert traj.final[0, 1, 0, 1] == pytest.approx(kappa(1.0, -1.0, 4), rel=1e-6)


def test_rk4_is_fourth_order(settings):
    errors = []
    for h in (0.01, 0.005):
        ctl = StepControl.from_settings(settings, method="rk4", h_init=h)
        traj = integrate(constant_curvature(3, 1.0), 0.1, ctl, settings=settings)
        errors.append(abs(traj.final[0, 1, 0, 1] - kappa(0.1)))
    assert 12.0 < errors[0] / errors[1] < 20.0


def test_adaptive_flow_keeps_bianchi(random_tensors, settings):
    R = random_tensors(5, 1, seed=3, scale=0.5)[0]
    traj = integrate(R, 0.01, settings=settings)
    assert max(s.bianchi_residual() for s in traj.states) < 1e-9


def test_step_control_validation():
    with pytest.raises(RangeViolation):
        StepControl(rel_tol=0.0)
    with pytest.raises(RangeViolation):
        StepControl(record_every=0)
    with pytest.raises(RangeViolation):
        StepControl(normalize=-1.0)
    with pytest.raises(ValueError):
        StepControl(method="euler")
    assert StepControl(method="RK4").method == Method.RK4


def test_step_control_ignores_missing_overrides(settings):
    ctl = StepControl.from_settings(settings, rel_tol=None, max_steps=10)
    assert ctl.rel_tol == settings.integrator.rel_tol
    assert ctl.max_steps == 10


def test_end_time_must_be_positive(sphere4, settings):
    with pytest.raises(RangeViolation):
        integrate(sphere4, 0.0, settings=settings)


def test_step_budget(sphere4, settings):
    ctl = StepControl.from_settings(settings, max_steps=3, h_init=1e-6)
    with pytest.raises(MaxStepsExceeded) as exc:
        integrate(sphere4, 0.1, ctl, settings=settings)
    assert exc.value.trajectory.steps == 3


def test_records_and_columns(sphere4, settings):
    ctl = StepControl.from_settings(settings, record_every=2, dump_every=3)
    traj = integrate(sphere4, 0.01, ctl, cones=[Cone(ConeKind.PIC)], settings=settings)
    header = traj.to_columns().splitlines()[0]
    assert header == "# t h scal ric_sq norm margin[pic]"
    assert traj.records[0]["t"] == 0.0
    assert traj.records[-1]["t"] == pytest.approx(0.01)
    assert np.all(traj.column("margin[pic]") > 0.0)
    assert [d[0] for d in traj.dumps] == list(range(3, traj.steps + 1, 3))
    summary = traj.summary()
    assert summary["final_scal"] == pytest.approx(12.0 * traj.final[0, 1, 0, 1])


def test_fixed_scalar_view(settings):
    ctl = StepControl.from_settings(settings, normalize=6.0)
    traj = integrate(constant_curvature(3, 1.0), 0.2, ctl, settings=settings)
    assert np.allclose(traj.column("scal"), 6.0)
    assert traj.column("raw_scal")[-1] == pytest.approx(30.0, rel=1e-6)


def test_blowup_estimate_for_constant_curvature():
    times = [0.0, 0.05, 0.1, 0.2]
    assert blowup_time_estimate(times, [kappa(t) for t in times]) == pytest.approx(0.25)
    assert blowup_time_estimate(times, [4.0, 3.0, 2.0, 1.0]) is None
    assert blowup_time_estimate([0.0], [1.0]) is None


def test_flat_plane_records(settings):
    traj = integrate(CurvatureTensor.zeros(2), 0.5, settings=settings)
    assert traj.column("scal").tolist() == [0.0] * len(traj.records)


def test_scalar_curvature_grows_at_twice_ricci_norm(random_tensors, settings):
    R = constant_curvature(4, 1.0) + 0.3 * random_tensors(4, 1, seed=9)[0]
    ctl = StepControl.from_settings(settings, method="rk4", h_init=1e-3, record_every=1)
    traj = integrate(R, 0.05, ctl, settings=settings)
    t, scal, ric_sq = traj.column("t"), traj.column("scal"), traj.column("ric_sq")
    rate = (scal[2:] - scal[:-2]) / (t[2:] - t[:-2])
    assert len(rate) > 40
    assert np.allclose(rate, 2.0 * ric_sq[1:-1], rtol=1e-5)
