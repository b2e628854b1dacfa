import numpy as np
import pytest

from conditions.cones import Cone, ConeKind
from flow.experiments import (
    child_seeds, convergence_experiment, interior_estimate_monitor, invariance_experiment, ray_distance,
    rescaled_limit_check,
)
from flow.integrator import StepControl, integrate
from models.builders import constant_curvature
from utils.errors import HypothesisViolated, NotInCone, WrongDimension


def test_child_seeds_are_reproducible():
    assert child_seeds(3, 4) == child_seeds(3, 4)
    assert len(set(child_seeds(3, 4))) == 4
    assert child_seeds(3, 2) == child_seeds(3, 4)[:2]


def test_round_sphere_stays_inside(sphere4, settings):
    report = invariance_experiment(Cone(ConeKind.PIC), 0, horizon=0.02, settings=settings,
                                   inputs=[sphere4], watched=[Cone(ConeKind.PIC2)])
    item = report.items[0]
    assert item.inside and item.error is None
    assert item.t_end == 0.02 and item.blowup_time is None
    assert item.min_margins["pic"] == pytest.approx(4.0, rel=1e-6)
    assert item.min_relative["pic2"] == pytest.approx(1.0, rel=1e-6)
    assert report.violations == [] and not report.exploratory


def test_random_starts_stay_inside(settings):
    report = invariance_experiment(Cone(ConeKind.PIC2), 2, horizon=0.02, seed=3, settings=settings)
    assert [item.seed for item in report.items] == child_seeds(3, 2)
    assert all(item.inside for item in report.items)
    assert report.violations == []
    assert report.to_dict()["violation_count"] == 0


def test_outside_inputs_are_flagged_not_flowed(settings):
    report = invariance_experiment(Cone(ConeKind.PIC), 0, horizon=0.01, settings=settings,
                                   inputs=[constant_curvature(4, -1.0)])
    assert report.outside_inputs == [0]
    assert report.items[0].steps == 0


def test_failing_items_are_reported(settings):
    report = invariance_experiment(Cone(ConeKind.PIC), 0, horizon=0.01, settings=settings,
                                   inputs=[constant_curvature(3, 1.0)])
    assert report.errors == [{"type": "WrongDimension", "message": report.items[0].error, "item": "sample 0"}]
    assert report.outside_inputs == []


def test_non_invariant_cones_are_exploratory(sphere4, settings):
    report = invariance_experiment(Cone(ConeKind.SEC_NONNEG), 0, horizon=0.01, settings=settings, inputs=[sphere4])
    assert report.exploratory


def test_ray_distance(sphere4, s2xs2):
    assert ray_distance(3.0 * sphere4) == pytest.approx(0.0, abs=1e-15)
    assert ray_distance(s2xs2) > 0.0
    assert ray_distance(-1.0 * sphere4) == float("inf")


def test_round_sphere_convergence(sphere4, settings):
    report = convergence_experiment(sphere4, settings=settings, horizon=0.05)
    assert report.initial_ratio == pytest.approx(1.0)
    assert report.reached_target and report.time_to_target == 0.0
    assert report.final_ray_distance < 1e-10


def test_near_round_start_becomes_round(sphere4, random_tensors, settings):
    R0 = sphere4 + 0.05 * random_tensors(4, 1, seed=2)[0]
    report = convergence_experiment(R0, settings=settings)
    assert report.blowup_time is not None
    assert report.final_ratio > report.initial_ratio
    assert report.reached_target
    assert report.final_ray_distance < report.ray_distances[0]


def test_convergence_needs_strict_pic2(s2xs2, settings):
    with pytest.raises(NotInCone):
        convergence_experiment(s2xs2, settings=settings, horizon=0.01)


def test_interior_estimate_on_round_flow(settings):
    traj = integrate(constant_curvature(3, 1.0), 0.2, settings=settings)
    estimate = interior_estimate_monitor(traj, 0.1)
    assert estimate.sigma == pytest.approx(0.01)
    assert estimate.max_q < 1e-20 and estimate.flagged == []


def test_interior_estimate_hypotheses(sphere4, settings):
    with pytest.raises(WrongDimension):
        interior_estimate_monitor(integrate(sphere4, 0.01, settings=settings), 0.1)
    with pytest.raises(HypothesisViolated):
        interior_estimate_monitor(integrate(constant_curvature(3, -1.0), 0.01, settings=settings), 0.1)


def test_rescaled_round_sphere_is_constant(settings):
    traj = integrate(constant_curvature(3, 1.0), 0.2, settings=settings)
    limit = rescaled_limit_check(traj, 0.25)
    assert np.allclose(limit.values, 1.0, rtol=1e-6)
    assert rescaled_limit_check(traj).final_deviation < 1e-6


def test_rescaled_limit_without_blowup(zero4, settings):
    limit = rescaled_limit_check(integrate(zero4, 0.1, StepControl.from_settings(settings), settings=settings))
    assert limit.blowup_time is None and limit.values == []


def test_fubini_study_stays_on_its_ray(fs2, settings):
    report = convergence_experiment(fs2, settings=settings, horizon=0.01, require_strict=False)
    assert np.allclose(report.ratios, 0.25, atol=1e-4)
    assert not report.reached_target
    assert report.final_ray_distance > 0.0
    assert np.allclose(report.ray_distances, report.ray_distances[0], rtol=1e-6)


def test_horizon_is_capped_below_a_nearby_blowup(sphere4, settings):
    # the unit four-sphere blows up at 1/6
    report = invariance_experiment(Cone(ConeKind.PIC), 0, horizon=0.16, settings=settings, inputs=[sphere4])
    item = report.items[0]
    assert item.blowup_time == pytest.approx(1.0 / 6.0, rel=1e-5)
    assert item.t_end == pytest.approx(0.9 / 6.0, rel=1e-5)
    assert item.inside
