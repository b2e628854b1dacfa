import numpy as np
import pytest

from conditions.cones import Cone, ConeKind
from conditions.margins import cone_margin
from curvature.frames import Frame4, complete_basis, polar_retract, random_frame
from curvature.quantities import isotropic_quantity
from flow.boundary import (
    boundary_identity_check, boundary_inward_value, first_variation, frame_components,
    key_inequality_residual, second_variation_form,
)
from models.builders import constant_curvature, flat_extend
from models.shift import shift_into_cone
from utils.errors import WrongDimension


def test_round_sphere_identity(sphere4):
    F = Frame4.standard(4)
    # Q(I) = 6 I in dimension four
    assert boundary_inward_value(sphere4, F) == pytest.approx(24.0)
    assert boundary_identity_check(sphere4, F) < 1e-14


def test_identity_holds_for_any_tensor_and_frame(random_tensors, rng):
    for n in (4, 5, 6):
        for R in random_tensors(n, 3, seed=10 * n):
            assert boundary_identity_check(R, random_frame(n, rng)) < 1e-12


def test_split_frame_of_sphere_product(s2xs2):
    F = Frame4.standard(4)
    assert isotropic_quantity(s2xs2, F) == pytest.approx(0.0, abs=1e-15)
    report = key_inequality_residual(s2xs2, F)
    assert report.residual == pytest.approx(0.0, abs=1e-14)
    assert report.step2 == [] and report.step3 == 0.0
    assert max(abs(r) for r in report.step1_residuals) < 1e-14
    assert report.first_variation_max < 1e-14
    assert report.second_variation_min is None


def test_split_frame_with_flat_factor(s2xs2):
    R = flat_extend(s2xs2, 2)
    F = Frame4.standard(6)
    report = key_inequality_residual(R, F)
    assert len(report.step2) == 2
    assert report.residual == pytest.approx(report.step1 + 2.0 * sum(report.step2) + report.step3, abs=1e-14)
    assert report.second_variation_min >= -1e-14


def test_residual_splits_by_index_range(random_tensors, rng):
    for R in random_tensors(6, 3, seed=5):
        F = random_frame(6, rng)
        report = key_inequality_residual(R, F)
        assert report.residual == pytest.approx(report.step1 + 2.0 * sum(report.step2) + report.step3, abs=1e-12)
        trace = second_variation_form(R, F).trace_inequality
        assert report.step3 == pytest.approx(trace, abs=1e-12)


def test_second_variation_matches_finite_differences(random_tensors, rng):
    R = random_tensors(6, 1, seed=12)[0]
    F = random_frame(6, rng)
    E = F.vectors
    outside = complete_basis(E)[4:]
    form = second_variation_form(R, F)
    assert form.dimension == 8

    c = rng.standard_normal((4, 2))
    W = c @ outside
    h = 1e-4

    def value(s):
        return isotropic_quantity(R, polar_retract(E + s * W))

    fd = (value(h) - 2.0 * value(0.0) + value(-h)) / h ** 2
    x = c.reshape(-1)
    assert x @ form.matrix @ x == pytest.approx(fd, rel=1e-5, abs=1e-5)


def test_constant_curvature_has_flat_second_variation():
    R = constant_curvature(6, 1.0)
    form = second_variation_form(R, Frame4.standard(6))
    assert np.allclose(form.matrix, 0.0, atol=1e-14)
    # strictly inside the cone: only the (p, p) terms survive, 4 each
    assert form.trace_inequality == pytest.approx(8.0)


def test_first_variation_is_antisymmetric_in_frame(random_tensors, rng):
    R = random_tensors(5, 1, seed=21)[0]
    fv = first_variation(R, random_frame(5, rng), lam=0.5, mu=0.8)
    assert fv.shape == (4, 5)
    assert np.allclose(fv[:, :4], -fv[:, :4].T)


def test_frame_dimension_must_match(random_tensors, rng):
    R = random_tensors(5, 1)[0]
    with pytest.raises(WrongDimension):
        frame_components(R, random_frame(4, rng))


def test_boundary_tensor_points_inward(random_tensors, settings):
    base = random_tensors(5, 1, seed=44)[0]
    cone = Cone(ConeKind.PIC)
    R = shift_into_cone(base, cone, 0.0, settings, seed=1).tensor
    report = cone_margin(R, cone, settings, seed=1)
    scale = max(1.0, R.max_norm)
    assert abs(report.margin) <= 1e-8 * scale

    F = Frame4(report.frame)
    assert boundary_inward_value(R, F) >= -1e-6 * scale ** 2
    key = key_inequality_residual(R, F)
    assert key.first_variation_max <= 1e-5 * scale
    assert key.second_variation_min >= -1e-5 * scale
    assert key.residual >= -1e-5 * scale ** 2
