import numpy as np
import pytest

from conditions.cones import Cone, ConeKind
from conditions.crosscheck import admissible_pair, complex_condition_crosscheck, constraint_residual
from models.builders import constant_curvature
from utils.errors import WrongDimension


@pytest.mark.parametrize("kind", [ConeKind.PIC, ConeKind.PIC1, ConeKind.PIC2])
def test_admissible_pairs_satisfy_constraints(kind, rng):
    for _ in range(20):
        zeta, eta = admissible_pair(kind, 5, rng)
        assert constraint_residual(kind, zeta, eta) <= 1e-10


def test_isotropic_pairs_are_null():
    rng = np.random.default_rng(4)
    zeta, eta = admissible_pair(ConeKind.PIC, 4, rng)
    assert abs(np.sum(zeta * zeta)) < 1e-10
    assert abs(np.sum(zeta * eta)) < 1e-10
    assert abs(np.sum(eta * eta)) < 1e-10


@pytest.mark.parametrize("kind", [ConeKind.PIC, ConeKind.PIC1, ConeKind.PIC2])
def test_round_sphere_agrees(sphere4, settings, kind):
    verdict = complex_condition_crosscheck(sphere4, Cone(kind), samples=50, settings=settings, seed=3)
    assert verdict.sign_agreement
    assert verdict.negative_count == 0
    assert verdict.max_imaginary < 1e-10


def test_negative_curvature_agrees(settings):
    verdict = complex_condition_crosscheck(constant_curvature(4, -1.0), Cone(ConeKind.PIC1),
                                           samples=50, settings=settings, seed=5)
    assert verdict.frame_margin < 0.0
    assert verdict.negative_count > 0
    assert verdict.sign_agreement


def test_random_tensor_agrees(random_tensors, settings):
    R = random_tensors(5, 1, seed=77)[0]
    verdict = complex_condition_crosscheck(R, Cone(ConeKind.PIC), samples=100, settings=settings, seed=6)
    assert verdict.sign_agreement
    # the certificate pair is among the samples
    assert verdict.min_value <= verdict.frame_margin + 1e-10


def test_cross_check_rejects_other_cones(sphere4, settings):
    with pytest.raises(ValueError):
        complex_condition_crosscheck(sphere4, Cone(ConeKind.SEC_NONNEG), samples=5, settings=settings)
    with pytest.raises(WrongDimension):
        complex_condition_crosscheck(constant_curvature(3), Cone(ConeKind.PIC), samples=5, settings=settings)


def test_verdict_dict(sphere4, settings):
    data = complex_condition_crosscheck(sphere4, Cone(ConeKind.PIC), samples=10, settings=settings, seed=1).to_dict()
    assert data["cone"] == "pic"
    assert data["samples"] == 11
    assert data["seed"] == 1
