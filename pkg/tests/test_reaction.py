import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from curvature.quantities import ricci
from flow.reaction import q_reference, q_tensor, trace_q
from models.builders import constant_curvature, product, random_tensor


@pytest.mark.parametrize("n", [3, 4, 5])
def test_constant_curvature(n):
    # Q(kappa I) = 2 (n - 1) kappa^2 I
    Q = q_tensor(constant_curvature(n, 0.5))
    assert Q.allclose(constant_curvature(n, 2.0 * (n - 1) * 0.25), atol=1e-14)


def test_split_product_reacts_factorwise(s2xs2):
    # each round two-sphere factor has Q = 2 kappa^2 I on its own block
    assert q_tensor(s2xs2).allclose(2.0 * s2xs2, atol=1e-14)


def test_product_with_flat_factor_stays_split():
    base = constant_curvature(3, 1.0)
    Q = q_tensor(product(base, constant_curvature(2, 0.0)))
    assert Q.allclose(product(q_tensor(base), constant_curvature(2, 0.0)), atol=1e-14)


def test_matches_direct_summation(random_tensors):
    for R in random_tensors(4, 2, seed=90):
        assert np.allclose(q_tensor(R).full, q_reference(R), atol=1e-12)


def test_trace_identity(random_tensors):
    for R in random_tensors(5, 5, seed=11):
        assert trace_q(R) == pytest.approx(2.0 * float(np.sum(ricci(R) ** 2)), rel=1e-10, abs=1e-12)


def test_quadratic_scaling(random_tensors):
    R = random_tensors(4, 1, seed=4)[0]
    assert q_tensor(-2.0 * R).allclose(4.0 * q_tensor(R), atol=1e-12)


def test_rotation_equivariance(random_tensors, random_orthogonal):
    R = random_tensors(5, 1, seed=6)[0]
    Q = random_orthogonal(5, seed=8)
    assert q_tensor(R.rotated(Q)).allclose(q_tensor(R).rotated(Q), atol=1e-12)


def test_result_satisfies_bianchi(random_tensors):
    for R in random_tensors(5, 3, seed=70):
        assert q_tensor(R).bianchi_residual() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 16), st.floats(min_value=0.1, max_value=3.0))
def test_scaling_property(seed, c):
    R = random_tensor(4, seed, 1.0)
    assert q_tensor(c * R).allclose(c * c * q_tensor(R), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 16),
       arrays(np.float64, (4, 4), elements=st.floats(min_value=-1.0, max_value=1.0)))
def test_rotation_property(seed, A):
    Q, _ = np.linalg.qr(A + 4.0 * np.eye(4))
    R = random_tensor(4, seed, 1.0)
    assert q_tensor(R.rotated(Q)).allclose(q_tensor(R).rotated(Q), atol=1e-10)
