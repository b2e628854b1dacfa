import numpy as np
import pytest

from curvature.decomposition import dim4_decompose
from curvature.frames import ComplexVector, Frame4, random_frame
from curvature.quantities import (
    complex_pair_from_frame, complexify_eval, frame_form, isotropic_coefficients, isotropic_quantity,
    operator_eigenvalues, operator_matrix, pic1_quantity, pic2_quantity, ricci, scalar, sectional,
    traceless_ricci,
)
from models.builders import constant_curvature, fubini_study
from utils.errors import BadFrame, DegeneratePlane, RangeViolation, WrongDimension


def test_sectional_constant_curvature(sphere4):
    I = np.eye(4)
    assert sectional(sphere4, 2.0 * I[0], I[1]) == pytest.approx(1.0)
    assert sectional(sphere4, I[0] + I[1], I[1] - I[2]) == pytest.approx(1.0)


def test_sectional_degenerate_plane(sphere4):
    with pytest.raises(DegeneratePlane):
        sectional(sphere4, np.eye(4)[0], 3.0 * np.eye(4)[0])


def test_ricci_and_scalar(sphere4, fs2):
    assert np.allclose(ricci(sphere4), 3.0 * np.eye(4))
    assert scalar(sphere4) == pytest.approx(12.0)
    assert np.allclose(ricci(fs2), 6.0 * np.eye(4))
    assert np.max(np.abs(traceless_ricci(fubini_study(3)))) < 1e-12


def test_isotropic_quantity_models(sphere4, s2xs2):
    assert isotropic_quantity(sphere4, Frame4.standard(4)) == pytest.approx(4.0)
    assert isotropic_quantity(s2xs2, Frame4.standard(4)) == pytest.approx(0.0, abs=1e-15)


def test_isotropic_quantity_needs_n4():
    with pytest.raises(WrongDimension):
        isotropic_quantity(constant_curvature(3), np.eye(4)[:4, :3])


def test_frame_must_be_orthonormal(sphere4):
    E = np.eye(4)
    E[1] = E[0]
    with pytest.raises(BadFrame):
        isotropic_quantity(sphere4, E)


def test_isotropic_discrete_symmetries(random_tensors, rng):
    for R in random_tensors(5, 10, seed=40):
        F = random_frame(5, rng)
        value = isotropic_quantity(R, F)
        assert isotropic_quantity(R, F.permuted((1, 0, 3, 2))) == pytest.approx(value, abs=1e-12)
        assert isotropic_quantity(R, F.permuted((2, 3, 0, 1))) == pytest.approx(value, abs=1e-12)


def test_weights_reduce_to_isotropic(random_tensors, rng):
    R = random_tensors(4, 1, seed=9)[0]
    F = random_frame(4, rng)
    assert pic1_quantity(R, F, 1.0) == pytest.approx(isotropic_quantity(R, F))
    assert pic2_quantity(R, F, 1.0, 1.0) == pytest.approx(isotropic_quantity(R, F))
    assert pic2_quantity(R, F, 0.3, 1.0) == pytest.approx(pic1_quantity(R, F, 0.3))


def test_weight_range(sphere4):
    F = Frame4.standard(4)
    with pytest.raises(RangeViolation):
        pic1_quantity(sphere4, F, -0.5)
    assert pic1_quantity(sphere4, F, -0.5, "sym") == pytest.approx(2.0 + 2.0 * 0.25)


def test_complexified_matches_frame_quantity(random_tensors, rng):
    # R(zeta, eta, conj zeta, conj eta) with zeta = e1 + i mu e2, eta = e3 + i lam e4
    for R in random_tensors(5, 20, seed=100):
        F = random_frame(5, rng)
        lam, mu = rng.uniform(0.0, 1.0, 2)
        zeta, eta = complex_pair_from_frame(F.vectors, lam, mu)
        value = complexify_eval(R, ComplexVector.from_complex(zeta), ComplexVector.from_complex(eta))
        assert abs(value.imag) < 1e-10
        assert value.real == pytest.approx(pic2_quantity(R, F, lam, mu), abs=1e-10)


def test_frame_form_gradient_matches_finite_differences(random_tensors, rng):
    R = random_tensors(5, 1, seed=3)[0]
    E = random_frame(5, rng).vectors
    C = isotropic_coefficients(0.7, 0.4)
    _, G = frame_form(R, E, C)
    D = rng.standard_normal(E.shape)
    h = 1e-6
    plus, _ = frame_form(R, E + h * D, C)
    minus, _ = frame_form(R, E - h * D, C)
    assert (plus - minus) / (2 * h) == pytest.approx(float(np.sum(G * D)), rel=1e-6, abs=1e-8)


def test_operator_of_constant_curvature(sphere4):
    w = operator_eigenvalues(constant_curvature(3, 1.0))
    assert np.allclose(w, w[0]) and w[0] > 0.0
    assert np.allclose(operator_matrix(sphere4), 4.0 * np.eye(6))


def test_operator_quadratic_form_is_full_index_sum(random_tensors, rng):
    R = random_tensors(4, 1, seed=21)[0]
    x = rng.standard_normal(6)
    phi = np.zeros((4, 4))
    for a, (i, j) in enumerate([(i, j) for i in range(4) for j in range(i + 1, 4)]):
        phi[i, j], phi[j, i] = x[a], -x[a]
    full_sum = np.einsum("ijkl,ij,kl->", R.full, phi, phi)
    assert x @ operator_matrix(R) @ x == pytest.approx(full_sum, rel=1e-12)


def test_gauss_bonnet_integrand_of_round_s4(sphere4):
    dec = dim4_decompose(sphere4)
    assert dec.gb_integrand == pytest.approx(24.0, abs=1e-12)
    # integrand times vol(S^4) = 8 pi^2 / 3 gives 32 pi^2 chi with chi = 2
    assert dec.gb_integrand * 8.0 * np.pi ** 2 / 3.0 == pytest.approx(32.0 * np.pi ** 2 * 2.0)
    assert dec.weyl_norm_sq < 1e-24


def test_decomposition_recomposes(random_tensors):
    for R in random_tensors(4, 5, seed=60):
        dec = dim4_decompose(R)
        assert np.allclose(dec.recomposed(), R.full, atol=1e-12)
        # Weyl part is totally trace-free
        assert np.max(np.abs(np.einsum("ikjk->ij", dec.weyl))) < 1e-12


def test_decomposition_needs_dimension_four():
    with pytest.raises(WrongDimension):
        dim4_decompose(constant_curvature(5))
