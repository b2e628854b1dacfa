"""
Model curvature tensors.
"""

import logging
from typing import Optional

import numpy as np

from curvature.tensor import CurvatureTensor, layout
from models.spec import ConstantCurvature, FlatExtend, FubiniStudy, ModelSpec, Product, Random, Shifted, format_model
from utils.errors import SpecInvalid
from utils.settings import Settings

logger = logging.getLogger(__name__)


def constant_curvature(n: int, kappa: float = 1.0) -> CurvatureTensor:
    """R_ijkl = kappa (d_ik d_jl - d_il d_jk): kappa times the identity on two-forms."""
    if n < 2:
        raise SpecInvalid(f"Constant curvature needs n >= 2, got {n}")
    return CurvatureTensor.from_pair_matrix(n, float(kappa) * np.eye(layout(n).size))


def complex_structure(m: int) -> np.ndarray:
    """J on R^{2m} with J e_{2a} = e_{2a+1}; entry J[a, c] = <e_a, J e_c>."""
    J = np.zeros((2 * m, 2 * m))
    for a in range(m):
        J[2 * a + 1, 2 * a] = 1.0
        J[2 * a, 2 * a + 1] = -1.0
    return J


def fubini_study(m: int) -> CurvatureTensor:
    """
    Fubini-Study curvature on C^m with holomorphic sectional curvature 4:

        R(X,Y,Z,W) = <X,Z><Y,W> - <X,W><Y,Z>
                     + <X,JZ><Y,JW> - <X,JW><Y,JZ> + 2 <X,JY><Z,JW>

    Sectional curvatures range over [1, 4] for m >= 2; Ric = (2m + 2) Id.
    """
    if m < 1:
        raise SpecInvalid(f"Fubini-Study needs m >= 1, got {m}")
    g = np.eye(2 * m)
    J = complex_structure(m)
    full = (np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
            + np.einsum("ac,bd->abcd", J, J) - np.einsum("ad,bc->abcd", J, J)
            + 2.0 * np.einsum("ab,cd->abcd", J, J))
    return CurvatureTensor.from_full(full)


def block_sum(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Full array of the orthogonal product: factor blocks on the diagonal, mixed components zero."""
    n1, n2 = first.shape[0], second.shape[0]
    full = np.zeros((n1 + n2,) * 4)
    full[:n1, :n1, :n1, :n1] = first
    full[n1:, n1:, n1:, n1:] = second
    return full


def product(first: CurvatureTensor, second: CurvatureTensor) -> CurvatureTensor:
    return CurvatureTensor.from_full(block_sum(first.full, second.full))


def flat_extend(base: CurvatureTensor, k: int = 1) -> CurvatureTensor:
    if k < 1:
        raise SpecInvalid(f"Flat factor needs k >= 1, got {k}")
    return CurvatureTensor.from_full(block_sum(base.full, np.zeros((k,) * 4)))


def random_tensor(n: int, seed: int = 0, scale: float = 1.0) -> CurvatureTensor:
    """
    Uniform [-scale, scale] on canonical components, then Bianchi-projected.

    Args:
        n: Dimension
        seed: numpy Generator seed; same arguments give bit-identical tensors
        scale: Half-width of the uniform distribution
    """
    if n < 2:
        raise SpecInvalid(f"Random tensors need n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    raw = CurvatureTensor(n, rng.uniform(-scale, scale, layout(n).reduced_size))
    return raw.bianchi_projected()


def build(spec: ModelSpec, settings: Optional[Settings] = None, seed: int = 0) -> CurvatureTensor:
    """
    Build the curvature tensor a model spec describes.

    Args:
        spec: Parsed model
        settings: Used only by shifted models (cone margins)
        seed: Root seed for shifted models' frame restarts

    Raises:
        SpecInvalid: unknown spec type
    """
    if isinstance(spec, ConstantCurvature):
        return constant_curvature(spec.n, spec.kappa)
    if isinstance(spec, FubiniStudy):
        return fubini_study(spec.m)
    if isinstance(spec, Product):
        return product(build(spec.first, settings, seed), build(spec.second, settings, seed))
    if isinstance(spec, FlatExtend):
        return flat_extend(build(spec.base, settings, seed), spec.k)
    if isinstance(spec, Random):
        return random_tensor(spec.n, spec.seed, spec.scale)
    if isinstance(spec, Shifted):
        # shift needs cone margins, and conditions imports this module
        from models.shift import shift_into_cone

        outcome = shift_into_cone(build(spec.base, settings, seed), spec.cone, spec.margin, settings, seed)
        logger.info(f"{format_model(spec)}: shift {outcome.shift:.12g}, margin {outcome.report.margin:.6g}")
        return outcome.tensor
    raise SpecInvalid(f"Not a model spec: {spec!r}")
