"""
Orthogonal decomposition of four-dimensional curvature tensors and the
Gauss-Bonnet integrand (1/6) scal^2 - 2 |Ric0|^2 + |W|^2.
"""

import logging
from dataclasses import dataclass

import numpy as np

from curvature.quantities import ricci
from curvature.tensor import CurvatureTensor
from utils.errors import WrongDimension

logger = logging.getLogger(__name__)


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """(h o k)_ijkl = h_ik k_jl + h_jl k_ik - h_il k_jk - h_jk k_il."""
    return (np.einsum("ik,jl->ijkl", h, k) + np.einsum("jl,ik->ijkl", h, k)
            - np.einsum("il,jk->ijkl", h, k) - np.einsum("jk,il->ijkl", h, k))


@dataclass(frozen=True)
class Dim4Decomposition:
    scalar_part: float
    traceless_ricci: np.ndarray
    weyl: np.ndarray
    weyl_norm_sq: float
    gb_integrand: float
    scalar_tensor: np.ndarray
    ricci_tensor: np.ndarray

    @property
    def traceless_ricci_norm_sq(self) -> float:
        return float(np.sum(self.traceless_ricci ** 2))

    def recomposed(self) -> np.ndarray:
        return self.scalar_tensor + self.ricci_tensor + self.weyl


def dim4_decompose(R: CurvatureTensor) -> Dim4Decomposition:
    """
    Split R = (scal/24) g o g + (1/2) Ric0 o g + W in dimension 4.

    Raises:
        WrongDimension: unless n == 4
    """
    if R.n != 4:
        raise WrongDimension(f"The Weyl decomposition here is four-dimensional, got n={R.n}")
    g = np.eye(4)
    Ric = ricci(R)
    scal = float(np.trace(Ric))
    ric0 = Ric - (scal / 4.0) * g

    scalar_tensor = (scal / 24.0) * kulkarni_nomizu(g, g)
    ricci_tensor = 0.5 * kulkarni_nomizu(ric0, g)
    weyl = np.array(R.full) - scalar_tensor - ricci_tensor

    weyl_norm_sq = float(np.sum(weyl ** 2))
    gb = scal ** 2 / 6.0 - 2.0 * float(np.sum(ric0 ** 2)) + weyl_norm_sq
    logger.debug(f"dim4 decomposition: scal={scal:.6g}, |Ric0|^2={np.sum(ric0 ** 2):.6g}, |W|^2={weyl_norm_sq:.6g}")
    return Dim4Decomposition(
        scalar_part=scal,
        traceless_ricci=ric0,
        weyl=weyl,
        weyl_norm_sq=weyl_norm_sq,
        gb_integrand=gb,
        scalar_tensor=scalar_tensor,
        ricci_tensor=ricci_tensor,
    )
