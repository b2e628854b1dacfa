"""
Boundary behaviour of the isotropic-curvature cone under dR/dt = Q(R).

At a frame where a weakly PIC tensor has isotropic curvature zero, the same
combination of Q(R) is nonnegative. Expanding Q gives

    Q-combination = sum (R13pq - R24pq)^2 + sum (R14pq + R23pq)^2 + 2 (lhs - rhs)

and lhs - rhs >= 0 is proved in three pieces, by index range of (p, q):
both in the frame (first variation, in-frame rotations), one in the frame
(first variation toward e_q), both outside (second variation). The helpers
here evaluate every piece at a given frame.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from curvature.frames import Frame4, complete_basis
from curvature.quantities import frame_form, isotropic_coefficients, isotropic_quantity
from curvature.tensor import CurvatureTensor
from flow.reaction import q_tensor
from utils.errors import WrongDimension

logger = logging.getLogger(__name__)


def _frame(F) -> Frame4:
    return F if isinstance(F, Frame4) else Frame4(F)


def frame_components(R: CurvatureTensor, F) -> np.ndarray:
    """R in the deterministic completion of F to an orthonormal basis (frame first)."""
    F = _frame(F)
    if R.n != F.n:
        raise WrongDimension(f"Frame lives in R^{F.n} but the tensor in R^{R.n}")
    return np.asarray(R.rotated(complete_basis(F.vectors)).full)


def boundary_inward_value(R: CurvatureTensor, F) -> float:
    """Q(R)1313 + Q(R)1414 + Q(R)2323 + Q(R)2424 - 2 Q(R)1234 in the frame F."""
    F = _frame(F)
    if R.n < 4:
        raise WrongDimension(f"Boundary values need n >= 4, got n={R.n}")
    return isotropic_quantity(q_tensor(R), F)


def _key_terms(T: np.ndarray) -> np.ndarray:
    """
    Summand of lhs - rhs for every (p, q), in frame components T (zero-based
    indices 0..3 for e1..e4).
    """
    lhs = (np.einsum("pq,pq->pq", T[0, :, 0, :] + T[1, :, 1, :], T[2, :, 2, :] + T[3, :, 3, :])
           - T[0, 1] * T[2, 3])
    rhs = ((T[0, :, 2, :] + T[1, :, 3, :]) * (T[2, :, 0, :] + T[3, :, 1, :])
           + (T[0, :, 3, :] - T[1, :, 2, :]) * (T[3, :, 0, :] - T[2, :, 1, :]))
    return lhs, rhs


@dataclass
class KeyInequalityReport:
    lhs: float
    rhs: float
    residual: float
    step1: float
    step2: List[float]
    step3: float
    step1_residuals: List[float]
    step2_residuals: List[float]
    first_variation_max: float
    second_variation_min: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "step1": self.step1,
            "step2": self.step2,
            "step3": self.step3,
            "step1_residuals": self.step1_residuals,
            "step2_residuals": self.step2_residuals,
            "first_variation_max": self.first_variation_max,
            "second_variation_min": self.second_variation_min,
        }


def key_inequality_residual(R: CurvatureTensor, F) -> KeyInequalityReport:
    """
    lhs - rhs of the key inequality in the completion of F, with its pieces.

    The summands are symmetric in p <-> q, so
    residual = step1 + 2 * sum(step2) + step3.
    """
    F = _frame(F)
    T = frame_components(R, F)
    lhs_terms, rhs_terms = _key_terms(T)
    diff = lhs_terms - rhs_terms
    inner, outer = slice(0, 4), slice(4, R.n)

    step1 = float(np.sum(diff[inner, inner]))
    step2 = [float(np.sum(diff[inner, q])) for q in range(4, R.n)]
    step3 = float(np.sum(diff[outer, outer]))

    # first variation along in-frame rotations (e2, e3) and (e2, e4)
    step1_residuals = [
        float(T[0, 1, 0, 2] + T[0, 1, 3, 1] + T[2, 3, 0, 2] + T[2, 3, 3, 1]),
        float(T[0, 1, 0, 3] + T[0, 1, 1, 2] + T[2, 3, 0, 3] + T[2, 3, 1, 2]),
    ]
    # first variation of e1 toward e_q
    step2_residuals = [float(T[0, 2, 2, q] + T[0, 3, 3, q] + T[3, 2, 1, q]) for q in range(4, R.n)]

    fv = first_variation(R, F)
    second = second_variation_form(R, F)
    report = KeyInequalityReport(
        lhs=float(np.sum(lhs_terms)),
        rhs=float(np.sum(rhs_terms)),
        residual=float(np.sum(diff)),
        step1=step1,
        step2=step2,
        step3=step3,
        step1_residuals=step1_residuals,
        step2_residuals=step2_residuals,
        first_variation_max=float(np.max(np.abs(fv))),
        second_variation_min=second.min_eigenvalue,
    )
    logger.debug(f"key inequality residual {report.residual:.6g} (step1 {step1:.3g}, step3 {step3:.3g})")
    return report


def boundary_identity_check(R: CurvatureTensor, F) -> float:
    """
    |Q-combination - (squares + 2 (lhs - rhs))|, relative to max(1, |R|^2).

    Holds for every tensor with the Bianchi identity.
    """
    F = _frame(F)
    T = frame_components(R, F)
    squares = float(np.sum((T[0, 2] - T[1, 3]) ** 2) + np.sum((T[0, 3] + T[1, 2]) ** 2))
    lhs_terms, rhs_terms = _key_terms(T)
    expansion = squares + 2.0 * float(np.sum(lhs_terms - rhs_terms))
    value = boundary_inward_value(R, F)
    return abs(value - expansion) / max(1.0, R.max_norm ** 2)


def first_variation(R: CurvatureTensor, F, lam: float = 1.0, mu: float = 1.0) -> np.ndarray:
    """
    Derivative of the (lam, mu)-weighted isotropic quantity along each rotation
    of e_a toward the completed basis vector b, as a 4 x n array.

    Columns 0..3 are in-frame rotations (antisymmetric block); columns 4.. move
    the frame out of its span. All entries vanish at a critical frame.
    """
    F = _frame(F)
    E = F.vectors
    B = complete_basis(E)
    _, G = frame_form(R, E, isotropic_coefficients(lam, mu))
    GB = G @ B.T
    out = GB.copy()
    out[:, :4] = GB[:, :4] - GB[:, :4].T
    return out


@dataclass
class SecondVariation:
    matrix: np.ndarray
    min_eigenvalue: Optional[float]
    trace_inequality: float

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def second_variation_form(R: CurvatureTensor, F, lam: float = 1.0, mu: float = 1.0) -> SecondVariation:
    """
    Second derivative of the weighted isotropic quantity along the frame curves
    v_i(s) with v_i(0) = e_i, v_i'(0) = w_i in span{e5, ..., en}, as a symmetric
    matrix on the coefficients of (w1, w2, w3, w4).

    The matrix is c -> d^2/ds^2 I(v(s)) including the curvature of the curves
    (v_i'' = -sum_j <w_i, w_j> e_j), so it is positive semidefinite at every
    local minimizer. trace_inequality is tr(AB) + tr(EF) - tr(C^2) - tr(D^2)
    for the blocks A..F over the outside indices.
    """
    F = _frame(F)
    E = F.vectors
    n = R.n
    m = n - 4
    C = isotropic_coefficients(lam, mu)
    T = frame_components(R, F)
    fr, out = slice(0, 4), slice(4, n)

    # s^2 coefficient of I(E + s W), one einsum per pair of slots
    K = np.zeros((4, m, 4, m))
    K += np.einsum("ijkl,pqkl->ipjq", C, T[out, out, fr, fr])
    K += np.einsum("ijkl,pjql->ipkq", C, T[out, fr, out, fr])
    K += np.einsum("ijkl,pjkq->iplq", C, T[out, fr, fr, out])
    K += np.einsum("ijkl,ipql->jpkq", C, T[fr, out, out, fr])
    K += np.einsum("ijkl,ipkq->jplq", C, T[fr, out, fr, out])
    K += np.einsum("ijkl,ijpq->kplq", C, T[fr, fr, out, out])
    K = K.reshape(4 * m, 4 * m)
    hessian = K + K.T

    _, G = frame_form(R, E, C)
    Lam = G @ E.T
    Lam = 0.5 * (Lam + Lam.T)
    matrix = hessian - np.kron(Lam, np.eye(m))
    matrix = 0.5 * (matrix + matrix.T)

    A = T[0, out, 0, out] + T[1, out, 1, out]
    Bm = T[2, out, 2, out] + T[3, out, 3, out]
    Cm = T[2, out, 0, out] + T[3, out, 1, out]
    Dm = T[3, out, 0, out] - T[2, out, 1, out]
    Em = T[0, 1, out, out]
    Fm = T[2, 3, out, out]
    trace_inequality = float(np.trace(A.T @ Bm) + np.trace(Em.T @ Fm.T) - np.trace(Cm @ Cm) - np.trace(Dm @ Dm))

    min_eig = float(np.linalg.eigvalsh(matrix)[0]) if m > 0 else None
    return SecondVariation(matrix=matrix, min_eigenvalue=min_eig, trace_inequality=trace_inequality)
