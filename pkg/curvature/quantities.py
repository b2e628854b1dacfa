"""
Pointwise curvature quantities: sectional, Ricci and scalar curvature, the
isotropic curvature family, complexified evaluation and the curvature operator.

Frame quantities are written as multilinear forms
    f(E) = sum_{ijkl} C[i,j,k,l] R(E_i, E_j, E_k, E_l)
for a p x p x p x p coefficient array C and a p x n frame E; the same
representation gives the Euclidean gradient used by the frame optimizer.
"""

import logging
from typing import Tuple, Union

import numpy as np

from curvature.frames import ComplexVector, Frame4
from curvature.tensor import CurvatureTensor
from utils.errors import BadFrame, DegeneratePlane, RangeViolation, WrongDimension

logger = logging.getLogger(__name__)

LAMBDA_RANGES = {"01": (0.0, 1.0), "sym": (-1.0, 1.0)}

FrameLike = Union[Frame4, np.ndarray]


def _frame_array(F: FrameLike) -> np.ndarray:
    if isinstance(F, Frame4):
        return F.vectors
    return Frame4(F).vectors


def _check_isotropic_dimension(R: CurvatureTensor, E: np.ndarray) -> None:
    if R.n < 4:
        raise WrongDimension(f"Isotropic quantities need n >= 4, got n={R.n}")
    if E.shape[1] != R.n:
        raise BadFrame(f"Frame lives in R^{E.shape[1]} but the tensor in R^{R.n}")


# multilinear frame forms

def partial_contraction(R: CurvatureTensor, E: np.ndarray) -> np.ndarray:
    """P[a, j, k, l] = R(e_a, E_j, E_k, E_l)."""
    P = np.einsum("jb,abcd->ajcd", E, R.full)
    P = np.einsum("kc,ajcd->ajkd", E, P)
    return np.einsum("ld,ajkd->ajkl", E, P)


def frame_tensor(R: CurvatureTensor, E: np.ndarray) -> np.ndarray:
    """T[i, j, k, l] = R(E_i, E_j, E_k, E_l)."""
    return np.einsum("ia,ajkl->ijkl", E, partial_contraction(R, E))


def frame_form(R: CurvatureTensor, E: np.ndarray, C: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Value and Euclidean gradient (p x n) of sum C[ijkl] R(E_i,E_j,E_k,E_l).

    Every slot derivative is rewritten through the pair symmetries as a
    first-slot contraction, so a single partial contraction serves all four.
    """
    P = partial_contraction(R, E)
    value = float(np.einsum("ijkl,ia,ajkl->", C, E, P))
    return value, form_gradient(C, P)


def form_gradient(C: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Gradient of the frame form from a precomputed partial contraction P."""
    return (np.einsum("mjkl,ajkl->ma", C, P)
            - np.einsum("imkl,aikl->ma", C, P)
            + np.einsum("ijml,alij->ma", C, P)
            - np.einsum("ijkm,akij->ma", C, P))


def isotropic_coefficients(lam: float = 1.0, mu: float = 1.0) -> np.ndarray:
    """
    Coefficients of R1313 + lam^2 R1414 + mu^2 R2323 + lam^2 mu^2 R2424 - 2 lam mu R1234
    (zero-based frame slots).
    """
    C = np.zeros((4, 4, 4, 4))
    C[0, 2, 0, 2] = 1.0
    C[0, 3, 0, 3] = lam * lam
    C[1, 2, 1, 2] = mu * mu
    C[1, 3, 1, 3] = lam * lam * mu * mu
    C[0, 1, 2, 3] = -2.0 * lam * mu
    return C


def sectional_coefficients() -> np.ndarray:
    C = np.zeros((2, 2, 2, 2))
    C[0, 1, 0, 1] = 1.0
    return C


def isotropic_terms(R: CurvatureTensor, F: FrameLike) -> Tuple[float, float, float, float, float]:
    """(R1313, R1414, R2323, R2424, R1234) in the frame."""
    E = _frame_array(F)
    _check_isotropic_dimension(R, E)
    T = frame_tensor(R, E)
    return (float(T[0, 2, 0, 2]), float(T[0, 3, 0, 3]), float(T[1, 2, 1, 2]),
            float(T[1, 3, 1, 3]), float(T[0, 1, 2, 3]))


def weighted_isotropic(terms: Tuple[float, ...], lam: float, mu: float) -> float:
    a, b, c, d, e = terms
    return a + lam * lam * b + mu * mu * c + lam * lam * mu * mu * d - 2.0 * lam * mu * e


def check_weight(value: float, lambda_range: str = "01", name: str = "lambda") -> None:
    if lambda_range not in LAMBDA_RANGES:
        raise RangeViolation(f"Unknown weight range '{lambda_range}'")
    lo, hi = LAMBDA_RANGES[lambda_range]
    if not (lo <= value <= hi):
        raise RangeViolation(f"{name}={value} outside [{lo}, {hi}]")


# pointwise quantities

def sectional(R: CurvatureTensor, X, Y, tol: float = 1e-14) -> float:
    """
    Sectional curvature K(span{X, Y}) = R(X,Y,X,Y) / (|X|^2 |Y|^2 - <X,Y>^2).

    Raises:
        DegeneratePlane: if the Gram determinant is below tol
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    gram = float((X @ X) * (Y @ Y) - (X @ Y) ** 2)
    if gram < tol:
        raise DegeneratePlane(f"Gram determinant {gram:.3e} below {tol:.1e}")
    return R.evaluate(X, Y, X, Y) / gram


def ricci(R: CurvatureTensor) -> np.ndarray:
    """Ric(X, Y) = sum_k R(X, e_k, Y, e_k)."""
    Ric = np.einsum("ikjk->ij", R.full)
    return 0.5 * (Ric + Ric.T)


def scalar(R: CurvatureTensor) -> float:
    return float(np.trace(ricci(R)))


def traceless_ricci(R: CurvatureTensor) -> np.ndarray:
    Ric = ricci(R)
    return Ric - (np.trace(Ric) / R.n) * np.eye(R.n)


def isotropic_quantity(R: CurvatureTensor, F: FrameLike) -> float:
    """R1313 + R1414 + R2323 + R2424 - 2 R1234 in the frame F."""
    return weighted_isotropic(isotropic_terms(R, F), 1.0, 1.0)


def pic1_quantity(R: CurvatureTensor, F: FrameLike, lam: float, lambda_range: str = "01") -> float:
    """R1313 + lam^2 R1414 + R2323 + lam^2 R2424 - 2 lam R1234."""
    check_weight(lam, lambda_range, "lambda")
    return weighted_isotropic(isotropic_terms(R, F), lam, 1.0)


def pic2_quantity(R: CurvatureTensor, F: FrameLike, lam: float, mu: float, lambda_range: str = "01") -> float:
    """R1313 + lam^2 R1414 + mu^2 R2323 + lam^2 mu^2 R2424 - 2 lam mu R1234."""
    check_weight(lam, lambda_range, "lambda")
    check_weight(mu, lambda_range, "mu")
    return weighted_isotropic(isotropic_terms(R, F), lam, mu)


def complexify_eval(R: CurvatureTensor, zeta: ComplexVector, eta: ComplexVector) -> complex:
    """R(zeta, eta, conj(zeta), conj(eta)) for the complex-multilinear extension of R."""
    if R.n < 4:
        raise WrongDimension(f"Complexified evaluation needs n >= 4, got n={R.n}")
    z = zeta.as_complex()
    w = eta.as_complex()
    return complex(np.einsum("abcd,a,b,c,d->", R.full, z, w, np.conj(z), np.conj(w)))


def operator_matrix(R: CurvatureTensor) -> np.ndarray:
    """
    Curvature operator on two-forms in the basis {e_i ^ e_j : i < j}.

    With phi = sum_{i<j} x_ij e_i ^ e_j, x^T M x equals the full-index sum
    sum_{ijkl} R_ijkl phi^ij phi^kl, hence M = 4 * (pair matrix).
    """
    return 4.0 * np.array(R.pair_matrix)


def operator_eigenvalues(R: CurvatureTensor) -> np.ndarray:
    return np.linalg.eigvalsh(operator_matrix(R))


def hermitian_area(zeta: np.ndarray, eta: np.ndarray) -> float:
    """|zeta ^ eta|^2 = |zeta|^2 |eta|^2 - |<zeta, conj eta>|^2 for the Hermitian product."""
    zz = float(np.vdot(zeta, zeta).real)
    ww = float(np.vdot(eta, eta).real)
    zw = np.vdot(eta, zeta)
    return zz * ww - float(abs(zw) ** 2)


def complex_pair_from_frame(E: np.ndarray, lam: float = 1.0, mu: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """zeta = e1 + i mu e2, eta = e3 + i lam e4; R(zeta,eta,..) is the weighted isotropic quantity."""
    return E[0] + 1j * mu * E[1], E[2] + 1j * lam * E[3]

