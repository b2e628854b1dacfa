"""
Orthonormal frames and complex test vectors.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import polar

from utils.errors import BadFrame, WrongDimension


def orthonormality_defect(E: np.ndarray) -> float:
    """max |E E^T - I| for a p x n array of row vectors."""
    E = np.asarray(E, dtype=float)
    return float(np.max(np.abs(E @ E.T - np.eye(E.shape[0]))))


@dataclass(frozen=True)
class Frame4:
    """
    Ordered orthonormal four-frame {e1, e2, e3, e4} in R^n, stored as a 4 x n array.
    """

    vectors: np.ndarray

    def __post_init__(self):
        E = np.array(self.vectors, dtype=float)
        if E.ndim != 2 or E.shape[0] != 4:
            raise BadFrame(f"A four-frame needs a 4 x n array, got shape {E.shape}")
        if E.shape[1] < 4:
            raise WrongDimension(f"Four-frames need n >= 4, got n={E.shape[1]}")
        if not np.all(np.isfinite(E)):
            raise BadFrame("Frame vectors must be finite")
        defect = orthonormality_defect(E)
        if defect > 1e-12:
            raise BadFrame(f"Frame is not orthonormal (defect {defect:.3e})")
        E.setflags(write=False)
        object.__setattr__(self, "vectors", E)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def standard(cls, n: int) -> "Frame4":
        return cls(np.eye(n)[:4])

    @classmethod
    def from_indices(cls, n: int, i: int, j: int, k: int, l: int) -> "Frame4":
        return cls(np.eye(n)[[i, j, k, l]])

    @classmethod
    def nearest(cls, E: np.ndarray) -> "Frame4":
        """Closest orthonormal frame (polar factor) to a 4 x n array."""
        return cls(polar_retract(np.asarray(E, dtype=float)))

    def permuted(self, order) -> "Frame4":
        return Frame4(self.vectors[list(order)])

    def completed_basis(self) -> np.ndarray:
        return complete_basis(self.vectors)


@dataclass(frozen=True)
class ComplexVector:
    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        re = np.array(self.real, dtype=float)
        im = np.array(self.imag, dtype=float)
        if re.shape != im.shape or re.ndim != 1:
            raise ValueError(f"Real and imaginary parts must be vectors of equal length, got {re.shape}, {im.shape}")
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, "real", re)
        object.__setattr__(self, "imag", im)

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "ComplexVector":
        z = np.asarray(z, dtype=complex)
        return cls(z.real, z.imag)

    def as_complex(self) -> np.ndarray:
        return self.real + 1j * self.imag

    def is_zero(self) -> bool:
        return not (np.any(self.real) or np.any(self.imag))


def polar_retract(E: np.ndarray) -> np.ndarray:
    """Map a full-rank p x n array to the nearest point on the Stiefel manifold."""
    U, _ = polar(E)
    return U


def random_stiefel(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed p x n array with orthonormal rows."""
    Z = rng.standard_normal((n, p))
    Q, R = np.linalg.qr(Z)
    Q = Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    return Q.T.copy()


def complete_basis(E: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """
    Extend orthonormal rows to an orthonormal basis of R^n.

    The extra vectors come from Gram-Schmidt on the standard basis e_0, ..., e_{n-1}
    in order, so the completion is deterministic.
    """
    E = np.asarray(E, dtype=float)
    n = E.shape[1]
    basis = [row for row in E]
    for k in range(n):
        if len(basis) == n:
            break
        v = np.eye(n)[k]
        for b in basis:
            v = v - (v @ b) * b
        for b in basis:
            v = v - (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > tol:
            basis.append(v / norm)
    if len(basis) != n:
        raise BadFrame("Could not complete the frame to a basis")
    return np.array(basis)


def random_frame(n: int, rng: Optional[np.random.Generator] = None) -> Frame4:
    rng = rng or np.random.default_rng()
    return Frame4(random_stiefel(n, 4, rng))
