"""
Algebraic curvature tensors on R^n in the orthonormal gauge.

Components are stored symmetry-reduced: one value per canonical index
quadruple (i,j,k,l) with i<j, k<l and (i,j) <= (k,l) lexicographically,
i.e. the upper triangle of the symmetric pair matrix on two-form indices.
The full n^4 array is expanded on demand and cached; every array handed out
is read-only, so tensors can be shared freely between workers.
"""

import logging
from functools import cached_property, lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import BianchiViolation, IndexOutOfRange, SymmetryConflict, WrongDimension

logger = logging.getLogger(__name__)

STRICT = "strict"
PROJECT = "project"


class PairLayout:
    """Index bookkeeping for dimension n: two-form pairs and canonical quadruples."""

    def __init__(self, n: int):
        self.n = n
        self.pairs: List[Tuple[int, int]] = [(i, j) for i in range(n) for j in range(i + 1, n)]
        self.size = len(self.pairs)
        self.pair_i = np.array([p[0] for p in self.pairs], dtype=int)
        self.pair_j = np.array([p[1] for p in self.pairs], dtype=int)

        # pair_index[i, j] is the two-form index of {i, j}; pair_sign is +1 for i<j, -1 for i>j, 0 on the diagonal
        self.pair_index = np.zeros((n, n), dtype=int)
        self.pair_sign = np.zeros((n, n))
        for a, (i, j) in enumerate(self.pairs):
            self.pair_index[i, j] = self.pair_index[j, i] = a
            self.pair_sign[i, j] = 1.0
            self.pair_sign[j, i] = -1.0

        self.triu_rows, self.triu_cols = np.triu_indices(self.size)
        self.reduced_size = len(self.triu_rows)

    def canonical_quadruples(self) -> List[Tuple[int, int, int, int]]:
        return [self.pairs[a] + self.pairs[b] for a, b in zip(self.triu_rows, self.triu_cols)]

    def canonical_position(self, i: int, j: int, k: int, l: int) -> Tuple[Optional[int], float]:
        """
        Locate the canonical representative of R(i,j,k,l).

        Returns:
            (position in the reduced vector, sign), or (None, 0.0) when the
            quadruple is forced to vanish by antisymmetry (i == j or k == l)
        """
        if i == j or k == l:
            return None, 0.0
        sign = self.pair_sign[i, j] * self.pair_sign[k, l]
        a, b = self.pair_index[i, j], self.pair_index[k, l]
        if a > b:
            a, b = b, a
        return int(self._position[a, b]), float(sign)

    @cached_property
    def _position(self) -> np.ndarray:
        pos = -np.ones((self.size, self.size), dtype=int)
        pos[self.triu_rows, self.triu_cols] = np.arange(self.reduced_size)
        return pos


@lru_cache(maxsize=None)
def layout(n: int) -> PairLayout:
    return PairLayout(n)


def reduced_size(n: int) -> int:
    """Number of stored components, N(N+1)/2 with N = n(n-1)/2."""
    return layout(n).reduced_size


def pair_matrix_from_reduced(n: int, components: np.ndarray) -> np.ndarray:
    lay = layout(n)
    S = np.zeros((lay.size, lay.size))
    S[lay.triu_rows, lay.triu_cols] = components
    S[lay.triu_cols, lay.triu_rows] = components
    return S


def full_from_pair_matrix(n: int, S: np.ndarray) -> np.ndarray:
    lay = layout(n)
    idx = lay.pair_index
    sign = lay.pair_sign
    return (sign[:, :, None, None] * sign[None, None, :, :]
            * S[idx[:, :, None, None], idx[None, None, :, :]])


def reduced_from_full(n: int, full: np.ndarray) -> np.ndarray:
    lay = layout(n)
    S = full[lay.pair_i[:, None], lay.pair_j[:, None], lay.pair_i[None, :], lay.pair_j[None, :]]
    return S[lay.triu_rows, lay.triu_cols]


def bianchi_cyclic_sum(full: np.ndarray) -> np.ndarray:
    """R(X,Y,Z,W) + R(Y,Z,X,W) + R(Z,X,Y,W) as an array."""
    return full + np.einsum("jkil->ijkl", full) + np.einsum("kijl->ijkl", full)


class CurvatureTensor:
    """
    Dense algebraic curvature tensor R(i,j,k,l) on R^n.

    The pair symmetries hold exactly by construction; the first Bianchi
    identity is checked (or enforced by projection) where tensors enter the
    system and monitored elsewhere.
    """

    __array_priority__ = 100

    def __init__(self, n: int, components: Sequence[float]):
        if n < 2:
            raise WrongDimension(f"Curvature tensors need n >= 2, got {n}")
        comp = np.array(components, dtype=float).reshape(-1)
        if comp.size != reduced_size(n):
            raise ValueError(f"Expected {reduced_size(n)} reduced components for n={n}, got {comp.size}")
        if not np.all(np.isfinite(comp)):
            raise ValueError("Curvature components must be finite")
        comp.setflags(write=False)
        self.n = n
        self.components = comp

    # construction

    @classmethod
    def zeros(cls, n: int) -> "CurvatureTensor":
        return cls(n, np.zeros(reduced_size(n)))

    @classmethod
    def from_full(cls, full: np.ndarray) -> "CurvatureTensor":
        """Reduce a full n^4 array; the array is assumed to carry the pair symmetries."""
        full = np.asarray(full, dtype=float)
        n = full.shape[0]
        if full.shape != (n, n, n, n):
            raise ValueError(f"Expected an (n,n,n,n) array, got shape {full.shape}")
        return cls(n, reduced_from_full(n, full))

    @classmethod
    def from_pair_matrix(cls, n: int, S: np.ndarray) -> "CurvatureTensor":
        lay = layout(n)
        S = 0.5 * (np.asarray(S, dtype=float) + np.asarray(S, dtype=float).T)
        return cls(n, S[lay.triu_rows, lay.triu_cols])

    # views

    @cached_property
    def pair_matrix(self) -> np.ndarray:
        S = pair_matrix_from_reduced(self.n, self.components)
        S.setflags(write=False)
        return S

    @cached_property
    def full(self) -> np.ndarray:
        F = full_from_pair_matrix(self.n, self.pair_matrix)
        F.setflags(write=False)
        return F

    @cached_property
    def max_norm(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.full))

    def __getitem__(self, index: Tuple[int, int, int, int]) -> float:
        return float(self.full[index])

    def evaluate(self, X, Y, Z, W) -> float:
        """R(X,Y,Z,W) for real vectors."""
        return float(np.einsum("abcd,a,b,c,d->", self.full, X, Y, Z, W))

    # Bianchi identity

    def bianchi_residual(self) -> float:
        """Largest cyclic-sum violation relative to the max-norm (0 for the zero tensor)."""
        scale = self.max_norm
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(bianchi_cyclic_sum(self.full)))) / scale

    def bianchi_projected(self) -> "CurvatureTensor":
        """
        Orthogonal projection onto the Bianchi-satisfying subspace.

        For pair-symmetric tensors the cyclic sum divided by 3 is the totally
        antisymmetric part, so subtracting it is the orthogonal projection.
        """
        return CurvatureTensor.from_full(self.full - bianchi_cyclic_sum(self.full) / 3.0)

    # linear structure

    def _check_same(self, other: "CurvatureTensor") -> None:
        if not isinstance(other, CurvatureTensor):
            raise TypeError(f"Expected CurvatureTensor, got {type(other).__name__}")
        if other.n != self.n:
            raise WrongDimension(f"Dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "CurvatureTensor") -> "CurvatureTensor":
        self._check_same(other)
        return CurvatureTensor(self.n, self.components + other.components)

    def __sub__(self, other: "CurvatureTensor") -> "CurvatureTensor":
        self._check_same(other)
        return CurvatureTensor(self.n, self.components - other.components)

    def __mul__(self, c: float) -> "CurvatureTensor":
        return CurvatureTensor(self.n, float(c) * self.components)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "CurvatureTensor":
        return CurvatureTensor(self.n, self.components / float(c))

    def __neg__(self) -> "CurvatureTensor":
        return CurvatureTensor(self.n, -self.components)

    def allclose(self, other: "CurvatureTensor", rtol: float = 0.0, atol: float = 1e-12) -> bool:
        return self.n == other.n and np.allclose(self.components, other.components, rtol=rtol, atol=atol)

    # O(n) action

    def rotated(self, Q: np.ndarray) -> "CurvatureTensor":
        """(Q.R)_abcd = Q_ai Q_bj Q_ck Q_dl R_ijkl."""
        Q = np.asarray(Q, dtype=float)
        F = np.einsum("ai,ijkl->ajkl", Q, self.full)
        F = np.einsum("bj,ajkl->abkl", Q, F)
        F = np.einsum("ck,abkl->abcl", Q, F)
        F = np.einsum("dl,abcl->abcd", Q, F)
        return CurvatureTensor.from_full(F)

    def entries(self) -> Iterable[Tuple[int, int, int, int, float]]:
        """Canonical representatives in lexicographic order."""
        for quad, value in zip(layout(self.n).canonical_quadruples(), self.components):
            yield (*quad, float(value))

    def __repr__(self) -> str:
        return f"CurvatureTensor(n={self.n}, max_norm={self.max_norm:.6g})"


def make_tensor(
    n: int,
    entries: Iterable[Sequence],
    mode: str = STRICT,
    tol: float = 1e-12,
) -> Tuple[CurvatureTensor, float]:
    """
    Build a curvature tensor from (i, j, k, l, value) entries.

    Every entry is mapped to its canonical representative; the orbit under the
    pair symmetries is then filled automatically.

    Args:
        n: Dimension
        entries: Iterable of (i, j, k, l, value)
        mode: 'strict' rejects Bianchi violations, 'project' projects them away
        tol: Tolerance for symmetry conflicts and the Bianchi residual

    Returns:
        Tuple of the tensor and the Bianchi residual of the raw input

    Raises:
        IndexOutOfRange, SymmetryConflict, BianchiViolation
    """
    if mode not in (STRICT, PROJECT):
        raise ValueError(f"Unknown Bianchi mode: {mode}")
    lay = layout(n)
    comp = np.zeros(lay.reduced_size)
    seen = {}

    for entry in entries:
        if len(entry) != 5:
            raise ValueError(f"Entries must be (i, j, k, l, value), got {entry!r}")
        i, j, k, l = (int(x) for x in entry[:4])
        value = float(entry[4])
        if not all(0 <= x < n for x in (i, j, k, l)):
            raise IndexOutOfRange(f"Index {(i, j, k, l)} out of range for n={n}")
        pos, sign = lay.canonical_position(i, j, k, l)
        if pos is None:
            if abs(value) > tol:
                raise SymmetryConflict(f"R{(i, j, k, l)} = {value} but antisymmetry forces 0")
            continue
        canonical_value = sign * value
        if pos in seen and abs(seen[pos] - canonical_value) > tol:
            raise SymmetryConflict(
                f"R{(i, j, k, l)} = {value} disagrees with an earlier entry of the same orbit"
            )
        seen[pos] = canonical_value
        comp[pos] = canonical_value

    tensor = CurvatureTensor(n, comp)
    residual = tensor.bianchi_residual()
    if residual > tol:
        if mode == STRICT:
            raise BianchiViolation(f"Bianchi residual {residual:.3e} exceeds {tol:.1e}", residual)
        logger.info(f"Projecting input onto the Bianchi subspace (residual {residual:.3e})")
        tensor = tensor.bianchi_projected()
    return tensor, residual
