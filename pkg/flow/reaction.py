"""
The quadratic reaction term of the curvature evolution,

    Q(R)_abcd = sum_pq R_abpq R_cdpq + 2 sum_pq R_apcq R_bpdq - 2 sum_pq R_apdq R_bpcq.
"""

import logging

import numpy as np

from curvature.tensor import CurvatureTensor

logger = logging.getLogger(__name__)


def q_full(full: np.ndarray) -> np.ndarray:
    """Q on a full n^4 array, by three pairwise contractions."""
    first = np.einsum("abpq,cdpq->abcd", full, full, optimize=True)
    second = np.einsum("apcq,bpdq->abcd", full, full, optimize=True)
    third = np.einsum("apdq,bpcq->abcd", full, full, optimize=True)
    return first + 2.0 * second - 2.0 * third


def q_tensor(R: CurvatureTensor) -> CurvatureTensor:
    """Q(R) as a curvature tensor (pair symmetries exact; Bianchi holds analytically)."""
    return CurvatureTensor.from_full(q_full(np.asarray(R.full)))


def q_reference(R: CurvatureTensor) -> np.ndarray:
    """Componentwise direct summation of Q(R); O(n^6), for checking q_tensor."""
    n = R.n
    F = R.full
    out = np.zeros((n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    total = 0.0
                    for p in range(n):
                        for q in range(n):
                            total += F[a, b, p, q] * F[c, d, p, q]
                            total += 2.0 * F[a, p, c, q] * F[b, p, d, q]
                            total -= 2.0 * F[a, p, d, q] * F[b, p, c, q]
                    out[a, b, c, d] = total
    return out


def trace_q(R: CurvatureTensor) -> float:
    """sum_ij Q(R)_ijij; equals 2 |Ric|^2 for tensors satisfying the Bianchi identity."""
    Q = q_full(np.asarray(R.full))
    return float(np.einsum("ijij->", Q))
