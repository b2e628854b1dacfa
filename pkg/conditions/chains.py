"""
Algebraic chain behind "strictly quarter-pinched implies PIC2": with the
four-frame bound |R1234| <= (2/3)(K_max - K_min),

    PIC2 quantity >= (1 + l^2 + m^2 + l^2 m^2) K_min - (4/3) l m (K_max - K_min)
                   = ((1 - l m)^2 + (l - m)^2) K_min + (4/3) l m (4 K_min - K_max)

and the right-hand side is positive once 4 K_min > K_max > 0.
"""

from typing import Tuple, Union

import numpy as np

Weight = Union[float, np.ndarray]


def quarter_pinch_chain(lam: Weight, mu: Weight, k_min: float, k_max: float) -> Tuple[Weight, Weight]:
    """Both sides of the identity above, (lhs, rhs); lam and mu may be arrays."""
    lhs = (1.0 + lam * lam + mu * mu + lam * lam * mu * mu) * k_min - (4.0 / 3.0) * lam * mu * (k_max - k_min)
    rhs = ((1.0 - lam * mu) ** 2 + (lam - mu) ** 2) * k_min + (4.0 / 3.0) * lam * mu * (4.0 * k_min - k_max)
    return lhs, rhs


def quarter_pinch_lower_bound(k_min: float, k_max: float, grid: int = 33) -> float:
    """Smallest chain value over lambda, mu in [0, 1]; positive for strictly quarter-pinched extremes."""
    weights = np.linspace(0.0, 1.0, grid)
    L, M = np.meshgrid(weights, weights, indexing="ij")
    return float(np.min(quarter_pinch_chain(L, M, k_min, k_max)[1]))
