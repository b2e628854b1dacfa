"""
Multi-start projected gradient descent on the Stiefel manifold of orthonormal
p-frames in R^n (p x n arrays with orthonormal rows).

Each restart draws a Haar-random frame from its own spawned seed, follows the
tangent-projected gradient with an Armijo line search (step halving, polar
retraction) and stops at stationarity. Restarts are independent tasks; the
reduction walks them in index order so the result does not depend on the
worker count.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from curvature.frames import polar_retract, random_stiefel
from utils.errors import OptimizerDiverged
from utils.settings import OptimizerSettings

logger = logging.getLogger(__name__)

# objective(E, with_grad) -> (value, euclidean gradient or None, extra parameters)
Objective = Callable[[np.ndarray, bool], Tuple[float, Optional[np.ndarray], Dict[str, Any]]]


@dataclass
class LocalResult:
    value: float
    frame: np.ndarray
    params: Dict[str, Any] = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    grad_norm: float = float("inf")
    restart: int = -1


@dataclass
class MultiStartResult:
    best: LocalResult
    results: List[LocalResult]

    @property
    def restarts_used(self) -> int:
        return len(self.results)

    @property
    def converged(self) -> bool:
        return self.best.converged

    def near_minimizers(self, slack: float) -> List[LocalResult]:
        return [r for r in self.results if r.value <= self.best.value + slack]


def tangent_projection(E: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Project an ambient gradient onto the tangent space at E (rows orthonormal)."""
    A = G @ E.T
    return G - 0.5 * (A + A.T) @ E


def minimize_frame(
    objective: Objective,
    E0: np.ndarray,
    opt: OptimizerSettings,
    scale: float = 1.0,
) -> LocalResult:
    """Projected gradient descent from E0 with Armijo backtracking."""
    E = polar_retract(E0)
    value, grad, params = objective(E, True)
    step = opt.step_init / max(scale, 1e-300)
    grad_tol = opt.grad_tol * max(scale, 1e-300)
    xi = tangent_projection(E, grad)
    gnorm = float(np.linalg.norm(xi))
    recent = deque([value], maxlen=opt.stall_window + 1)

    for iteration in range(1, opt.max_iters + 1):
        if not np.isfinite(value):
            return LocalResult(value, E, params, iteration, False, gnorm)
        if gnorm <= grad_tol:
            return LocalResult(value, E, params, iteration, True, gnorm)

        t = step
        accepted = False
        while t * gnorm > 1e-16:
            E_new = polar_retract(E - t * xi)
            v_new, _, _ = objective(E_new, False)
            if v_new <= value - opt.armijo_c * t * gnorm ** 2:
                accepted = True
                break
            t *= opt.armijo_shrink
        if not accepted:
            # no descent possible at working precision
            return LocalResult(value, E, params, iteration, True, gnorm)

        previous = value
        E = E_new
        value, grad, params = objective(E, True)
        xi = tangent_projection(E, grad)
        gnorm = float(np.linalg.norm(xi))
        step = min(2.0 * t, 1e3 * opt.step_init / max(scale, 1e-300))

        if abs(previous - value) <= opt.stall_tol * max(abs(value), scale):
            return LocalResult(value, E, params, iteration, True, gnorm)
        recent.append(value)
        # linear-rate crawl on a flat landscape
        if len(recent) == recent.maxlen and recent[0] - value <= opt.window_tol * max(abs(value), scale):
            return LocalResult(value, E, params, iteration, True, gnorm)

    return LocalResult(value, E, params, opt.max_iters, False, gnorm)


def _run_restart(objective: Objective, n: int, p: int, seed_seq: np.random.SeedSequence,
                 opt: OptimizerSettings, scale: float, index: int) -> LocalResult:
    rng = np.random.default_rng(seed_seq)
    result = minimize_frame(objective, random_stiefel(n, p, rng), opt, scale)
    result.restart = index
    return result


def multistart_minimize(
    objective: Objective,
    n: int,
    p: int,
    opt: OptimizerSettings,
    seed: int = 0,
    scale: float = 1.0,
    n_jobs: int = 1,
    restarts: Optional[int] = None,
    initial: Optional[List[np.ndarray]] = None,
) -> MultiStartResult:
    """
    Minimize an objective over orthonormal p-frames in R^n from many random starts.

    Args:
        objective: Callable returning (value, gradient, params)
        n: Ambient dimension
        p: Frame size
        opt: Optimizer settings
        seed: Root seed; restart k uses SeedSequence(seed).spawn(...)[k]
        scale: Magnitude of the objective (tensor max-norm) for scale-aware tolerances
        n_jobs: joblib worker count
        restarts: Overrides opt.restarts
        initial: Extra deterministic starting frames, run before the random ones

    Returns:
        MultiStartResult with the first-found global best; its converged flag is
        False when no restart reached stationarity

    Raises:
        OptimizerDiverged: if every restart produced a non-finite value
    """
    count = int(restarts or opt.restarts)
    seeds = np.random.SeedSequence(seed).spawn(count)
    results: List[LocalResult] = []

    for k, E0 in enumerate(initial or []):
        r = minimize_frame(objective, E0, opt, scale)
        r.restart = -(k + 1)
        results.append(r)

    if n_jobs > 1:
        results.extend(Parallel(n_jobs=n_jobs)(
            delayed(_run_restart)(objective, n, p, seeds[k], opt, scale, k) for k in range(count)
        ))
    else:
        results.extend(_run_restart(objective, n, p, seeds[k], opt, scale, k) for k in range(count))

    finite = [r for r in results if np.isfinite(r.value)]
    if not finite:
        raise OptimizerDiverged(f"Every restart left the finite range (n={n}, p={p}, {count} restarts)")

    best = finite[0]
    for r in finite[1:]:
        if r.value < best.value:
            best = r
    if not any(r.converged for r in finite):
        logger.warning(f"No restart reached stationarity in {opt.max_iters} iterations (n={n}, p={p}); "
                       f"keeping best value {best.value:.12g} from restart {best.restart}")
    logger.debug(f"multistart n={n} p={p}: best {best.value:.12g} at restart {best.restart} "
                 f"({sum(r.converged for r in results)}/{len(results)} converged)")
    return MultiStartResult(best=best, results=results)
