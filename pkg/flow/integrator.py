"""
Integration of dR/dt = Q(R) in the symmetry-reduced representation.

All arithmetic acts on the reduced component vector, so the pair symmetries
hold exactly at every stage; the Bianchi identity holds analytically and its
roundoff drift is monitored and projected away above a threshold.
"""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from conditions.cones import Cone
from conditions.margins import cone_margin, pointwise_pinching_ratio
from curvature.quantities import ricci, scalar
from curvature.tensor import CurvatureTensor, full_from_pair_matrix, pair_matrix_from_reduced, reduced_from_full
from flow.reaction import q_full
from utils.errors import BlowupReached, CurvatureLabError, MaxStepsExceeded, RangeViolation
from utils.settings import Settings, get_settings

logger = logging.getLogger(__name__)


class Method(Enum):
    RK4 = "rk4"
    RK45 = "rk45"


# classical fourth-order Runge-Kutta
RK4_STAGES = [0.0, 1 / 2, 1 / 2, 1.0]
RK4_BT = {
    0: [1 / 2],
    1: [0.0, 1 / 2],
    2: [0.0, 0.0, 1.0],
}
RK4_WEIGHTS = [1 / 6, 1 / 3, 1 / 3, 1 / 6]

# Dormand-Prince 5(4), first same as last; the 5th order solution is propagated
DP_STAGES = [0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0]
DP_BT = {
    0: [1 / 5],
    1: [3 / 40, 9 / 40],
    2: [44 / 45, -56 / 15, 32 / 9],
    3: [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    4: [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    5: [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
}
DP_WEIGHTS = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0]
# difference between the 5th and embedded 4th order weights
DP_ERROR = [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]

SAFETY = 0.9
MAX_GROWTH = 5.0
MIN_SHRINK = 0.2
FIT_WINDOW = 8


@dataclass(frozen=True)
class StepControl:
    """
    Step control for integrate.

    normalize is None for the raw flow, or the target scalar curvature of the
    fixed_scal view used for diagnostics.
    """

    method: Method = Method.RK45
    h_init: float = 1e-3
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_steps: int = 200000
    h_min: float = 1e-12
    norm_ceiling: float = 1e12
    bianchi_reproject: float = 1e-9
    normalize: Optional[float] = None
    record_every: int = 1
    dump_every: int = 0

    def __post_init__(self):
        if isinstance(self.method, str):
            object.__setattr__(self, "method", Method(self.method.lower()))
        for name in ("h_init", "rel_tol", "abs_tol", "h_min", "norm_ceiling"):
            if not getattr(self, name) > 0.0:
                raise RangeViolation(f"StepControl.{name} must be positive, got {getattr(self, name)}")
        if self.max_steps < 1 or self.record_every < 1 or self.dump_every < 0:
            raise RangeViolation("StepControl needs max_steps >= 1, record_every >= 1, dump_every >= 0")
        if self.normalize is not None and not self.normalize > 0.0:
            raise RangeViolation(f"fixed_scal target must be positive, got {self.normalize}")

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None, **overrides: Any) -> "StepControl":
        s = (settings or get_settings()).integrator
        ctl = cls(
            method=Method(s.method.lower()),
            h_init=s.h_init,
            rel_tol=s.rel_tol,
            abs_tol=s.abs_tol,
            max_steps=s.max_steps,
            h_min=s.h_min,
            norm_ceiling=s.norm_ceiling,
            bianchi_reproject=s.bianchi_reproject,
        )
        return replace(ctl, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class FlowTrajectory:
    """
    Recorded states of one flow. times and states are raw (unnormalized);
    records hold the per-time diagnostics.
    """

    times: List[float] = field(default_factory=list)
    states: List[CurvatureTensor] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)
    steps: int = 0
    rejected: int = 0
    reprojections: int = 0
    normalize: Optional[float] = None
    dumps: List[Tuple[int, float, CurvatureTensor]] = field(default_factory=list)

    @property
    def final(self) -> CurvatureTensor:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return self.times[-1]

    def normalized(self, state: CurvatureTensor) -> CurvatureTensor:
        if self.normalize is None:
            return state
        scal = scalar(state)
        return state * (self.normalize / scal) if scal > 0.0 else state

    def normalized_states(self) -> List[CurvatureTensor]:
        return [self.normalized(s) for s in self.states]

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.records], dtype=float)

    def blowup_estimate(self) -> Optional[float]:
        return blowup_time_estimate(self.times, [s.max_norm for s in self.states])

    def to_columns(self) -> str:
        """Whitespace-separated columns with a '#' header, one row per record."""
        if not self.records:
            return ""
        names = list(self.records[0].keys())
        lines = ["# " + " ".join(names)]
        for r in self.records:
            lines.append(" ".join(format(float(r.get(k, np.nan)), ".17g") for k in names))
        return "\n".join(lines) + "\n"

    def summary(self) -> Dict[str, Any]:
        final = self.final
        return {
            "t_final": self.final_time,
            "steps": self.steps,
            "rejected_steps": self.rejected,
            "records": len(self.records),
            "bianchi_reprojections": self.reprojections,
            "final_scal": scalar(final),
            "final_max_norm": final.max_norm,
            "final_bianchi_residual": final.bianchi_residual(),
        }


def blowup_time_estimate(times: Sequence[float], norms: Sequence[float], window: int = FIT_WINDOW) -> Optional[float]:
    """
    Zero of a least-squares line through (t, 1/|R|) over the last window points.

    Exact for constant curvature, where 1/kappa(t) = 1/kappa_0 - 2(n-1) t.
    Returns None when the fit does not point to a finite future time.
    """
    pts = [(t, 1.0 / v) for t, v in zip(times, norms) if v > 0.0 and np.isfinite(v)][-window:]
    if len(pts) < 2:
        return None
    t, inv = np.array(pts).T
    if np.ptp(t) == 0.0:
        return None
    slope, intercept = np.polyfit(t, inv, 1)
    if slope >= 0.0:
        return None
    estimate = float(-intercept / slope)
    return estimate if estimate >= t[-1] else None


def _reduced_rhs(n: int) -> Callable[[np.ndarray], np.ndarray]:
    def rhs(y: np.ndarray) -> np.ndarray:
        full = full_from_pair_matrix(n, pair_matrix_from_reduced(n, y))
        return reduced_from_full(n, q_full(full))
    return rhs


def _stages(rhs, y: np.ndarray, h: float, table: Dict[int, List[float]], count: int, k1: Optional[np.ndarray] = None):
    ks = [rhs(y) if k1 is None else k1]
    for i in range(count - 1):
        increment = sum(a * k for a, k in zip(table[i], ks) if a != 0.0)
        ks.append(rhs(y + h * increment))
    return ks


def rk4_step(rhs, y: np.ndarray, h: float) -> np.ndarray:
    ks = _stages(rhs, y, h, RK4_BT, 4)
    return y + h * sum(b * k for b, k in zip(RK4_WEIGHTS, ks))


def dopri_step(rhs, y: np.ndarray, h: float, k1: Optional[np.ndarray] = None):
    """One Dormand-Prince attempt: (y_new, error vector, last stage for reuse)."""
    ks = _stages(rhs, y, h, DP_BT, 7, k1)
    y_new = y + h * sum(b * k for b, k in zip(DP_WEIGHTS, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(DP_ERROR, ks) if e != 0.0)
    return y_new, err, ks[-1]


def diagnose(
    state: CurvatureTensor,
    cones: Sequence[Cone] = (),
    pinching: bool = False,
    settings: Optional[Settings] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """scal, |Ric|^2, max-norm and, on request, the pinching ratio and cone margins of one state."""
    settings = settings or get_settings()
    ric = ricci(state)
    out = {
        "scal": float(np.trace(ric)),
        "ric_sq": float(np.sum(ric ** 2)),
        "norm": state.max_norm,
    }
    if pinching:
        try:
            out["pinching"] = pointwise_pinching_ratio(state, settings, seed)
        except CurvatureLabError:
            out["pinching"] = float("nan")
    for cone in cones:
        out[f"margin[{cone.text()}]"] = cone_margin(state, cone, settings, seed).margin
    return out


def integrate(
    R0: CurvatureTensor,
    t_end: float,
    ctl: Optional[StepControl] = None,
    cones: Sequence[Cone] = (),
    pinching: bool = False,
    settings: Optional[Settings] = None,
    seed: int = 0,
) -> FlowTrajectory:
    """
    Solve dR/dt = Q(R) on [0, t_end].

    Args:
        R0: Initial tensor
        t_end: Final flow time (> 0)
        ctl: Step control (defaults from settings)
        cones: Cones whose margins are recorded with each record
        pinching: Also record the pointwise pinching ratio
        settings: Optimizer settings for the diagnostics
        seed: Seed for the diagnostics' frame restarts

    Returns:
        FlowTrajectory with a record every ctl.record_every accepted steps, plus the endpoints

    Raises:
        BlowupReached: step size below h_min or max-norm above the ceiling;
            carries the trajectory up to the last finite state and the 1/|R| extrapolation
        MaxStepsExceeded: step budget exhausted before t_end
    """
    if not t_end > 0.0:
        raise RangeViolation(f"t_end must be positive, got {t_end}")
    settings = settings or get_settings()
    ctl = ctl or StepControl.from_settings(settings)
    n = R0.n
    rhs = _reduced_rhs(n)
    traj = FlowTrajectory(normalize=ctl.normalize)
    history: Deque[Tuple[float, float]] = deque(maxlen=FIT_WINDOW)

    def record(t: float, state: CurvatureTensor, h: float) -> None:
        traj.times.append(t)
        traj.states.append(state)
        view = traj.normalized(state)
        row = {"t": t, "h": h}
        row.update(diagnose(view, cones, pinching, settings, seed))
        if ctl.normalize is not None:
            row["raw_scal"] = scalar(state)
            row["raw_norm"] = state.max_norm
        traj.records.append(row)

    def blowup(message: str) -> BlowupReached:
        times, norms = zip(*history) if history else ((), ())
        estimate = blowup_time_estimate(times, norms)
        if not traj.times or traj.times[-1] != t:
            record(t, CurvatureTensor(n, y), h)
        logger.info(f"{message} at t={t:.12g} (blowup estimate {estimate})")
        return BlowupReached(f"{message} at t={t:.12g}", trajectory=traj, blowup_time=estimate)

    t = 0.0
    y = np.array(R0.components, dtype=float)
    h = min(ctl.h_init, t_end)
    k1 = None
    record(t, R0, 0.0)
    history.append((t, R0.max_norm))
    end_slack = 1e-15 * max(1.0, t_end)

    while t_end - t > end_slack:
        if traj.steps >= ctl.max_steps:
            record(t, CurvatureTensor(n, y), h)
            raise MaxStepsExceeded(f"{ctl.max_steps} steps reached at t={t:.12g} < {t_end}", trajectory=traj)
        h_try = min(h, t_end - t)

        if ctl.method == Method.RK4:
            y_new = rk4_step(rhs, y, h_try)
            h_next = h
        else:
            y_new, err, k_last = dopri_step(rhs, y, h_try, k1)
            scale = ctl.abs_tol + ctl.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / scale)) if np.all(np.isfinite(y_new)) else np.inf
            if not err_norm <= 1.0:
                traj.rejected += 1
                factor = MIN_SHRINK if not np.isfinite(err_norm) else max(MIN_SHRINK, SAFETY * err_norm ** -0.2)
                h = h_try * factor
                if h < ctl.h_min:
                    raise blowup(f"Step size {h:.3e} below h_min")
                k1 = None
                continue
            growth = MAX_GROWTH if err_norm == 0.0 else min(MAX_GROWTH, SAFETY * err_norm ** -0.2)
            h_next = h_try * growth if h_try == h else max(h, h_try * growth)

        if not np.all(np.isfinite(y_new)) or float(np.max(np.abs(y_new))) > ctl.norm_ceiling:
            raise blowup(f"Max-norm above {ctl.norm_ceiling:.1e}")

        t += h_try
        y = y_new
        traj.steps += 1
        k1 = k_last if ctl.method == Method.RK45 else None
        state = CurvatureTensor(n, y)

        residual = state.bianchi_residual()
        if residual > ctl.bianchi_reproject:
            logger.warning(f"Bianchi drift {residual:.3e} at t={t:.6g}, reprojecting")
            state = state.bianchi_projected()
            y = np.array(state.components)
            k1 = None
            traj.reprojections += 1

        history.append((t, state.max_norm))
        if ctl.dump_every and traj.steps % ctl.dump_every == 0:
            traj.dumps.append((traj.steps, t, state))
        if traj.steps % ctl.record_every == 0 or t_end - t <= end_slack:
            record(t, state, h_try)
        h = h_next

    logger.debug(f"integrated n={n} to t={t:.12g} in {traj.steps} steps ({traj.rejected} rejected)")
    return traj
