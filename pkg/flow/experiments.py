"""
Experiments at the ODE level: cone invariance over sampled starts, pinching
convergence along the normalized flow, the three-dimensional interior
estimate and the round-sphere rescaling limit.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from conditions.cones import Cone, ConeKind
from conditions.margins import cone_margin
from curvature.quantities import ricci, scalar, traceless_ricci
from curvature.tensor import CurvatureTensor
from flow.integrator import FlowTrajectory, StepControl, integrate
from models.builders import constant_curvature, random_tensor
from models.shift import shift_into_cone
from utils.errors import BlowupReached, CurvatureLabError, HypothesisViolated, NotInCone, WrongDimension
from utils.settings import Settings, get_settings

logger = logging.getLogger(__name__)

INVARIANT_KINDS = {ConeKind.PIC, ConeKind.PIC1, ConeKind.PIC2, ConeKind.TWO_POSITIVE, ConeKind.OPERATOR_NONNEG}
VIOLATION_TOL = 1e-6
DETECTION_TIME = 10.0
HYPOTHESIS_TOL = 1e-9


def _diagnostic_settings(settings: Settings) -> Settings:
    return replace(settings.with_restarts(settings.experiments.diagnostic_restarts), threads=1)


def child_seeds(seed: int, count: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _flow_to_fraction(R: CurvatureTensor, horizon: Optional[float], ctl: StepControl,
                      settings: Settings) -> Dict[str, Optional[float]]:
    """
    Integration end time: horizon, or the given fraction of the blowup time
    detected by a diagnostics-free detection run, whichever comes first.

    The detection run goes to horizon / fraction so a blowup just past the horizon
    still caps the end time.
    """
    limit = horizon if horizon else DETECTION_TIME / max(R.max_norm, 1e-300)
    fraction = settings.experiments.horizon_fraction
    try:
        integrate(R, limit / fraction, replace(ctl, record_every=ctl.max_steps), settings=settings)
    except BlowupReached as e:
        blowup = e.blowup_time if e.blowup_time is not None else e.trajectory.final_time
        return {"t_end": min(limit, fraction * blowup), "blowup_time": blowup}
    return {"t_end": limit, "blowup_time": None}


# invariance

@dataclass
class InvarianceItem:
    index: int
    seed: int
    initial_margin: float
    inside: bool
    t_end: Optional[float] = None
    blowup_time: Optional[float] = None
    min_margins: Dict[str, float] = field(default_factory=dict)
    min_relative: Dict[str, float] = field(default_factory=dict)
    violations: List[Dict[str, Any]] = field(default_factory=list)
    steps: int = 0
    error: Optional[str] = None
    error_type: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "index": self.index,
            "seed": self.seed,
            "initial_margin": self.initial_margin,
            "inside": self.inside,
            "t_end": self.t_end,
            "blowup_time": self.blowup_time,
            "min_margins": self.min_margins,
            "min_relative": self.min_relative,
            "violations": self.violations,
            "steps": self.steps,
        }
        if self.error:
            out["error"] = f"{self.error_type}: {self.error}"
        return out


@dataclass
class InvarianceReport:
    cone: Cone
    watched: List[Cone]
    samples: int
    n: int
    horizon: Optional[float]
    seed: int
    exploratory: bool
    items: List[InvarianceItem]

    @property
    def violations(self) -> List[Dict[str, Any]]:
        return [dict(v, index=item.index) for item in self.items for v in item.violations]

    @property
    def outside_inputs(self) -> List[int]:
        return [item.index for item in self.items if not item.inside and not item.error]

    @property
    def errors(self) -> List[Dict[str, Any]]:
        return [{"type": item.error_type, "message": item.error, "item": f"sample {item.index}"}
                for item in self.items if item.error]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cone": self.cone.text(),
            "watched": [c.text() for c in self.watched],
            "samples": self.samples,
            "n": self.n,
            "horizon": self.horizon,
            "seed": self.seed,
            "exploratory": self.exploratory,
            "violation_count": len(self.violations),
            "outside_inputs": self.outside_inputs,
            "items": [item.to_dict() for item in self.items],
        }


def _invariance_item(index: int, item_seed: int, R: Optional[CurvatureTensor], cone: Cone,
                     watched: Sequence[Cone], n: int, horizon: Optional[float],
                     shift_target: Optional[float], ctl: StepControl, settings: Settings) -> InvarianceItem:
    diag = _diagnostic_settings(settings)
    try:
        if R is None:
            R = random_tensor(n, item_seed, 1.0)
            if shift_target is not None:
                R = shift_into_cone(R, cone, shift_target * R.max_norm, diag, item_seed).tensor
        initial = cone_margin(R, cone, diag, item_seed)
        item = InvarianceItem(index, item_seed, initial.margin, initial.strict)
        if not initial.strict:
            logger.info(f"sample {index}: {cone.text()} margin {initial.margin:.6g}, outside the cone")
            return item

        span = _flow_to_fraction(R, horizon, ctl, settings)
        item.t_end, item.blowup_time = span["t_end"], span["blowup_time"]
        cones = [cone] + [c for c in watched if c != cone]
        try:
            traj = integrate(R, item.t_end, ctl, cones=cones, settings=diag, seed=item_seed)
        except BlowupReached as e:
            traj = e.trajectory
        item.steps = traj.steps

        for c in cones:
            key = f"margin[{c.text()}]"
            margins = traj.column(key)
            norms = traj.column("norm")
            relative = margins / np.where(norms > 0.0, norms, 1.0)
            item.min_margins[c.text()] = float(np.min(margins))
            item.min_relative[c.text()] = float(np.min(relative))
            for row, m, v in zip(traj.records, margins, norms):
                if m < -VIOLATION_TOL * v:
                    item.violations.append({"cone": c.text(), "t": row["t"], "margin": float(m), "norm": float(v)})
        if item.violations:
            logger.warning(f"sample {index}: {len(item.violations)} margin violations along the flow")
        return item
    except CurvatureLabError as e:
        logger.error(f"sample {index} failed: {str(e)}")
        return InvarianceItem(index, item_seed, float("nan"), False, error=str(e), error_type=type(e).__name__)


def invariance_experiment(
    cone: Cone,
    samples: int,
    horizon: Optional[float] = None,
    ctl: Optional[StepControl] = None,
    seed: int = 0,
    n: int = 4,
    settings: Optional[Settings] = None,
    watched: Sequence[Cone] = (),
    shift_target: Optional[float] = 0.05,
    inputs: Optional[Sequence[CurvatureTensor]] = None,
) -> InvarianceReport:
    """
    Flow sampled starts inside a cone and record the smallest margin reached.

    Args:
        cone: Cone under test; cones outside PIC, PIC1, PIC2, two-positive and
            operator-nonnegative are run but marked exploratory
        samples: Number of random starts (ignored when inputs are given)
        horizon: Flow time; None integrates to the configured fraction of the blowup time
        ctl: Step control (defaults from settings)
        seed: Root seed; sample k uses the k-th spawned child seed
        n: Dimension of the random starts
        settings: Settings; experiments.diagnostic_restarts sets the margin restarts
        watched: Further cones whose margins are tracked along the same flows
        shift_target: Random starts are shifted into the cone until margin >= shift_target * |R|;
            None keeps the raw random tensors
        inputs: Explicit starting tensors instead of random ones

    Returns:
        InvarianceReport; starts that are not strictly inside the cone are flagged and not flowed
    """
    settings = settings or get_settings()
    ctl = ctl or StepControl.from_settings(settings)
    ctl = replace(ctl, record_every=settings.experiments.record_every)
    exploratory = cone.kind not in INVARIANT_KINDS
    if exploratory:
        logger.warning(f"{cone.text()} is not among the ODE-invariant cones; results are exploratory")

    starts: List[Optional[CurvatureTensor]] = list(inputs) if inputs is not None else [None] * samples
    dims = {R.n for R in starts if R is not None}
    n = dims.pop() if len(dims) == 1 else n
    seeds = child_seeds(seed, len(starts))
    args = [(k, seeds[k], starts[k], cone, list(watched), n, horizon, shift_target, ctl, settings)
            for k in range(len(starts))]

    if settings.threads > 1:
        items = Parallel(n_jobs=settings.threads)(delayed(_invariance_item)(*a) for a in args)
    else:
        items = [_invariance_item(*a) for a in args]

    report = InvarianceReport(cone=cone, watched=list(watched), samples=len(starts), n=n, horizon=horizon,
                              seed=seed, exploratory=exploratory, items=list(items))
    logger.info(f"invariance {cone.text()}: {len(starts)} starts, {len(report.outside_inputs)} outside, "
                f"{len(report.violations)} violations")
    return report


# convergence

@dataclass
class ConvergenceReport:
    initial_ratio: float
    final_ratio: float
    max_ratio: float
    reached_target: bool
    target: float
    time_to_target: Optional[float]
    final_ray_distance: float
    ray_monotone_tail: bool
    blowup_time: Optional[float]
    times: List[float]
    ratios: List[float]
    ray_distances: List[float]
    trajectory: Optional[FlowTrajectory] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "initial_ratio": self.initial_ratio,
            "final_ratio": self.final_ratio,
            "max_ratio": self.max_ratio,
            "reached_target": self.reached_target,
            "target": self.target,
            "time_to_target": self.time_to_target,
            "final_ray_distance": self.final_ray_distance,
            "ray_monotone_tail": self.ray_monotone_tail,
            "blowup_time": self.blowup_time,
            "times": self.times,
            "ratios": self.ratios,
            "ray_distances": self.ray_distances,
        }


def ray_distance(R: CurvatureTensor) -> float:
    """Max-norm distance between R / scal(R) and the constant-curvature ray, normalized the same way."""
    scal = scalar(R)
    if scal <= 0.0:
        return float("inf")
    n = R.n
    ray = constant_curvature(n, 1.0) / (n * (n - 1))
    return (R / scal - ray).max_norm


def convergence_experiment(
    R0: CurvatureTensor,
    ctl: Optional[StepControl] = None,
    settings: Optional[Settings] = None,
    seed: int = 0,
    horizon: Optional[float] = None,
    require_strict: bool = True,
) -> ConvergenceReport:
    """
    Follow the pinching ratio and the distance to the constant-curvature ray
    along the normalized flow, up to blowup.

    Args:
        R0: Initial tensor
        ctl: Step control; normalization to scal = n(n-1) is applied when unset
        settings: Settings (experiments.pinching_target is the ratio threshold)
        seed: Seed for the diagnostics
        horizon: Flow time; None runs until blowup is detected
        require_strict: Check strict PIC2 membership of R0 first

    Raises:
        NotInCone: require_strict and R0 not strictly PIC2
    """
    settings = settings or get_settings()
    diag = _diagnostic_settings(settings)
    n = R0.n
    if require_strict:
        report = cone_margin(R0, Cone(ConeKind.PIC2), diag, seed)
        if not report.strict:
            raise NotInCone(f"Initial tensor is not strictly PIC2 (margin {report.margin:.6g})")
    ctl = ctl or StepControl.from_settings(settings)
    if ctl.normalize is None:
        ctl = replace(ctl, normalize=float(n * (n - 1)))
    ctl = replace(ctl, record_every=settings.experiments.record_every)

    t_end = horizon if horizon else DETECTION_TIME / max(R0.max_norm, 1e-300)
    blowup = None
    try:
        traj = integrate(R0, t_end, ctl, pinching=True, settings=diag, seed=seed)
    except BlowupReached as e:
        traj, blowup = e.trajectory, e.blowup_time
        logger.info(f"convergence run stopped at blowup, t={traj.final_time:.12g}")

    ratios = traj.column("pinching")
    distances = np.array([ray_distance(s) for s in traj.states])
    target = settings.experiments.pinching_target
    hits = np.nonzero(ratios >= target)[0]
    tail = distances[len(distances) - max(2, len(distances) // 4):]
    monotone = bool(np.all(np.diff(tail) <= 1e-12 * max(1.0, float(np.max(tail)))))

    out = ConvergenceReport(
        initial_ratio=float(ratios[0]),
        final_ratio=float(ratios[-1]),
        max_ratio=float(np.nanmax(ratios)),
        reached_target=bool(hits.size),
        target=target,
        time_to_target=float(traj.times[hits[0]]) if hits.size else None,
        final_ray_distance=float(distances[-1]),
        ray_monotone_tail=monotone,
        blowup_time=blowup,
        times=list(traj.times),
        ratios=[float(r) for r in ratios],
        ray_distances=[float(d) for d in distances],
        trajectory=traj,
    )
    logger.info(f"convergence: ratio {out.initial_ratio:.4f} -> {out.final_ratio:.4f}, "
                f"ray distance {out.final_ray_distance:.3e}")
    return out


# interior estimate in dimension 3

@dataclass
class InteriorEstimate:
    rho: float
    sigma: float
    times: List[float]
    q: List[float]
    flagged: List[int]

    @property
    def max_q(self) -> float:
        return max(self.q) if self.q else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rho": self.rho,
            "sigma": self.sigma,
            "max_q": self.max_q,
            "flagged": self.flagged,
            "times": self.times,
            "q": self.q,
        }


def interior_estimate_monitor(traj: FlowTrajectory, rho: float) -> InteriorEstimate:
    """
    q(t) = |traceless Ric|^2 / ((3 / 2t)^sigma scal^(2 - sigma)), sigma = rho^2,
    over the raw states of a three-dimensional trajectory; q(t) > 1 is flagged.

    Raises:
        WrongDimension: n != 3
        HypothesisViolated: some state fails Ric >= rho scal >= 0
    """
    if not traj.states:
        return InteriorEstimate(rho, rho * rho, [], [], [])
    if traj.states[0].n != 3:
        raise WrongDimension(f"The interior estimate is stated for n = 3, got n={traj.states[0].n}")
    sigma = rho * rho
    q: List[float] = []
    flagged: List[int] = []
    for k, (t, state) in enumerate(zip(traj.times, traj.states)):
        scal = scalar(state)
        lowest = float(np.linalg.eigvalsh(ricci(state) - rho * scal * np.eye(3))[0])
        slack = HYPOTHESIS_TOL * max(1.0, state.max_norm)
        if lowest < -slack or scal < -slack:
            raise HypothesisViolated(f"Ric >= {rho} scal >= 0 fails at t={t:.6g} (lowest {lowest:.3e}, scal {scal:.6g})")
        trless = float(np.sum(traceless_ricci(state) ** 2))
        if t <= 0.0 or trless == 0.0:
            value = 0.0
        else:
            value = trless / ((3.0 / (2.0 * t)) ** sigma * max(scal, 0.0) ** (2.0 - sigma))
        q.append(value)
        if value > 1.0:
            flagged.append(k)
    if flagged:
        logger.warning(f"interior estimate exceeded at {len(flagged)} recorded times (max q {max(q):.4g})")
    return InteriorEstimate(rho, sigma, list(traj.times), q, flagged)


# rescaling limit

@dataclass
class RescaledLimit:
    blowup_time: Optional[float]
    times: List[float]
    values: List[float]

    @property
    def final_deviation(self) -> float:
        return abs(self.values[-1] - 1.0) if self.values else float("nan")


def rescaled_limit_check(traj: FlowTrajectory, blowup_time: Optional[float] = None) -> RescaledLimit:
    """
    2(n-1)(T - t) kappa(t) along a trajectory, with kappa = scal / (n(n-1)).

    Identically 1 for the round sphere; tends to 1 as t -> T for flows that
    become round.
    """
    T = blowup_time if blowup_time is not None else traj.blowup_estimate()
    if T is None or not traj.states:
        return RescaledLimit(T, [], [])
    n = traj.states[0].n
    times, values = [], []
    for t, state in zip(traj.times, traj.states):
        if t < T:
            kappa = scalar(state) / (n * (n - 1))
            times.append(t)
            values.append(2.0 * (n - 1) * (T - t) * kappa)
    return RescaledLimit(T, times, values)
