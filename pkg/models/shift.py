"""
Shift a tensor toward constant curvature until a cone margin is reached.

Every cone margin is a minimum of functions linear in R, so
margin(R + c I) >= margin(R) + c margin(I) for the constant-curvature tensor I;
c = (target - margin(R)) / margin(I) always suffices and the smallest
admissible c is found by bisection below it.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

from conditions.cones import Cone, ConditionReport
from conditions.margins import cone_margin
from curvature.tensor import CurvatureTensor
from models.builders import constant_curvature
from utils.errors import BisectionFailed, HypothesisViolated
from utils.settings import Settings, get_settings

logger = logging.getLogger(__name__)

BISECTION_WIDTH = 1e-10
MAX_RETRIES = 2


@dataclass
class ShiftOutcome:
    tensor: CurvatureTensor
    shift: float
    report: ConditionReport
    evaluations: int = 0


def _bisect(R: CurvatureTensor, cone: Cone, target: float, settings: Settings, seed: int) -> ShiftOutcome:
    unit = constant_curvature(R.n, 1.0)
    base = cone_margin(R, cone, settings, seed)
    if base.margin >= target:
        return ShiftOutcome(R, 0.0, base, 1)

    unit_margin = cone_margin(unit, cone, settings, seed).margin
    if unit_margin <= 0.0:
        raise HypothesisViolated(f"Constant curvature is not inside {cone.text()} (margin {unit_margin:.6g})")

    lo, hi = 0.0, (target - base.margin) / unit_margin
    hi_report = cone_margin(R + hi * unit, cone, settings, seed)
    # optimizer noise can leave the a-priori bound a hair short
    for _ in range(50):
        if hi_report.margin >= target:
            break
        hi *= 1.0 + 1e-6
        hi_report = cone_margin(R + hi * unit, cone, settings, seed)
    else:
        raise BisectionFailed(f"Upper shift {hi:.12g} still below target {target} for {cone.text()}")

    readings: List[Tuple[float, float]] = [(0.0, base.margin), (hi, hi_report.margin)]
    noise = settings.tolerances.certificate * max(1.0, R.max_norm)
    width = BISECTION_WIDTH * max(1.0, hi)
    evaluations = 3

    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        report = cone_margin(R + mid * unit, cone, settings, seed)
        evaluations += 1
        for c, m in readings:
            if (c < mid and report.margin < m - noise) or (c > mid and report.margin > m + noise):
                raise BisectionFailed(
                    f"Margin readings not monotone in the shift: {m:.12g} at c={c:.12g}, "
                    f"{report.margin:.12g} at c={mid:.12g}"
                )
        readings.append((mid, report.margin))
        if report.margin >= target:
            hi, hi_report = mid, report
        else:
            lo = mid

    logger.debug(f"bisection for {cone.text()} target {target}: c={hi:.12g} after {evaluations} margin queries")
    return ShiftOutcome(R + hi * unit, hi, hi_report, evaluations)


def shift_into_cone(
    R: CurvatureTensor,
    cone: Cone,
    target_margin: float = 0.0,
    settings: Optional[Settings] = None,
    seed: int = 0,
) -> ShiftOutcome:
    """
    Smallest c >= 0 with cone_margin(R + c I) >= target_margin.

    Args:
        R: Tensor to shift
        cone: Cone whose margin is targeted
        target_margin: Desired margin; 0 gives a certified boundary tensor
        settings: Optimizer settings; the restart budget doubles on each retry
        seed: Root seed for every margin query

    Returns:
        ShiftOutcome with the shifted tensor, c and the final margin report

    Raises:
        BisectionFailed: margin readings stayed non-monotone after all retries
        HypothesisViolated: constant curvature is not inside the cone
    """
    settings = settings or get_settings()
    for attempt in range(MAX_RETRIES + 1):
        try:
            return _bisect(R, cone, target_margin, settings, seed)
        except BisectionFailed as e:
            if attempt == MAX_RETRIES:
                raise
            restarts = 2 * settings.optimizer.restarts
            logger.warning(f"{str(e)}; retrying with {restarts} restarts")
            settings = settings.with_restarts(restarts)
