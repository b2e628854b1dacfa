"""
Cone margins: the minimum of each cone's defining quantity over its
admissible set, with a certificate that re-evaluates to it.

Frame-type cones are minimized over orthonormal frames by multi-start
projected gradient descent; the weights lambda, mu are minimized exactly for
each frame so the optimizer only ever sees the frame.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from conditions.cones import Cone, ConeKind, ConditionReport, ISOTROPIC_KINDS
from conditions.stiefel import LocalResult, MultiStartResult, multistart_minimize
from curvature.frames import Frame4
from curvature.quantities import (
    LAMBDA_RANGES,
    complex_pair_from_frame,
    form_gradient,
    frame_form,
    isotropic_coefficients,
    operator_matrix,
    partial_contraction,
    pic1_quantity,
    pic2_quantity,
    ricci,
    scalar,
    sectional,
    sectional_coefficients,
    weighted_isotropic,
)
from curvature.tensor import CurvatureTensor
from models.builders import constant_curvature, product
from utils.errors import NonpositiveCurvature, WrongDimension
from utils.settings import Settings, get_settings

logger = logging.getLogger(__name__)

PAIRINGS = ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2))
NEAR_MINIMIZER_SLACK = 1e-4


# exact weight minimization

def _min_quadratic(A: float, B: float, C0: float, lo: float, hi: float) -> Tuple[float, float]:
    """Minimum of A x^2 + B x + C0 over [lo, hi]; ties go to the first candidate."""
    candidates = [lo, hi]
    if A > 0.0:
        x = -B / (2.0 * A)
        if lo < x < hi:
            candidates.append(x)
    best_x, best_v = lo, A * lo * lo + B * lo + C0
    for x in candidates[1:]:
        v = A * x * x + B * x + C0
        if v < best_v:
            best_x, best_v = x, v
    return best_v, best_x


def pic1_weight_minimum(terms: Tuple[float, ...], lambda_range: str = "01") -> Tuple[float, float]:
    """
    min over lambda of R1313 + lam^2 R1414 + R2323 + lam^2 R2424 - 2 lam R1234.

    Returns:
        (value, lambda)
    """
    a, b, c, d, e = terms
    lo, hi = LAMBDA_RANGES[lambda_range]
    return _min_quadratic(b + d, -2.0 * e, a + c, lo, hi)


def pic2_weight_minimum(
    terms: Tuple[float, ...],
    lambda_range: str = "01",
    grid: int = 33,
    rounds: int = 50,
) -> Tuple[float, float, float]:
    """
    min over (lambda, mu) of the PIC2 quantity for fixed frame terms.

    Starts at the best point of a grid x grid lattice, then alternates exact
    one-variable minimizations until neither weight moves.

    Returns:
        (value, lambda, mu)
    """
    a, b, c, d, e = terms
    lo, hi = LAMBDA_RANGES[lambda_range]
    ticks = np.linspace(lo, hi, grid)
    L, M = np.meshgrid(ticks, ticks, indexing="ij")
    values = a + L * L * b + M * M * c + L * L * M * M * d - 2.0 * L * M * e
    idx = np.unravel_index(int(np.argmin(values)), values.shape)
    lam, mu = float(ticks[idx[0]]), float(ticks[idx[1]])
    value = float(values[idx])

    for _ in range(rounds):
        _, lam_new = _min_quadratic(b + d * mu * mu, -2.0 * e * mu, a + c * mu * mu, lo, hi)
        v2, mu_new = _min_quadratic(c + d * lam_new * lam_new, -2.0 * e * lam_new, a + b * lam_new * lam_new, lo, hi)
        moved = abs(lam_new - lam) + abs(mu_new - mu)
        if v2 <= value:
            lam, mu, value = lam_new, mu_new, v2
        if moved <= 1e-15:
            break
    return value, lam, mu


# frame objectives

class IsotropicObjective:
    """
    Frame objective for the isotropic family, with the weights minimized
    exactly per frame. offset is subtracted from the value (rho * scal for the
    scalar-margin cones).
    """

    def __init__(self, R: CurvatureTensor, kind: ConeKind, lambda_range: str = "01",
                 offset: float = 0.0, grid: int = 33, rounds: int = 50):
        self.R = R
        self.kind = kind
        self.lambda_range = lambda_range
        self.offset = offset
        self.grid = grid
        self.rounds = rounds

    def weights(self, terms: Tuple[float, ...]) -> Tuple[float, float, float]:
        if self.kind == ConeKind.PIC:
            return weighted_isotropic(terms, 1.0, 1.0), 1.0, 1.0
        if self.kind in (ConeKind.PIC1, ConeKind.PIC1_SCAL_MARGIN):
            value, lam = pic1_weight_minimum(terms, self.lambda_range)
            return value, lam, 1.0
        return pic2_weight_minimum(terms, self.lambda_range, self.grid, self.rounds)

    def __call__(self, E: np.ndarray, with_grad: bool):
        P = partial_contraction(self.R, E)
        T = np.einsum("ia,ajkl->ijkl", E, P)
        terms = (T[0, 2, 0, 2], T[0, 3, 0, 3], T[1, 2, 1, 2], T[1, 3, 1, 3], T[0, 1, 2, 3])
        value, lam, mu = self.weights(tuple(float(t) for t in terms))
        grad = form_gradient(isotropic_coefficients(lam, mu), P) if with_grad else None
        return value - self.offset, grad, {"lam": lam, "mu": mu}


class FormObjective:
    """Fixed-coefficient frame form, optionally negated for maximization."""

    def __init__(self, R: CurvatureTensor, C: np.ndarray, sign: float = 1.0):
        self.R = R
        self.C = C
        self.sign = sign

    def __call__(self, E: np.ndarray, with_grad: bool):
        value, grad = frame_form(self.R, E, self.C)
        return self.sign * value, (self.sign * grad if with_grad else None), {}


# sectional curvature

@dataclass
class SectionalExtremes:
    k_min: float
    k_max: float
    plane_min: np.ndarray
    plane_max: np.ndarray
    restarts_used: int = 0
    converged: bool = True

    @property
    def planes(self) -> List[np.ndarray]:
        return [self.plane_min, self.plane_max]


def _coordinate_planes(n: int) -> List[np.ndarray]:
    I = np.eye(n)
    return [I[[i, j]] for i in range(n) for j in range(i + 1, n)]


def sectional_extremes(R: CurvatureTensor, settings: Optional[Settings] = None, seed: int = 0) -> SectionalExtremes:
    """
    Smallest and largest sectional curvature over all 2-planes.

    Args:
        R: Curvature tensor
        settings: Optimizer settings (defaults from get_settings())
        seed: Root seed for the restarts

    Returns:
        SectionalExtremes with orthonormal 2 x n plane certificates

    Raises:
        OptimizerDiverged: every restart produced a non-finite value
    """
    settings = settings or get_settings()
    opt = settings.optimizer
    if R.max_norm == 0.0:
        plane = np.eye(R.n)[:2]
        return SectionalExtremes(0.0, 0.0, plane, plane, 0, True)

    C = sectional_coefficients()
    starts = _coordinate_planes(R.n)
    low = multistart_minimize(FormObjective(R, C, 1.0), R.n, 2, opt, seed=seed,
                              scale=R.max_norm, n_jobs=settings.threads, initial=starts)
    high = multistart_minimize(FormObjective(R, C, -1.0), R.n, 2, opt, seed=seed + 1,
                               scale=R.max_norm, n_jobs=settings.threads, initial=starts)
    k_min = sectional(R, low.best.frame[0], low.best.frame[1])
    k_max = sectional(R, high.best.frame[0], high.best.frame[1])
    logger.debug(f"sectional extremes n={R.n}: [{k_min:.10g}, {k_max:.10g}]")
    return SectionalExtremes(
        k_min=k_min,
        k_max=k_max,
        plane_min=low.best.frame,
        plane_max=high.best.frame,
        restarts_used=low.restarts_used + high.restarts_used,
        converged=low.converged and high.converged,
    )


def pointwise_pinching_ratio(R: CurvatureTensor, settings: Optional[Settings] = None, seed: int = 0,
                             extremes: Optional[SectionalExtremes] = None) -> float:
    """
    K_min / K_max.

    Raises:
        NonpositiveCurvature: if K_max <= 0
    """
    ext = extremes or sectional_extremes(R, settings, seed)
    if ext.k_max <= 0.0:
        raise NonpositiveCurvature(f"Pinching ratio needs K_max > 0, got {ext.k_max:.6g}")
    return ext.k_min / ext.k_max


# cone margins

def complex_plane_projector(E: np.ndarray, lam: float = 1.0, mu: float = 1.0) -> np.ndarray:
    """Hermitian projector onto span_C{zeta, eta} of the frame's complex pair."""
    zeta, eta = complex_pair_from_frame(np.asarray(E, dtype=float), lam, mu)
    Q, _ = np.linalg.qr(np.stack([zeta, eta], axis=1))
    return Q @ Q.conj().T


def same_minimizer(a: LocalResult, b: LocalResult, tol: float = 1e-2) -> bool:
    """
    Whether two frame minimizers give the same complex plane, up to conjugation.

    The weighted quantity depends on the frame only through span_C{zeta, eta},
    so unitary mixing of (zeta, eta) and swapping the pairs are not new minimizers.
    """
    P = complex_plane_projector(a.frame, a.params.get("lam", 1.0), a.params.get("mu", 1.0))
    Q = complex_plane_projector(b.frame, b.params.get("lam", 1.0), b.params.get("mu", 1.0))
    return min(np.max(np.abs(P - Q)), np.max(np.abs(P - Q.conj()))) <= tol


def _multiple_minimizers(result: MultiStartResult, slack: float) -> bool:
    near = result.near_minimizers(slack)
    for r in near[1:]:
        if not same_minimizer(near[0], r):
            return True
    return False


def _isotropic_margin(R: CurvatureTensor, cone: Cone, settings: Settings, seed: int) -> ConditionReport:
    opt = settings.optimizer
    scal = scalar(R)
    offset = cone.rho * scal if cone.kind in (ConeKind.PIC1_SCAL_MARGIN, ConeKind.PIC2_SCAL_MARGIN) else 0.0
    objective = IsotropicObjective(R, cone.kind, cone.lambda_range, offset, opt.pic2_grid, opt.alternation_rounds)
    starts = [np.eye(R.n)[list(p)] for p in PAIRINGS]
    result = multistart_minimize(objective, R.n, 4, opt, seed=seed, scale=R.max_norm,
                                 n_jobs=settings.threads, initial=starts)
    best = result.best
    frame = Frame4.nearest(best.frame)
    lam, mu = best.params["lam"], best.params["mu"]

    # re-evaluate the certificate through the public quantity functions
    if cone.kind == ConeKind.PIC:
        value = pic1_quantity(R, frame, 1.0, cone.lambda_range)
    elif cone.kind in (ConeKind.PIC1, ConeKind.PIC1_SCAL_MARGIN):
        value = pic1_quantity(R, frame, lam, cone.lambda_range)
    else:
        value = pic2_quantity(R, frame, lam, mu, cone.lambda_range)
    margin = value - offset
    residual = abs(margin - best.value)
    if residual > settings.tolerances.certificate * max(1.0, R.max_norm):
        logger.warning(f"{cone.text()} certificate re-evaluates {residual:.3e} away from the optimizer value")

    details: Dict[str, Any] = {}
    if offset:
        details = {"isotropic_min": value, "scal": scal}
        if scal < margin:
            margin = scal
            details["scal_bound_active"] = True

    return ConditionReport(
        cone=cone,
        margin=margin,
        certificate="frame",
        frame=frame.vectors,
        lam=None if cone.kind == ConeKind.PIC else lam,
        mu=mu if cone.kind in (ConeKind.PIC2, ConeKind.PIC2_SCAL_MARGIN) else None,
        restarts_used=result.restarts_used,
        converged=result.converged,
        multiple_minimizers=_multiple_minimizers(result, NEAR_MINIMIZER_SLACK * max(1.0, R.max_norm)),
        seed=seed,
        details=details,
    )


def _degenerate_report(R: CurvatureTensor, cone: Cone, seed: int) -> ConditionReport:
    report = ConditionReport(cone=cone, margin=0.0, certificate="none", degenerate=True, seed=seed)
    if cone.kind in ISOTROPIC_KINDS and R.n >= 4:
        report.certificate = "frame"
        report.frame = np.eye(R.n)[:4]
    elif cone.kind in (ConeKind.SEC_NONNEG, ConeKind.POINTWISE_PINCHED):
        report.certificate = "planes"
        report.planes = [np.eye(R.n)[:2], np.eye(R.n)[:2]]
    return report


def cone_margin(R: CurvatureTensor, cone: Cone, settings: Optional[Settings] = None, seed: int = 0) -> ConditionReport:
    """
    Margin of R with respect to a cone.

    Args:
        R: Curvature tensor
        cone: Cone to test
        settings: Tolerances and optimizer settings (defaults from get_settings())
        seed: Root seed for frame restarts

    Returns:
        ConditionReport; strict is set when margin > strictness * max-norm

    Raises:
        WrongDimension: isotropic-family cone with n < 4
        OptimizerDiverged: every restart produced a non-finite value
    """
    settings = settings or get_settings()
    if cone.needs_frames and R.n < 4:
        raise WrongDimension(f"Cone {cone.text()} needs n >= 4, got n={R.n}")
    if R.max_norm == 0.0:
        logger.info(f"Zero tensor: {cone.text()} margin is 0 (degenerate)")
        return _degenerate_report(R, cone, seed)

    kind = cone.kind
    if kind in ISOTROPIC_KINDS:
        report = _isotropic_margin(R, cone, settings, seed)

    elif kind in (ConeKind.TWO_POSITIVE, ConeKind.OPERATOR_NONNEG):
        w, V = np.linalg.eigh(operator_matrix(R))
        count = 2 if kind == ConeKind.TWO_POSITIVE else 1
        count = min(count, len(w))
        report = ConditionReport(cone=cone, margin=float(np.sum(w[:count])), certificate="two_forms",
                                 two_forms=V[:, :count].T, seed=seed, details={"eigenvalues": w[:count]})

    elif kind == ConeKind.RIC_PINCHED:
        scal = scalar(R)
        w, V = np.linalg.eigh(ricci(R) - cone.rho * scal * np.eye(R.n))
        report = ConditionReport(cone=cone, margin=float(w[0]), certificate="vector", vector=V[:, 0],
                                 seed=seed, details={"scal": scal})

    else:
        ext = sectional_extremes(R, settings, seed)
        if kind == ConeKind.SEC_NONNEG:
            margin, details = ext.k_min, {}
        else:
            margin = ext.k_min - cone.delta * ext.k_max
            details = {"k_min": ext.k_min, "k_max": ext.k_max}
            if ext.k_max > 0.0:
                details["pinching_ratio"] = ext.k_min / ext.k_max
        report = ConditionReport(cone=cone, margin=margin, certificate="planes", planes=ext.planes,
                                 restarts_used=ext.restarts_used, converged=ext.converged,
                                 seed=seed, details=details)

    report.strict = report.margin > settings.tolerances.strictness * R.max_norm
    logger.debug(f"{cone.text()} margin {report.margin:.12g} (strict={report.strict}) for n={R.n}")
    return report


def certificate_value(R: CurvatureTensor, report: ConditionReport) -> float:
    """Re-evaluate a report's certificate with the quantity functions."""
    cone = report.cone
    if report.degenerate:
        return 0.0
    if cone.kind in ISOTROPIC_KINDS:
        frame = Frame4(report.frame)
        lam = 1.0 if report.lam is None else report.lam
        mu = 1.0 if report.mu is None else report.mu
        value = pic2_quantity(R, frame, lam, mu, cone.lambda_range)
        if cone.kind in (ConeKind.PIC1_SCAL_MARGIN, ConeKind.PIC2_SCAL_MARGIN):
            scal = scalar(R)
            return min(value - cone.rho * scal, scal)
        return value
    if report.certificate == "two_forms":
        M = operator_matrix(R)
        return float(sum(v @ M @ v for v in report.two_forms))
    if report.certificate == "vector":
        v = report.vector
        return float(v @ (ricci(R) - cone.rho * scalar(R) * np.eye(R.n)) @ v)
    k_min = sectional(R, report.planes[0][0], report.planes[0][1])
    if cone.kind == ConeKind.SEC_NONNEG:
        return k_min
    k_max = sectional(R, report.planes[1][0], report.planes[1][1])
    return k_min - cone.delta * k_max


# lattice checks

@dataclass
class ImplicationVerdict:
    stronger: ConditionReport
    weaker: ConditionReport
    violation: bool
    tolerance: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stronger": self.stronger.to_dict(),
            "weaker": self.weaker.to_dict(),
            "violation": self.violation,
            "tolerance": self.tolerance,
        }


def implication_check(R: CurvatureTensor, stronger: Cone, weaker: Cone,
                      settings: Optional[Settings] = None, seed: int = 0) -> ImplicationVerdict:
    """
    Compare margins for a pair of nested cones.

    A violation is a strictly positive margin for the stronger cone together
    with a weaker-cone margin below -tolerance.
    """
    settings = settings or get_settings()
    strong = cone_margin(R, stronger, settings, seed)
    weak = cone_margin(R, weaker, settings, seed)
    tol = settings.tolerances.certificate * max(1.0, R.max_norm)
    violation = strong.strict and weak.margin < -tol
    if violation:
        logger.warning(f"Lattice violation: {stronger.text()} margin {strong.margin:.6g} "
                       f"but {weaker.text()} margin {weak.margin:.6g}")
    return ImplicationVerdict(stronger=strong, weaker=weak, violation=violation, tolerance=tol)


@dataclass
class BergerBound:
    residual: float
    bound: float
    max_abs_r1234: float
    frame: np.ndarray
    extremes: SectionalExtremes = field(repr=False, default=None)


def berger_bound(R: CurvatureTensor, settings: Optional[Settings] = None, seed: int = 0,
                 extremes: Optional[SectionalExtremes] = None) -> BergerBound:
    """(2/3)(K_max - K_min) against the largest |R(e1,e2,e3,e4)| over orthonormal frames."""
    settings = settings or get_settings()
    if R.n < 4:
        raise WrongDimension(f"The four-frame bound needs n >= 4, got n={R.n}")
    ext = extremes or sectional_extremes(R, settings, seed)
    bound = (2.0 / 3.0) * (ext.k_max - ext.k_min)
    if R.max_norm == 0.0:
        return BergerBound(bound, bound, 0.0, np.eye(R.n)[:4], ext)

    C = np.zeros((4, 4, 4, 4))
    C[0, 1, 2, 3] = 1.0
    # flipping e4 flips the sign, so the largest value is the largest modulus
    result = multistart_minimize(FormObjective(R, C, -1.0), R.n, 4, settings.optimizer, seed=seed + 2,
                                 scale=R.max_norm, n_jobs=settings.threads,
                                 initial=[np.eye(R.n)[list(p)] for p in PAIRINGS])
    max_abs = -result.best.value
    return BergerBound(bound - max_abs, bound, max_abs, result.best.frame, ext)


def berger_bound_residual(R: CurvatureTensor, settings: Optional[Settings] = None, seed: int = 0) -> float:
    return berger_bound(R, settings, seed).residual


def sphere_product_margin(R: CurvatureTensor, settings: Optional[Settings] = None, seed: int = 0) -> ConditionReport:
    """PIC margin of R (+) S^2(1), the product with a round unit two-sphere."""
    return cone_margin(product(R, constant_curvature(2, 1.0)), Cone(ConeKind.PIC), settings, seed)
