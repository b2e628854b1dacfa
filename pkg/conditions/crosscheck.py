"""
Cross-check of the frame formulation of PIC / PIC1 / PIC2 against the
complexified one: R(zeta, eta, conj zeta, conj eta) >= 0 over the complex
pairs admitted by each cone.

Admissible pairs are built from random frames as zeta = e1 + i mu e2,
eta = e3 + i lam e4 and then mixed by a random complex 2 x 2 matrix with
|det| = 1. The mixing preserves every cone's algebraic constraint and the
value, so each sample equals a frame quantity. PIC2 additionally admits all
pairs, which are sampled from a complex Gaussian. This is evidence, not proof:
the sampler has no completeness guarantee.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from conditions.cones import Cone, ConeKind, ConditionReport
from conditions.margins import cone_margin
from curvature.frames import ComplexVector, random_stiefel
from curvature.quantities import LAMBDA_RANGES, complex_pair_from_frame, complexify_eval, hermitian_area
from curvature.tensor import CurvatureTensor
from utils.errors import ConstraintConstructionFailed, WrongDimension
from utils.settings import Settings, get_settings

logger = logging.getLogger(__name__)

CROSSCHECK_KINDS = (ConeKind.PIC, ConeKind.PIC1, ConeKind.PIC2)
CONSTRAINT_TOL = 1e-10
MAX_ATTEMPTS = 10


@dataclass
class CrosscheckVerdict:
    cone: Cone
    samples: int
    min_value: float
    negative_count: int
    frame_margin: float
    discrepancy: float
    sign_agreement: bool
    max_imaginary: float
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cone": self.cone.text(),
            "samples": self.samples,
            "min_value": self.min_value,
            "negative_count": self.negative_count,
            "frame_margin": self.frame_margin,
            "discrepancy": self.discrepancy,
            "sign_agreement": self.sign_agreement,
            "max_imaginary": self.max_imaginary,
            "seed": self.seed,
        }


def bilinear(z: np.ndarray, w: np.ndarray) -> complex:
    """Complex-bilinear extension g(z, w) of the Euclidean inner product."""
    return complex(np.sum(z * w))


def constraint_residual(kind: ConeKind, zeta: np.ndarray, eta: np.ndarray) -> float:
    """How far (zeta, eta) is from the cone's algebraic constraint, relative to |zeta|^2 |eta|^2."""
    gzz, gzw, gww = bilinear(zeta, zeta), bilinear(zeta, eta), bilinear(eta, eta)
    size = float(np.vdot(zeta, zeta).real * np.vdot(eta, eta).real)
    if kind == ConeKind.PIC:
        return max(abs(gzz), abs(gzw), abs(gww)) / np.sqrt(size)
    if kind == ConeKind.PIC1:
        return abs(gzz * gww - gzw * gzw) / size
    return 0.0


def _unimodular(rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    det = np.linalg.det(G)
    return G / np.sqrt(abs(det))


def admissible_pair(kind: ConeKind, n: int, rng: np.random.Generator,
                    lambda_range: str = "01") -> Tuple[np.ndarray, np.ndarray]:
    """
    One random complex pair satisfying the cone's constraint.

    Raises:
        ConstraintConstructionFailed: no admissible, non-degenerate pair after repeated draws
    """
    lo, hi = LAMBDA_RANGES[lambda_range]
    for _ in range(MAX_ATTEMPTS):
        E = random_stiefel(n, 4, rng)
        lam = 1.0 if kind == ConeKind.PIC else float(rng.uniform(lo, hi))
        mu = float(rng.uniform(lo, hi)) if kind == ConeKind.PIC2 else 1.0
        zeta, eta = complex_pair_from_frame(E, lam, mu)
        A = _unimodular(rng)
        zeta, eta = A[0, 0] * zeta + A[0, 1] * eta, A[1, 0] * zeta + A[1, 1] * eta
        if hermitian_area(zeta, eta) > CONSTRAINT_TOL and constraint_residual(kind, zeta, eta) <= CONSTRAINT_TOL:
            return zeta, eta
    raise ConstraintConstructionFailed(f"Could not build an admissible pair for {kind.value} in R^{n}")


def complex_condition_crosscheck(
    R: CurvatureTensor,
    cone: Cone,
    samples: int = 1000,
    settings: Optional[Settings] = None,
    seed: int = 0,
    report: Optional[ConditionReport] = None,
) -> CrosscheckVerdict:
    """
    Sample admissible complex pairs and compare with the frame margin.

    Args:
        R: Curvature tensor, n >= 4
        cone: PIC, PIC1 or PIC2
        samples: Number of random pairs (the certificate pair is added on top)
        settings: Settings for the frame margin
        seed: Sampler and optimizer seed
        report: Precomputed frame margin report, computed when omitted

    Returns:
        CrosscheckVerdict; discrepancy > 0 means a sample went below the frame margin
    """
    if cone.kind not in CROSSCHECK_KINDS:
        raise ValueError(f"Cross-check applies to pic, pic1 and pic2, got {cone.text()}")
    if R.n < 4:
        raise WrongDimension(f"Complexified cross-check needs n >= 4, got n={R.n}")
    settings = settings or get_settings()
    report = report or cone_margin(R, cone, settings, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    scale = max(R.max_norm, 1e-300)
    tol = settings.tolerances.certificate * scale

    # the certificate itself, as a complex pair
    values = []
    if report.frame is not None:
        lam = 1.0 if report.lam is None else report.lam
        mu = 1.0 if report.mu is None else report.mu
        zeta, eta = complex_pair_from_frame(np.asarray(report.frame), lam, mu)
        values.append(complexify_eval(R, ComplexVector.from_complex(zeta), ComplexVector.from_complex(eta)))
    for _ in range(samples):
        zeta, eta = admissible_pair(cone.kind, R.n, rng, cone.lambda_range)
        values.append(complexify_eval(R, ComplexVector.from_complex(zeta), ComplexVector.from_complex(eta)))

    real = np.array([v.real for v in values])
    max_imag = float(max(abs(v.imag) for v in values)) if values else 0.0
    negative = int(np.sum(real < -tol))

    if cone.kind == ConeKind.PIC2:
        for _ in range(samples):
            zeta = rng.standard_normal(R.n) + 1j * rng.standard_normal(R.n)
            eta = rng.standard_normal(R.n) + 1j * rng.standard_normal(R.n)
            size = float(np.vdot(zeta, zeta).real * np.vdot(eta, eta).real)
            value = complexify_eval(R, ComplexVector.from_complex(zeta), ComplexVector.from_complex(eta))
            max_imag = max(max_imag, abs(value.imag))
            negative += int(value.real < -tol * size)

    min_value = float(np.min(real)) if real.size else float("nan")
    discrepancy = report.margin - min_value
    sign_agreement = (report.margin < -tol) == (negative > 0)
    if not sign_agreement:
        logger.warning(f"{cone.text()} cross-check disagrees: frame margin {report.margin:.6g}, "
                       f"{negative} negative complex samples")
    return CrosscheckVerdict(
        cone=cone,
        samples=len(values) + (samples if cone.kind == ConeKind.PIC2 else 0),
        min_value=min_value,
        negative_count=negative,
        frame_margin=report.margin,
        discrepancy=discrepancy,
        sign_agreement=sign_agreement,
        max_imaginary=max_imag,
        seed=seed,
    )
