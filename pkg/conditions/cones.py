"""
Curvature cones and condition reports.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from utils.errors import CurvatureLabError, ParseError, RangeViolation


class ConeKind(Enum):
    SEC_NONNEG = "sec"
    PIC = "pic"
    PIC1 = "pic1"
    PIC2 = "pic2"
    TWO_POSITIVE = "two_positive"
    OPERATOR_NONNEG = "operator_nonneg"
    POINTWISE_PINCHED = "pinch"
    RIC_PINCHED = "ric_pinched"
    PIC1_SCAL_MARGIN = "pic1_scal"
    PIC2_SCAL_MARGIN = "pic2_scal"


ISOTROPIC_KINDS = {ConeKind.PIC, ConeKind.PIC1, ConeKind.PIC2, ConeKind.PIC1_SCAL_MARGIN, ConeKind.PIC2_SCAL_MARGIN}

ALIASES = {
    "sec": ConeKind.SEC_NONNEG,
    "sec_nonneg": ConeKind.SEC_NONNEG,
    "pic": ConeKind.PIC,
    "pic1": ConeKind.PIC1,
    "pic2": ConeKind.PIC2,
    "two_positive": ConeKind.TWO_POSITIVE,
    "2pos": ConeKind.TWO_POSITIVE,
    "operator_nonneg": ConeKind.OPERATOR_NONNEG,
    "opnonneg": ConeKind.OPERATOR_NONNEG,
    "pinch": ConeKind.POINTWISE_PINCHED,
    "pointwise_pinched": ConeKind.POINTWISE_PINCHED,
    "ric_pinched": ConeKind.RIC_PINCHED,
    "ricpinch": ConeKind.RIC_PINCHED,
    "pic1_scal": ConeKind.PIC1_SCAL_MARGIN,
    "pic1_scal_margin": ConeKind.PIC1_SCAL_MARGIN,
    "pic2_scal": ConeKind.PIC2_SCAL_MARGIN,
    "pic2_scal_margin": ConeKind.PIC2_SCAL_MARGIN,
}


@dataclass(frozen=True)
class Cone:
    """
    A curvature cone. delta applies to POINTWISE_PINCHED, rho to the Ricci and
    scalar-margin cones; lambda_range is '01' for [0,1] or 'sym' for [-1,1].
    """

    kind: ConeKind
    delta: Optional[float] = None
    rho: Optional[float] = None
    lambda_range: Optional[str] = None

    def __post_init__(self):
        if self.kind == ConeKind.POINTWISE_PINCHED:
            delta = 0.25 if self.delta is None else float(self.delta)
            if not (0.0 < delta <= 1.0):
                raise RangeViolation(f"Pinching constant must lie in (0, 1], got {delta}")
            object.__setattr__(self, "delta", delta)
        if self.kind in (ConeKind.RIC_PINCHED, ConeKind.PIC1_SCAL_MARGIN, ConeKind.PIC2_SCAL_MARGIN):
            if self.rho is None or not float(self.rho) > 0.0:
                raise RangeViolation(f"{self.kind.value} needs rho > 0, got {self.rho}")
            object.__setattr__(self, "rho", float(self.rho))
        if self.lambda_range is None:
            object.__setattr__(self, "lambda_range", "sym" if self.kind == ConeKind.PIC2_SCAL_MARGIN else "01")
        if self.lambda_range not in ("01", "sym"):
            raise RangeViolation(f"lambda_range must be '01' or 'sym', got {self.lambda_range}")

    @property
    def needs_frames(self) -> bool:
        return self.kind in ISOTROPIC_KINDS

    def text(self) -> str:
        if self.kind == ConeKind.POINTWISE_PINCHED:
            return f"pinch({self.delta!r})"
        if self.kind in (ConeKind.RIC_PINCHED, ConeKind.PIC1_SCAL_MARGIN):
            return f"{self.kind.value}({self.rho!r})"
        if self.kind == ConeKind.PIC2_SCAL_MARGIN:
            return f"pic2_scal({self.rho!r})" if self.lambda_range == "sym" else f"pic2_scal({self.rho!r},01)"
        if self.kind in (ConeKind.PIC1, ConeKind.PIC2) and self.lambda_range == "sym":
            return f"{self.kind.value}(sym)"
        return self.kind.value

    def __str__(self) -> str:
        return self.text()


_CONE_RE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*(?:\((.*)\))?\s*$")


def parse_cone(text: str, lambda_range: Optional[str] = None) -> Cone:
    """
    Parse 'pic', 'pic2(sym)', 'pinch', 'pinch(0.3)', 'ric_pinched(0.1)', 'pic2_scal(0.05)'.

    Args:
        text: Cone text
        lambda_range: Default weight range for pic1/pic2 when the text does not give one
    """
    match = _CONE_RE.match(text)
    if not match:
        raise ParseError("Malformed cone", text, 0)
    name, args_text = match.group(1).lower(), match.group(2)
    if name not in ALIASES:
        raise ParseError(f"Unknown cone '{name}'", text, 0)
    kind = ALIASES[name]
    args = [a.strip() for a in args_text.split(",")] if args_text else []
    rng = lambda_range or "01"

    try:
        if kind == ConeKind.POINTWISE_PINCHED:
            return Cone(kind, delta=float(args[0]) if args else None)
        if kind in (ConeKind.RIC_PINCHED, ConeKind.PIC1_SCAL_MARGIN):
            if not args:
                raise ParseError(f"Cone '{name}' needs a rho argument", text, len(text))
            return Cone(kind, rho=float(args[0]), lambda_range=rng)
        if kind == ConeKind.PIC2_SCAL_MARGIN:
            if not args:
                raise ParseError(f"Cone '{name}' needs a rho argument", text, len(text))
            return Cone(kind, rho=float(args[0]), lambda_range=args[1] if len(args) > 1 else "sym")
        if kind in (ConeKind.PIC1, ConeKind.PIC2) and args:
            return Cone(kind, lambda_range=args[0])
        if args:
            raise ParseError(f"Cone '{name}' takes no arguments", text, text.index("("))
        if kind in (ConeKind.PIC1, ConeKind.PIC2):
            return Cone(kind, lambda_range=rng)
        return Cone(kind)
    except ValueError as e:
        if isinstance(e, CurvatureLabError):
            raise
        raise ParseError(f"Bad cone argument ({str(e)})", text, text.find("("))


def parse_cones(text: str, lambda_range: Optional[str] = None) -> List[Cone]:
    """Split a comma-separated cone list, keeping commas inside parentheses."""
    items, depth, current = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            items.append(current)
            current = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        current += ch
    if current.strip():
        items.append(current)
    return [parse_cone(item, lambda_range) for item in items if item.strip()]


@dataclass
class ConditionReport:
    """
    Outcome of a cone-membership query.

    margin is the minimum of the defining quantity over the admissible set;
    the certificate (frame rows, weights, planes, two-forms or a vector)
    re-evaluates to it.
    """

    cone: Cone
    margin: float
    certificate: str
    frame: Optional[np.ndarray] = None
    lam: Optional[float] = None
    mu: Optional[float] = None
    planes: Optional[List[np.ndarray]] = None
    two_forms: Optional[np.ndarray] = None
    vector: Optional[np.ndarray] = None
    restarts_used: int = 0
    converged: bool = True
    degenerate: bool = False
    strict: bool = False
    multiple_minimizers: bool = False
    seed: int = 0
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.margin >= 0.0 or self.strict

    def to_dict(self) -> Dict[str, Any]:
        minimizer: Dict[str, Any] = {"kind": self.certificate}
        if self.frame is not None:
            minimizer["frame"] = np.asarray(self.frame).tolist()
        if self.lam is not None:
            minimizer["lambda"] = float(self.lam)
        if self.mu is not None:
            minimizer["mu"] = float(self.mu)
        if self.planes is not None:
            minimizer["planes"] = [np.asarray(p).tolist() for p in self.planes]
        if self.two_forms is not None:
            minimizer["two_forms"] = np.asarray(self.two_forms).tolist()
        if self.vector is not None:
            minimizer["vector"] = np.asarray(self.vector).tolist()
        out = {
            "cone": self.cone.text(),
            "margin": float(self.margin),
            "strict": bool(self.strict),
            "minimizer": minimizer,
            "restarts_used": int(self.restarts_used),
            "converged": bool(self.converged),
            "degenerate": bool(self.degenerate),
            "multiple_minimizers": bool(self.multiple_minimizers),
            "seed": int(self.seed),
        }
        if self.details:
            out["details"] = self.details
        return out
