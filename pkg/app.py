"""
Batch dispatcher: validates an experiment config, resolves its input tensor,
runs one command and assembles the run report.
"""

import os
import time
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from marshmallow import Schema, ValidationError, fields, validate, validates_schema, post_load

from conditions.cones import Cone, ConeKind, parse_cones
from conditions.crosscheck import CROSSCHECK_KINDS, complex_condition_crosscheck
from conditions.margins import certificate_value, cone_margin
from curvature.frames import Frame4
from curvature.quantities import scalar
from curvature.tensor import CurvatureTensor
from curvature.tensor_io import read_tensor, write_tensor
from flow.boundary import boundary_identity_check, boundary_inward_value, key_inequality_residual
from flow.experiments import child_seeds, convergence_experiment, invariance_experiment
from flow.integrator import StepControl, integrate
from models.builders import build, random_tensor
from models.shift import shift_into_cone
from models.spec import format_model, parse_model
from utils.errors import BlowupReached, ConfigError, CurvatureLabError, InputError, MaxStepsExceeded
from utils.reports import dump_yaml, write_atomic
from utils.settings import Settings, load_settings

logger = logging.getLogger(__name__)

VERSION = "1.0.0"

COMMANDS = ("check", "evolve", "invariance", "convergence", "boundary", "crosscheck", "emit-model")
# commands that sample random tensors and may run without an input
SAMPLING_COMMANDS = {"invariance", "boundary"}
RANDOMIZED_COMMANDS = {"invariance", "boundary", "crosscheck"}
BOUNDARY_TOL = 1e-8
# first-variation residuals at a minimizing frame
STATIONARITY_TOL = 1e-6


class ExperimentConfigSchema(Schema):
    command = fields.String(required=True, validate=validate.OneOf(COMMANDS))
    model = fields.String(load_default=None, allow_none=True)
    input = fields.String(load_default=None, allow_none=True)
    cones = fields.String(load_default=None, allow_none=True)
    t_end = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0.0, min_inclusive=False))
    samples = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=1))
    horizon = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0.0, min_inclusive=False))
    dimension = fields.Integer(load_default=4, validate=validate.Range(min=2))
    seed = fields.Integer(load_default=None, allow_none=True)
    out = fields.String(load_default=None, allow_none=True)
    trajectory = fields.String(load_default=None, allow_none=True)
    dump_every = fields.Integer(load_default=0, validate=validate.Range(min=0))
    rel_tol = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0.0, min_inclusive=False))
    restarts = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=1))
    threads = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=1))
    lambda_range = fields.String(load_default=None, allow_none=True, validate=validate.OneOf(("01", "sym")))
    method = fields.String(load_default=None, allow_none=True, validate=validate.OneOf(("rk4", "rk45")))
    normalize = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0.0, min_inclusive=False))
    settings_file = fields.String(load_default=None, allow_none=True)
    verbose = fields.Integer(load_default=0, validate=validate.Range(min=0))

    @validates_schema
    def validate_sources(self, data, **kwargs):
        command = data.get("command")
        sources = [k for k in ("model", "input") if data.get(k)]
        if len(sources) > 1:
            raise ValidationError("Give either model or input, not both", "input")
        if not sources and command not in SAMPLING_COMMANDS:
            raise ValidationError(f"'{command}' needs a model or an input file", "model")
        if command in RANDOMIZED_COMMANDS and data.get("seed") is None:
            raise ValidationError(f"'{command}' is randomized and needs a seed", "seed")
        if command == "evolve" and data.get("t_end") is None:
            raise ValidationError("'evolve' needs t_end", "t_end")
        if command == "emit-model" and not (data.get("model") and data.get("out")):
            raise ValidationError("'emit-model' needs a model and an output path", "out")

    @post_load
    def make_config(self, data, **kwargs):
        return ExperimentConfig(**data)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    model: Optional[str] = None
    input: Optional[str] = None
    cones: Optional[str] = None
    t_end: Optional[float] = None
    samples: Optional[int] = None
    horizon: Optional[float] = None
    dimension: int = 4
    seed: Optional[int] = None
    out: Optional[str] = None
    trajectory: Optional[str] = None
    dump_every: int = 0
    rel_tol: Optional[float] = None
    restarts: Optional[int] = None
    threads: Optional[int] = None
    lambda_range: Optional[str] = None
    method: Optional[str] = None
    normalize: Optional[float] = None
    settings_file: Optional[str] = None
    verbose: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a raw config mapping.

    Raises:
        ConfigError: with marshmallow's field messages
    """
    try:
        return ExperimentConfigSchema().load(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {e.messages}")


@dataclass
class RunReport:
    command: str
    config: Dict[str, Any]
    settings: Dict[str, Any]
    seed: int
    version: str = VERSION
    items: List[Dict[str, Any]] = field(default_factory=list)
    violations: List[Dict[str, Any]] = field(default_factory=list)
    errors: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def exit_code(self) -> int:
        if self.errors:
            return 1
        if self.violations:
            return 2
        return 0

    def add_error(self, error: Exception, item: Optional[str] = None) -> None:
        entry = {"type": type(error).__name__, "message": str(error)}
        if item is not None:
            entry["item"] = item
        self.errors.append(entry)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "settings": self.settings,
            "summary": self.summary,
            "items": self.items,
            "violations": self.violations,
            "errors": self.errors,
            "exit_code": self.exit_code,
            "wall_time": self.wall_time,
        }


def resolve_input(config: ExperimentConfig, settings: Settings, seed: int) -> Tuple[CurvatureTensor, str]:
    """The tensor named by --model or --input, with a label for the report."""
    if config.model:
        spec = parse_model(config.model)
        return build(spec, settings, seed), format_model(spec)
    if config.input:
        if not os.path.exists(config.input):
            raise InputError(f"Tensor file not found: {config.input}")
        return read_tensor(config.input), config.input
    raise InputError("No input tensor given")


def _step_control(config: ExperimentConfig, settings: Settings) -> StepControl:
    return StepControl.from_settings(settings, method=config.method, normalize=config.normalize,
                                     dump_every=config.dump_every)


def _cones(config: ExperimentConfig, default: str) -> List[Cone]:
    return parse_cones(config.cones or default, config.lambda_range)


def _tensor_summary(R: CurvatureTensor, label: str) -> Dict[str, Any]:
    return {"input": label, "n": R.n, "scal": scalar(R), "max_norm": R.max_norm,
            "bianchi_residual": R.bianchi_residual()}


# commands

def run_check(config: ExperimentConfig, settings: Settings, report: RunReport) -> None:
    R, label = resolve_input(config, settings, report.seed)
    report.summary.update(_tensor_summary(R, label))
    for cone in _cones(config, "pic"):
        try:
            result = cone_margin(R, cone, settings, report.seed)
        except CurvatureLabError as e:
            logger.error(f"{cone.text()} failed: {str(e)}")
            report.add_error(e, cone.text())
            continue
        item = result.to_dict()
        item["member"] = result.member
        item["certificate_value"] = certificate_value(R, result)
        report.items.append(item)


def run_evolve(config: ExperimentConfig, settings: Settings, report: RunReport) -> None:
    R, label = resolve_input(config, settings, report.seed)
    report.summary.update(_tensor_summary(R, label))
    cones = _cones(config, "") if config.cones else []
    pinching = any(c.kind == ConeKind.POINTWISE_PINCHED for c in cones)
    ctl = _step_control(config, settings)
    try:
        traj = integrate(R, config.t_end, ctl, cones=cones, pinching=pinching, settings=settings, seed=report.seed)
        report.summary["blowup"] = False
    except BlowupReached as e:
        traj = e.trajectory
        report.summary["blowup"] = True
        report.summary["blowup_time"] = e.blowup_time
    except MaxStepsExceeded as e:
        traj = e.trajectory
        report.add_error(e)
    report.summary["trajectory"] = traj.summary()
    report.items.extend(traj.records)

    if config.trajectory:
        write_atomic(config.trajectory, traj.to_columns())
    if traj.dumps:
        if not config.out:
            logger.warning("State dumps need an output path; skipping")
        else:
            stem = os.path.splitext(config.out)[0]
            for step, t, state in traj.dumps:
                write_tensor(f"{stem}.state-{step:06d}.yaml", state)
            report.summary["dumps"] = len(traj.dumps)


def run_invariance(config: ExperimentConfig, settings: Settings, report: RunReport) -> None:
    cones = _cones(config, "pic")
    inputs = None
    if config.model or config.input:
        R, label = resolve_input(config, settings, report.seed)
        report.summary.update(_tensor_summary(R, label))
        inputs = [R]
    result = invariance_experiment(
        cones[0],
        config.samples or settings.experiments.samples,
        horizon=config.horizon,
        ctl=_step_control(config, settings),
        seed=report.seed,
        n=config.dimension,
        settings=settings,
        watched=cones[1:],
        inputs=inputs,
    )
    payload = result.to_dict()
    report.items.extend(payload.pop("items"))
    report.summary.update(payload)
    report.violations.extend(result.violations)
    report.errors.extend(result.errors)


def run_convergence(config: ExperimentConfig, settings: Settings, report: RunReport) -> None:
    R, label = resolve_input(config, settings, report.seed)
    report.summary.update(_tensor_summary(R, label))
    result = convergence_experiment(R, _step_control(config, settings), settings, report.seed, config.horizon)
    report.items.append(result.to_dict())
    report.summary.update({k: v for k, v in result.to_dict().items() if k not in ("times", "ratios", "ray_distances")})
    if not result.reached_target:
        report.violations.append({"kind": "pinching_target_not_reached", "max_ratio": result.max_ratio,
                                  "target": result.target})


def _boundary_item(R: CurvatureTensor, label: str, settings: Settings, seed: int) -> Dict[str, Any]:
    result = cone_margin(R, Cone(ConeKind.PIC), settings, seed)
    frame = Frame4(np.asarray(result.frame))
    scale = max(1.0, R.max_norm ** 2)
    tol = settings.tolerances.certificate * max(1.0, R.max_norm)
    key = key_inequality_residual(R, frame)
    item = {
        "input": label,
        "margin": result.margin,
        "applicable": abs(result.margin) <= tol,
        "multiple_minimizers": result.multiple_minimizers,
        "inward_value": boundary_inward_value(R, frame),
        "identity_residual": boundary_identity_check(R, frame),
        "key_inequality": key.to_dict(),
    }
    failures = []
    if item["applicable"]:
        if item["inward_value"] < -BOUNDARY_TOL * scale:
            failures.append("inward_value")
        if key.residual < -BOUNDARY_TOL * scale:
            failures.append("key_inequality")
        stationary = STATIONARITY_TOL * max(1.0, R.max_norm)
        for name in ("step1_residuals", "step2_residuals"):
            values = getattr(key, name)
            if values and max(abs(v) for v in values) > stationary:
                failures.append(name)
    item["failures"] = failures
    return item


def run_boundary(config: ExperimentConfig, settings: Settings, report: RunReport) -> None:
    if config.model or config.input:
        R, label = resolve_input(config, settings, report.seed)
        report.summary.update(_tensor_summary(R, label))
        tensors = [(R, label, report.seed)]
    else:
        tensors = []
        for item_seed in child_seeds(report.seed, config.samples or settings.experiments.samples):
            base = random_tensor(config.dimension, item_seed, 1.0)
            try:
                shifted = shift_into_cone(base, Cone(ConeKind.PIC), 0.0, settings, item_seed).tensor
            except CurvatureLabError as e:
                report.add_error(e, f"rand({config.dimension},seed={item_seed})")
                continue
            tensors.append((shifted, f"shift(rand({config.dimension},seed={item_seed},scale=1.0),pic,0.0)", item_seed))

    for R, label, seed in tensors:
        try:
            item = _boundary_item(R, label, settings, seed)
        except CurvatureLabError as e:
            logger.error(f"boundary check of {label} failed: {str(e)}")
            report.add_error(e, label)
            continue
        report.items.append(item)
        for name in item["failures"]:
            report.violations.append({"input": label, "kind": name})
    report.summary["checked"] = len(report.items)


def run_crosscheck(config: ExperimentConfig, settings: Settings, report: RunReport) -> None:
    R, label = resolve_input(config, settings, report.seed)
    report.summary.update(_tensor_summary(R, label))
    samples = config.samples or 1000
    for cone in _cones(config, "pic,pic1,pic2"):
        if cone.kind not in CROSSCHECK_KINDS:
            report.add_error(ConfigError(f"Cross-check does not apply to {cone.text()}"), cone.text())
            continue
        try:
            verdict = complex_condition_crosscheck(R, cone, samples, settings, report.seed)
        except CurvatureLabError as e:
            report.add_error(e, cone.text())
            continue
        report.items.append(verdict.to_dict())
        if not verdict.sign_agreement:
            report.violations.append({"cone": cone.text(), "kind": "sign_disagreement",
                                      "frame_margin": verdict.frame_margin, "min_value": verdict.min_value})


def run_emit_model(config: ExperimentConfig, settings: Settings, report: RunReport) -> None:
    R, label = resolve_input(config, settings, report.seed)
    write_tensor(config.out, R)
    report.summary.update(_tensor_summary(R, label))
    report.items.append({"model": label, "path": config.out})


HANDLERS: Dict[str, Callable[[ExperimentConfig, Settings, RunReport], None]] = {
    "check": run_check,
    "evolve": run_evolve,
    "invariance": run_invariance,
    "convergence": run_convergence,
    "boundary": run_boundary,
    "crosscheck": run_crosscheck,
    "emit-model": run_emit_model,
}


def run(config: ExperimentConfig, settings: Optional[Settings] = None) -> RunReport:
    """
    Execute one command.

    Args:
        config: Validated experiment config
        settings: Base settings; config-level overrides (restarts, rel_tol, threads, seed) are applied on top

    Returns:
        RunReport; exit_code is 0 on success, 2 when violations were found, 1 on errors.
        The report is written atomically to config.out (emit-model writes the tensor there instead).
    """
    start = time.perf_counter()
    if settings is None:
        settings = load_settings(config.settings_file, restarts=config.restarts, rel_tol=config.rel_tol,
                                 threads=config.threads, seed=config.seed)
    elif config.seed is not None:
        settings = replace(settings, seed=config.seed)
    seed = settings.seed if config.seed is None else config.seed
    report = RunReport(command=config.command, config=config.to_dict(), settings=settings.to_dict(), seed=seed)

    logger.info(f"Running {config.command} (seed {seed})")
    try:
        HANDLERS[config.command](config, settings, report)
    except CurvatureLabError as e:
        logger.error(f"{config.command} failed: {str(e)}")
        report.add_error(e)
    except Exception as e:
        logger.exception(f"Unexpected error in {config.command}")
        report.add_error(e)

    report.wall_time = time.perf_counter() - start
    if config.out and config.command != "emit-model":
        write_atomic(config.out, dump_yaml(report.to_dict()))
    logger.info(f"{config.command} finished with exit code {report.exit_code} in {report.wall_time:.2f}s")
    return report


def human_summary(report: RunReport) -> str:
    """A few lines for standard output."""
    lines = [f"{report.command}: exit {report.exit_code} "
             f"({len(report.items)} items, {len(report.violations)} violations, {len(report.errors)} errors)"]
    if report.command == "check":
        for item in report.items:
            lines.append(f"  {item['cone']}: margin {item['margin']:.10g}"
                         + (" (strict)" if item["strict"] else ""))
    elif report.command == "evolve" and "trajectory" in report.summary:
        traj = report.summary["trajectory"]
        lines.append(f"  t = {traj['t_final']:.10g}, scal = {traj['final_scal']:.10g}, steps = {traj['steps']}")
        if report.summary.get("blowup"):
            lines.append(f"  blowup detected, estimate T = {report.summary.get('blowup_time')}")
    for error in report.errors:
        lines.append(f"  error: {error['type']}: {error['message']}")
    return "\n".join(lines)
