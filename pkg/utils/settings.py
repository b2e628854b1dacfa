"""
Settings layer: config/defaults.yaml, then CURVLAB_* environment variables,
then explicit overrides (command-line flags).
"""

import os
import logging
import pathlib
from dataclasses import dataclass, field, replace, asdict
from functools import lru_cache
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

load_dotenv()

DEFAULTS_FILE = pathlib.Path(__file__).resolve().parent.parent / "config" / "defaults.yaml"


@dataclass(frozen=True)
class Tolerances:
    structural: float = 1e-12
    derived: float = 1e-10
    certificate: float = 1e-8
    strictness: float = 1e-8
    degenerate_plane: float = 1e-14


@dataclass(frozen=True)
class OptimizerSettings:
    restarts: int = 64
    max_iters: int = 2000
    grad_tol: float = 1e-10
    stall_tol: float = 1e-15
    stall_window: int = 50
    window_tol: float = 1e-12
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    step_init: float = 0.1
    pic2_grid: int = 33
    alternation_rounds: int = 50


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "rk45"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-12
    norm_ceiling: float = 1e12
    max_steps: int = 200000
    bianchi_reproject: float = 1e-9


@dataclass(frozen=True)
class ExperimentSettings:
    samples: int = 50
    horizon_fraction: float = 0.9
    pinching_target: float = 0.99
    record_every: int = 5
    diagnostic_restarts: int = 8


@dataclass(frozen=True)
class Settings:
    tolerances: Tolerances = field(default_factory=Tolerances)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    experiments: ExperimentSettings = field(default_factory=ExperimentSettings)
    threads: int = 1
    seed: int = 0

    def with_restarts(self, restarts: int) -> "Settings":
        return replace(self, optimizer=replace(self.optimizer, restarts=int(restarts)))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _section(cls, data: Dict[str, Any], name: str):
    data = data or {}
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}' section: {sorted(unknown)}")
    try:
        return cls(**{k: type(getattr(cls(), k))(v) for k, v in data.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value in '{name}' section: {str(e)}")


def _env_overrides() -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    env_map = {
        "CURVLAB_THREADS": ("threads", int),
        "CURVLAB_RESTARTS": ("restarts", int),
        "CURVLAB_REL_TOL": ("rel_tol", float),
        "CURVLAB_SEED": ("seed", int),
    }
    for var, (key, cast) in env_map.items():
        value = os.getenv(var)
        if value:
            try:
                overrides[key] = cast(value)
            except ValueError:
                raise ConfigError(f"Environment variable {var} is not a valid {cast.__name__}: {value}")
    return overrides


def load_settings(path: Optional[str] = None, **overrides: Any) -> Settings:
    """
    Build the effective settings.

    Args:
        path: Defaults file; falls back to CURVLAB_CONFIG, then config/defaults.yaml
        **overrides: Flag-level overrides (restarts, rel_tol, threads, seed, strictness)

    Returns:
        Immutable Settings
    """
    config_path = pathlib.Path(path or os.getenv("CURVLAB_CONFIG", str(DEFAULTS_FILE)))
    data: Dict[str, Any] = {}
    if config_path.exists():
        with open(config_path, "r") as f:
            data = yaml.safe_load(f) or {}
    else:
        logger.warning(f"Settings file not found: {config_path}, using built-in defaults")

    settings = Settings(
        tolerances=_section(Tolerances, data.get("tolerances"), "tolerances"),
        optimizer=_section(OptimizerSettings, data.get("optimizer"), "optimizer"),
        integrator=_section(IntegratorSettings, data.get("integrator"), "integrator"),
        experiments=_section(ExperimentSettings, data.get("experiments"), "experiments"),
        threads=int(data.get("threads", 1)),
        seed=int(data.get("seed", 0)),
    )

    merged = {**_env_overrides(), **{k: v for k, v in overrides.items() if v is not None}}
    for key, value in merged.items():
        if key in ("threads", "seed"):
            settings = replace(settings, **{key: int(value)})
        elif key in OptimizerSettings.__dataclass_fields__:
            settings = replace(settings, optimizer=replace(settings.optimizer, **{key: value}))
        elif key in IntegratorSettings.__dataclass_fields__:
            settings = replace(settings, integrator=replace(settings.integrator, **{key: value}))
        elif key in Tolerances.__dataclass_fields__:
            settings = replace(settings, tolerances=replace(settings.tolerances, **{key: value}))
        elif key in ExperimentSettings.__dataclass_fields__:
            settings = replace(settings, experiments=replace(settings.experiments, **{key: value}))
        else:
            raise ConfigError(f"Unknown setting override: {key}")

    if settings.optimizer.restarts < 1:
        raise ConfigError("restarts must be >= 1")
    if settings.integrator.rel_tol <= 0 or settings.integrator.abs_tol <= 0:
        raise ConfigError("integrator tolerances must be positive")
    if settings.threads < 1:
        raise ConfigError("threads must be >= 1")
    return settings


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Process-wide settings from the defaults file and environment."""
    return load_settings()
