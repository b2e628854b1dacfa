"""
YAML documents for tensors and run reports: stable key order, floats with 17
significant digits, atomic writes.
"""

import os
import math
import logging
import tempfile
from dataclasses import asdict, is_dataclass
from enum import Enum
from typing import Any

import numpy as np
import yaml

logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """17 significant digits, always in a form YAML resolves back to float."""
    if math.isnan(value):
        return ".nan"
    if math.isinf(value):
        return ".inf" if value > 0 else "-.inf"
    text = format(value, ".17g")
    mantissa, sep, exponent = text.partition("e")
    if "." not in mantissa:
        mantissa += ".0"
    return mantissa + sep + exponent


class LabDumper(yaml.SafeDumper):
    pass


def _represent_float(dumper: yaml.SafeDumper, value: float):
    return dumper.represent_scalar("tag:yaml.org,2002:float", format_float(float(value)))


LabDumper.add_representer(float, _represent_float)


def to_plain(obj: Any) -> Any:
    """Recursively convert numpy values, enums and dataclasses to plain YAML types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(asdict(obj))
    return obj


def dump_yaml(data: Any) -> str:
    return yaml.dump(to_plain(data), Dumper=LabDumper, sort_keys=False, default_flow_style=None, width=120)


def load_yaml(text: str) -> Any:
    return yaml.safe_load(text)


def write_atomic(path: str, text: str) -> None:
    """Write text to path via a temporary file in the same directory and os.replace."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".yaml")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logger.info(f"Wrote {path}")
