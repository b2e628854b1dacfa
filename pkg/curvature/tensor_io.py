"""
Tensor file format: a YAML document

    n: 4
    format: sym-reduced
    entries:
    - [0, 1, 0, 1, 1.0]
    ...

listing canonical representatives only. The reader completes the orbits.
"""

import logging
from typing import Any, Dict

from curvature.tensor import PROJECT, STRICT, CurvatureTensor, make_tensor
from utils.errors import InputError
from utils.reports import dump_yaml, load_yaml, write_atomic

logger = logging.getLogger(__name__)

FORMAT_NAME = "sym-reduced"


def tensor_to_document(R: CurvatureTensor, include_zeros: bool = False) -> Dict[str, Any]:
    entries = [list(e) for e in R.entries() if include_zeros or e[4] != 0.0]
    return {"n": R.n, "format": FORMAT_NAME, "entries": entries}


def dumps_tensor(R: CurvatureTensor, include_zeros: bool = False) -> str:
    return dump_yaml(tensor_to_document(R, include_zeros))


def loads_tensor(text: str, mode: str = STRICT, tol: float = 1e-12) -> CurvatureTensor:
    """
    Parse a tensor document.

    Raises:
        InputError: malformed document
        IndexOutOfRange, SymmetryConflict, BianchiViolation: from make_tensor
    """
    try:
        doc = load_yaml(text)
    except Exception as e:
        raise InputError(f"Tensor file is not valid YAML: {str(e)}")
    if not isinstance(doc, dict) or "n" not in doc or "entries" not in doc:
        raise InputError("Tensor file needs 'n' and 'entries' fields")
    if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise InputError(f"Unsupported tensor format: {doc.get('format')}")
    try:
        n = int(doc["n"])
        entries = [tuple(e) for e in (doc["entries"] or [])]
    except (TypeError, ValueError) as e:
        raise InputError(f"Malformed tensor file: {str(e)}")
    tensor, residual = make_tensor(n, entries, mode=mode, tol=tol)
    logger.debug(f"Loaded tensor n={n} with {len(entries)} entries (Bianchi residual {residual:.3e})")
    return tensor


def read_tensor(path: str, mode: str = STRICT, tol: float = 1e-12) -> CurvatureTensor:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise InputError(f"Cannot read tensor file {path}: {str(e)}")
    return loads_tensor(text, mode=mode, tol=tol)


def write_tensor(path: str, R: CurvatureTensor) -> None:
    write_atomic(path, dumps_tensor(R))


__all__ = ["dumps_tensor", "loads_tensor", "read_tensor", "write_tensor", "tensor_to_document", "PROJECT", "STRICT"]
