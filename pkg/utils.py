"""Utility functions shared by the NESS tools: timestamps and JSON matrix encoding."""

import logging
import math
import time
from datetime import datetime
from typing import Any, Dict, Optional, Union
from zoneinfo import ZoneInfo

import numpy as np

from ness_errors import ConfigError

logger = logging.getLogger(__name__)


def get_local_timezone() -> ZoneInfo:
    """Get local timezone based on system settings"""
    try:
        return ZoneInfo(time.tzname[0])
    except Exception:
        return ZoneInfo("UTC")


def current_timestamp(fallback: Optional[datetime] = None) -> str:
    """ISO 8601 timestamp in the local timezone, used to stamp run summaries."""
    try:
        return datetime.now(get_local_timezone()).isoformat()
    except Exception as e:
        logger.warning(f"Failed to read local time: {e}")
        return (fallback or datetime.utcnow()).isoformat()


def decode_matrix(value: Any, name: str = "matrix") -> np.ndarray:
    """
    Decode a matrix from its JSON form.

    Accepted forms:
        - nested lists of real numbers: [[1, 0], [0, 1]]
        - an object with real and imaginary parts: {"re": [[...]], "im": [[...]]}
          ("im" may be omitted)

    Raises:
        ConfigError: the value is not a well-formed 2-D numeric matrix
    """
    try:
        if isinstance(value, dict):
            unknown = sorted(set(value) - {"re", "im"})
            if unknown or "re" not in value:
                raise ConfigError(f"{name}: expected keys 're' and optional 'im', got {sorted(value)}")
            re = np.array(value["re"], dtype=float)
            im = np.array(value.get("im", np.zeros_like(re)), dtype=float)
            if re.shape != im.shape:
                raise ConfigError(f"{name}: 're' has shape {re.shape}, 'im' has {im.shape}")
            arr = re + 1j * im
        else:
            arr = np.array(value, dtype=complex)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: not a numeric matrix ({e})")
    if arr.ndim != 2:
        raise ConfigError(f"{name}: expected a 2-D matrix, got {arr.ndim} dimensions")
    return arr


def encode_matrix(arr: np.ndarray) -> Dict[str, Any]:
    """Inverse of ``decode_matrix`` for complex arrays."""
    arr = np.asarray(arr, dtype=complex)
    return {"re": arr.real.tolist(), "im": arr.imag.tolist()}


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values so ``json.dumps`` accepts them."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_matrix(obj)
        return obj.tolist()
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def format_float(value: Union[float, int]) -> str:
    """Round-trippable text form used in CSV output."""
    return repr(float(value))
