"""Tolerances and runtime settings.

Defaults come from ``ness_config.json`` next to this module (or the file
named by ``NESS_CONFIG``). Environment variables, optionally provided
through a ``.env`` file, override the worker count and log level.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from ness_errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "ness_config.json"


@dataclass(frozen=True)
class ToleranceConfig:
    """Every numerical tolerance used by the library, in one place."""

    hermitian_rtol: float = 1e-12
    psd_rtol: float = 1e-10
    positivity_rtol: float = 1e-12
    residual_rtol: float = 1e-10
    pauli_atol: float = 1e-10
    balance_rtol: float = 1e-9
    bound_rtol: float = 1e-9
    degeneracy_rtol: float = 1e-8
    current_atol: float = 1e-12
    stability_rtol: float = 1e-12
    unitarity_atol: float = 1e-10

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "ToleranceConfig":
        if not data:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown tolerance keys: {unknown}")
        try:
            return cls(**{k: float(v) for k, v in data.items()})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid tolerance value: {e}")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


DEFAULT_TOLERANCES = ToleranceConfig()


@dataclass(frozen=True)
class Settings:
    """Process-level settings for the CLI and the tool server."""

    tolerances: ToleranceConfig = DEFAULT_TOLERANCES
    jobs: int = 1
    failure_rate_threshold: float = 0.01
    log_level: str = "WARNING"


def _default_payload() -> Dict[str, Any]:
    return {
        "tolerances": DEFAULT_TOLERANCES.to_dict(),
        "jobs": 1,
        "failure_rate_threshold": 0.01,
        "log_level": "WARNING",
    }


def _load_defaults_file(path: Path) -> Dict[str, Any]:
    """Read the defaults JSON, falling back to built-ins on any problem"""
    try:
        if path.exists():
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            return data.get("ness_defaults", data)
        logger.info(f"No defaults file at {path}, using built-in defaults")
    except Exception as e:
        logger.warning(f"Failed to load defaults from {path}: {e}, using built-in defaults")
    return _default_payload()


def load_settings(config_path: Optional[str] = None) -> Settings:
    """Build Settings from the defaults file plus environment overrides."""
    load_dotenv()
    path = Path(config_path or os.getenv("NESS_CONFIG") or DEFAULT_CONFIG_PATH)
    payload = _load_defaults_file(path)

    settings = Settings(
        tolerances=ToleranceConfig.from_dict(payload.get("tolerances")),
        jobs=int(payload.get("jobs", 1)),
        failure_rate_threshold=float(payload.get("failure_rate_threshold", 0.01)),
        log_level=str(payload.get("log_level", "WARNING")).upper(),
    )

    env_jobs = os.getenv("NESS_JOBS")
    if env_jobs:
        try:
            settings = replace(settings, jobs=max(1, int(env_jobs)))
        except ValueError:
            logger.warning(f"Ignoring non-integer NESS_JOBS={env_jobs!r}")
    env_level = os.getenv("NESS_LOG_LEVEL")
    if env_level:
        settings = replace(settings, log_level=env_level.upper())
    return settings
