#!/usr/bin/env python3
"""
Runtime Configuration
Environment settings for logging and metrics, TOML simulation configs
"""

import logging
import os
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from reduction_engine.bundle import ModelSpec
from reduction_engine.dynamics import ReducedState
from reduction_engine.errors import ReductionError, ShapeError

logger = logging.getLogger(__name__)


class ConfigError(ReductionError):
    """Configuration file missing, malformed or invalid."""


@dataclass
class RuntimeSettings:
    """Process-wide settings taken from the environment"""

    log_level: str = "INFO"
    log_format: str = "text"
    metrics_path: Optional[str] = None

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        load_dotenv()
        log_format = os.getenv("LOG_FORMAT", "text").lower()
        if log_format not in ("text", "json"):
            logger.warning(f"Unknown LOG_FORMAT '{log_format}', using text")
            log_format = "text"
        return cls(
            log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
            log_format=log_format,
            metrics_path=os.getenv("METRICS_PATH") or None,
        )


class StateConfig(BaseModel):
    """Initial reduced state; omitted entries are zero."""

    model_config = ConfigDict(extra="forbid")

    x: Optional[List[float]] = None
    f: Optional[List[float]] = None
    xdot: Optional[List[float]] = None
    fdot: Optional[List[float]] = None
    p: Optional[List[float]] = None


class CompareBounds(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_dx: float = Field(1e-5, gt=0)
    max_df: float = Field(1e-5, gt=0)
    max_dE: float = Field(1e-5, gt=0)


class SimConfig(BaseModel):
    """A check, simulate or compare job"""

    model_config = ConfigDict(extra="forbid")

    model: str = "abelian_disk"
    params: Dict[str, Any] = Field(default_factory=dict)
    initial: StateConfig = Field(default_factory=StateConfig)
    dt: float = Field(1e-3, gt=0)
    t_final: float = Field(1.0, gt=0)
    integrator: Literal["rk4", "rkf45"] = "rk4"
    tol: float = Field(1e-10, gt=0)
    seed: int = Field(0, ge=0)
    samples: int = Field(100, ge=1)
    workers: int = Field(1, ge=1)
    output: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    compare: CompareBounds = Field(default_factory=CompareBounds)

    @model_validator(mode="after")
    def _step_within_horizon(self) -> "SimConfig":
        if self.dt > self.t_final:
            raise ValueError(f"dt={self.dt} exceeds t_final={self.t_final}")
        return self

    def initial_state(self, model: ModelSpec) -> ReducedState:
        state = self.initial
        sizes = {"x": model.n_x, "f": model.n_V, "xdot": model.n_x, "fdot": model.n_V, "p": model.n_G}
        values = {}
        for key, size in sizes.items():
            entry = getattr(state, key)
            values[key] = [0.0] * size if entry is None else entry
        try:
            return ReducedState.build(
                model,
                x=values["x"],
                f_tilde=values["f"],
                xdot=values["xdot"],
                fdot=values["fdot"],
                p=values["p"],
            )
        except ShapeError as exc:
            raise ConfigError(f"initial state does not fit {model.name}: {exc}") from exc


def load_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> SimConfig:
    """Read a TOML job file and apply CLI overrides (``None`` values ignored)."""
    raw: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            with config_path.open("rb") as handle:
                raw = tomllib.load(handle)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Invalid TOML in {path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    try:
        config = SimConfig(**raw)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc
    logger.debug(f"Loaded config for model {config.model} from {path or 'defaults'}")
    return config
