#!/usr/bin/env python3
"""
Verification reports

Every invariant and identity check produces a ``CheckReport``: one entry per
named identity with its maximum residual over the sampled points and the
point where it was attained.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, computed_field

logger = logging.getLogger(__name__)


class CheckEntry(BaseModel):
    """Worst residual seen for one identity."""

    name: str
    max_residual: float
    tolerance: float
    worst_point: Optional[List[float]] = None
    samples: int = 0

    @computed_field
    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


class CheckReport(BaseModel):
    """Result of a verification run"""

    entries: List[CheckEntry] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.errors and all(entry.passed for entry in self.entries)

    def entry(self, name: str) -> CheckEntry:
        for candidate in self.entries:
            if candidate.name == name:
                return candidate
        raise KeyError(name)

    def names(self) -> List[str]:
        return [entry.name for entry in self.entries]

    def record(
        self,
        name: str,
        residual: Any,
        tolerance: float,
        point: Optional[Sequence[float]] = None,
    ) -> "CheckReport":
        """Fold a residual (scalar or array, max-abs taken) into the report."""
        value = residual_norm(residual)
        worst = None if point is None else [float(v) for v in np.ravel(point)]
        for existing in self.entries:
            if existing.name == name:
                existing.samples += 1
                if value > existing.max_residual:
                    existing.max_residual = value
                    existing.worst_point = worst
                existing.tolerance = tolerance
                return self
        self.entries.append(
            CheckEntry(
                name=name,
                max_residual=value,
                tolerance=tolerance,
                worst_point=worst,
                samples=1,
            )
        )
        return self

    def merge(self, other: "CheckReport") -> "CheckReport":
        for entry in other.entries:
            for existing in self.entries:
                if existing.name == entry.name:
                    existing.samples += entry.samples
                    if entry.max_residual > existing.max_residual:
                        existing.max_residual = entry.max_residual
                        existing.worst_point = entry.worst_point
                    break
            else:
                self.entries.append(entry.model_copy())
        self.errors.extend(other.errors)
        self.warnings.extend(other.warnings)
        return self

    def failures(self) -> List[CheckEntry]:
        return [entry for entry in self.entries if not entry.passed]

    def summary(self) -> Dict[str, float]:
        return {entry.name: entry.max_residual for entry in self.entries}

    def log_summary(self, label: str) -> None:
        failed = self.failures()
        if failed or self.errors:
            for entry in failed:
                logger.warning(
                    f"{label}: {entry.name} residual {entry.max_residual:.3e} "
                    f"exceeds {entry.tolerance:.1e}"
                )
            for error in self.errors:
                logger.warning(f"{label}: {error}")
        else:
            logger.info(f"{label}: {len(self.entries)} identities passed")


def residual_norm(residual: Any) -> float:
    """Max-abs of a residual; NaN counts as an infinite residual."""
    array = np.asarray(residual, dtype=float)
    if array.size == 0:
        return 0.0
    value = float(np.max(np.abs(array)))
    if math.isnan(value):
        return math.inf
    return value


def worst(*residuals: Any) -> float:
    """Largest residual norm over arrays of different shapes."""
    return max((residual_norm(r) for r in residuals), default=0.0)
