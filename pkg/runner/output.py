#!/usr/bin/env python3
"""
Trajectory and report files

CSV columns: t, x1..x{n_x}, f1..f{n_V}, xdot1.., fdot1.., p1..p{n_G}, E.
JSON carries the same data as named arrays plus the run metadata. Floats are
written in shortest round-trip form and files carry no timestamps, so equal
runs give byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List

import jsonschema
import numpy as np
import pandas as pd

from reduction_engine.bundle import ModelSpec
from reduction_engine.checks import CheckReport

from .integrators import Trajectory

logger = logging.getLogger(__name__)

BLOCKS = ("x", "f", "xdot", "fdot", "p")

TRAJECTORY_SCHEMA = {
    "type": "object",
    "required": ["columns", "t", "x", "f", "xdot", "fdot", "p", "E", "metadata"],
    "properties": {
        "columns": {"type": "array", "items": {"type": "string"}},
        "t": {"type": "array", "items": {"type": "number"}},
        "E": {"type": "array", "items": {"type": "number"}},
        "metadata": {"type": "object"},
        **{
            block: {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
            for block in BLOCKS
        },
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["passed", "entries", "errors"],
    "properties": {
        "passed": {"type": "boolean"},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "max_residual", "tolerance", "passed"],
            },
        },
        "errors": {"type": "array", "items": {"type": "string"}},
    },
}


def block_sizes(model: ModelSpec) -> Dict[str, int]:
    return {"x": model.n_x, "f": model.n_V, "xdot": model.n_x, "fdot": model.n_V, "p": model.n_G}


def trajectory_columns(model: ModelSpec) -> List[str]:
    columns = ["t"]
    for block, size in block_sizes(model).items():
        columns.extend(f"{block}{i + 1}" for i in range(size))
    return columns + ["E"]


def trajectory_frame(trajectory: Trajectory, model: ModelSpec) -> pd.DataFrame:
    data = np.column_stack([trajectory.times, trajectory.states, trajectory.energies])
    return pd.DataFrame(data, columns=trajectory_columns(model))


def _json_document(trajectory: Trajectory, model: ModelSpec) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "columns": trajectory_columns(model),
        "t": trajectory.times.tolist(),
        "E": trajectory.energies.tolist(),
        "metadata": trajectory.metadata,
    }
    offset = 0
    for block, size in block_sizes(model).items():
        document[block] = trajectory.states[:, offset : offset + size].tolist()
        offset += size
    return document


def _prepare(path: str) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def write_trajectory(trajectory: Trajectory, model: ModelSpec, path: str, fmt: str = "csv") -> Path:
    target = _prepare(path)
    if fmt == "csv":
        trajectory_frame(trajectory, model).to_csv(target, index=False, lineterminator="\n")
    else:
        target.write_text(
            json.dumps(_json_document(trajectory, model), sort_keys=True, indent=2) + "\n"
        )
    logger.info(f"Wrote {len(trajectory.times)} rows to {target}")
    return target


def read_trajectory(path: str) -> Trajectory:
    """Parse a CSV or JSON trajectory written by ``write_trajectory``."""
    source = Path(path)
    if source.suffix == ".json":
        document = json.loads(source.read_text())
        jsonschema.validate(document, TRAJECTORY_SCHEMA)
        times = np.asarray(document["t"], dtype=float)
        blocks = [np.asarray(document[b], dtype=float).reshape(len(times), -1) for b in BLOCKS]
        return Trajectory(
            times=times,
            states=np.hstack(blocks),
            energies=np.asarray(document["E"], dtype=float),
            metadata=document["metadata"],
        )
    frame = pd.read_csv(source, float_precision="round_trip")
    values = frame.to_numpy(dtype=float)
    return Trajectory(times=values[:, 0], states=values[:, 1:-1], energies=values[:, -1])


def write_json(document: Dict[str, Any], path: str) -> Path:
    target = _prepare(path)
    target.write_text(json.dumps(document, sort_keys=True, indent=2, default=float) + "\n")
    return target


def write_report(report: CheckReport, path: str) -> Path:
    target = write_json(report.model_dump(), path)
    logger.info(f"Wrote check report ({len(report.entries)} identities) to {target}")
    return target


def read_report(path: str) -> CheckReport:
    document = json.loads(Path(path).read_text())
    jsonschema.validate(document, REPORT_SCHEMA)
    for entry in document["entries"]:
        entry.pop("passed", None)
    document.pop("passed", None)
    return CheckReport(**document)
