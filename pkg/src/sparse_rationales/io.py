"""JSON reading, validation and byte-stable writing.

Graphs follow ``{"num_variables": L, "factors": [{"kind", "members", "params"}]}``.
Scores are a JSON array of ``L`` numbers or an array of equal-length rows
flattened row-major (premise rows first). Solver configs are objects with a
subset of :class:`~sparse_rationales.lp_sparsemap.SolverConfig` fields.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .graph import FactorGraph, GraphError
from .lp_sparsemap import SolverConfig


class InputError(ValueError):
    """Malformed or inconsistent input, with the file and field it came from."""


def read_json(path: str | Path, what: str = "input") -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{what} {path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise ValueError(f"cannot serialise non-finite value {value}")
        return value
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, fixed indentation, shortest round-trip floats."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj))


def parse_graph(d: Any, source: str = "graph") -> FactorGraph:
    try:
        return FactorGraph.from_dict(d)
    except GraphError as exc:
        raise InputError(f"{source}: {exc}") from None


def load_graph(path: str | Path) -> FactorGraph:
    return parse_graph(read_json(path, "graph"), f"graph {path}")


def parse_scores(d: Any, source: str = "scores", num_variables: int | None = None) -> tuple[np.ndarray, tuple[int, ...]]:
    """Flat score vector and its shape (``(L,)`` or ``(rows, cols)``)."""
    if not isinstance(d, list) or not d:
        raise InputError(f"{source}: expected a non-empty array")
    if all(isinstance(row, list) for row in d):
        widths = {len(row) for row in d}
        if len(widths) != 1 or 0 in widths:
            raise InputError(f"{source}: matrix rows must be non-empty and of equal length")
        rows = [[_number(x, f"{source}[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(d)]
        values = np.array(rows, dtype=np.float64)
    else:
        values = np.array([_number(x, f"{source}[{i}]") for i, x in enumerate(d)], dtype=np.float64)
    shape = values.shape
    flat = values.reshape(-1)
    if num_variables is not None and flat.size != num_variables:
        raise InputError(f"{source}: {flat.size} scores for a graph with {num_variables} variables")
    return flat, shape


def _number(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"{where}: expected a number, got {json.dumps(x)}")
    if not math.isfinite(x):
        raise InputError(f"{where}: scores must be finite")
    return float(x)


def load_scores(path: str | Path, num_variables: int | None = None) -> tuple[np.ndarray, tuple[int, ...]]:
    return parse_scores(read_json(path, "scores"), f"scores {path}", num_variables)


def parse_config(d: Any, source: str = "config") -> SolverConfig:
    if isinstance(d, dict) and "solver" in d and isinstance(d["solver"], dict):
        d = d["solver"]
    try:
        return SolverConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{source}: {exc}") from None


def load_config(path: str | Path) -> SolverConfig:
    return parse_config(read_json(path, "config"), f"config {path}")


def load_masks(path: str | Path, what: str) -> list[np.ndarray]:
    """A list of masks; alignment matrices are flattened row-major."""
    d = read_json(path, what)
    if not isinstance(d, list) or not d:
        raise InputError(f"{what} {path}: expected a non-empty array of masks")
    masks = []
    for k, m in enumerate(d):
        try:
            arr = np.asarray(m, dtype=np.float64)
        except (TypeError, ValueError):
            raise InputError(f"{what} {path}[{k}]: not a numeric array") from None
        if arr.ndim not in (1, 2) or arr.size == 0 or not np.all(np.isfinite(arr)):
            raise InputError(f"{what} {path}[{k}]: expected a non-empty finite vector or matrix")
        masks.append(arr.reshape(-1))
    return masks
