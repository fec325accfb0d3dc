"""Deterministic serialization helpers.

CSV floats use 17 significant digits, which round-trips IEEE doubles
exactly; JSON relies on Python's shortest-repr floats (also exact) and
sorted keys so reruns produce byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def fmt17(x: float) -> str:
    """Format a float with 17 significant digits (exact round trip)."""
    return format(float(x), ".17g")


def matrix_json(m: np.ndarray) -> dict:
    """Row-major matrix payload with explicit dimensions."""
    m = np.asarray(m, dtype=float)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": [float(v) for v in m.ravel()]}


def matrix_from_json(payload: dict) -> np.ndarray:
    return np.asarray(payload["data"], dtype=float).reshape(payload["rows"], payload["cols"])


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
