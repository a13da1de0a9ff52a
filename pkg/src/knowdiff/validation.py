"""Small input-validation helpers used across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError


def as_float_array(name: str, value, shape: tuple | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray, optionally enforcing an exact shape."""
    arr = np.asarray(value, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ShapeError(f"{name}: expected shape {shape}, got {arr.shape}")
    return arr


def ensure_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")


def ensure_in_range(name: str, value: float, lo: float, hi: float,
                    lo_open: bool = False, hi_open: bool = False) -> None:
    lo_ok = value > lo if lo_open else value >= lo
    hi_ok = value < hi if hi_open else value <= hi
    if not (lo_ok and hi_ok):
        lo_b = "(" if lo_open else "["
        hi_b = ")" if hi_open else "]"
        raise ValueError(f"{name}={value} outside {lo_b}{lo}, {hi}{hi_b}")


def ensure_same_grid(name_a: str, a, name_b: str, b) -> None:
    """Two trajectory-like objects must share point count and dt."""
    if len(a.points) != len(b.points):
        raise ShapeError(
            f"{name_a} and {name_b} differ in length: {len(a.points)} vs {len(b.points)}")
    if abs(a.dt - b.dt) > 1e-12:
        raise ShapeError(f"{name_a} and {name_b} differ in dt: {a.dt} vs {b.dt}")
