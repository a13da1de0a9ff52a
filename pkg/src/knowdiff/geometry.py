"""Polyline geometry helpers: arc length, projection, tangents."""

from __future__ import annotations

import math

import numpy as np


def cumulative_arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length per vertex, starting at 0."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def project_to_polyline(points: np.ndarray, query) -> tuple[float, float]:
    """Project a point onto a polyline.

    Returns (arc length of the projection, signed lateral offset); lateral is
    positive to the left of the travel direction.
    """
    q = np.asarray(query, dtype=np.float64)
    best = (math.inf, 0.0, 0.0)
    s_acc = 0.0
    for i in range(len(points) - 1):
        a, b = points[i], points[i + 1]
        d = b - a
        seg_len = float(np.hypot(d[0], d[1]))
        if seg_len < 1e-12:
            continue
        t = float(np.dot(q - a, d) / (seg_len * seg_len))
        t = min(1.0, max(0.0, t))
        closest = a + t * d
        dist = float(np.hypot(*(q - closest)))
        if dist < best[0]:
            cross = (d[0] * (q[1] - a[1]) - d[1] * (q[0] - a[0])) / seg_len
            best = (dist, s_acc + t * seg_len, float(cross))
        s_acc += seg_len
    return best[1], best[2]


def point_at_arclength(points: np.ndarray, s: float) -> np.ndarray:
    """Point at arc length `s`, clamped to the polyline's extent."""
    cum = cumulative_arclength(points)
    s = min(max(s, 0.0), float(cum[-1]))
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(points) - 2)
    seg = cum[i + 1] - cum[i]
    t = 0.0 if seg < 1e-12 else (s - cum[i]) / seg
    return points[i] + t * (points[i + 1] - points[i])


def tangent_at_arclength(points: np.ndarray, s: float) -> float:
    """Tangent heading (radians) at arc length `s`, clamped to the extent."""
    cum = cumulative_arclength(points)
    s = min(max(s, 0.0), float(cum[-1]))
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(points) - 2)
    d = points[i + 1] - points[i]
    if np.hypot(d[0], d[1]) < 1e-12:
        for j in range(i + 1, len(points) - 1):
            d = points[j + 1] - points[j]
            if np.hypot(d[0], d[1]) >= 1e-12:
                break
    return math.atan2(d[1], d[0])
