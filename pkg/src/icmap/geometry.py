"""Planar frames, polyline/polygon primitives, clipping, and resampling.

Points are float64 arrays of shape (N, 2), in meters. All operations are
pure functions; poses and rectangles are immutable values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import nn_mean_dist
from .errors import EmptyPointSet, InvalidSampleCount

EGO_TO_WORLD = "ego_to_world"
WORLD_TO_EGO = "world_to_ego"


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    t = theta % math.tau
    if t > math.pi:
        t -= math.tau
    return t


@dataclass(frozen=True)
class Pose2:
    """SE(2) pose: translation (x, y) and heading theta, world frame."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def compose(self, other: "Pose2") -> "Pose2":
        """This pose followed by `other` expressed in this pose's frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (N, 2) point array, got shape {pts.shape}")
    return pts


def transform_points(pose: Pose2, points, direction: str = EGO_TO_WORLD) -> np.ndarray:
    """Apply the rigid transform of `pose` (or its inverse) to a point array."""
    pts = as_points(points)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    if direction == EGO_TO_WORLD:
        x = c * pts[:, 0] - s * pts[:, 1] + pose.x
        y = s * pts[:, 0] + c * pts[:, 1] + pose.y
    elif direction == WORLD_TO_EGO:
        dx = pts[:, 0] - pose.x
        dy = pts[:, 1] - pose.y
        x = c * dx + s * dy
        y = -s * dx + c * dy
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return np.column_stack([x, y])


def dedupe_points(points, eps: float = 1e-9) -> np.ndarray:
    """Drop consecutive points closer than `eps`."""
    pts = as_points(points)
    if len(pts) < 2:
        return pts
    keep = [0]
    for i in range(1, len(pts)):
        if np.hypot(*(pts[i] - pts[keep[-1]])) > eps:
            keep.append(i)
    return pts[keep]


def polyline_length(points) -> float:
    pts = as_points(points)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def chamfer_distance(p, q) -> float:
    """Symmetric Chamfer distance between two point sets, in meters.

    Defined as the average of the two directed mean nearest-neighbor
    distances, so the result reads as a typical point error.
    """
    a = as_points(p)
    b = as_points(q)
    if len(a) == 0 or len(b) == 0:
        raise EmptyPointSet("chamfer_distance requires two non-empty point sets")
    return 0.5 * (nn_mean_dist(a, b) + nn_mean_dist(b, a))


def resample_even(points, n: int) -> np.ndarray:
    """Resample a polyline to `n` points at equal arc-length spacing.

    The first and last output points coincide exactly with the input
    endpoints.
    """
    if n < 2:
        raise InvalidSampleCount(f"need at least 2 sample points, got {n}")
    pts = dedupe_points(points)
    if len(pts) < 2:
        raise EmptyPointSet("resample_even requires a polyline with positive length")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, s[-1], n)
    out = np.column_stack([np.interp(targets, s, pts[:, 0]), np.interp(targets, s, pts[:, 1])])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def densify(points, spacing: float) -> np.ndarray:
    """Resample a polyline to approximately `spacing` meters between points."""
    pts = dedupe_points(points)
    if len(pts) < 2:
        return pts
    n = max(2, int(round(polyline_length(pts) / spacing)) + 1)
    return resample_even(pts, n)


@dataclass(frozen=True)
class Rect:
    """Oriented rectangle: center pose, half extent along heading, half width."""

    center: Pose2
    half_length: float
    half_width: float

    def __post_init__(self):
        if self.half_length <= 0 or self.half_width <= 0:
            raise ValueError("Rect extents must be positive")

    def expand(self, margin: float) -> "Rect":
        return Rect(self.center, self.half_length + margin, self.half_width + margin)

    def corners(self) -> np.ndarray:
        """CCW corner points in the world frame."""
        hl, hw = self.half_length, self.half_width
        local = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
        return transform_points(self.center, local, EGO_TO_WORLD)

    def contains(self, points, eps: float = 1e-9) -> np.ndarray:
        """Boolean mask of points inside (or on) the rectangle."""
        local = transform_points(self.center, as_points(points), WORLD_TO_EGO)
        return (np.abs(local[:, 0]) <= self.half_length + eps) & (
            np.abs(local[:, 1]) <= self.half_width + eps
        )


def _clip_segment_box(p, q, hl: float, hw: float):
    """Liang-Barsky clip of segment p->q against [-hl, hl] x [-hw, hw].

    Returns (t0, t1, a, b) or None; a/b are clamped onto the box so crossing
    points land exactly on the boundary.
    """
    d = q - p
    t0, t1 = 0.0, 1.0
    for pc, qc in (
        (-d[0], p[0] + hl),
        (d[0], hl - p[0]),
        (-d[1], p[1] + hw),
        (d[1], hw - p[1]),
    ):
        if pc == 0.0:
            if qc < 0.0:
                return None
            continue
        t = qc / pc
        if pc < 0.0:
            if t > t1:
                return None
            if t > t0:
                t0 = t
        else:
            if t < t0:
                return None
            if t < t1:
                t1 = t
    a = p + t0 * d
    b = p + t1 * d
    for v in (a, b):
        v[0] = min(hl, max(-hl, v[0]))
        v[1] = min(hw, max(-hw, v[1]))
    return t0, t1, a, b


def clip_polyline_to_rect(points, rect: Rect, min_length: float = 0.0) -> list[np.ndarray]:
    """Clip a polyline to an oriented rectangle.

    Returns the maximal connected pieces inside the rectangle, in input
    order, with crossing points inserted on the boundary. Pieces shorter
    than `min_length` are dropped.
    """
    pts = transform_points(rect.center, dedupe_points(points), WORLD_TO_EGO)
    hl, hw = rect.half_length, rect.half_width
    pieces: list[np.ndarray] = []
    cur: list[np.ndarray] | None = None

    def close():
        nonlocal cur
        if cur is not None:
            piece = dedupe_points(np.array(cur), 1e-12)
            if len(piece) >= 2 and polyline_length(piece) > min_length:
                pieces.append(transform_points(rect.center, piece, EGO_TO_WORLD))
        cur = None

    for i in range(len(pts) - 1):
        res = _clip_segment_box(pts[i], pts[i + 1], hl, hw)
        if res is None:
            close()
            continue
        t0, t1, a, b = res
        if t0 > 0.0 or cur is None:
            close()
            cur = [a]
        cur.append(b)
        if t1 < 1.0:
            close()
    close()
    return pieces


def clip_polygon_to_rect(ring, rect: Rect) -> list[np.ndarray]:
    """Sutherland-Hodgman intersection of a simple polygon with a rectangle.

    Returns a list with zero or one CCW rings (the clip window is convex;
    non-convex subjects may degenerate, which is fine for the small quads
    used here).
    """
    pts = transform_points(rect.center, as_points(ring), WORLD_TO_EGO)
    hl, hw = rect.half_length, rect.half_width
    # half-planes as (a, b, c) with a*x + b*y <= c inside
    planes = [(1.0, 0.0, hl), (-1.0, 0.0, hl), (0.0, 1.0, hw), (0.0, -1.0, hw)]
    poly = [p for p in pts]
    for a, b, c in planes:
        if not poly:
            break
        out: list[np.ndarray] = []
        n = len(poly)
        for i in range(n):
            p, q = poly[i], poly[(i + 1) % n]
            pin = a * p[0] + b * p[1] <= c
            qin = a * q[0] + b * q[1] <= c
            if pin:
                out.append(p)
            if pin != qin:
                dp = a * p[0] + b * p[1] - c
                dq = a * q[0] + b * q[1] - c
                t = dp / (dp - dq)
                out.append(p + t * (q - p))
        poly = out
    if len(poly) < 3:
        return []
    result = dedupe_points(np.array(poly), 1e-9)
    if len(result) >= 2 and np.hypot(*(result[0] - result[-1])) <= 1e-9:
        result = result[:-1]
    if len(result) < 3:
        return []
    nxt = np.roll(result, -1, axis=0)
    area = 0.5 * float((result[:, 0] * nxt[:, 1] - result[:, 1] * nxt[:, 0]).sum())
    if abs(area) < 1e-12:
        return []
    if area < 0:
        result = result[::-1]
    return [transform_points(rect.center, result, EGO_TO_WORLD)]
