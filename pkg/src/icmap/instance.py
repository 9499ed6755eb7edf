"""Map instance type shared by tracking, merging, and evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose2, as_points, transform_points

DIVIDER = "divider"
BOUNDARY = "boundary"
PED_CROSSING = "ped_crossing"
CLASSES = (DIVIDER, BOUNDARY, PED_CROSSING)
POLYLINE_CLASSES = (DIVIDER, BOUNDARY)


@dataclass
class MapInstance:
    """One vector map element.

    `points` is an (N, 2) array: an ordered polyline for dividers and
    boundaries, a CCW ring for pedestrian crossings. The frame (ego or
    world) follows from context.
    """

    cls: str
    points: np.ndarray
    score: float = 1.0
    id: int | None = None
    embedding: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"unknown class {self.cls!r}")
        self.points = as_points(self.points)
        if self.embedding is not None:
            self.embedding = np.asarray(self.embedding, dtype=np.float64)

    @property
    def is_polyline(self) -> bool:
        return self.cls in POLYLINE_CLASSES

    def transformed(self, pose: Pose2, direction: str) -> "MapInstance":
        return replace(self, points=transform_points(pose, self.points, direction))

    def with_points(self, points) -> "MapInstance":
        return replace(self, points=as_points(points))
