"""Planar geometry: points, the anchor/zone layout, and the trilateration baseline.

All coordinates are millimeters. Operations here are pure functions over
immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateGeometry

# |det| below this (mm^2) means the linearized trilateration system is singular.
SINGULARITY_TOL = 1e-9


@dataclass(frozen=True)
class Point2D:
    """A planar coordinate in millimeters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point components must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class AnchorSet:
    """The three fixed anchor nodes. Must form a proper triangle."""

    a0: Point2D
    a1: Point2D
    a2: Point2D

    def __post_init__(self):
        if self.a0 == self.a1 or self.a1 == self.a2 or self.a0 == self.a2:
            raise DegenerateGeometry("anchors must be pairwise distinct")
        if abs(_system_determinant(self)) < SINGULARITY_TOL:
            raise DegenerateGeometry("anchors are collinear; trilateration is degenerate")

    def as_tuple(self) -> tuple[Point2D, Point2D, Point2D]:
        return (self.a0, self.a1, self.a2)


@dataclass(frozen=True)
class Zone:
    """Rectangular testing zone (origin at its lower-left corner)."""

    origin: Point2D
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("zone width and height must be positive")

    def contains(self, p: Point2D) -> bool:
        return (
            self.origin.x <= p.x <= self.origin.x + self.width
            and self.origin.y <= p.y <= self.origin.y + self.height
        )


def euclidean_distance(p: Point2D, q: Point2D) -> float:
    """Straight-line distance between two points, in mm."""
    return math.hypot(p.x - q.x, p.y - q.y)


def error_distance(estimate: Point2D, truth: Point2D) -> float:
    """Positioning error: distance between an estimate and the true position."""
    return euclidean_distance(estimate, truth)


def _system_determinant(anchors: AnchorSet) -> float:
    a0, a1, a2 = anchors.as_tuple()
    return 4.0 * ((a1.x - a0.x) * (a2.y - a0.y) - (a1.y - a0.y) * (a2.x - a0.x))


def trilaterate(anchors: AnchorSet, distances: tuple[float, float, float]) -> Point2D:
    """Locate a point from its distances to the three anchors.

    Subtracting the first circle equation from the other two linearizes the
    intersection problem into a 2x2 system, solved in closed form. Exact,
    consistent distances reproduce the generating point; inconsistent ones
    yield the linear-system solution, reported as-is (never clamped to the
    zone).

    Raises DegenerateGeometry when the system matrix is singular.
    """
    d0, d1, d2 = distances
    for d in (d0, d1, d2):
        if not math.isfinite(d) or d < 0:
            raise ValueError(f"distances must be finite and >= 0, got {distances}")

    a0, a1, a2 = anchors.as_tuple()
    # Row i: 2*(xi-x0)*x + 2*(yi-y0)*y = xi^2-x0^2 + yi^2-y0^2 + d0^2-di^2
    m00 = 2.0 * (a1.x - a0.x)
    m01 = 2.0 * (a1.y - a0.y)
    m10 = 2.0 * (a2.x - a0.x)
    m11 = 2.0 * (a2.y - a0.y)
    r0 = (a1.x**2 - a0.x**2) + (a1.y**2 - a0.y**2) + d0**2 - d1**2
    r1 = (a2.x**2 - a0.x**2) + (a2.y**2 - a0.y**2) + d0**2 - d2**2

    det = m00 * m11 - m01 * m10
    if abs(det) < SINGULARITY_TOL:
        raise DegenerateGeometry("anchor geometry is singular; cannot trilaterate")
    x = (r0 * m11 - r1 * m01) / det
    y = (m00 * r1 - m10 * r0) / det
    return Point2D(x, y)


#: Anchor layout used throughout: a0 bottom-left, a1 top-left, a2 top-right.
DEFAULT_ANCHORS = AnchorSet(Point2D(0.0, 0.0), Point2D(0.0, 2000.0), Point2D(1000.0, 2000.0))

#: 2 m x 1 m testing zone, origin at (0, 0).
DEFAULT_ZONE = Zone(Point2D(0.0, 0.0), 1000.0, 2000.0)
