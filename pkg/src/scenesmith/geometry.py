"""2D geometry primitives shared by the simulator, renderer, and evaluator."""

from __future__ import annotations

import math
from dataclasses import dataclass


def _as_finite_float(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{field} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{field} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Vec2:
    """A point or offset on the ground plane, in grid units."""

    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _as_finite_float(self.x, "x"))
        object.__setattr__(self, "y", _as_finite_float(self.y, "y"))

    def offset_by(self, dx: float, dy: float) -> Vec2:
        return Vec2(self.x + dx, self.y + dy)

    def distance_to(self, other: Vec2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Footprint:
    """Axis-aligned box extent of an object: width along x, depth along y, height up."""

    width: float
    depth: float
    height: float

    def __post_init__(self) -> None:
        for field in ("width", "depth", "height"):
            value = _as_finite_float(getattr(self, field), field)
            if value <= 0:
                raise ValueError(f"{field} must be > 0, got {value!r}")
            object.__setattr__(self, field, value)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle on the ground plane."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        for field in ("min_x", "min_y", "max_x", "max_y"):
            object.__setattr__(self, field, _as_finite_float(getattr(self, field), field))
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError(
                f"degenerate rect: ({self.min_x}, {self.min_y})..({self.max_x}, {self.max_y})"
            )

    @property
    def center(self) -> Vec2:
        return Vec2((self.min_x + self.max_x) / 2, (self.min_y + self.max_y) / 2)

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def depth(self) -> float:
        return self.max_y - self.min_y

    def contains(self, point: Vec2) -> bool:
        """Inclusive containment: boundary points count as inside."""
        return self.min_x <= point.x <= self.max_x and self.min_y <= point.y <= self.max_y


def rect_around(center: Vec2, width: float, depth: float) -> Rect:
    """Rectangle of the given extent centered on a point."""
    return Rect(
        center.x - width / 2,
        center.y - depth / 2,
        center.x + width / 2,
        center.y + depth / 2,
    )


def rect_gap(a: Rect, b: Rect) -> float:
    """Minimum distance between two rectangles; 0 when they touch or overlap."""
    dx = max(0.0, a.min_x - b.max_x, b.min_x - a.max_x)
    dy = max(0.0, a.min_y - b.max_y, b.min_y - a.max_y)
    return math.hypot(dx, dy)


def rects_overlap(a: Rect, b: Rect) -> bool:
    """True when the interiors intersect; shared edges do not count."""
    return a.min_x < b.max_x and b.min_x < a.max_x and a.min_y < b.max_y and b.min_y < a.max_y
