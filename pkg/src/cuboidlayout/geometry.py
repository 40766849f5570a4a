"""Cuboid primitives and exact intersection volumes of y-rotated boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_QUARTER_TOL = 1e-12


def _vec3(values, name):
    try:
        vals = tuple(float(v) for v in values)
    except TypeError:
        raise ValidationError("expected a 3-vector", name) from None
    if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"expected 3 finite numbers, got {values!r}", name)
    return vals


@dataclass(frozen=True)
class Cuboid:
    """Axis-aligned box in an object's local frame; ``size`` holds full extents."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "size", _vec3(self.size, "size"))
        if min(self.size) < 0:
            raise ValidationError(f"negative extent {self.size}", "size")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.size) / 2

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.size) / 2

    @property
    def volume(self) -> float:
        return self.size[0] * self.size[1] * self.size[2]

    @classmethod
    def from_bounds(cls, lo, hi) -> "Cuboid":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        return cls(tuple((lo + hi) / 2), tuple(hi - lo))

    def to_json(self) -> dict:
        return {"center": list(self.center), "size": list(self.size)}

    @classmethod
    def from_json(cls, data) -> "Cuboid":
        try:
            return cls(data["center"], data["size"])
        except KeyError as exc:
            raise ValidationError("missing key", f"cuboid.{exc.args[0]}") from None


def bounding_cuboid(cuboids) -> Cuboid:
    lo = np.min([c.lo for c in cuboids], axis=0)
    hi = np.max([c.hi for c in cuboids], axis=0)
    return Cuboid.from_bounds(lo, hi)


@dataclass(frozen=True)
class OrientedCuboid:
    """World-space box rotated by ``theta`` about the vertical (y) axis.

    ``extents`` are full sizes in the box's own frame. A point ``p`` of the
    box frame maps to world as ``center + R(theta) p`` with
    ``R = [[cos, 0, sin], [0, 1, 0], [-sin, 0, cos]]``.
    """

    center: tuple[float, float, float]
    extents: tuple[float, float, float]
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "extents", _vec3(self.extents, "extents"))
        object.__setattr__(self, "theta", float(self.theta))
        if min(self.extents) <= 0:
            raise ValidationError(f"extents must be positive, got {self.extents}", "extents")

    @property
    def volume(self) -> float:
        ex, ey, ez = self.extents
        return ex * ey * ez

    @property
    def bottom(self) -> float:
        return self.center[1] - self.extents[1] / 2

    @property
    def top(self) -> float:
        return self.center[1] + self.extents[1] / 2

    def footprint(self) -> np.ndarray:
        """Counter-clockwise (x, z) corners of the box's floor projection, shape (4, 2)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        hx, hz = self.extents[0] / 2, self.extents[2] / 2
        local = np.array([[-hx, -hz], [-hx, hz], [hx, hz], [hx, -hz]])
        x = self.center[0] + c * local[:, 0] + s * local[:, 1]
        z = self.center[2] - s * local[:, 0] + c * local[:, 1]
        pts = np.stack([x, z], axis=1)
        if polygon_area(pts) < 0:
            pts = pts[::-1]
        return pts

    def footprint_radius(self) -> float:
        return 0.5 * math.hypot(self.extents[0], self.extents[2])

    def transformed(self, translation=(0.0, 0.0, 0.0), rotation: float = 0.0) -> "OrientedCuboid":
        """Rigid motion: rotate about the world y axis through the origin, then translate."""
        c, s = math.cos(rotation), math.sin(rotation)
        x, y, z = self.center
        tx, ty, tz = translation
        return OrientedCuboid(
            (c * x + s * z + tx, y + ty, -s * x + c * z + tz), self.extents, self.theta + rotation
        )

    def scaled(self, factor: float) -> "OrientedCuboid":
        return OrientedCuboid(
            tuple(factor * v for v in self.center), tuple(factor * v for v in self.extents), self.theta
        )


def polygon_area(pts) -> float:
    """Signed shoelace area (positive for counter-clockwise order)."""
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject, clip) -> list:
    """Sutherland-Hodgman clipping of polygon ``subject`` by convex CCW polygon ``clip``."""
    out = [tuple(p) for p in subject]
    clip = [tuple(p) for p in clip]
    for i in range(len(clip)):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % len(clip)]
        ex, ey = bx - ax, by - ay
        inp, out = out, []
        prev = inp[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in inp:
            side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if side >= 0:
                if prev_side < 0:
                    t = prev_side / (prev_side - side)
                    out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                out.append(cur)
            elif prev_side >= 0:
                t = prev_side / (prev_side - side)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, prev_side = cur, side
    return out


def _interval_overlap(c1, e1, c2, e2) -> float:
    return max(0.0, min(c1 + e1 / 2, c2 + e2 / 2) - max(c1 - e1 / 2, c2 - e2 / 2))


def footprint_intersection_area(a: OrientedCuboid, b: OrientedCuboid) -> float:
    """Area of the overlap of the two boxes' (x, z) footprints."""
    rel = b.theta - a.theta
    quarter = rel / (math.pi / 2)
    k = round(quarter)
    if abs(quarter - k) < _QUARTER_TOL:
        # Relative rotation is a multiple of 90 degrees: overlap is an axis-aligned
        # rectangle in a's frame.
        c, s = math.cos(a.theta), math.sin(a.theta)
        dx, dz = b.center[0] - a.center[0], b.center[2] - a.center[2]
        # Inverse rotation R(theta)^T applied to the offset.
        bx, bz = c * dx - s * dz, s * dx + c * dz
        bex, bez = (b.extents[0], b.extents[2]) if k % 2 == 0 else (b.extents[2], b.extents[0])
        return _interval_overlap(0.0, a.extents[0], bx, bex) * _interval_overlap(0.0, a.extents[2], bz, bez)
    pa, pb = a.footprint(), b.footprint()
    clipped = clip_convex(pa, pb)
    if len(clipped) < 3:
        return 0.0
    return max(0.0, polygon_area(clipped))


def intersection_volume(a: OrientedCuboid, b: OrientedCuboid) -> float:
    """Exact overlap volume of two y-rotated boxes (footprint area times y overlap)."""
    h = _interval_overlap(a.center[1], a.extents[1], b.center[1], b.extents[1])
    if h <= 0.0:
        return 0.0
    dx, dz = a.center[0] - b.center[0], a.center[2] - b.center[2]
    reach = a.footprint_radius() + b.footprint_radius()
    if dx * dx + dz * dz > reach * reach:
        return 0.0
    # Canonical operand order keeps the result bitwise symmetric.
    if (b.center, b.extents, b.theta) < (a.center, a.extents, a.theta):
        a, b = b, a
    return footprint_intersection_area(a, b) * h


def iou(a: OrientedCuboid, b: OrientedCuboid) -> float:
    inter = intersection_volume(a, b)
    if inter <= 0.0:
        return 0.0
    union = a.volume + b.volume - inter
    return min(1.0, max(0.0, inter / union))
