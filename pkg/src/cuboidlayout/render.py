"""Top-down orthographic scene renders as SVG, with an optional PNG export."""

from __future__ import annotations

import colorsys
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .scene import Scene

_MARGIN = 0.05  # fraction of the canvas left around the floor


def class_color(label: str) -> str:
    """Stable pseudo-random color for a class name."""
    h = int.from_bytes(hashlib.sha1(label.encode()).digest()[:2], "big") / 65535.0
    r, g, b = colorsys.hls_to_rgb(h, 0.55, 0.6)
    return "#{:02x}{:02x}{:02x}".format(round(r * 255), round(g * 255), round(b * 255))


@dataclass(frozen=True)
class RenderSpec:
    width: int = 256
    height: int = 256
    palette: dict = field(default_factory=dict)
    background: str = "#ffffff"
    floor_color: str = "#d9d9d9"
    stroke: str = "#333333"

    def __post_init__(self):
        if self.width < 16:
            raise ValidationError("must be >= 16", "width")
        if self.height < 16:
            raise ValidationError("must be >= 16", "height")

    def color(self, label: str) -> str:
        return self.palette.get(label) or class_color(label)


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _View:
    """Maps floor coordinates (x, z) to pixels, fitting the floor's bounding box."""

    def __init__(self, scene: Scene, spec: RenderSpec):
        pts = np.asarray(scene.floor.vertices, dtype=np.float64)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.maximum(hi - lo, 1e-9)
        usable = np.array([spec.width, spec.height]) * (1 - 2 * _MARGIN)
        self.scale = float(np.min(usable / span))
        self.offset = np.array([spec.width, spec.height]) / 2 - (lo + hi) / 2 * self.scale

    def __call__(self, pts) -> list[tuple[float, float]]:
        px = np.asarray(pts, dtype=np.float64) * self.scale + self.offset
        return [(float(x), float(y)) for x, y in px]


def _points(px) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in px)


def _shapes(scene: Scene, spec: RenderSpec):
    """Yield ``(points, fill, label)`` in paint order: floor, then footprints by ascending top."""
    view = _View(scene, spec)
    yield view(scene.floor.vertices), spec.floor_color, None
    items = []
    for k, obj in enumerate(scene.objects):
        for m, box in enumerate(obj.world_cuboids()):
            items.append((box.top, k, m, box, obj.label))
    items.sort(key=lambda t: t[:3])
    for _, _, _, box, label in items:
        yield view(box.footprint()), spec.color(label), label


def render_topdown(scene: Scene, spec: RenderSpec = RenderSpec()) -> str:
    """SVG text of the scene seen from above; identical inputs give identical bytes.

    Image x follows world x and image y follows world z.
    """
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" fill="{spec.background}"/>',
    ]
    for pts, fill, label in _shapes(scene, spec):
        if label is None:
            lines.append(f'<polygon class="floor" points="{_points(pts)}" fill="{fill}"/>')
        else:
            lines.append(
                f'<polygon class="cuboid" data-label="{label}" points="{_points(pts)}" '
                f'fill="{fill}" stroke="{spec.stroke}" stroke-width="0.5"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_png(scene: Scene, path, spec: RenderSpec = RenderSpec()) -> None:
    """Rasterize the same geometry with Pillow (optional dependency)."""
    try:
        from PIL import Image, ImageDraw
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("PNG export needs Pillow: pip install 'artifact[raster]'") from exc
    img = Image.new("RGB", (spec.width, spec.height), spec.background)
    draw = ImageDraw.Draw(img)
    for pts, fill, label in _shapes(scene, spec):
        draw.polygon(pts, fill=fill, outline=None if label is None else spec.stroke)
    img.save(Path(path), format="PNG")


def save_svg(scene: Scene, path, spec: Optional[RenderSpec] = None) -> None:
    Path(path).write_text(render_topdown(scene, spec or RenderSpec()))
