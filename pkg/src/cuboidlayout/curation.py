"""Intersection avoidance: move objects in the floor plane until cross-object cuboid IoU vanishes."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CuboidLayoutError, ValidationError
from .geometry import OrientedCuboid, iou
from .metrics import nirate, scene_iou_matrix
from .scene import Scene, load_scene


@dataclass(frozen=True)
class CurationConfig:
    eta: float = 0.05
    clip_norm: float = 1.0
    max_iters: int = 500
    epsilon_stop: float = 1e-6
    fd_step: float = 0.01

    def __post_init__(self):
        if not self.eta > 0:
            raise ValidationError("must be positive", "eta")
        if not self.clip_norm > 0:
            raise ValidationError("must be positive", "clip_norm")
        if self.max_iters < 1:
            raise ValidationError("must be >= 1", "max_iters")
        if self.epsilon_stop < 0:
            raise ValidationError("must be >= 0", "epsilon_stop")
        if not self.fd_step > 0:
            raise ValidationError("must be positive", "fd_step")


@dataclass
class CurationReport:
    iterations: int
    initial_overlap: float
    final_overlap: float
    converged: bool
    stalled: bool = False
    history: list = field(default_factory=list)


def total_overlap(scene: Scene) -> float:
    """Sum of the upper triangle of the scene IoU matrix."""
    return float(np.sum(scene_iou_matrix(scene).upper()))


def _shift(box: OrientedCuboid, dx: float, dz: float) -> OrientedCuboid:
    x, y, z = box.center
    return OrientedCuboid((x + dx, y, z + dz), box.extents, box.theta)


class _Workspace:
    """World cuboids of a frozen scene, grouped by object, with cheap neighbor culling."""

    def __init__(self, scene: Scene, margin: float):
        self.boxes = [obj.world_cuboids() for obj in scene.objects]
        n = len(self.boxes)
        self.neighbors: list[list[int]] = [[] for _ in range(n)]
        circles = []
        for bs in self.boxes:
            if not bs:
                circles.append(None)
                continue
            pts = np.concatenate([b.footprint() for b in bs])
            ylo = min(b.bottom for b in bs)
            yhi = max(b.top for b in bs)
            ctr = (pts.min(axis=0) + pts.max(axis=0)) / 2
            rad = float(np.max(np.hypot(*(pts - ctr).T)))
            circles.append((ctr, rad, ylo, yhi))
        for i in range(n):
            if circles[i] is None:
                continue
            ci, ri, yl, yh = circles[i]
            for j in range(n):
                if j == i or circles[j] is None:
                    continue
                cj, rj, yl2, yh2 = circles[j]
                if yl < yh2 and yl2 < yh and np.hypot(*(ci - cj)) <= ri + rj + margin:
                    self.neighbors[i].append(j)

    def object_loss(self, i: int, dx: float = 0.0, dz: float = 0.0) -> float:
        """Sum of IoUs between object ``i`` (shifted by dx, dz) and every other object."""
        total = 0.0
        mine = [_shift(b, dx, dz) for b in self.boxes[i]] if (dx or dz) else self.boxes[i]
        for j in self.neighbors[i]:
            for a in mine:
                for b in self.boxes[j]:
                    total += iou(a, b)
        return total

    def gradient(self, i: int, h: float) -> tuple[float, float]:
        if not self.neighbors[i]:
            return 0.0, 0.0
        gx = (self.object_loss(i, h, 0.0) - self.object_loss(i, -h, 0.0)) / (2 * h)
        gz = (self.object_loss(i, 0.0, h) - self.object_loss(i, 0.0, -h)) / (2 * h)
        return gx, gz


def overlap_gradient(scene: Scene, object_index: int, fd_step: float = 0.01) -> tuple[float, float]:
    """Central-difference derivative of :func:`total_overlap` w.r.t. one object's (x, z) translation.

    Terms not involving the object cancel in the difference, so only pairs
    that involve it are evaluated. The y translation never enters.
    """
    if not 0 <= object_index < len(scene.objects):
        raise IndexError(f"object index {object_index} out of range")
    return _Workspace(scene, 2 * fd_step).gradient(object_index, fd_step)


def _clip(gx: float, gz: float, max_norm: float) -> tuple[float, float]:
    norm = math.hypot(gx, gz)
    if norm > max_norm:
        scale = max_norm / norm
        return gx * scale, gz * scale
    return gx, gz


def avoid_intersections(scene: Scene, config: CurationConfig = CurationConfig()) -> tuple[Scene, CurationReport]:
    """Iterate ``t <- t - eta * clip(grad)`` on every object's (x, z) until overlap vanishes.

    All objects are updated simultaneously from the same snapshot. Objects
    with an exactly zero gradient keep their translation untouched, and y is
    never modified.
    """
    initial = total_overlap(scene)
    report = CurationReport(0, initial, initial, converged=initial <= config.epsilon_stop, history=[initial])
    if report.converged:
        return scene, report

    h = config.fd_step
    current = scene
    for it in range(1, config.max_iters + 1):
        ws = _Workspace(current, 2 * h)
        objects = list(current.objects)
        moved = False
        for i, obj in enumerate(current.objects):
            gx, gz = ws.gradient(i, h)
            if gx == 0.0 and gz == 0.0:
                continue
            gx, gz = _clip(gx, gz, config.clip_norm)
            tx, ty, tz = obj.pose.translation
            objects[i] = obj.with_translation((tx - config.eta * gx, ty, tz - config.eta * gz))
            moved = True
        if not moved:
            report.stalled = True
            break
        current = current.replace_objects(objects)
        loss = total_overlap(current)
        report.iterations = it
        report.history.append(loss)
        report.final_overlap = loss
        if loss <= config.epsilon_stop:
            report.converged = True
            break
    return current, report


def _curate_one(item, config: CurationConfig):
    name, source = item
    try:
        scene = source if isinstance(source, Scene) else load_scene(source)
    except (CuboidLayoutError, OSError, UnicodeDecodeError) as exc:
        return name, None, None, None, f"{type(exc).__name__}: {exc}"
    curated, report = avoid_intersections(scene, config)
    return name, scene, curated, report, None


def curate_dataset(
    scenes: Sequence[Union[Scene, str, Path]],
    config: CurationConfig = CurationConfig(),
    names: Optional[Sequence[str]] = None,
    workers: int = 1,
) -> tuple[list[Scene], dict]:
    """Run :func:`avoid_intersections` on each scene independently.

    Items may be scenes or paths to scene JSON files. Unreadable items are
    recorded in the summary and skipped.

    Returns:
        The curated scenes (in input order, failures omitted) and a summary
        with NIRate before/after, mean per-object displacement and one record
        per input item.
    """
    if names is None:
        names = [str(s) if not isinstance(s, Scene) else f"scene_{k}" for k, s in enumerate(scenes)]
    items = list(zip(names, scenes))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_curate_one, items, [config] * len(items)))
    else:
        results = [_curate_one(it, config) for it in items]

    before, after, records, displacements = [], [], [], []
    for name, original, curated, report, error in results:
        if error is not None:
            records.append({"name": name, "error": error})
            continue
        before.append(original)
        after.append(curated)
        for o0, o1 in zip(original.objects, curated.objects):
            d = np.subtract(o1.pose.translation, o0.pose.translation)
            displacements.append(float(np.hypot(d[0], d[2])))
        rec = {"name": name, "error": None}
        rec.update({k: v for k, v in asdict(report).items() if k != "history"})
        records.append(rec)
    summary = {
        "n_scenes": len(items),
        "n_curated": len(after),
        "n_errors": sum(r["error"] is not None for r in records),
        "nirate_before": nirate(before) if before else None,
        "nirate_after": nirate(after) if after else None,
        "mean_displacement": float(np.mean(displacements)) if displacements else 0.0,
        "config": asdict(config),
        "scenes": records,
    }
    return after, summary
