"""Scene-level cuboid intersection measures and evaluation metrics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import UndefinedMetricError
from .geometry import OrientedCuboid, intersection_volume, iou
from .scene import Scene

__all__ = [
    "IoUMatrix",
    "intersection_volume",
    "iou",
    "candidate_pairs",
    "scene_iou_matrix",
    "cross_entity_intersection",
    "ciou",
    "nirate",
    "ckl",
    "category_histogram",
    "average_cuboid_iou",
    "metrics_report",
]

DEFAULT_NIRATE_THRESHOLD = 0.01
CKL_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class IoUMatrix:
    """Symmetric IoU over all world cuboids of a scene.

    ``values[i, j]`` is zero on the diagonal and whenever cuboids ``i`` and
    ``j`` belong to the same object (``owner`` holds the object index).
    """

    values: np.ndarray
    owner: np.ndarray

    def upper(self) -> np.ndarray:
        iu = np.triu_indices(len(self.owner), k=1)
        return self.values[iu]

    def cross_entity_upper(self) -> np.ndarray:
        iu = np.triu_indices(len(self.owner), k=1)
        mask = self.owner[iu[0]] != self.owner[iu[1]]
        return self.values[iu][mask]


def _box_arrays(boxes: Sequence[OrientedCuboid]):
    c = np.array([b.center for b in boxes], dtype=np.float64).reshape(-1, 3)
    e = np.array([b.extents for b in boxes], dtype=np.float64).reshape(-1, 3)
    r = 0.5 * np.hypot(e[:, 0], e[:, 2])
    return c, e, r


def candidate_pairs(boxes: Sequence[OrientedCuboid], owners: Sequence[int]) -> list[tuple[int, int]]:
    """Cross-entity index pairs ``i < j`` whose bounding cylinders overlap.

    Pairs outside this list have zero intersection volume.
    """
    n = len(boxes)
    if n < 2:
        return []
    c, e, r = _box_arrays(boxes)
    owners = np.asarray(owners)
    ylo, yhi = c[:, 1] - e[:, 1] / 2, c[:, 1] + e[:, 1] / 2
    dx = c[:, None, 0] - c[None, :, 0]
    dz = c[:, None, 2] - c[None, :, 2]
    reach = r[:, None] + r[None, :]
    hit = (dx * dx + dz * dz <= reach * reach) & (ylo[:, None] < yhi[None, :]) & (ylo[None, :] < yhi[:, None])
    hit &= owners[:, None] != owners[None, :]
    ii, jj = np.nonzero(np.triu(hit, k=1))
    return list(zip(ii.tolist(), jj.tolist()))


def scene_iou_matrix(scene: Scene) -> IoUMatrix:
    boxes, owners = scene.world_cuboids()
    vals = np.zeros((len(boxes), len(boxes)))
    for i, j in candidate_pairs(boxes, owners):
        vals[i, j] = vals[j, i] = iou(boxes[i], boxes[j])
    return IoUMatrix(vals, np.asarray(owners, dtype=np.int64))


def cross_entity_intersection(scene: Scene) -> tuple[float, float]:
    """Summed intersection volume over unordered cross-entity cuboid pairs, and total cuboid volume."""
    boxes, owners = scene.world_cuboids()
    inter = 0.0
    # Fixed pair order keeps the float sum reproducible.
    for i, j in candidate_pairs(boxes, owners):
        inter += intersection_volume(boxes[i], boxes[j])
    total = math.fsum(b.volume for b in boxes)
    return inter, total


def ciou(scene: Scene) -> float:
    """1000 x (cross-entity intersection volume) / (total cuboid volume).

    Raises:
        UndefinedMetricError: the scene has no cuboid volume.
    """
    inter, total = cross_entity_intersection(scene)
    if not total > 0:
        raise UndefinedMetricError("CIoU is undefined for a scene without cuboid volume")
    return 1000.0 * inter / total


def nirate(scenes: Sequence[Scene], threshold: float = DEFAULT_NIRATE_THRESHOLD) -> float:
    """Percentage of scenes whose CIoU (x1000 scale) is at most ``threshold``.

    Scenes without any cuboid have nothing to intersect and count as passing.
    """
    if not scenes:
        raise UndefinedMetricError("NIRate of an empty scene list")
    passed = 0
    for s in scenes:
        inter, total = cross_entity_intersection(s)
        value = 1000.0 * inter / total if total > 0 else 0.0
        passed += value <= threshold
    return 100.0 * passed / len(scenes)


def category_histogram(scenes: Iterable[Scene]) -> Counter:
    return Counter(o.label for s in scenes for o in s.objects)


def ckl(generated: Mapping[str, float], reference: Mapping[str, float], eps: float = CKL_EPS) -> float:
    """0.01 x KL(generated || reference) over class frequencies, each count smoothed by ``eps``."""
    if not reference or sum(reference.values()) <= 0:
        raise UndefinedMetricError("reference histogram is empty")
    classes = sorted(set(generated) | set(reference))
    p = np.array([generated.get(c, 0) for c in classes], dtype=np.float64) + eps
    q = np.array([reference.get(c, 0) for c in classes], dtype=np.float64) + eps
    p /= p.sum()
    q /= q.sum()
    return 0.01 * float(np.sum(p * np.log(p / q)))


def average_cuboid_iou(scene: Scene, mode: str = "nonzero") -> float:
    """Mean cross-entity cuboid IoU of a scene.

    Args:
        mode: ``"nonzero"`` averages over pairs with positive IoU, ``"all"``
            over every cross-entity pair. Either way the result is 0 when
            there is nothing to average.
    """
    vals = scene_iou_matrix(scene).cross_entity_upper()
    if mode == "nonzero":
        vals = vals[vals > 0]
    elif mode != "all":
        raise ValueError(f"unknown averaging mode {mode!r}")
    return float(vals.mean()) if len(vals) else 0.0


def metrics_report(
    scenes: Sequence[Scene],
    threshold: float = DEFAULT_NIRATE_THRESHOLD,
    reference: Optional[Sequence[Scene]] = None,
) -> dict:
    """Report dict: mean CIoU over scenes with volume, NIRate, CKL against ``reference`` (or null)."""
    if not scenes:
        raise UndefinedMetricError("no scenes to evaluate")
    values = []
    for s in scenes:
        inter, total = cross_entity_intersection(s)
        if total > 0:
            values.append(1000.0 * inter / total)
    ckl_value = None
    if reference:
        ckl_value = ckl(category_histogram(scenes), category_histogram(reference))
    return {
        "ciou": float(np.mean(values)) if values else 0.0,
        "nirate": nirate(scenes, threshold),
        "ckl": ckl_value,
        "n_scenes": len(scenes),
        "threshold": threshold,
    }
