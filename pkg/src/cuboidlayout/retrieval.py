"""Shape retrieval by voxel IoU of cuboid assemblies, with a bounding-box baseline."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .abstraction import MergeConfig, abstract_shape
from .errors import EmptyClassError, PreconditionError, ValidationError
from .geometry import Cuboid, bounding_cuboid
from .mesh_io import TriangleMesh, normalize
from .scene import Pose, Scene, SceneObject, cuboids_from_json, cuboids_to_json
from .voxels import DEFAULT_RESOLUTION, VoxelGrid, voxelize

_CENTER_TOL = 1e-9


def rasterize_cuboids(cuboids: Sequence[Cuboid], n: int = DEFAULT_RESOLUTION) -> VoxelGrid:
    """Set every voxel whose center lies inside (or on the boundary of) some cuboid."""
    if n < 2:
        raise PreconditionError(f"resolution n must be >= 2, got {n}")
    occ = np.zeros((n, n, n), dtype=bool)
    for c in cuboids:
        lo = np.ceil(c.lo * n - 0.5 - _CENTER_TOL).astype(int)
        hi = np.floor(c.hi * n - 0.5 + _CENTER_TOL).astype(int)
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, n - 1)
        if np.all(hi >= lo):
            occ[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1] = True
    return VoxelGrid(occ)


def voxel_iou(a: VoxelGrid, b: VoxelGrid) -> float:
    """|a & b| / |a | b|; 1.0 when both grids are empty."""
    if a.n != b.n:
        raise PreconditionError(f"resolution mismatch: {a.n} vs {b.n}")
    union = np.count_nonzero(a.occupancy | b.occupancy)
    if union == 0:
        return 1.0
    return np.count_nonzero(a.occupancy & b.occupancy) / union


def box_iou_aligned(a: Cuboid, b: Cuboid) -> float:
    inter = np.clip(np.minimum(a.hi, b.hi) - np.maximum(a.lo, b.lo), 0.0, None).prod()
    union = a.volume + b.volume - inter
    return float(inter / union) if union > 0 else 1.0


def canonicalize_assembly(cuboids: Sequence[Cuboid], scale=None) -> list[Cuboid]:
    """Rescale an assembly (optionally pre-stretched per axis by ``scale``) so its
    bounding box has longest side 1 and is centered in the unit cube."""
    scale = np.ones(3) if scale is None else np.asarray(scale, dtype=np.float64)
    lo = np.min([np.asarray(c.lo) * scale for c in cuboids], axis=0)
    hi = np.max([np.asarray(c.hi) * scale for c in cuboids], axis=0)
    k = 1.0 / float((hi - lo).max())
    mid = (lo + hi) / 2
    return [Cuboid((np.asarray(c.center) * scale - mid) * k + 0.5, np.asarray(c.size) * scale * k) for c in cuboids]


def object_query(obj: SceneObject) -> list[Cuboid]:
    """A scene object's assembly expressed in the catalog's aspect-preserving frame."""
    return canonicalize_assembly(obj.cuboids, obj.pose.size)


def to_object_frame(cuboids: Sequence[Cuboid]) -> tuple[list[Cuboid], tuple[float, float, float]]:
    """Stretch an assembly so its bounding box fills the unit cube.

    Returns the stretched cuboids and the bounding-box extents (the factors
    that undo the stretch).
    """
    box = bounding_cuboid(cuboids)
    lo, ext = box.lo, np.asarray(box.size)
    out = [Cuboid((np.asarray(c.center) - lo) / ext, np.asarray(c.size) / ext) for c in cuboids]
    return out, tuple(float(e) for e in ext)


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    model_id: str
    label: str
    grid: VoxelGrid
    cuboids: tuple[Cuboid, ...]
    voxels_path: Optional[str] = None


class ShapeCatalog:
    """Immutable collection of retrievable models sharing one grid resolution."""

    def __init__(self, entries: Sequence[CatalogEntry]):
        entries = tuple(entries)
        if not entries:
            raise ValidationError("catalog is empty", "entries")
        ids = [e.model_id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate model_id", "model_id")
        if len({e.grid.n for e in entries}) != 1:
            raise ValidationError("entries use different resolutions", "voxels")
        self.entries = entries
        self.n = entries[0].grid.n

    def __len__(self):
        return len(self.entries)

    def of_class(self, label: str) -> list[CatalogEntry]:
        return [e for e in self.entries if e.label == label]

    def save(self, directory) -> None:
        """Write ``index.json`` plus one ``<model_id>.cvox`` per entry."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        index = []
        for e in self.entries:
            rel = e.voxels_path or f"{e.model_id}.cvox"
            e.grid.save(directory / rel)
            index.append({"model_id": e.model_id, "class": e.label, "voxels": rel, "cuboids": cuboids_to_json(e.cuboids)})
        (directory / "index.json").write_text(json.dumps(index, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "ShapeCatalog":
        directory = Path(directory)
        index_path = directory / "index.json" if directory.is_dir() else directory
        index = json.loads(index_path.read_text())
        if not isinstance(index, list):
            raise ValidationError("index must be a JSON array", "index")
        entries = []
        for k, item in enumerate(index):
            for key in ("model_id", "class", "voxels", "cuboids"):
                if key not in item:
                    raise ValidationError("missing required field", f"[{k}].{key}")
            grid = VoxelGrid.load(index_path.parent / item["voxels"])
            entries.append(
                CatalogEntry(item["model_id"], item["class"], grid, tuple(cuboids_from_json(item["cuboids"])), item["voxels"])
            )
        return cls(entries)


def make_entry(model_id: str, label: str, cuboids: Sequence[Cuboid], n: int = DEFAULT_RESOLUTION) -> CatalogEntry:
    """Catalog entry whose occupancy is the rasterized (canonical) assembly."""
    canon = canonicalize_assembly(cuboids)
    return CatalogEntry(model_id, label, rasterize_cuboids(canon, n), tuple(canon))


def entry_from_mesh(
    model_id: str, label: str, mesh: TriangleMesh, n: int = DEFAULT_RESOLUTION, config: MergeConfig = MergeConfig()
) -> CatalogEntry:
    normalized, _ = normalize(mesh)
    cuboids = abstract_shape(voxelize(normalized, n), config)
    if not cuboids:
        raise ValidationError("mesh produced no occupied voxels", model_id)
    return make_entry(model_id, label, cuboids, n)


@dataclass(frozen=True)
class RetrievalResult:
    model_id: str
    iou: float


def retrieve(
    query_cuboids: Sequence[Cuboid], class_label: str, catalog: ShapeCatalog, mode: str = "cuboid"
) -> RetrievalResult:
    """Best catalog match of class ``class_label`` for an assembly.

    ``mode="cuboid"`` scores by voxel IoU of the rasterized assemblies;
    ``mode="bbox"`` by IoU of their axis-aligned bounding boxes. Ties go to
    the lexicographically smallest ``model_id``.

    Raises:
        EmptyClassError: no entry has the requested class.
    """
    candidates = sorted(catalog.of_class(class_label), key=lambda e: e.model_id)
    if not candidates:
        raise EmptyClassError(f"catalog has no entry of class {class_label!r}")
    if mode == "cuboid":
        query = rasterize_cuboids(query_cuboids, catalog.n)
        score = lambda e: voxel_iou(query, e.grid)  # noqa: E731
    elif mode == "bbox":
        qbox = bounding_cuboid(query_cuboids)
        score = lambda e: box_iou_aligned(qbox, bounding_cuboid(e.cuboids))  # noqa: E731
    else:
        raise ValueError(f"unknown retrieval mode {mode!r}")
    best, best_iou = None, -math.inf
    for e in candidates:
        s = score(e)
        if s > best_iou:
            best, best_iou = e, s
    return RetrievalResult(best.model_id, float(best_iou))


def retrieve_scene(scene: Scene, catalog: ShapeCatalog, mode: str = "cuboid") -> Scene:
    """Fill ``model_id`` of every object with cuboids by retrieval; other objects are kept as-is."""
    objects = []
    for obj in scene.objects:
        if obj.cuboids:
            hit = retrieve(object_query(obj), obj.label, catalog, mode)
            obj = SceneObject(obj.label, obj.pose, obj.cuboids, obj.id, hit.model_id)
        objects.append(obj)
    return scene.replace_objects(objects)


def object_from_entry(entry: CatalogEntry, translation, longest_side: float, theta: float = 0.0, obj_id="") -> SceneObject:
    """Place a catalog model in a scene at metric scale (longest side = ``longest_side``)."""
    local, ext = to_object_frame(entry.cuboids)
    size = tuple(e * longest_side for e in ext)
    return SceneObject(entry.label, Pose(translation, size, theta), tuple(local), obj_id, entry.model_id)
