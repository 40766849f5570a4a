"""Deterministic synthetic shapes, furniture assemblies and scene datasets.

Used by the tests, the acceptance suite and the demos in place of the
3D-FRONT / 3D-FUTURE data.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .geometry import Cuboid
from .metrics import ciou
from .scene import FloorPlan, Pose, Scene, SceneObject
from .voxels import VoxelGrid

# ---------------------------------------------------------------------------
# Voxel shape suite (coordinates authored on a 64 grid and rescaled to n)


def _boxes_to_grid(boxes, n: int) -> VoxelGrid:
    occ = np.zeros((n, n, n), dtype=bool)
    s = n / 64.0
    for (x0, y0, z0), (x1, y1, z1) in boxes:
        occ[round(x0 * s) : round(x1 * s), round(y0 * s) : round(y1 * s), round(z0 * s) : round(z1 * s)] = True
    return VoxelGrid(occ)


def _cylinder(n: int, cx, cz, radius, y0, y1) -> np.ndarray:
    s = n / 64.0
    idx = (np.arange(n) + 0.5) / s
    x, z = np.meshgrid(idx, idx, indexing="ij")
    disk = (x - cx) ** 2 + (z - cz) ** 2 <= radius**2
    occ = np.zeros((n, n, n), dtype=bool)
    occ[:, round(y0 * s) : round(y1 * s), :] = disk[:, None, :]
    return occ


def _legs(x0, x1, z0, z1, w, y1):
    return [
        ((x0, 0, z0), (x0 + w, y1, z0 + w)),
        ((x1 - w, 0, z0), (x1, y1, z0 + w)),
        ((x0, 0, z1 - w), (x0 + w, y1, z1)),
        ((x1 - w, 0, z1 - w), (x1, y1, z1)),
    ]


SHAPE_BOXES: dict[str, list] = {
    "block": [((10, 10, 10), (54, 54, 54))],
    "slab": [((4, 20, 4), (60, 30, 60))],
    "pillar": [((26, 0, 26), (38, 64, 38))],
    "l_prism": [((8, 8, 8), (56, 40, 24)), ((8, 8, 24), (24, 40, 56))],
    "t_prism": [((4, 10, 8), (60, 42, 24)), ((24, 10, 24), (40, 42, 60))],
    "u_prism": [((8, 4, 8), (56, 36, 20)), ((8, 4, 20), (20, 36, 56)), ((44, 4, 20), (56, 36, 56))],
    "cross_prism": [((4, 12, 24), (60, 44, 40)), ((24, 12, 4), (40, 44, 24)), ((24, 12, 40), (40, 44, 60))],
    "stairs": [((8, 0, 8), (56, 16, 56)), ((8, 16, 24), (56, 32, 56)), ((8, 32, 40), (56, 48, 56))],
    "table": [((8, 40, 8), (56, 44, 56))] + _legs(8, 56, 8, 56, 4, 40),
    "side_table": [((16, 32, 16), (48, 36, 48))] + _legs(16, 48, 16, 48, 4, 32),
    "pedestal_table": [((8, 44, 8), (56, 48, 56)), ((28, 4, 28), (36, 44, 36)), ((16, 0, 16), (48, 4, 48))],
    "chair": [((16, 28, 16), (48, 32, 48)), ((16, 32, 44), (48, 64, 48))] + _legs(16, 48, 16, 48, 4, 28),
    "armchair": [
        ((8, 0, 8), (56, 24, 56)),
        ((8, 24, 48), (56, 60, 56)),
        ((8, 24, 8), (16, 40, 48)),
        ((48, 24, 8), (56, 40, 48)),
    ],
    "bed": [((4, 0, 4), (60, 20, 60)), ((4, 20, 56), (60, 44, 60))],
    "bunk_bed": [
        ((8, 12, 4), (56, 18, 60)),
        ((8, 44, 4), (56, 50, 60)),
    ]
    + _legs(8, 56, 4, 60, 4, 64),
    "sofa": [((4, 0, 12), (60, 20, 52)), ((4, 20, 44), (60, 44, 52)), ((4, 20, 12), (12, 32, 44)), ((52, 20, 12), (60, 32, 44))],
    "shelf": [
        ((8, 0, 20), (12, 60, 44)),
        ((52, 0, 20), (56, 60, 44)),
        ((12, 0, 20), (52, 4, 44)),
        ((12, 20, 20), (52, 24, 44)),
        ((12, 40, 20), (52, 44, 44)),
        ((12, 56, 20), (52, 60, 44)),
    ],
    "desk": [((4, 36, 12), (60, 40, 52)), ((4, 0, 12), (8, 36, 52)), ((56, 0, 12), (60, 36, 52))],
    "wardrobe": [((8, 0, 16), (56, 60, 48)), ((6, 60, 14), (58, 64, 50))],
    "nightstand": [((14, 8, 14), (50, 48, 50))] + _legs(14, 50, 14, 50, 4, 8),
}
SHAPE_NAMES = list(SHAPE_BOXES)
# Curved shapes are kept out of the suite; see round_stool.
EXTRA_SHAPES = ["round_stool"]


def make_shape(name: str, n: int = 64) -> VoxelGrid:
    if name == "round_stool":
        occ = _cylinder(n, 32, 32, 14, 28, 34) | _cylinder(n, 32, 32, 4, 0, 28)
        return VoxelGrid(occ)
    return _boxes_to_grid(SHAPE_BOXES[name], n)


def shape_suite(n: int = 64) -> dict[str, VoxelGrid]:
    """Twenty filled voxel shapes: blocks, L/T/U prisms and furniture archetypes."""
    return {name: make_shape(name, n) for name in SHAPE_NAMES}


# ---------------------------------------------------------------------------
# Furniture assemblies in the local unit frame


def _c(lo, hi) -> Cuboid:
    return Cuboid.from_bounds(lo, hi)


def _leg_cuboids(w, top):
    return [
        _c((0, 0, 0), (w, top, w)),
        _c((1 - w, 0, 0), (1, top, w)),
        _c((0, 0, 1 - w), (w, top, 1)),
        _c((1 - w, 0, 1 - w), (1, top, 1)),
    ]


# Local frame: +z is the back of seating furniture and the head of beds.
ASSEMBLIES: dict[str, tuple[Cuboid, ...]] = {
    "double_bed": (_c((0, 0, 0), (1, 0.45, 1)), _c((0, 0.45, 0.93), (1, 1, 1))),
    "single_bed": (_c((0, 0, 0), (1, 0.5, 1)), _c((0, 0.5, 0.9), (1, 1, 1))),
    "nightstand": (_c((0, 0.1, 0), (1, 1, 1)), *_leg_cuboids(0.12, 0.1)),
    "wardrobe": (_c((0, 0, 0), (1, 0.95, 1)), _c((0, 0.95, 0), (1, 1, 1))),
    "dining_table": (_c((0, 0.92, 0), (1, 1, 1)), *_leg_cuboids(0.07, 0.92)),
    "dining_chair": (
        _c((0, 0.47, 0), (1, 0.53, 1)),
        _c((0, 0.53, 0.88), (1, 1, 1)),
        *_leg_cuboids(0.1, 0.47),
    ),
    "multi_seat_sofa": (
        _c((0, 0, 0), (1, 0.5, 1)),
        _c((0, 0.5, 0.8), (1, 1, 1)),
        _c((0, 0.5, 0), (0.08, 0.72, 0.8)),
        _c((0.92, 0.5, 0), (1, 0.72, 0.8)),
    ),
    "desk": (_c((0, 0.94, 0), (1, 1, 1)), _c((0, 0, 0), (0.05, 0.94, 1)), _c((0.95, 0, 0), (1, 0.94, 1))),
    "coffee_table": (_c((0, 0.85, 0), (1, 1, 1)), _c((0.05, 0, 0.05), (0.95, 0.12, 0.95)), *_leg_cuboids(0.06, 0.85)),
    "bookshelf": (
        _c((0, 0, 0), (0.05, 1, 1)),
        _c((0.95, 0, 0), (1, 1, 1)),
        _c((0.05, 0, 0), (0.95, 0.04, 1)),
        _c((0.05, 0.48, 0), (0.95, 0.52, 1)),
        _c((0.05, 0.96, 0), (0.95, 1, 1)),
    ),
}

# (x, y, z) extent ranges in meters.
SIZE_RANGES: dict[str, tuple[tuple[float, float], ...]] = {
    "double_bed": ((1.6, 2.0), (0.9, 1.1), (2.0, 2.2)),
    "single_bed": ((0.9, 1.1), (0.8, 1.0), (1.9, 2.1)),
    "nightstand": ((0.42, 0.55), (0.45, 0.6), (0.38, 0.48)),
    "wardrobe": ((1.0, 1.8), (2.0, 2.3), (0.55, 0.65)),
    "dining_table": ((1.2, 1.8), (0.72, 0.78), (0.8, 1.0)),
    "dining_chair": ((0.42, 0.5), (0.85, 0.95), (0.45, 0.55)),
    "multi_seat_sofa": ((1.8, 2.4), (0.8, 0.9), (0.85, 1.0)),
    "desk": ((1.0, 1.4), (0.72, 0.78), (0.55, 0.7)),
    "coffee_table": ((0.9, 1.3), (0.38, 0.48), (0.5, 0.7)),
    "bookshelf": ((0.8, 1.2), (1.6, 2.0), (0.3, 0.4)),
}

ROOM_CLASSES = {
    "bedroom": ["double_bed", "single_bed", "nightstand", "wardrobe", "desk", "dining_chair", "bookshelf"],
    "livingroom": ["multi_seat_sofa", "coffee_table", "dining_table", "dining_chair", "bookshelf", "desk"],
}


def _footprint_halfsize(size, theta):
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    return 0.5 * (c * size[0] + s * size[2]), 0.5 * (s * size[0] + c * size[2])


def make_object(label: str, rng: np.random.Generator, position=(0.0, 0.0), theta=None, obj_id="") -> SceneObject:
    size = tuple(float(rng.uniform(lo, hi)) for lo, hi in SIZE_RANGES[label])
    if theta is None:
        theta = float(rng.integers(4)) * math.pi / 2
    pose = Pose((position[0], size[1] / 2, position[1]), size, theta)
    return SceneObject(label, pose, ASSEMBLIES[label], id=obj_id)


def _place_objects(labels, room_w, room_d, gap, rng, attempts=200):
    placed = []
    for k, label in enumerate(labels):
        obj = make_object(label, rng, obj_id=f"obj{k}")
        hx, hz = _footprint_halfsize(obj.pose.size, obj.pose.theta)
        for _ in range(attempts):
            x = float(rng.uniform(hx, room_w - hx))
            z = float(rng.uniform(hz, room_d - hz))
            ok = True
            for other in placed:
                ox, _, oz = other.pose.translation
                ohx, ohz = _footprint_halfsize(other.pose.size, other.pose.theta)
                if abs(x - ox) < hx + ohx + gap and abs(z - oz) < hz + ohz + gap:
                    ok = False
                    break
            if ok:
                placed.append(obj.with_translation((x, obj.pose.translation[1], z)))
                break
    return placed


def _inject_collision(scene: Scene, rng: np.random.Generator, threshold: float) -> Optional[Scene]:
    """Slide one object toward another until their cuboids intersect."""
    objs = list(scene.objects)
    if len(objs) < 2:
        return None
    order = rng.permutation(len(objs))
    i = int(order[0])
    # Nearest other object by center distance.
    ti = np.array(objs[i].pose.translation)
    j = min((k for k in range(len(objs)) if k != i), key=lambda k: np.hypot(*(np.array(objs[k].pose.translation) - ti)[[0, 2]]))
    tj = np.array(objs[j].pose.translation)
    hx_i, hz_i = _footprint_halfsize(objs[i].pose.size, objs[i].pose.theta)
    hx_j, hz_j = _footprint_halfsize(objs[j].pose.size, objs[j].pose.theta)
    d = tj - ti
    axis = 0 if abs(d[0]) / (hx_i + hx_j) >= abs(d[2]) / (hz_i + hz_j) else 2
    sign = 1.0 if d[axis] >= 0 else -1.0
    touch = (hx_i + hx_j) if axis == 0 else (hz_i + hz_j)
    depth = float(rng.uniform(0.08, 0.2))
    # Keep the footprints overlapping on the cross axis by at least 10 cm.
    other = 2 if axis == 0 else 0
    span = ((hz_i + hz_j) if axis == 0 else (hx_i + hx_j)) - 0.1
    for extra in np.linspace(0.0, 0.3, 7):
        t = ti.copy()
        t[axis] = tj[axis] - sign * (touch - depth - extra)
        t[other] = float(np.clip(ti[other], tj[other] - span, tj[other] + span))
        trial = objs.copy()
        trial[i] = objs[i].with_translation(tuple(float(v) for v in t))
        candidate = scene.replace_objects(trial)
        if ciou(candidate) > threshold:
            return candidate
    return None


def make_scene(
    rng: np.random.Generator,
    room_type: str = "bedroom",
    room_size=(6.0, 6.0),
    n_objects=(3, 6),
    gap: float = 0.45,
    collide: bool = False,
    collision_threshold: float = 0.01,
) -> Scene:
    """One scene with non-touching objects, optionally with a single injected collision."""
    room_w, room_d = room_size
    while True:
        count = int(rng.integers(n_objects[0], n_objects[1] + 1))
        labels = [ROOM_CLASSES[room_type][int(c)] for c in rng.integers(len(ROOM_CLASSES[room_type]), size=count)]
        objects = _place_objects(labels, room_w, room_d, gap, rng)
        scene = Scene(room_type, FloorPlan.rectangle(room_w, room_d), tuple(objects))
        if not collide:
            return scene
        hit = _inject_collision(scene, rng, collision_threshold)
        if hit is not None:
            return hit


def make_dataset(
    n_scenes: int,
    collision_fraction: float = 0.6,
    seed: int = 0,
    room_type: str = "bedroom",
    **kwargs,
) -> list[Scene]:
    """``n_scenes`` scenes of which the first ``round(collision_fraction * n)`` (then shuffled) collide."""
    rng = np.random.default_rng(seed)
    n_collide = int(round(collision_fraction * n_scenes))
    flags = np.zeros(n_scenes, dtype=bool)
    flags[:n_collide] = True
    rng.shuffle(flags)
    return [make_scene(rng, room_type=room_type, collide=bool(f), **kwargs) for f in flags]


def unit_cube_object(translation=(0.0, 0.5, 0.0), theta=0.0, label="nightstand", obj_id="") -> SceneObject:
    """Object whose single cuboid is the unit cube centered at ``translation``."""
    return SceneObject(label, Pose(translation, (1.0, 1.0, 1.0), theta), (Cuboid((0.5, 0.5, 0.5), (1, 1, 1)),), id=obj_id)


def simple_scene(objects, room_type="bedroom", floor: Optional[FloorPlan] = None) -> Scene:
    return Scene(room_type, floor or FloorPlan.rectangle(10.0, 10.0, (-5.0, -5.0)), tuple(objects))
