"""Scene, object and pose types; JSON persistence; entity/cuboid token sequences."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import LinearRing

from .errors import ValidationError
from .geometry import Cuboid, OrientedCuboid

MAX_OBJECTS = 32
SEP = "[SEP]"
_UNIT_TOL = 1e-6


# ---------------------------------------------------------------------------
# Class vocabulary


class ClassVocabulary:
    """Ordered mapping from class name to integer index."""

    def __init__(self, names: Sequence[str]):
        names = list(names)
        if len(set(names)) != len(names):
            raise ValidationError("duplicate class names", "vocabulary")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValidationError(f"unknown class {name!r}", "class") from None

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ClassVocabulary":
        ordered = sorted(mapping.items(), key=lambda kv: kv[1])
        if [i for _, i in ordered] != list(range(len(ordered))):
            raise ValidationError("indices must be 0..C-1 without gaps", "vocabulary")
        return cls([name for name, _ in ordered])

    @classmethod
    def load(cls, path=None) -> "ClassVocabulary":
        """Load a ``{name: index}`` JSON file; the bundled 3D-FRONT list by default."""
        if path is None:
            text = resources.files("cuboidlayout").joinpath("data/classes_3dfront.json").read_text()
        else:
            text = Path(path).read_text()
        return cls.from_mapping(json.loads(text))


# ---------------------------------------------------------------------------
# Value types


def _vec(values, n, name):
    try:
        vals = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ValidationError(f"expected {n} numbers", name) from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"expected {n} finite numbers, got {values!r}", name)
    return vals


@dataclass(frozen=True)
class Pose:
    """Translation (box center), full-extent size and yaw about +y, all metric."""

    translation: tuple[float, float, float]
    size: tuple[float, float, float]
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "translation", _vec(self.translation, 3, "translation"))
        object.__setattr__(self, "size", _vec(self.size, 3, "size"))
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ValidationError("theta must be finite", "theta")
        object.__setattr__(self, "theta", theta)
        if min(self.size) <= 0:
            raise ValidationError(f"size components must be positive, got {self.size}", "size")

    @property
    def sin_theta(self) -> float:
        return math.sin(self.theta)

    @property
    def cos_theta(self) -> float:
        return math.cos(self.theta)

    @classmethod
    def from_sincos(cls, translation, size, sin_theta: float, cos_theta: float) -> "Pose":
        norm = sin_theta * sin_theta + cos_theta * cos_theta
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValidationError(f"sin^2 + cos^2 = {norm:.6g}, expected 1", "sin_theta/cos_theta")
        return cls(translation, size, math.atan2(sin_theta, cos_theta))


@dataclass(frozen=True)
class SceneObject:
    """One furniture item: class name, pose and its cuboid assembly in the local unit frame."""

    label: str
    pose: Pose
    cuboids: tuple[Cuboid, ...] = ()
    id: str = ""
    model_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "cuboids", tuple(self.cuboids))
        for k, c in enumerate(self.cuboids):
            if (c.lo < -_UNIT_TOL).any() or (c.hi > 1.0 + _UNIT_TOL).any():
                raise ValidationError("local cuboid leaves [0, 1]^3", f"cuboids[{k}]")

    def world_cuboids(self) -> list[OrientedCuboid]:
        return [world_cuboid(self, c) for c in self.cuboids]

    def with_translation(self, translation) -> "SceneObject":
        pose = Pose(translation, self.pose.size, self.pose.theta)
        return SceneObject(self.label, pose, self.cuboids, self.id, self.model_id)


@dataclass(frozen=True)
class FloorPlan:
    """Counter-clockwise simple polygon in the (x, z) plane."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple(_vec(v, 2, "floor.vertices") for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValidationError("need at least 3 vertices", "floor.vertices")
        if not LinearRing(verts).is_simple:
            raise ValidationError("polygon is not simple", "floor.vertices")
        if self.signed_area() <= 0:
            raise ValidationError("polygon must be counter-clockwise with positive area", "floor.vertices")

    def signed_area(self) -> float:
        pts = np.asarray(self.vertices)
        x, z = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.dot(x, np.roll(z, -1)) - np.dot(z, np.roll(x, -1)))

    @classmethod
    def rectangle(cls, width: float, depth: float, origin=(0.0, 0.0)) -> "FloorPlan":
        x0, z0 = origin
        return cls(((x0, z0), (x0 + width, z0), (x0 + width, z0 + depth), (x0, z0 + depth)))


@dataclass(frozen=True)
class Scene:
    room_type: str
    floor: FloorPlan
    objects: tuple[SceneObject, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if len(self.objects) > MAX_OBJECTS:
            raise ValidationError(f"{len(self.objects)} objects exceed the limit of {MAX_OBJECTS}", "objects")

    def replace_objects(self, objects) -> "Scene":
        return Scene(self.room_type, self.floor, tuple(objects))

    def world_cuboids(self) -> tuple[list[OrientedCuboid], list[int]]:
        """All world-space cuboids and, for each, the index of its owning object."""
        boxes, owners = [], []
        for i, obj in enumerate(self.objects):
            for wc in obj.world_cuboids():
                boxes.append(wc)
                owners.append(i)
        return boxes, owners


def world_cuboid(obj: SceneObject, local: Cuboid) -> OrientedCuboid:
    """Place a local-frame cuboid in the world.

    The local unit cube is recentered to [-0.5, 0.5]^3, scaled per axis by
    the object size, rotated by the object yaw about y and translated. The
    yaw is carried on the result rather than baked into the extents.
    """
    pose = obj.pose
    sx, sy, sz = pose.size
    px = (local.center[0] - 0.5) * sx
    py = (local.center[1] - 0.5) * sy
    pz = (local.center[2] - 0.5) * sz
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    tx, ty, tz = pose.translation
    center = (tx + c * px + s * pz, ty + py, tz - s * px + c * pz)
    extents = (local.size[0] * sx, local.size[1] * sy, local.size[2] * sz)
    return OrientedCuboid(center, extents, pose.theta)


def attribute_vector(obj: SceneObject, vocab: ClassVocabulary) -> np.ndarray:
    """``[one_hot(class), t, s, sin, cos]``, length ``C + 8``."""
    onehot = np.zeros(len(vocab))
    onehot[vocab.index(obj.label)] = 1.0
    p = obj.pose
    return np.concatenate([onehot, p.translation, p.size, [p.sin_theta, p.cos_theta]])


# ---------------------------------------------------------------------------
# Token sequences


@dataclass(frozen=True)
class TokenRecord:
    """One sequence element.

    Floor tokens carry the room type as ``class_label`` and the polygon in
    ``polygon``; entity tokens carry :data:`SEP` and the object pose; cuboid
    tokens carry the owning object's class and the world-space cuboid.
    """

    kind: str
    class_label: str
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    size: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sin_theta: float = 0.0
    cos_theta: float = 1.0
    polygon: Optional[tuple[tuple[float, float], ...]] = None


def _sorted_world_cuboids(obj: SceneObject) -> list[OrientedCuboid]:
    return sorted(obj.world_cuboids(), key=lambda w: (w.bottom, w.center[2], w.center[0]))


def to_token_sequence(scene: Scene, permute: bool = False, seed: Optional[int] = None) -> list[TokenRecord]:
    """Flatten a scene to ``[floor, (entity, cuboid...)...]``.

    Each object's cuboids are ordered by world bottom height, ties by
    (z, x) of the center. With ``permute`` the object order is a seeded
    random permutation.
    """
    floor = scene.floor
    pts = np.asarray(floor.vertices)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    tokens = [
        TokenRecord(
            "floor",
            scene.room_type,
            ((lo[0] + hi[0]) / 2, 0.0, (lo[1] + hi[1]) / 2),
            (hi[0] - lo[0], 0.0, hi[1] - lo[1]),
            polygon=floor.vertices,
        )
    ]
    order = list(range(len(scene.objects)))
    if permute:
        order = np.random.default_rng(seed).permutation(len(order)).tolist()
    for i in order:
        obj = scene.objects[i]
        p = obj.pose
        tokens.append(TokenRecord("entity", SEP, p.translation, p.size, p.sin_theta, p.cos_theta))
        for w in _sorted_world_cuboids(obj):
            tokens.append(
                TokenRecord("cuboid", obj.label, w.center, w.extents, math.sin(w.theta), math.cos(w.theta))
            )
    return tokens


def from_token_sequence(tokens: Sequence[TokenRecord]) -> Scene:
    """Rebuild a scene from :func:`to_token_sequence` output (ids become ``obj<k>``)."""
    if not tokens or tokens[0].kind != "floor":
        raise ValidationError("sequence must start with a floor token", "tokens[0]")
    floor = FloorPlan(tokens[0].polygon)
    groups: list[tuple[TokenRecord, list[TokenRecord]]] = []
    for k, tok in enumerate(tokens[1:], start=1):
        if tok.kind == "entity":
            groups.append((tok, []))
        elif tok.kind == "cuboid":
            if not groups:
                raise ValidationError("cuboid token before any entity", f"tokens[{k}]")
            groups[-1][1].append(tok)
        else:
            raise ValidationError(f"unexpected {tok.kind} token", f"tokens[{k}]")
    objects = []
    for n, (ent, cubs) in enumerate(groups):
        if not cubs:
            raise ValidationError("entity without cuboids has no class", f"objects[{n}]")
        pose = Pose.from_sincos(ent.translation, ent.size, ent.sin_theta, ent.cos_theta)
        c, s = pose.cos_theta, pose.sin_theta
        tx, ty, tz = pose.translation
        sx, sy, sz = pose.size
        local = []
        for tok in cubs:
            dx, dy, dz = tok.translation[0] - tx, tok.translation[1] - ty, tok.translation[2] - tz
            lx, lz = c * dx - s * dz, s * dx + c * dz
            center = (lx / sx + 0.5, dy / sy + 0.5, lz / sz + 0.5)
            size = (tok.size[0] / sx, tok.size[1] / sy, tok.size[2] / sz)
            local.append(Cuboid(center, size))
        objects.append(SceneObject(cubs[0].class_label, pose, tuple(local), id=f"obj{n}"))
    return Scene(tokens[0].class_label, floor, tuple(objects))


# ---------------------------------------------------------------------------
# JSON


def _require(data, key, path):
    if not isinstance(data, dict) or key not in data:
        raise ValidationError("missing required field", f"{path}.{key}" if path else key)
    return data[key]


def object_to_json(obj: SceneObject) -> dict:
    p = obj.pose
    return {
        "id": obj.id,
        "class": obj.label,
        "model_id": obj.model_id,
        "translation": list(p.translation),
        "size": list(p.size),
        "theta": p.theta,
        "cuboids": [c.to_json() for c in obj.cuboids],
    }


def object_from_json(data, path="object") -> SceneObject:
    label = _require(data, "class", path)
    if not isinstance(label, str):
        raise ValidationError("must be a string", f"{path}.class")
    translation = _vec(_require(data, "translation", path), 3, f"{path}.translation")
    size = _vec(_require(data, "size", path), 3, f"{path}.size")
    try:
        if "sin_theta" in data or "cos_theta" in data:
            pose = Pose.from_sincos(
                translation, size, float(_require(data, "sin_theta", path)), float(_require(data, "cos_theta", path))
            )
            if "theta" in data and abs(math.remainder(float(data["theta"]) - pose.theta, 2 * math.pi)) > _UNIT_TOL:
                raise ValidationError("theta disagrees with sin_theta/cos_theta", "theta")
        else:
            pose = Pose(translation, size, _require(data, "theta", path))
    except ValidationError as exc:
        raise ValidationError(str(exc), f"{path}.pose") from None
    cubs = []
    for k, c in enumerate(data.get("cuboids", [])):
        try:
            cubs.append(Cuboid.from_json(c))
        except (ValidationError, TypeError) as exc:
            raise ValidationError(str(exc), f"{path}.cuboids[{k}]") from None
    model_id = data.get("model_id")
    if model_id is not None and not isinstance(model_id, str):
        raise ValidationError("must be a string or null", f"{path}.model_id")
    try:
        return SceneObject(label, pose, tuple(cubs), str(data.get("id", "")), model_id)
    except ValidationError as exc:
        raise ValidationError(str(exc), path) from None


def scene_to_json(scene: Scene) -> dict:
    return {
        "room_type": scene.room_type,
        "floor": {"vertices": [list(v) for v in scene.floor.vertices]},
        "objects": [object_to_json(o) for o in scene.objects],
    }


def scene_from_json(data) -> Scene:
    room_type = _require(data, "room_type", "")
    floor_data = _require(data, "floor", "")
    verts = _require(floor_data, "vertices", "floor")
    floor = FloorPlan(tuple(tuple(v) for v in verts))
    objs = _require(data, "objects", "")
    if not isinstance(objs, list):
        raise ValidationError("must be a list", "objects")
    objects = [object_from_json(o, f"objects[{k}]") for k, o in enumerate(objs)]
    return Scene(str(room_type), floor, tuple(objects))


def dumps_scene(scene: Scene) -> str:
    # json emits the shortest repr that round-trips each float exactly.
    return json.dumps(scene_to_json(scene), indent=2) + "\n"


def loads_scene(text: str) -> Scene:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}", "json") from None
    return scene_from_json(data)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(dumps_scene(scene))


def load_scene(path) -> Scene:
    return loads_scene(Path(path).read_text())


def cuboids_to_json(cuboids: Sequence[Cuboid]) -> list:
    return [c.to_json() for c in cuboids]


def cuboids_from_json(data) -> list[Cuboid]:
    if not isinstance(data, list):
        raise ValidationError("cuboid list must be a JSON array", "cuboids")
    return [Cuboid.from_json(c) for c in data]
