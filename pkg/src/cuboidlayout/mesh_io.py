"""Wavefront OBJ parsing and unit-cube normalization of triangle meshes."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import DegenerateGeometryError, MeshIndexError, ObjParseError


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Triangle soup with shared vertices.

    Attributes:
        vertices: (V, 3) float array, meters.
        triangles: (T, 3) int array of vertex indices.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) == 0:
            raise DegenerateGeometryError("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            bad = int(np.nonzero((t < 0).any(axis=1) | (t >= len(v)).any(axis=1))[0][0])
            raise MeshIndexError(f"triangle {bad} references a vertex outside 0..{len(v) - 1}")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def corners(self) -> np.ndarray:
        """Return the (T, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]


@dataclass(frozen=True)
class NormalizationRecord:
    """Maps normalized coordinates back to metric space: ``x = (u - offset) / scale``."""

    scale: float
    offset: tuple[float, float, float]

    def apply(self, points):
        return np.asarray(points, dtype=np.float64) * self.scale + np.asarray(self.offset)

    def invert(self, points):
        return (np.asarray(points, dtype=np.float64) - np.asarray(self.offset)) / self.scale


def _parse_face_index(token: str, n_vertices: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise ObjParseError(f"bad face index {token!r}", lineno) from None
    # OBJ indices are 1-based; negative values count back from the latest vertex.
    return idx - 1 if idx > 0 else n_vertices + idx


def parse_obj(source: Union[bytes, str, Path, BinaryIO]) -> TriangleMesh:
    """Parse Wavefront OBJ content into a :class:`TriangleMesh`.

    Only ``v`` and ``f`` records are read; everything else is skipped.
    Polygonal faces are fan-triangulated from their first vertex.

    Args:
        source: raw bytes, a path, or a binary stream.

    Raises:
        ObjParseError: a malformed ``v`` or ``f`` line (message carries the line number).
        MeshIndexError: a face references a vertex that does not exist.
    """
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    text = io.StringIO(data.decode("utf-8", errors="replace"))

    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    face_count = 0
    for lineno, raw in enumerate(text, start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ObjParseError("vertex needs three coordinates", lineno)
            try:
                vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise ObjParseError(f"non-numeric vertex coordinate in {raw.strip()!r}", lineno) from None
        elif tag == "f":
            if len(parts) < 4:
                raise ObjParseError("face needs at least three vertices", lineno)
            idx = [_parse_face_index(tok, len(vertices), lineno) for tok in parts[1:]]
            for i in idx:
                if not 0 <= i < len(vertices):
                    raise MeshIndexError(
                        f"face {face_count + 1} (line {lineno}) references vertex {i + 1}, "
                        f"only {len(vertices)} defined"
                    )
            for j in range(1, len(idx) - 1):
                triangles.append((idx[0], idx[j], idx[j + 1]))
            face_count += 1
    if not triangles:
        raise ObjParseError("no faces found")
    return TriangleMesh(np.array(vertices), np.array(triangles))


def normalize(mesh: TriangleMesh) -> tuple[TriangleMesh, NormalizationRecord]:
    """Fit ``mesh`` into the unit cube with one isotropic scale.

    The largest bounding-box extent maps to 1; shorter axes are centered
    inside [0, 1].
    """
    lo, hi = mesh.bounds
    extent = hi - lo
    longest = float(extent.max())
    if not longest > 0.0:
        raise DegenerateGeometryError("mesh has zero extent on every axis")
    scale = 1.0 / longest
    offset = 0.5 - scale * (lo + hi) / 2.0
    record = NormalizationRecord(scale=scale, offset=tuple(float(o) for o in offset))
    verts = record.apply(mesh.vertices)
    # Rounding can leave coordinates a few ulps outside the cube.
    verts = np.clip(verts, 0.0, 1.0)
    return TriangleMesh(verts, mesh.triangles), record


def write_obj(mesh: TriangleMesh, path) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def box_mesh(lo, hi) -> TriangleMesh:
    """Closed 12-triangle mesh of the axis-aligned box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    v = np.array([[(hi if (i >> k) & 1 else lo)[k] for k in range(3)] for i in range(8)])
    # Corner i has bit k set when coordinate k is at its upper bound.
    quads = [(0, 2, 6, 4), (1, 5, 7, 3), (0, 4, 5, 1), (2, 3, 7, 6), (0, 1, 3, 2), (4, 6, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(tris))
