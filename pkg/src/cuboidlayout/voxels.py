"""Binary occupancy grids: surface voxelization, interior filling and the CVOX file format.

Grids are stored as boolean arrays indexed ``[x, y, z]``. The packed (file)
order is x-fastest, then z, then y, i.e. flat index ``x + n * (z + n * y)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import NotNormalizedError, PreconditionError, ValidationError
from .mesh_io import TriangleMesh

DEFAULT_RESOLUTION = 64
CVOX_MAGIC = b"CVOX"
CVOX_VERSION = 1

_NORMALIZED_TOL = 1e-6
# Cell half-size inflation so that exact face/edge contact counts as overlap.
_SAT_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    occupancy: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.ndim != 3 or len(set(occ.shape)) != 1:
            raise ValidationError(f"occupancy must be a cube, got shape {occ.shape}", "occupancy")
        if occ.shape[0] < 2:
            raise PreconditionError(f"resolution must be >= 2, got {occ.shape[0]}")
        occ = occ.copy()
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    @property
    def n(self) -> int:
        return self.occupancy.shape[0]

    @classmethod
    def empty(cls, n: int) -> "VoxelGrid":
        _check_resolution(n)
        return cls(np.zeros((n, n, n), dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.occupancy, other.occupancy))

    def __hash__(self):
        return hash((self.n, self.to_bytes()))

    def packed_bits(self) -> bytes:
        flat = self.occupancy.transpose(1, 2, 0).ravel()
        return np.packbits(flat, bitorder="little").tobytes()

    def to_bytes(self) -> bytes:
        """Serialize as CVOX: magic, version byte, uint32 LE ``n``, packed bits (LSB first)."""
        return CVOX_MAGIC + bytes([CVOX_VERSION]) + struct.pack("<I", self.n) + self.packed_bits()

    @classmethod
    def from_bytes(cls, data: bytes) -> "VoxelGrid":
        if data[:4] != CVOX_MAGIC:
            raise ValidationError("bad magic, expected b'CVOX'", "magic")
        if len(data) < 9:
            raise ValidationError("truncated header", "header")
        if data[4] != CVOX_VERSION:
            raise ValidationError(f"unsupported version {data[4]}", "version")
        (n,) = struct.unpack("<I", data[5:9])
        _check_resolution(n)
        nbytes = (n**3 + 7) // 8
        payload = data[9:]
        if len(payload) != nbytes:
            raise ValidationError(f"expected {nbytes} payload bytes, found {len(payload)}", "bits")
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")[: n**3]
        occ = bits.astype(bool).reshape(n, n, n).transpose(2, 0, 1)
        return cls(occ)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "VoxelGrid":
        return cls.from_bytes(Path(path).read_bytes())


def _check_resolution(n: int) -> None:
    if int(n) != n or n < 2:
        raise PreconditionError(f"resolution n must be an integer >= 2, got {n}")


def occupancy_count(grid: VoxelGrid) -> int:
    return int(np.count_nonzero(grid.occupancy))


def _axis_test(axis, v0, v1, v2, half):
    # Separating-axis test for one batch of axes; True where the axis separates.
    p0 = np.einsum("ij,ij->i", axis, v0)
    p1 = np.einsum("ij,ij->i", axis, v1)
    p2 = np.einsum("ij,ij->i", axis, v2)
    r = half * np.abs(axis).sum(axis=1)
    lo = np.minimum(np.minimum(p0, p1), p2)
    hi = np.maximum(np.maximum(p0, p1), p2)
    return (lo > r) | (hi < -r)


def triangle_box_overlap(tri: np.ndarray, centers: np.ndarray, half: float) -> np.ndarray:
    """Vectorized triangle/cube overlap (separating axis theorem, 13 axes).

    Args:
        tri: (M, 3, 3) triangle corners, one triangle per test.
        centers: (M, 3) cube centers.
        half: cube half-width (touching counts as overlap).

    Returns:
        (M,) boolean array.
    """
    v0 = tri[:, 0] - centers
    v1 = tri[:, 1] - centers
    v2 = tri[:, 2] - centers
    vs = np.stack([v0, v1, v2], axis=1)
    sep = (vs.min(axis=1) > half).any(axis=1) | (vs.max(axis=1) < -half).any(axis=1)

    e0, e1, e2 = v1 - v0, v2 - v1, v0 - v2
    normal = np.cross(e0, e2)
    d = np.einsum("ij,ij->i", normal, v0)
    sep |= np.abs(d) > half * np.abs(normal).sum(axis=1)

    eye = np.eye(3)
    for e in (e0, e1, e2):
        for k in range(3):
            axis = np.cross(e, eye[k])
            sep |= _axis_test(axis, v0, v1, v2, half)
    return ~sep


def voxelize_surface(mesh: TriangleMesh, n: int = DEFAULT_RESOLUTION, chunk: int = 1 << 20) -> VoxelGrid:
    """Mark every cell of an ``n``-grid over [0, 1]^3 that touches a triangle of ``mesh``.

    Raises:
        PreconditionError: ``n < 2``.
        NotNormalizedError: a vertex lies outside the unit cube.
    """
    _check_resolution(n)
    verts = mesh.vertices
    if verts.min() < -_NORMALIZED_TOL or verts.max() > 1.0 + _NORMALIZED_TOL:
        raise NotNormalizedError("mesh vertices must lie in [0, 1]^3; call normalize() first")

    tris = mesh.corners() * n  # work in voxel units, cell i spans [i, i + 1]
    lo = np.clip(np.floor(tris.min(axis=1) - _SAT_EPS).astype(np.int64), 0, n - 1)
    hi = np.clip(np.floor(tris.max(axis=1) + _SAT_EPS).astype(np.int64), 0, n - 1)
    dims = hi - lo + 1
    counts = dims.prod(axis=1)

    occ = np.zeros((n, n, n), dtype=bool)
    start = 0
    while start < len(tris):
        # Group triangles so each batch expands to at most ``chunk`` (triangle, cell) pairs.
        csum = np.cumsum(counts[start:])
        stop = start + max(1, int(np.searchsorted(csum, chunk, side="right")))
        idx = np.arange(start, stop)
        c = counts[idx]
        owner = np.repeat(idx, c)
        local = np.arange(int(c.sum())) - np.repeat(np.cumsum(c) - c, c)
        d = dims[owner]
        ix = local % d[:, 0]
        iy = (local // d[:, 0]) % d[:, 1]
        iz = local // (d[:, 0] * d[:, 1])
        cells = lo[owner] + np.stack([ix, iy, iz], axis=1)
        hit = triangle_box_overlap(tris[owner], cells + 0.5, 0.5 + _SAT_EPS)
        cells = cells[hit]
        occ[cells[:, 0], cells[:, 1], cells[:, 2]] = True
        start = stop
    return VoxelGrid(occ)


def fill_interior(grid: VoxelGrid) -> VoxelGrid:
    """Fill every empty voxel not 6-connected to the grid boundary through empty voxels."""
    # binary_fill_holes uses the rank-3, connectivity-1 structure by default.
    return VoxelGrid(ndimage.binary_fill_holes(grid.occupancy))


def voxelize(mesh: TriangleMesh, n: int = DEFAULT_RESOLUTION) -> VoxelGrid:
    """Surface voxelization followed by interior filling."""
    return fill_interior(voxelize_surface(mesh, n))
