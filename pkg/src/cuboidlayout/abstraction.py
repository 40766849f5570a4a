"""Voxel grid to cuboid assembly: coarse-graining, floor-plan segmentation and merging."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError, ValidationError
from .geometry import Cuboid
from .voxels import VoxelGrid


@dataclass(frozen=True)
class VoxelCuboid:
    """Integer box ``[min_corner, min_corner + extent)`` in voxel coordinates."""

    min_corner: tuple[int, int, int]
    extent: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "min_corner", tuple(int(v) for v in self.min_corner))
        object.__setattr__(self, "extent", tuple(int(v) for v in self.extent))
        if min(self.extent) < 1:
            raise ValidationError(f"extent must be >= 1 on every axis, got {self.extent}", "extent")

    @property
    def max_corner(self) -> tuple[int, int, int]:
        return tuple(m + e for m, e in zip(self.min_corner, self.extent))

    @property
    def volume(self) -> int:
        ex, ey, ez = self.extent
        return ex * ey * ez

    @classmethod
    def from_bounds(cls, lo, hi) -> "VoxelCuboid":
        return cls(tuple(lo), tuple(int(h) - int(l) for l, h in zip(lo, hi)))

    def slices(self):
        return tuple(slice(m, m + e) for m, e in zip(self.min_corner, self.extent))

    def contains(self, other: "VoxelCuboid") -> bool:
        return all(a <= b for a, b in zip(self.min_corner, other.min_corner)) and all(
            a >= b for a, b in zip(self.max_corner, other.max_corner)
        )

    def to_cuboid(self, n: int) -> Cuboid:
        """Express in the unit-cube frame of an ``n``-grid."""
        lo = np.asarray(self.min_corner, dtype=np.float64) / n
        hi = np.asarray(self.max_corner, dtype=np.float64) / n
        return Cuboid.from_bounds(lo, hi)


@dataclass(frozen=True)
class MergeConfig:
    """Merge acceptance parameters.

    ``scale_s`` of ``None`` resolves to ``(n / 4) ** 3`` voxels for an ``n``-grid.
    """

    tau_min: float = 1.0
    tau_max: float = 1.5
    scale_s: Optional[float] = None
    use_dynamic: bool = True
    tau_static: float = 1.2
    max_segments_k: int = 8

    def __post_init__(self):
        if not 1.0 <= self.tau_min <= self.tau_max:
            raise ValidationError("need 1 <= tau_min <= tau_max", "tau_min")
        if self.tau_static < 1.0:
            raise ValidationError("tau_static must be >= 1", "tau_static")
        if self.scale_s is not None and not self.scale_s > 0:
            raise ValidationError("scale_s must be positive", "scale_s")
        if self.max_segments_k < 1:
            raise ValidationError("max_segments_k must be >= 1", "max_segments_k")

    def resolve_scale(self, n: int) -> float:
        return float(self.scale_s) if self.scale_s is not None else (n / 4.0) ** 3


def tau_dynamic(volume, tau_min: float, tau_max: float, scale_s: float):
    """Merge threshold that decays from ``tau_max`` toward ``tau_min`` as the merged volume grows."""
    return tau_min + (tau_max - tau_min) * np.exp(-np.asarray(volume, dtype=np.float64) / scale_s)


# ---------------------------------------------------------------------------
# Coarse-graining


def _coarse_grain_mask(occ: np.ndarray, offset=(0, 0, 0)) -> list[VoxelCuboid]:
    out = []
    ox, oy, oz = offset
    for y in range(occ.shape[1]):
        # Layer indexed [z, x] so that flat argmax visits z-major, x-minor.
        free = occ[:, y, :].T.copy()
        while free.any():
            z0, x0 = np.unravel_index(int(np.argmax(free)), free.shape)
            row = free[z0, x0:]
            x1 = x0 + (int(np.argmin(row)) if not row.all() else len(row))
            z1 = z0 + 1
            while z1 < free.shape[0] and free[z1, x0:x1].all():
                z1 += 1
            free[z0:z1, x0:x1] = False
            out.append(VoxelCuboid((ox + x0, oy + y, oz + z0), (x1 - x0, 1, z1 - z0)))
    return out


def coarse_grain(grid: VoxelGrid) -> list[VoxelCuboid]:
    """Cover the occupied voxels exactly with disjoint one-layer cuboids.

    Layers are scanned in ascending y; inside a layer the first free voxel in
    (z, x) order seeds a run that grows maximally along x, then along z while
    the whole run row is free.
    """
    return _coarse_grain_mask(grid.occupancy)


def coarse_grain_region(grid: VoxelGrid, region: VoxelCuboid) -> list[VoxelCuboid]:
    sub = grid.occupancy[region.slices()]
    return _coarse_grain_mask(sub, region.min_corner)


# ---------------------------------------------------------------------------
# Floor-plan segmentation


def largest_empty_rectangle(mask: np.ndarray) -> tuple[int, int, int, int, int]:
    """Largest all-False axis-aligned rectangle of a 2D mask.

    Returns:
        ``(area, r0, r1, c0, c1)`` with half-open row/column bounds; area 0
        when the mask is full.
    """
    rows, cols = mask.shape
    heights = np.zeros(cols, dtype=np.int64)
    best = (0, 0, 0, 0, 0)
    for r in range(rows):
        heights = np.where(mask[r], 0, heights + 1)
        h = heights.tolist()
        stack: list[int] = []
        for c in range(cols + 1):
            cur = h[c] if c < cols else 0
            while stack and h[stack[-1]] >= cur:
                top = stack.pop()
                left = stack[-1] + 1 if stack else 0
                area = h[top] * (c - left)
                if area > best[0]:
                    best = (area, r - h[top] + 1, r + 1, left, c)
            stack.append(c)
    return best


def _tighten(mask: np.ndarray, rect):
    x0, x1, z0, z1 = rect
    if x1 <= x0 or z1 <= z0:
        return None
    sub = mask[x0:x1, z0:z1]
    xs = np.nonzero(sub.any(axis=1))[0]
    if len(xs) == 0:
        return None
    zs = np.nonzero(sub.any(axis=0))[0]
    return (x0 + int(xs[0]), x0 + int(xs[-1]) + 1, z0 + int(zs[0]), z0 + int(zs[-1]) + 1)


def _area(rect) -> int:
    return (rect[1] - rect[0]) * (rect[3] - rect[2])


def _split_around(rect, hole, order: str):
    """Guillotine-split ``rect`` minus ``hole`` into at most four rectangles.

    ``order='x'`` cuts full-length slabs along x first (the pieces before and
    after the hole on the x axis span the whole z range); ``order='z'`` does
    the same with z. Empty pieces are dropped, which yields 2 pieces for a
    corner hole, 3 for an edge hole and 4 for an interior hole.
    """
    X0, X1, Z0, Z1 = rect
    x0, x1, z0, z1 = hole
    if order == "x":
        pieces = [(X0, x0, Z0, Z1), (x1, X1, Z0, Z1), (x0, x1, Z0, z0), (x0, x1, z1, Z1)]
    else:
        pieces = [(X0, X1, Z0, z0), (X0, X1, z1, Z1), (X0, x0, z0, z1), (x1, X1, z0, z1)]
    return [p for p in pieces if p[1] > p[0] and p[3] > p[2]]


def segment_floor_mask(mask: np.ndarray, k: int) -> list[tuple[int, int, int, int]]:
    """Cover the True cells of a 2D ``[x, z]`` mask with at most ``k`` disjoint rectangles.

    Starts from the tight bounding rectangle and repeatedly cuts the largest
    empty sub-rectangle out of whichever rectangle gains the most area, trying
    both split orders and keeping the smaller total area.
    """
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    first = _tighten(mask, (0, mask.shape[0], 0, mask.shape[1]))
    if first is None:
        return []
    rects = [first]
    while len(rects) < k:
        best = None
        for idx, rect in enumerate(rects):
            x0, x1, z0, z1 = rect
            area, r0, r1, c0, c1 = largest_empty_rectangle(mask[x0:x1, z0:z1])
            if area == 0:
                continue
            hole = (x0 + r0, x0 + r1, z0 + c0, z0 + c1)
            for order in ("x", "z"):
                pieces = [_tighten(mask, p) for p in _split_around(rect, hole, order)]
                pieces = [p for p in pieces if p is not None]
                if len(rects) - 1 + len(pieces) > k:
                    continue
                gain = _area(rect) - sum(_area(p) for p in pieces)
                if best is None or gain > best[0]:
                    best = (gain, idx, pieces)
        if best is None or best[0] <= 0:
            break
        _, idx, pieces = best
        rects = rects[:idx] + pieces + rects[idx + 1 :]
    return rects


def segment_projection(grid: VoxelGrid, k: int = 8) -> list[VoxelCuboid]:
    """Split the occupied volume into at most ``k`` boxes from its floor (x, z) projection.

    Each floor rectangle is extruded over the occupied y range.
    """
    occ = grid.occupancy
    ys = np.nonzero(occ.any(axis=(0, 2)))[0]
    rects = segment_floor_mask(occ.any(axis=1), k)
    if not rects:
        return []
    y0, y1 = int(ys[0]), int(ys[-1]) + 1
    return [VoxelCuboid.from_bounds((x0, y0, z0), (x1, y1, z1)) for x0, x1, z0, z1 in rects]


# ---------------------------------------------------------------------------
# Merging


def _as_arrays(cuboids: Sequence[VoxelCuboid]):
    lo = np.array([c.min_corner for c in cuboids], dtype=np.int64).reshape(-1, 3)
    hi = np.array([c.max_corner for c in cuboids], dtype=np.int64).reshape(-1, 3)
    return lo, hi


def _check_disjoint(lo: np.ndarray, hi: np.ndarray) -> None:
    if len(lo) < 2:
        return
    inter = np.all((lo[:, None] < hi[None]) & (lo[None] < hi[:, None]), axis=2)
    np.fill_diagonal(inter, False)
    if inter.any():
        i, j = np.argwhere(inter)[0]
        raise PreconditionError(f"input cuboids {i} and {j} overlap")


def _merge_pass(lo: np.ndarray, hi: np.ndarray, config: MergeConfig, scale_s: float):
    lo, hi = lo.copy(), hi.copy()
    while len(lo) > 1:
        vol = np.prod(hi - lo, axis=1)
        # Adjacent: the 1-voxel dilations intersect (face, edge or corner contact).
        adj = np.all((lo[:, None] <= hi[None]) & (lo[None] <= hi[:, None]), axis=2)
        ii, jj = np.nonzero(np.triu(adj, k=1))
        if len(ii) == 0:
            break
        clo = np.minimum(lo[ii], lo[jj])
        chi = np.maximum(hi[ii], hi[jj])
        vc = np.prod(chi - clo, axis=1).astype(np.float64)
        vsum = (vol[ii] + vol[jj]).astype(np.float64)
        if config.use_dynamic:
            slack = (config.tau_min - 1.0) + (config.tau_max - config.tau_min) * np.exp(-vc / scale_s)
        else:
            slack = np.full_like(vc, config.tau_static - 1.0)
        # V_C / (V_A + V_B) < tau, rearranged so exact unions (ratio 1) do not cancel.
        ok = (vc - vsum) < vsum * slack
        cand = np.nonzero(ok)[0]
        if len(cand) == 0:
            break
        cand = cand[np.lexsort((jj[cand], ii[cand], vsum[cand]))]
        merged = None
        for p in cand:
            i, j = int(ii[p]), int(jj[p])
            inter = np.all((clo[p] < hi) & (lo < chi[p]), axis=1)
            inter[[i, j]] = False
            if not inter.any():
                merged = (i, j, p, [])
                break
            others = np.nonzero(inter)[0]
            inside = np.all((lo[others] >= clo[p]) & (hi[others] <= chi[p]), axis=1)
            if inside.all():
                merged = (i, j, p, others.tolist())
                break
        if merged is None:
            break
        i, j, p, absorbed = merged
        lo[i], hi[i] = clo[p], chi[p]
        keep = np.ones(len(lo), dtype=bool)
        keep[[j, *absorbed]] = False
        lo, hi = lo[keep], hi[keep]
    return lo, hi


def merge_cuboids(
    cuboids: Sequence[VoxelCuboid],
    config: MergeConfig = MergeConfig(),
    regions: Optional[Sequence[VoxelCuboid]] = None,
    n: int = 64,
) -> list[VoxelCuboid]:
    """Greedily replace adjacent cuboid pairs by their bounding cuboid.

    A pair (A, B) with bounding cuboid C is merged when ``V_C / (V_A + V_B)``
    is below the threshold (dynamic in ``V_C`` or static). Candidate pairs
    are tried in ascending ``V_A + V_B``; after each merge the scan restarts.
    A merge whose bounding cuboid would cut into a third cuboid is skipped;
    third cuboids lying fully inside it are absorbed. With ``regions`` each
    region is merged on its own first, then everything is merged globally.

    Args:
        cuboids: pairwise disjoint input boxes.
        config: thresholds.
        regions: optional segmentation boxes; a cuboid belongs to the first
            region that contains it.
        n: grid resolution, used only to resolve the default ``scale_s``.

    Raises:
        PreconditionError: two input cuboids overlap.
    """
    if not cuboids:
        return []
    lo, hi = _as_arrays(cuboids)
    _check_disjoint(lo, hi)
    scale_s = config.resolve_scale(n)

    if regions:
        owner = np.full(len(lo), -1)
        for r, region in enumerate(regions):
            rlo, rhi = _as_arrays([region])
            inside = np.all((lo >= rlo) & (hi <= rhi), axis=1) & (owner < 0)
            owner[inside] = r
        parts_lo, parts_hi = [], []
        for r in [*range(len(regions)), -1]:
            sel = owner == r
            if not sel.any():
                continue
            if r >= 0:
                a, b = _merge_pass(lo[sel], hi[sel], config, scale_s)
            else:
                a, b = lo[sel], hi[sel]
            parts_lo.append(a)
            parts_hi.append(b)
        lo, hi = np.concatenate(parts_lo), np.concatenate(parts_hi)

    lo, hi = _merge_pass(lo, hi, config, scale_s)
    return [VoxelCuboid.from_bounds(a, b) for a, b in zip(lo.tolist(), hi.tolist())]


def abstract_voxels(grid: VoxelGrid, config: MergeConfig = MergeConfig()) -> list[VoxelCuboid]:
    """Segmentation, per-region coarse-graining, then per-region and global merging."""
    regions = segment_projection(grid, config.max_segments_k)
    coarse = []
    for region in regions:
        coarse.extend(coarse_grain_region(grid, region))
    return merge_cuboids(coarse, config, regions, n=grid.n)


def abstract_shape(grid: VoxelGrid, config: MergeConfig = MergeConfig()) -> list[Cuboid]:
    """Cuboid assembly of a filled grid, expressed in the unit-cube frame."""
    return [c.to_cuboid(grid.n) for c in abstract_voxels(grid, config)]


def union_mask(cuboids: Sequence[VoxelCuboid], n: int) -> np.ndarray:
    occ = np.zeros((n, n, n), dtype=bool)
    for c in cuboids:
        occ[c.slices()] = True
    return occ


def excess_ratio(cuboids: Sequence[VoxelCuboid], grid: VoxelGrid) -> float:
    """(union volume - occupied volume) / occupied volume."""
    occupied = int(grid.occupancy.sum())
    if occupied == 0:
        return 0.0 if not cuboids else math.inf
    return (int(union_mask(cuboids, grid.n).sum()) - occupied) / occupied
