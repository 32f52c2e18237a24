"""Mesh counting machinery.

Cells of a mesh are half-open cubes ``prod [o_i + k_i*delta, o_i + (k_i+1)*delta)``,
so every point of R^d lies in exactly one cell.  ``rasterize`` returns the exact set
of cells a geometric set meets; everything else (mesh counts, pixel measure,
box-dimension estimates) is computed from those cell sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ._validation import InvalidInputError, as_point, check_points, check_positive
from .geometry import Ball, Ray, Segment, clip_ray_to_ball, clip_ray_to_box, segment_arrays

# grid-unit tolerance for snapping sample coordinates onto cell faces
SNAP_TOL = 1e-9
BRUTE_FORCE_LIMIT = 10_000


@dataclass(frozen=True)
class MeshSpec:
    delta: float
    origin: tuple

    def __post_init__(self):
        check_positive(self.delta, "mesh delta")
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "origin", tuple(float(x) for x in as_point(self.origin)))

    @classmethod
    def at(cls, delta: float, d: int, origin=None) -> "MeshSpec":
        return cls(delta, tuple(np.zeros(d)) if origin is None else tuple(origin))

    @property
    def d(self) -> int:
        return len(self.origin)

    def cell_of(self, points) -> np.ndarray:
        """Indices of the cells containing each point."""
        P = check_points(points, allow_empty=True)
        if P.shape[0] == 0:
            return np.empty((0, self.d), dtype=np.int64)
        q = (P - np.asarray(self.origin)) / self.delta
        return np.floor(_snap(q)).astype(np.int64)


def _snap(q: np.ndarray) -> np.ndarray:
    r = np.rint(q)
    return np.where(np.abs(q - r) < SNAP_TOL, r, q)


def _unique_rows(cells: np.ndarray, d: int) -> np.ndarray:
    if cells.size == 0:
        return np.empty((0, d), dtype=np.int64)
    cells = cells.astype(np.int64, copy=False)
    lo = cells.min(axis=0)
    shape = tuple(int(x) for x in cells.max(axis=0) - lo + 1)
    if math.prod(shape) >= 2 ** 62:
        return np.unique(cells, axis=0)
    # C-order raveling preserves lexicographic order
    keys = np.unique(np.ravel_multi_index(tuple((cells - lo).T), shape))
    return np.stack(np.unravel_index(keys, shape), axis=1) + lo


def _joint_keys(*arrays: np.ndarray) -> list[np.ndarray]:
    """Encode integer rows of several arrays as comparable int64 scalars."""
    nonempty = [a for a in arrays if len(a)]
    if not nonempty:
        return [np.empty(0, dtype=np.int64) for _ in arrays]
    stacked = np.concatenate(nonempty)
    lo = stacked.min(axis=0)
    shape = tuple(int(x) for x in stacked.max(axis=0) - lo + 1)
    return [
        np.ravel_multi_index(tuple((a - lo).T), shape) if len(a) else np.empty(0, dtype=np.int64)
        for a in arrays
    ]


@dataclass(frozen=True, eq=False)
class OccupancySet:
    """Cells of a mesh met by a set; ``cells`` is lexicographically sorted and unique."""

    mesh: MeshSpec
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, self.mesh.d)
        cells = _unique_rows(cells, self.mesh.d)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def empty(cls, mesh: MeshSpec) -> "OccupancySet":
        return cls(mesh, np.empty((0, mesh.d), dtype=np.int64))

    def __len__(self) -> int:
        return len(self.cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancySet):
            return NotImplemented
        return self.mesh == other.mesh and np.array_equal(self.cells, other.cells)

    def __contains__(self, cell) -> bool:
        c = np.asarray(cell, dtype=np.int64)
        return bool(np.any(np.all(self.cells == c, axis=1)))

    def _check_mesh(self, other: "OccupancySet"):
        if self.mesh != other.mesh:
            raise InvalidInputError("occupancy sets live on different meshes")

    def __or__(self, other: "OccupancySet") -> "OccupancySet":
        self._check_mesh(other)
        return OccupancySet(self.mesh, np.concatenate([self.cells, other.cells]))

    union = __or__

    def difference(self, other: "OccupancySet") -> "OccupancySet":
        self._check_mesh(other)
        ka, kb = _joint_keys(self.cells, other.cells)
        return OccupancySet(self.mesh, self.cells[~np.isin(ka, kb)])

    def intersection(self, other: "OccupancySet") -> "OccupancySet":
        self._check_mesh(other)
        ka, kb = _joint_keys(self.cells, other.cells)
        return OccupancySet(self.mesh, self.cells[np.isin(ka, kb)])

    def issubset(self, other: "OccupancySet") -> bool:
        return len(self.difference(other)) == 0

    def symmetric_difference_count(self, other: "OccupancySet") -> int:
        return len(self.difference(other)) + len(other.difference(self))

    def centres(self) -> np.ndarray:
        return np.asarray(self.mesh.origin) + (self.cells + 0.5) * self.mesh.delta

    def to_set(self) -> set:
        return {tuple(int(v) for v in row) for row in self.cells}

    def dilate(self, radius: int) -> "OccupancySet":
        """All cells within Chebyshev index distance ``radius`` of an occupied cell."""
        r = int(radius)
        if r < 0:
            raise InvalidInputError("dilation radius must be nonnegative")
        d = self.mesh.d
        offs = np.stack(np.meshgrid(*[np.arange(-r, r + 1)] * d, indexing="ij"), -1).reshape(-1, d)
        grown = (self.cells[:, None, :] + offs[None, :, :]).reshape(-1, d)
        return OccupancySet(self.mesh, grown)

    def to_text(self) -> str:
        m = self.mesh
        header = " ".join([str(m.d), repr(m.delta)] + [repr(x) for x in m.origin])
        rows = (" ".join(str(int(v)) for v in row) for row in self.cells)
        return "\n".join([header, *rows]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "OccupancySet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise InvalidInputError("empty occupancy text")
        head = lines[0].split()
        d = int(head[0])
        if len(head) != d + 2:
            raise InvalidInputError("malformed occupancy header")
        mesh = MeshSpec(float(head[1]), tuple(float(x) for x in head[2:]))
        cells = np.array([[int(v) for v in ln.split()] for ln in lines[1:]], dtype=np.int64)
        return cls(mesh, cells.reshape(-1, d))


def _segment_cells(p0: np.ndarray, p1: np.ndarray, mesh: MeshSpec) -> np.ndarray:
    """Cells met by the closed segments ``[p0[i], p1[i]]``.

    Along each segment the containing cell only changes where a coordinate crosses
    a mesh hyperplane.  Sampling the exact crossing points plus one point inside
    every piece between consecutive crossings therefore visits every cell met.
    """
    n, d = p0.shape
    o = np.asarray(mesh.origin)
    q0 = (p0 - o) / mesh.delta
    q1 = (p1 - o) / mesh.delta
    v = q1 - q0
    sids = [np.arange(n), np.arange(n)]
    ts = [np.zeros(n), np.ones(n)]
    for i in range(d):
        lo = np.ceil(np.minimum(q0[:, i], q1[:, i]))
        hi = np.floor(np.maximum(q0[:, i], q1[:, i]))
        moving = v[:, i] != 0
        cnt = np.where(moving, np.maximum(hi - lo + 1, 0), 0).astype(np.int64)
        total = int(cnt.sum())
        if total == 0:
            continue
        sid = np.repeat(np.arange(n), cnt)
        starts = np.repeat(np.cumsum(cnt) - cnt, cnt)
        k = lo[sid] + (np.arange(total) - starts)
        t = (k - q0[sid, i]) / v[sid, i]
        sids.append(sid)
        ts.append(np.clip(t, 0.0, 1.0))
    sid = np.concatenate(sids)
    t = np.concatenate(ts)
    order = np.lexsort((t, sid))
    sid, t = sid[order], t[order]
    keep = np.ones(len(t), dtype=bool)
    keep[1:] = (sid[1:] != sid[:-1]) | (t[1:] - t[:-1] > 1e-12)
    sid, t = sid[keep], t[keep]
    same = sid[1:] == sid[:-1]
    sid = np.concatenate([sid, sid[1:][same]])
    t = np.concatenate([t, (0.5 * (t[1:] + t[:-1]))[same]])
    q = q0[sid] + t[:, None] * v[sid]
    q = np.where((t == 1.0)[:, None], q1[sid], q)
    return np.floor(_snap(q)).astype(np.int64)


def _ball_cells(ball: Ball, mesh: MeshSpec) -> np.ndarray:
    """Cells whose half-open cube meets the ball, by nearest-point distance."""
    c = np.asarray(ball.centre)
    o = np.asarray(mesh.origin)
    h = mesh.delta
    axes_gap, axes_upper = [], []
    for i in range(mesh.d):
        k = np.arange(math.floor((c[i] - ball.radius - o[i]) / h) - 1,
                      math.floor((c[i] + ball.radius - o[i]) / h) + 2)
        lo = o[i] + k * h
        hi = lo + h
        gap = np.maximum(np.maximum(lo - c[i], c[i] - hi), 0.0)
        axes_gap.append((k, gap))
        axes_upper.append(c[i] >= hi)
    grids = np.meshgrid(*[g for _, g in axes_gap], indexing="ij")
    dist2 = sum(g * g for g in grids)
    r2 = ball.radius * ball.radius
    if ball.closed:
        # nearest point on an excluded upper face does not belong to the cell
        upper = np.zeros(dist2.shape, dtype=bool)
        for u in np.meshgrid(*axes_upper, indexing="ij"):
            upper |= u
        mask = (dist2 < r2) | ((dist2 == r2) & ~upper)
    else:
        mask = dist2 < r2
    idx = np.nonzero(mask)
    return np.stack([axes_gap[i][0][idx[i]] for i in range(mesh.d)], axis=1)


def _clip_ray(ray: Ray, clip):
    if clip is None:
        raise InvalidInputError("rays must be rasterized with a clipping box or ball")
    if isinstance(clip, Ball):
        return clip_ray_to_ball(ray, clip.centre, clip.radius)
    lo, hi = clip
    return clip_ray_to_box(ray, lo, hi)


def rasterize(geometry, mesh: MeshSpec, clip=None) -> OccupancySet:
    """Exact set of mesh cells met by ``geometry``.

    ``geometry`` is a Segment, Ray, Ball, an (n, d) point array, or a list of
    segments/rays/balls.  Rays are first cut down by ``clip``, either a
    ``(lo, hi)`` box or a :class:`Ball`.
    """
    if isinstance(geometry, (Segment, Ray, Ball)):
        geometry = [geometry]
    if isinstance(geometry, np.ndarray):
        return OccupancySet(mesh, mesh.cell_of(geometry))
    segs, parts = [], []
    for g in geometry:
        if isinstance(g, Segment):
            segs.append(g)
        elif isinstance(g, Ray):
            piece = _clip_ray(g, clip)
            if piece is not None:
                segs.append(piece)
        elif isinstance(g, Ball):
            parts.append(_ball_cells(g, mesh))
        else:
            raise InvalidInputError(f"cannot rasterize {type(g).__name__}")
    if segs:
        if any(s.d != mesh.d for s in segs):
            raise InvalidInputError("segment dimension does not match the mesh")
        p0, p1 = segment_arrays(segs)
        parts.append(_segment_cells(p0, p1, mesh))
    if not parts:
        return OccupancySet.empty(mesh)
    return OccupancySet(mesh, np.concatenate(parts))


def mesh_count(occ: OccupancySet) -> int:
    return len(occ)


def pixel_measure(occ: OccupancySet) -> float:
    """Outer-measure proxy: occupied cells times cell volume."""
    return len(occ) * occ.mesh.delta ** occ.mesh.d


def box_counts(geometry, deltas: Sequence[float], d: int, origin=None, clip=None):
    """``[(delta, M(geometry, delta)), ...]`` on meshes sharing one anchor."""
    return [(float(h), mesh_count(rasterize(geometry, MeshSpec.at(h, d, origin), clip)))
            for h in deltas]


class BoxDimensionEstimate(NamedTuple):
    lower: float
    upper: float
    slopes: np.ndarray
    lsq_slope: float


def estimate_box_dimensions(counts, finest_fraction: float = 0.5) -> BoxDimensionEstimate:
    """Lower/upper box-dimension proxies from mesh counts at decreasing scales.

    Two-point slopes ``log(M_{j+1}/M_j) / log(delta_j/delta_{j+1})`` are formed for
    successive scales; the lower (upper) estimate is the smallest (largest) slope
    over the finest ``finest_fraction`` of them.  The least-squares slope of
    ``log M`` against ``-log delta`` over all scales is reported alongside.
    """
    arr = np.asarray(counts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise InvalidInputError("need at least 3 (delta, count) pairs")
    deltas, m = arr[:, 0], arr[:, 1]
    if np.any(deltas <= 0) or np.any(np.diff(deltas) >= 0):
        raise InvalidInputError("deltas must be positive and strictly decreasing")
    if np.any(m <= 0):
        raise InvalidInputError("counts must be positive")
    if not 0 < finest_fraction <= 1:
        raise InvalidInputError("finest_fraction must lie in (0, 1]")
    slopes = np.log(m[1:] / m[:-1]) / np.log(deltas[:-1] / deltas[1:])
    window = slopes[-max(1, int(len(slopes) * finest_fraction)):]
    lsq = float(np.polyfit(-np.log(deltas), np.log(m), 1)[0])
    return BoxDimensionEstimate(float(window.min()), float(window.max()), slopes, lsq)


def _directed_brute(A: np.ndarray, B: np.ndarray, chunk: int = 2048) -> float:
    worst = 0.0
    for i in range(0, len(A), chunk):
        diff = A[i:i + chunk, None, :] - B[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
        worst = max(worst, float(d2.max()))
    return math.sqrt(worst)


def hausdorff_distance(A, B, method: str = "auto") -> float:
    """``max(rho(A, B), rho(B, A))`` with ``rho(A, B) = max_a min_b |a - b|``.

    Exact for finite point sets.  ``method`` is ``"brute"``, ``"tree"`` or
    ``"auto"`` (brute force while both sets have fewer than 10^4 points).
    """
    A = check_points(A)
    B = check_points(B, d=A.shape[1])
    if method == "auto":
        method = "brute" if max(len(A), len(B)) < BRUTE_FORCE_LIMIT else "tree"
    if method == "brute":
        return max(_directed_brute(A, B), _directed_brute(B, A))
    if method == "tree":
        da, _ = cKDTree(B).query(A)
        db, _ = cKDTree(A).query(B)
        return float(max(da.max(), db.max()))
    raise InvalidInputError(f"unknown method {method!r}")


def directed_distance(A, B) -> float:
    """``rho(A, B) = max_a min_b |a - b|``."""
    A = check_points(A)
    B = check_points(B, d=A.shape[1])
    d, _ = cKDTree(B).query(A)
    return float(d.max())


def lexicographic_order(P: np.ndarray) -> np.ndarray:
    return np.lexsort(P.T[::-1])


class Packing(NamedTuple):
    count: int
    centres: np.ndarray
    min_gap: float


def disjoint_packing_count(points, epsilon: float) -> Packing:
    """Greedy maximal family of disjoint closed ``epsilon``-balls centred in ``points``.

    Points are scanned in lexicographic order and a point is accepted iff it is
    more than ``2*epsilon`` from every accepted centre.  ``min_gap`` is the
    smallest ``|a_i - a_j| - 2*epsilon`` over accepted pairs (inf for one centre).
    """
    P = check_points(points)
    eps = check_positive(epsilon, "epsilon")
    P = P[lexicographic_order(P)]
    two = 2.0 * eps
    buckets: dict[tuple, list[int]] = {}
    accepted: list[int] = []
    d = P.shape[1]
    neigh = np.stack(np.meshgrid(*[np.arange(-1, 2)] * d, indexing="ij"), -1).reshape(-1, d)
    keys = np.floor(P / two).astype(np.int64)
    for i, p in enumerate(P):
        key = keys[i]
        ok = True
        for off in neigh:
            for j in buckets.get(tuple(key + off), ()):
                diff = p - P[j]
                if math.sqrt(float(diff @ diff)) <= two:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            accepted.append(i)
            buckets.setdefault(tuple(key), []).append(i)
    centres = P[accepted]
    if len(centres) < 2:
        gap = math.inf
    else:
        dist, _ = cKDTree(centres).query(centres, k=2)
        gap = float(dist[:, 1].min()) - two
    return Packing(len(centres), centres, gap)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    guaranteed: bool
    count: int
    witness_count: int
    greedy_count: int
    hausdorff: float
    min_gap: float

    def __bool__(self) -> bool:
        return self.stable


def packing_stability(A, epsilon: float, B, packing: Packing | None = None) -> StabilityReport:
    """Check that a packing of ``A`` survives the move to a nearby set ``B``.

    Each accepted centre of ``A`` is moved to its nearest point of ``B``; the
    moved balls are re-checked for disjointness.  ``stable`` means the moved
    family is disjoint, which gives ``N_disj(B) >= N_disj(A)`` for the packing
    count.  ``guaranteed`` records whether ``dist_H(A, B) < min_gap / 2``, the
    regime in which stability is certain; outside it the result is informative only.
    """
    A = check_points(A)
    B = check_points(B, d=A.shape[1])
    eps = check_positive(epsilon, "epsilon")
    if packing is None:
        packing = disjoint_packing_count(A, eps)
    _, idx = cKDTree(B).query(packing.centres)
    moved = B[idx]
    if len(np.unique(idx)) < len(idx):
        stable = False
    elif len(moved) < 2:
        stable = True
    else:
        dist, _ = cKDTree(moved).query(moved, k=2)
        stable = bool(dist[:, 1].min() > 2.0 * eps)
    h = hausdorff_distance(A, B)
    return StabilityReport(
        stable=stable,
        guaranteed=bool(h < packing.min_gap / 2),
        count=packing.count,
        witness_count=len(moved) if stable else 0,
        greedy_count=disjoint_packing_count(B, eps).count,
        hausdorff=h,
        min_gap=packing.min_gap,
    )
