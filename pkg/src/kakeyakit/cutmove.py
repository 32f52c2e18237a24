"""Cut-and-move: group segments by the cube holding their midpoint, then translate
each group so that its cube centre lands on the origin.

Also hosts the mesh version of the d/2 lower-bound argument, which cuts at the
counting scale itself and checks that a fixed dilation of the moved set covers
the ball of radius 1/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import InvalidInputError, check_positive
from .counting import MeshSpec, mesh_count, rasterize
from .geometry import Ball, Segment, midpoints, translate
from .kakeya import Group


@dataclass(frozen=True)
class Partition:
    cube_side: float
    bound: float
    grid_origin: tuple
    groups: list

    def __len__(self) -> int:
        return len(self.groups)

    def pieces(self, K: Sequence[Segment]) -> list[list[Segment]]:
        return [[K[i] for i in g.members] for g in self.groups]


def _group_by_cells(K: Sequence[Segment], side: float, origin: np.ndarray, bound: float) -> Partition:
    mids = midpoints(K)
    idx = np.floor((mids - origin) / side).astype(np.int64)
    keys, inverse = np.unique(idx, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    groups = []
    for j, key in enumerate(keys):
        members = tuple(int(i) for i in np.flatnonzero(inverse == j))
        groups.append(Group(tuple(int(v) for v in key), origin + (key + 0.5) * side, members))
    return Partition(side, bound, tuple(float(x) for x in origin), groups)


def default_bound(K: Sequence[Segment]) -> float:
    """Smallest power of two strictly above every midpoint coordinate."""
    m = float(np.abs(midpoints(K)).max())
    b = 1.0
    while b <= m:
        b *= 2.0
    while b / 2 > m and b > 2.0 ** -20:
        b /= 2.0
    return b


def partition_by_midpoint(K: Sequence[Segment], n: int, bound: float | None = None) -> Partition:
    """Group segments by the half-open cube of side ``bound/n`` containing their midpoint.

    The cubes tile ``(-bound, bound)^d``; empty cubes are omitted and groups come in
    lexicographic cube order.
    """
    if not K:
        raise InvalidInputError("empty segment list")
    if int(n) != n or n < 1:
        raise InvalidInputError("n must be a positive integer")
    M = default_bound(K) if bound is None else check_positive(bound, "bound")
    mids = midpoints(K)
    outside = np.flatnonzero(np.any(np.abs(mids) >= M, axis=1))
    if len(outside):
        i = int(outside[0])
        raise InvalidInputError(f"segment {i} has midpoint {mids[i].tolist()} outside (-{M}, {M})^d")
    d = mids.shape[1]
    return _group_by_cells(K, M / n, np.full(d, -M), M)


def partition_on_mesh(K: Sequence[Segment], mesh: MeshSpec) -> Partition:
    """Group segments by the mesh cell containing their midpoint."""
    if not K:
        raise InvalidInputError("empty segment list")
    return _group_by_cells(K, mesh.delta, np.asarray(mesh.origin), math.inf)


def cut_and_move(K: Sequence[Segment], p: Partition) -> list[Segment]:
    out: list[Segment] = []
    for piece, g in zip(p.pieces(K), p.groups):
        out.extend(translate(piece, g.centre))
    return out


class SandwichRow(NamedTuple):
    delta: float
    whole: int
    max_piece: int
    piece_sum: int
    groups_bound: int
    holds: bool


def count_sandwich_report(K: Sequence[Segment], p: Partition, deltas: Sequence[float],
                          origin=None) -> list[SandwichRow]:
    """``max_j M(K_j) <= M(K) <= sum_j M(K_j) <= groups * M(K)`` at each scale."""
    d = K[0].d
    rows = []
    for h in deltas:
        mesh = MeshSpec.at(h, d, origin)
        whole = mesh_count(rasterize(list(K), mesh))
        counts = [mesh_count(rasterize(piece, mesh)) for piece in p.pieces(K)]
        total = sum(counts)
        bound = len(p) * whole
        rows.append(SandwichRow(float(h), whole, max(counts), total, bound,
                                max(counts) <= whole <= total <= bound))
    return rows


def nested_union(K: Sequence[Segment], J: int, bound: float | None = None) -> dict[int, list[Segment]]:
    """Levels ``j = 1..J`` of cut-and-move, level ``j`` with midpoints within ``2^-j`` of 0."""
    if int(J) != J or J < 1:
        raise InvalidInputError("J must be a positive integer")
    M = default_bound(K) if bound is None else bound
    d = K[0].d
    levels = {}
    for j in range(1, J + 1):
        n = math.floor(M * math.sqrt(d) * 2 ** j) + 1
        levels[j] = cut_and_move(K, partition_by_midpoint(K, n, M))
    return levels


class Panel(NamedTuple):
    level: int
    side: Fraction
    segments: list
    midpoints: np.ndarray
    pieces: int
    contained: bool


def cut_level(K: Sequence[Segment], level: int, bound: float = 2.0) -> Panel:
    """Cut ``(-bound, bound)^d`` into ``2^(d*level)`` cubes and move every piece to the origin.

    Containment of the moved midpoints in the central half-open cube is checked
    in exact rational arithmetic.
    """
    if level < 0:
        raise InvalidInputError("level must be nonnegative")
    side = Fraction(bound) * 2 / 2 ** level
    if level == 0:
        moved, pieces = list(K), 1
    else:
        p = partition_by_midpoint(K, 2 ** (level - 1), bound)
        moved, pieces = cut_and_move(K, p), len(p)
    mids = midpoints(moved)
    half = side / 2
    contained = all(-half <= Fraction(float(x)) < half for x in mids.ravel())
    return Panel(level, side, moved, mids, pieces, contained)


class LBDRow(NamedTuple):
    delta: float
    count: int
    groups: int
    moved_count: int
    ball_count: int
    uncovered: np.ndarray
    implied_ok: bool
    observed_exponent: float
    certified_exponent: float

    @property
    def covered(self) -> bool:
        return len(self.uncovered) == 0


class LBDReport(NamedTuple):
    rows: list
    dilation_radius: int
    kappa: int

    @property
    def covered(self) -> bool:
        return all(r.covered for r in self.rows)


def theorem_lbd_experiment(K: Sequence[Segment], scales: Sequence[float],
                           radius: float = 0.5, origin=None) -> LBDReport:
    """Mesh run of the d/2 lower-bound argument at each scale ``delta``.

    1. ``c = M(K, delta)``.
    2. Cut at the ``delta``-mesh itself and move every piece by its cell centre, so
       all midpoints lie within ``(sqrt(d)/2)*delta`` of the origin.
    3. Dilate the moved raster by ``ceil(2*sqrt(d))`` cells (Chebyshev) and list the
       cells of the raster of ``B(0, 1/2)`` it misses.
    4. Check ``M(B, delta) <= kappa * c^2`` with ``kappa = 2^d (2r+1)^d``: at most
       ``c`` pieces, each a translate of a subset of ``K`` meeting at most ``2^d * c``
       cells, dilated by a stencil of ``(2r+1)^d`` cells.

    The observed exponent is ``log c / log(1/delta)``; the certified exponent is the
    value of ``s`` the inequality in step 4 forces, ``log(M(B)/kappa) / (2 log(1/delta))``.
    """
    K = list(K)
    if not K:
        raise InvalidInputError("empty segment list")
    d = K[0].d
    r = math.ceil(2 * math.sqrt(d))
    kappa = 2 ** d * (2 * r + 1) ** d
    rows = []
    for h in scales:
        check_positive(h, "scale")
        mesh = MeshSpec.at(h, d, origin)
        c = mesh_count(rasterize(K, mesh))
        p = partition_on_mesh(K, mesh)
        moved = rasterize(cut_and_move(K, p), mesh)
        ball = rasterize(Ball(np.zeros(d), radius), mesh)
        uncovered = ball.difference(moved.dilate(r)).cells
        ball_count = len(ball)
        logs = math.log(1 / h)
        rows.append(LBDRow(
            delta=float(h),
            count=c,
            groups=len(p),
            moved_count=len(moved),
            ball_count=ball_count,
            uncovered=uncovered,
            implied_ok=ball_count <= kappa * c * c and len(moved) <= 2 ** d * len(p) * c,
            observed_exponent=math.log(c) / logs,
            certified_exponent=math.log(ball_count / kappa) / (2 * logs),
        ))
    return LBDReport(rows, r, kappa)
