"""Zooming out on half-extended Kakeya sets.

``S_k(x) = x/k`` shrinks every ray onto a ray through a base point ``t/k`` near
the origin, so ``S_k(K)`` intersected with the closed unit ball approaches the
ball itself.  All checks here are finite inequalities at a fixed raster
resolution, with the grid slack ``2*sqrt(d)*delta`` added explicitly.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ._validation import InvalidInputError, check_positive
from .counting import MeshSpec, OccupancySet, hausdorff_distance, rasterize
from .geometry import Ball, Ray, SimilarityMap, apply_similarity
from .kakeya import sample_gap


def unit_ball_raster(mesh: MeshSpec) -> OccupancySet:
    return rasterize(Ball(np.zeros(mesh.d), 1.0, closed=True), mesh)


def zoom_out(K: Sequence[Ray], k: float, mesh: MeshSpec) -> OccupancySet:
    """Raster of ``S_k(K)`` clipped to the closed unit ball."""
    if not k > 0:
        raise InvalidInputError("zoom factor k must be positive")
    rays = apply_similarity(SimilarityMap.zoom_out(k), list(K))
    return rasterize(rays, mesh, clip=Ball(np.zeros(mesh.d), 1.0, closed=True))


class ConvergenceRow(NamedTuple):
    k: float
    distance: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound


class ConvergenceProfile(NamedTuple):
    rows: list
    gap: float
    base_bound: float
    slack: float
    monotone: bool

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows)


def convergence_profile(K: Sequence[Ray], ks: Sequence[float], mesh: MeshSpec,
                        gap: float | None = None, base_bound: float | None = None) -> ConvergenceProfile:
    """Hausdorff distance from the zoomed raster to the unit-ball raster, per ``k``.

    Each distance is compared with ``2*(gap + T/k) + 2*sqrt(d)*delta``, where
    ``gap`` is the covering radius of the direction sample and ``T`` bounds the
    base points.  ``monotone`` reports whether the distances are nonincreasing
    in ``k`` up to one cell diagonal.
    """
    K = list(K)
    if not K:
        raise InvalidInputError("empty ray list")
    U = np.array([r.direction for r in K])
    g = sample_gap(U) if gap is None else gap
    T = float(max(np.linalg.norm(r.base) for r in K)) if base_bound is None else base_bound
    slack = 2 * math.sqrt(mesh.d) * mesh.delta
    ball = unit_ball_raster(mesh).centres()
    rows = []
    for k in ks:
        occ = zoom_out(K, k, mesh)
        dist = hausdorff_distance(occ.centres(), ball) if len(occ) else math.inf
        rows.append(ConvergenceRow(float(k), dist, 2 * (g + T / k) + slack))
    cell = math.sqrt(mesh.d) * mesh.delta
    monotone = all(b.distance <= a.distance + cell for a, b in zip(rows, rows[1:]))
    return ConvergenceProfile(rows, g, T, slack, monotone)


def local_count(occ: OccupancySet, x, radius: float, eps: float) -> int:
    """Mesh cover count of ``B(x, radius)`` intersected with the set at resolution ``eps``.

    Cell centres of ``occ`` inside the open ball are re-binned onto the ``eps``-mesh
    sharing ``occ``'s anchor; ``eps`` must not be finer than ``occ``'s own cells.
    """
    if eps < occ.mesh.delta * (1 - 1e-12):
        raise InvalidInputError("eps is finer than the raster it is counted on")
    x = np.asarray(x, dtype=float)
    o, h = np.asarray(occ.mesh.origin), occ.mesh.delta
    # cells are sorted lexicographically, so the first axis bounds a contiguous slab
    first = occ.cells[:, 0]
    lo = np.searchsorted(first, math.floor((x[0] - radius - o[0]) / h) - 1, side="left")
    hi = np.searchsorted(first, math.floor((x[0] + radius - o[0]) / h) + 1, side="right")
    P = o + (occ.cells[lo:hi] + 0.5) * h
    inside = P[np.linalg.norm(P - x, axis=1) < radius]
    if len(inside) == 0:
        return 0
    keys = np.floor((inside - np.asarray(occ.mesh.origin)) / eps).astype(np.int64)
    keys -= keys.min(axis=0)
    return len(np.unique(np.ravel_multi_index(tuple(keys.T), tuple(keys.max(axis=0) + 1))))


class CoveringRow(NamedTuple):
    sample: int
    delta: float
    eps: float
    count: int
    bound: float

    @property
    def passed(self) -> bool:
        return self.count <= self.bound


class CoveringReport(NamedTuple):
    rows: list
    constant: float
    exponent: float
    calibration: str

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


def weak_tangent_covering_check(A: OccupancySet, A_hat: OccupancySet, S: SimilarityMap, s: float,
                                samples, scale_pairs: Sequence[tuple[float, float]],
                                calibration: str = "coarsest", seed: int = 0) -> CoveringReport:
    """Check ``N(B(x, delta) & A_hat, eps) <= C * 4^s * (delta/eps)^s`` at sampled points.

    For each sample ``x`` of ``A_hat`` the nearest point of ``S(A)`` is pulled back
    to ``y`` in ``A``; ``A``'s own count on ``B(y, 2*delta/c)`` at resolution
    ``eps/(2c)`` (``c`` the rate of ``S``) calibrates ``C`` by
    ``count <= C * (4*delta/eps)^s``.  With ``calibration="coarsest"`` the constant
    comes from the pair with the smallest ``delta/eps``; ``"all"`` takes the
    maximum over every pair.  ``samples`` is a count (drawn from ``A_hat``'s cell
    centres with ``seed``) or an explicit point array.
    """
    check_positive(s, "exponent")
    if not scale_pairs or any(not 0 < e <= dl for dl, e in scale_pairs):
        raise InvalidInputError("scale pairs must satisfy 0 < eps <= delta")
    hat_pts = A_hat.centres()
    if np.isscalar(samples):
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(hat_pts), size=min(int(samples), len(hat_pts)), replace=False)
        X = hat_pts[np.sort(pick)]
    else:
        X = np.asarray(samples, dtype=float)
    a_pts = A.centres()
    _, nearest = cKDTree(S(a_pts)).query(X)
    Y = a_pts[nearest]
    c = S.rate

    pairs = sorted(scale_pairs, key=lambda p: p[0] / p[1])
    if calibration == "coarsest":
        cal_pairs = pairs[:1]
    elif calibration == "all":
        cal_pairs = pairs
    else:
        raise InvalidInputError(f"unknown calibration {calibration!r}")
    C = 0.0
    for dl, e in cal_pairs:
        for y in Y:
            n_pre = local_count(A, y, 2 * dl / c, e / (2 * c))
            C = max(C, n_pre / (4 * dl / e) ** s)

    rows = []
    for i, x in enumerate(X):
        for dl, e in pairs:
            n_hat = local_count(A_hat, x, dl, e)
            rows.append(CoveringRow(i, dl, e, n_hat, C * 4 ** s * (dl / e) ** s))
    return CoveringReport(rows, C, s, calibration)
