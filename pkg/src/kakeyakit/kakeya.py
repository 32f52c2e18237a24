"""Kakeya sets parameterised by centre fields, and half-extended sets made of rays.

A centre field assigns to each sampled direction the centre of the unit segment
pointing that way.  Fields are finite samples of the bounded maps on the
projective sphere; every construction here works on such a sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import InvalidInputError, check_dimension, check_points, check_positive
from .counting import MeshSpec, OccupancySet, hausdorff_distance, pixel_measure, rasterize
from .geometry import Ball, Ray, Segment, canonicalize_direction, translate


def _default_bound(centres: np.ndarray) -> float:
    m = float(np.abs(centres).max()) if centres.size else 0.0
    b = 1.0
    while b <= m:
        b *= 2.0
    return b


@dataclass(frozen=True, eq=False)
class CenterField:
    """Finite centre field: canonical directions (sorted) and their segment centres.

    ``bound`` is a strict sup-norm bound on the centres, ``|c|_inf < bound``;
    the segments then lie inside ``(-bound - 1/2, bound + 1/2)^d``.
    """

    directions: np.ndarray
    centres: np.ndarray
    bound: float

    def __post_init__(self):
        D = check_points(self.directions)
        C = check_points(self.centres, d=D.shape[1])
        if len(D) != len(C):
            raise InvalidInputError("need one centre per direction")
        canon = np.array([canonicalize_direction(u).coords for u in D])
        if np.max(np.abs(canon - D)) > 1e-12:
            raise InvalidInputError("directions must be canonical unit vectors")
        order = np.lexsort(D.T[::-1])
        D, C = D[order], C[order]
        if len(D) > 1 and np.any(np.all(D[1:] == D[:-1], axis=1)):
            raise InvalidInputError("duplicate directions in centre field")
        if not np.all(np.abs(C) < self.bound):
            raise InvalidInputError(f"centres must satisfy |c|_inf < {self.bound}")
        for a in (D, C):
            a.setflags(write=False)
        object.__setattr__(self, "directions", D)
        object.__setattr__(self, "centres", C)
        object.__setattr__(self, "bound", float(self.bound))

    @classmethod
    def from_pairs(cls, directions, centres, bound: float | None = None) -> "CenterField":
        D = np.array([canonicalize_direction(u).coords for u in check_points(directions)])
        C = check_points(centres, d=D.shape[1])
        return cls(D, C, _default_bound(C) if bound is None else bound)

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return len(self.directions)

    def with_centres(self, centres) -> "CenterField":
        return CenterField(self.directions, np.asarray(centres, dtype=float), self.bound)

    def translated(self, v) -> "CenterField":
        C = self.centres + np.asarray(v, dtype=float)
        return CenterField(self.directions, C, max(self.bound, _default_bound(C)))

    def to_text(self) -> str:
        lines = []
        for u, c in zip(self.directions, self.centres):
            lines.append(" ".join(repr(float(x)) for x in u) + " ; " + " ".join(repr(float(x)) for x in c))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, bound: float | None = None) -> "CenterField":
        D, C = [], []
        for ln in text.splitlines():
            if not ln.strip():
                continue
            left, _, right = ln.partition(";")
            D.append([float(x) for x in left.split()])
            C.append([float(x) for x in right.split()])
        C = np.array(C)
        return cls(np.array(D), C, _default_bound(C) if bound is None else bound)


def build_kakeya(f: CenterField, length: float = 1.0) -> list[Segment]:
    """One segment per entry: centre ``f(x)``, direction ``x``."""
    if len(f) == 0:
        raise InvalidInputError("empty centre field")
    return [Segment(tuple(c), tuple(u), length) for u, c in zip(f.directions, f.centres)]


def _radical_inverse(i: int, base: int) -> float:
    x, f = 0.0, 1.0 / base
    while i:
        i, r = divmod(i, base)
        x += r * f
        f /= base
    return x


def halton(n: int, d: int = 2, skip: int = 0) -> np.ndarray:
    """First ``n`` points (after ``skip``) of the Halton sequence; never hits 0."""
    primes = [2, 3, 5, 7][:d]
    return np.array([[_radical_inverse(i, p) for p in primes] for i in range(skip + 1, skip + n + 1)])


def fan_directions(n: int) -> np.ndarray:
    """``n`` equally spaced projective directions in the plane, angles ``k*pi/n``."""
    k = np.arange(n)
    ang = k * np.pi / n
    U = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # exact axis directions keep endpoint cells reproducible
    U[k == 0] = (1.0, 0.0)
    if n % 2 == 0:
        U[k == n // 2] = (0.0, 1.0)
    return np.array([canonicalize_direction(u).coords for u in U])


def fan_field(n: int, placement: str = "halton", side: float = 4.0, seed: int = 0) -> CenterField:
    """Planar fan of ``n`` directions with centres in the open square of the given side.

    ``placement`` is ``"halton"`` (deterministic low-discrepancy, ``seed`` skips
    that many points), ``"random"`` (uniform, seeded) or ``"zero"`` (all centres at 0).
    """
    U = fan_directions(n)
    half = side / 2
    if placement == "halton":
        C = side * (halton(n, 2, skip=seed) - 0.5)
    elif placement == "random":
        C = np.random.default_rng(seed).uniform(-half, half, size=(n, 2))
    elif placement == "zero":
        C = np.zeros((n, 2))
    else:
        raise InvalidInputError(f"unknown placement {placement!r}")
    return CenterField(U, C, half if placement != "zero" else 1.0)


def fan64() -> CenterField:
    """64 planar directions with centres inside the square of side 4 about the origin."""
    return fan_field(64, "halton", side=4.0)


def random_field(directions, bound: float = 1.0, seed: int = 0) -> CenterField:
    D = check_points(directions)
    rng = np.random.default_rng(seed)
    C = rng.uniform(-bound, bound, size=D.shape)
    # uniform on [-b, b) can land on -b exactly only with probability zero; guard anyway
    C = np.clip(C, np.nextafter(-bound, 0), np.nextafter(bound, 0))
    return CenterField.from_pairs(D, C, bound)


def field_distance(f: CenterField, g: CenterField) -> float:
    """Sup over sampled directions of ``|f(x) - g(x)|``."""
    if f.directions.shape != g.directions.shape or not np.array_equal(f.directions, g.directions):
        raise InvalidInputError("fields are sampled on different directions")
    return float(np.max(np.linalg.norm(f.centres - g.centres, axis=1)))


class Group(NamedTuple):
    index: tuple
    centre: np.ndarray
    members: tuple


class Quantization(NamedTuple):
    field: CenterField
    groups: list
    cube_side: float
    n: int


def quantize_field(f0: CenterField, epsilon: float) -> Quantization:
    """Snap every centre to the centre of its half-open cube of side ``M/n``.

    ``n`` is the least integer with ``M/n < epsilon/sqrt(d)``, so each centre moves
    by at most ``(sqrt(d)/2)*M/n < epsilon``.  Groups list the directions per cube,
    in lexicographic cube order.
    """
    eps = check_positive(epsilon, "epsilon")
    M, d = f0.bound, f0.d
    n = math.floor(M * math.sqrt(d) / eps) + 1
    side = M / n
    idx = np.floor((f0.centres + M) / side).astype(np.int64)
    idx = np.clip(idx, 0, 2 * n - 1)
    A = -M + (idx + 0.5) * side
    f = CenterField(f0.directions, A, M)
    keys, inverse = np.unique(idx, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    groups = []
    for j, key in enumerate(keys):
        members = tuple(int(i) for i in np.flatnonzero(inverse == j))
        groups.append(Group(tuple(int(v) for v in key), -M + (key + 0.5) * side, members))
    return Quantization(f, groups, side, n)


class UnionCheck(NamedTuple):
    equal: bool
    symmetric_difference: int
    union: OccupancySet
    ball: OccupancySet

    def __bool__(self) -> bool:
        return self.equal


def moved_groups(f: CenterField, groups: Sequence[Group]) -> list[list[Segment]]:
    """``T_{a_j}`` applied to the segments of each group."""
    segs = build_kakeya(f)
    return [translate([segs[i] for i in g.members], g.centre) for g in groups]


def shifted_union_is_ball(f: CenterField, groups: Sequence[Group], mesh: MeshSpec,
                          radius: float = 0.5) -> UnionCheck:
    """Compare the raster of the re-centred groups with the raster of the closed ball.

    Unit segments through the origin in every direction fill the closed ball of
    radius 1/2, so the closed ball is the comparison set.
    """
    moved = [s for grp in moved_groups(f, groups) for s in grp]
    union = rasterize(moved, mesh) if moved else OccupancySet.empty(mesh)
    ball = rasterize(Ball(np.zeros(mesh.d), radius, closed=True), mesh)
    sd = union.symmetric_difference_count(ball)
    return UnionCheck(sd == 0, sd, union, ball)


class Witness(NamedTuple):
    index: int
    bound: float
    measure: float
    measures: np.ndarray
    holds: bool


def measure_witness(f: CenterField, groups: Sequence[Group], mesh: MeshSpec,
                    radius: float = 0.5) -> Witness:
    """Group whose re-centred raster has the largest pixel measure, against |ball|/N."""
    measures = np.array([pixel_measure(rasterize(g, mesh)) for g in moved_groups(f, groups)])
    ball = pixel_measure(rasterize(Ball(np.zeros(mesh.d), radius, closed=True), mesh))
    i = int(np.argmax(measures))
    bound = ball / len(groups)
    return Witness(i, bound, float(measures[i]), measures, bool(measures[i] >= bound))


def calibrate_fan_density(delta: float, radius: float = 0.5, max_log2: int = 16) -> int:
    """Smallest power-of-two fan size whose concentric raster equals the closed-ball raster.

    There is no closed form for this threshold; it is found by direct search.
    """
    mesh = MeshSpec.at(delta, 2)
    ball = rasterize(Ball((0.0, 0.0), radius, closed=True), mesh)
    for m in range(2, max_log2 + 1):
        n = 2 ** m
        fan = [Segment((0.0, 0.0), tuple(u), 2 * radius) for u in fan_directions(n)]
        if rasterize(fan, mesh) == ball:
            return n
    raise RuntimeError(f"no fan up to 2^{max_log2} directions fills the ball at delta={delta}")


def raster_distance(f: CenterField, g: CenterField, mesh: MeshSpec) -> float:
    """Hausdorff distance between the cell-centre clouds of the rasters of K(f), K(g)."""
    a = rasterize(build_kakeya(f), mesh).centres()
    b = rasterize(build_kakeya(g), mesh).centres()
    return hausdorff_distance(a, b)


def _sphere_net(d: int, size: int, seed: int = 0) -> np.ndarray:
    if d == 2:
        ang = 2 * np.pi * np.arange(size) / size
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        i = np.arange(size) + 0.5
        z = 1 - 2 * i / size
        phi = np.pi * (1 + 5 ** 0.5) * i
        r = np.sqrt(1 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    X = np.random.default_rng(seed).standard_normal((size, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def direction_sample(d: int, n: int, net_size: int | None = None) -> np.ndarray:
    """Maximal ``1/n``-separated subset of the unit sphere (chord metric).

    Farthest-point insertion over a fine candidate net, stopping once every net
    point is closer than ``1/n`` to the chosen set.  Chosen points are pairwise at
    least ``1/n`` apart.
    """
    check_dimension(d, 2, 4)
    if n < 1:
        raise InvalidInputError("separation parameter must be >= 1")
    net = _sphere_net(d, net_size or (10_000 if d == 2 else 20_000))
    sep = 1.0 / n
    chosen = [0]
    dist = np.linalg.norm(net - net[0], axis=1)
    while True:
        j = int(np.argmax(dist))
        if dist[j] < sep:
            break
        chosen.append(j)
        dist = np.minimum(dist, np.linalg.norm(net - net[j], axis=1))
    return net[chosen]


def sample_gap(directions: np.ndarray, net_size: int = 20_000) -> float:
    """Covering radius of a sphere sample in the chord metric.

    Exact in the plane (half the largest angular gap); for d >= 3 it is measured
    on a candidate net and padded by the net's own covering radius.
    """
    U = check_points(directions)
    d = U.shape[1]
    if d == 2:
        ang = np.sort(np.mod(np.arctan2(U[:, 1], U[:, 0]), 2 * np.pi))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        return float(2 * np.sin(gaps.max() / 4))
    from scipy.spatial import cKDTree

    net = _sphere_net(d, net_size)
    far, _ = cKDTree(U).query(net)
    pad, _ = cKDTree(net).query(net, k=2)
    return float(far.max() + pad[:, 1].max())


@dataclass(frozen=True, eq=False)
class BaseField:
    """Base points of the rays of a half-extended Kakeya set, one per sphere point."""

    directions: np.ndarray
    bases: np.ndarray
    truncation: float = 1.0

    def __post_init__(self):
        D = check_points(self.directions)
        B = check_points(self.bases, d=D.shape[1])
        if len(D) != len(B):
            raise InvalidInputError("need one base per direction")
        check_positive(self.truncation, "truncation")
        object.__setattr__(self, "directions", D / np.linalg.norm(D, axis=1, keepdims=True))
        object.__setattr__(self, "bases", B)

    @property
    def base_bound(self) -> float:
        return float(np.linalg.norm(self.bases, axis=1).max())

    @classmethod
    def random(cls, directions, bound: float, seed: int = 0, truncation: float = 1.0) -> "BaseField":
        """Bases drawn uniformly from the ball of radius ``bound``."""
        D = check_points(directions)
        rng = np.random.default_rng(seed)
        g = rng.standard_normal(D.shape)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = bound * rng.uniform(0, 1, len(D)) ** (1 / D.shape[1])
        return cls(D, g * r[:, None], truncation)


def build_half_extended(base: BaseField, directions=None) -> list[Ray]:
    """One ray ``t_theta + lam*theta`` per direction."""
    if directions is not None:
        D = check_points(directions)
        if D.shape != base.directions.shape or not np.allclose(D, base.directions, atol=1e-12):
            raise InvalidInputError("directions do not match the base field")
    return [Ray(tuple(b), tuple(u)) for u, b in zip(base.directions, base.bases)]
