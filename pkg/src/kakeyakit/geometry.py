"""Directions, segments, rays, balls and the two map families used throughout:
translations (which subtract their vector) and similarities x -> rate*x + offset.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ._validation import InvalidInputError, as_point

DEFAULT_TOL = 1e-9
MIN_DIM, MAX_DIM = 1, 4


@dataclass(frozen=True)
class Direction:
    """Point of the projective sphere, stored by its canonical representative."""

    coords: tuple

    @property
    def d(self) -> int:
        return len(self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype or float)


def canonicalize_direction(v) -> Direction:
    """Normalize ``v`` and flip it so that its first nonzero coordinate is positive."""
    u = as_point(v)
    norm = float(np.linalg.norm(u))
    if not norm > 0.0 or not np.isfinite(norm):
        raise InvalidInputError("direction must be a finite nonzero vector")
    # already-unit input is kept as is so that canonicalization is idempotent bit for bit
    if abs(norm - 1.0) > 4 * np.finfo(float).eps:
        u = u / norm
    nz = np.flatnonzero(u)
    if u[nz[0]] < 0:
        u = -u
    # -0.0 would break bit-exact comparisons between v and -v
    u = u + 0.0
    return Direction(tuple(float(x) for x in u))


def unit(v) -> np.ndarray:
    u = as_point(v)
    norm = np.linalg.norm(u)
    if not norm > 0:
        raise InvalidInputError("direction must be nonzero")
    return u / norm


@dataclass(frozen=True)
class Segment:
    """Closed segment ``centre + t*direction`` for ``|t| <= length/2``."""

    centre: tuple
    direction: tuple
    length: float = 1.0

    def __post_init__(self):
        c = tuple(float(x) for x in self.centre)
        u = tuple(float(x) for x in unit(self.direction))
        if len(c) != len(u):
            raise InvalidInputError("centre and direction dimensions differ")
        if not (self.length > 0 and np.isfinite(self.length)):
            raise InvalidInputError(f"segment length must be positive, got {self.length}")
        if not all(np.isfinite(c)):
            raise InvalidInputError("segment centre must be finite")
        object.__setattr__(self, "centre", c)
        object.__setattr__(self, "direction", u)
        object.__setattr__(self, "length", float(self.length))

    @property
    def d(self) -> int:
        return len(self.centre)

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.centre)
        h = 0.5 * self.length * np.asarray(self.direction)
        return c - h, c + h

    @classmethod
    def through(cls, centre, direction, length: float = 1.0) -> "Segment":
        return cls(tuple(as_point(centre)), canonicalize_direction(direction).coords, length)


@dataclass(frozen=True)
class Ray:
    """Half-infinite line ``base + lam*direction``, ``lam >= 0``.

    The direction is a genuine sphere point, so ``-u`` and ``u`` give different rays.
    """

    base: tuple
    direction: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.base)
        u = tuple(float(x) for x in unit(self.direction))
        if len(b) != len(u):
            raise InvalidInputError("base and direction dimensions differ")
        if not all(np.isfinite(b)):
            raise InvalidInputError("ray base must be finite")
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "direction", u)

    @property
    def d(self) -> int:
        return len(self.base)


@dataclass(frozen=True)
class Ball:
    """Euclidean ball; open unless ``closed`` is set."""

    centre: tuple
    radius: float
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "centre", tuple(float(x) for x in self.centre))
        if not self.radius > 0:
            raise InvalidInputError("ball radius must be positive")

    @property
    def d(self) -> int:
        return len(self.centre)


@dataclass(frozen=True)
class SimilarityMap:
    rate: float
    offset: tuple = field(default=())

    def __post_init__(self):
        if not (self.rate > 0 and np.isfinite(self.rate)):
            raise InvalidInputError(f"similarity rate must be positive, got {self.rate}")
        object.__setattr__(self, "offset", tuple(float(x) for x in self.offset))

    def _offset(self, d: int) -> np.ndarray:
        if not self.offset:
            return np.zeros(d)
        if len(self.offset) != d:
            raise InvalidInputError("similarity offset has the wrong dimension")
        return np.asarray(self.offset)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.rate * x + self._offset(x.shape[-1])

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        return (y - self._offset(y.shape[-1])) / self.rate

    @classmethod
    def zoom_out(cls, k: float) -> "SimilarityMap":
        """``x -> x/k``."""
        if not k > 0:
            raise InvalidInputError("zoom factor must be positive")
        return cls(1.0 / k)


def _is_collection(A) -> bool:
    return isinstance(A, (list, tuple)) and len(A) > 0 and isinstance(A[0], (Segment, Ray, Ball))


def translate(A, a):
    """Apply ``T_a x = x - a`` to points, segments, rays, balls or lists of them."""
    a = as_point(a)
    if _is_collection(A):
        return type(A)(translate(x, a) for x in A)
    if isinstance(A, Segment):
        return replace(A, centre=tuple(np.asarray(A.centre) - a))
    if isinstance(A, Ray):
        return replace(A, base=tuple(np.asarray(A.base) - a))
    if isinstance(A, Ball):
        return replace(A, centre=tuple(np.asarray(A.centre) - a))
    return np.asarray(A, dtype=float) - a


def apply_similarity(S: SimilarityMap, A):
    """Map every coordinate datum of ``A`` through ``S``; lengths and radii scale by the rate."""
    if _is_collection(A):
        return type(A)(apply_similarity(S, x) for x in A)
    if isinstance(A, Segment):
        return Segment(tuple(S(A.centre)), A.direction, A.length * S.rate)
    if isinstance(A, Ray):
        return Ray(tuple(S(A.base)), A.direction)
    if isinstance(A, Ball):
        return Ball(tuple(S(A.centre)), A.radius * S.rate, A.closed)
    return S(A)


def segment_arrays(segments: Sequence[Segment]) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint arrays ``(p0, p1)`` of shape (n, d) for a segment list."""
    if not segments:
        return np.empty((0, 0)), np.empty((0, 0))
    c = np.array([s.centre for s in segments], dtype=float)
    u = np.array([s.direction for s in segments], dtype=float)
    h = 0.5 * np.array([s.length for s in segments])[:, None] * u
    return c - h, c + h


def midpoints(segments: Iterable[Segment]) -> np.ndarray:
    return np.array([s.centre for s in segments], dtype=float)


def clip_ray_to_box(ray: Ray, lo, hi) -> Segment | None:
    """Part of ``ray`` inside the closed box ``[lo, hi]`` (slab method), or None."""
    b, u = np.asarray(ray.base), np.asarray(ray.direction)
    lo, hi = as_point(lo), as_point(hi)
    t0, t1 = 0.0, np.inf
    for i in range(len(b)):
        if u[i] == 0.0:
            if not lo[i] <= b[i] <= hi[i]:
                return None
            continue
        ta, tb = (lo[i] - b[i]) / u[i], (hi[i] - b[i]) / u[i]
        t0, t1 = max(t0, min(ta, tb)), min(t1, max(ta, tb))
    if t1 < t0:
        return None
    return _piece(b, u, t0, t1)


def clip_ray_to_ball(ray: Ray, centre=None, radius: float = 1.0) -> Segment | None:
    """Part of ``ray`` inside the closed ball, or None when they miss."""
    b, u = np.asarray(ray.base), np.asarray(ray.direction)
    c = np.zeros_like(b) if centre is None else as_point(centre)
    p = b - c
    uu = float(u @ u)
    pu = float(p @ u)
    disc = pu * pu - uu * (float(p @ p) - radius * radius)
    if disc < 0:
        return None
    root = np.sqrt(disc)
    t0, t1 = max(0.0, (-pu - root) / uu), (-pu + root) / uu
    if t1 < t0:
        return None
    return _piece(b, u, t0, t1)


def _piece(b, u, t0, t1) -> Segment:
    # degenerate (single point) pieces keep a tiny positive length
    length = max(t1 - t0, 0.0)
    centre = b + 0.5 * (t0 + t1) * u
    return Segment(tuple(centre), tuple(u), length if length > 0 else np.finfo(float).tiny)
