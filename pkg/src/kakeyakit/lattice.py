"""Difference sets on bounded integer lattices.

Lattice sets are subsets of ``{0, ..., n-1}^d``.  Difference sets live in
``{-(n-1), ..., n-1}^d`` and are stored shifted by ``n-1`` per axis, i.e. as a
lattice set with side ``2n-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.signal import correlate

from ._validation import InvalidInputError
from .counting import MeshSpec, rasterize
from .geometry import Segment, midpoints

# above this many pairs, difference sets go through FFT correlation of bit grids
PAIR_LIMIT = 2_000_000


@dataclass(frozen=True, eq=False)
class LatticeSet:
    n: int
    d: int
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, self.d)
        if cells.size and (cells.min() < 0 or cells.max() >= self.n):
            raise InvalidInputError(f"lattice points must lie in {{0..{self.n - 1}}}^{self.d}")
        cells = np.unique(cells, axis=0) if len(cells) else cells
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeSet):
            return NotImplemented
        return (self.n, self.d) == (other.n, other.d) and np.array_equal(self.cells, other.cells)

    def grid(self) -> np.ndarray:
        g = np.zeros((self.n,) * self.d, dtype=bool)
        g[tuple(self.cells.T)] = True
        return g

    @classmethod
    def full(cls, n: int, d: int) -> "LatticeSet":
        idx = np.stack(np.meshgrid(*[np.arange(n)] * d, indexing="ij"), -1).reshape(-1, d)
        return cls(n, d, idx)

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "LatticeSet":
        return cls(grid.shape[0], grid.ndim, np.argwhere(grid))

    def to_text(self) -> str:
        rows = (" ".join(str(int(v)) for v in row) for row in self.cells)
        return "\n".join([f"{self.n} {self.d}", *rows]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LatticeSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n, d = (int(x) for x in lines[0].split())
        cells = np.array([[int(v) for v in ln.split()] for ln in lines[1:]], dtype=np.int64)
        return cls(n, d, cells.reshape(-1, d))


def _pair_differences(A: np.ndarray, B: np.ndarray, shift: int) -> np.ndarray:
    d = A.shape[1]
    shape = (2 * shift + 1,) * d
    diffs = (A[:, None, :] - B[None, :, :]).reshape(-1, d) + shift
    keys = np.unique(np.ravel_multi_index(tuple(diffs.T), shape))
    return np.stack(np.unravel_index(keys, shape), axis=1)


def _correlation_support(A: LatticeSet, B: LatticeSet) -> np.ndarray:
    """Bit grid of ``{a - b}`` shifted by ``n - 1``: full correlation of the indicator grids."""
    corr = correlate(A.grid().astype(float), B.grid().astype(float), mode="full", method="fft")
    return np.argwhere(corr > 0.5)


def _differences(A: LatticeSet, B: LatticeSet) -> np.ndarray:
    if A.n != B.n or A.d != B.d:
        raise InvalidInputError("lattice sets on different lattices")
    if len(A) * len(B) <= PAIR_LIMIT:
        return _pair_differences(A.cells, B.cells, A.n - 1)
    return _correlation_support(A, B)


def difference_set(C: LatticeSet) -> LatticeSet:
    """``{x - y : x, y in C}``, re-indexed by ``+(n-1)`` onto a lattice of side ``2n-1``."""
    if len(C) == 0:
        raise InvalidInputError("difference set of an empty lattice set")
    return LatticeSet(2 * C.n - 1, C.d, _differences(C, C))


def trivial_bound(size: int, n: int, d: int) -> int:
    """``min(|C|^2, (2n-1)^d)``: both ceilings hold for every ``C`` in ``Z_n^d``."""
    if size < 1:
        raise InvalidInputError("size must be >= 1")
    return min(size * size, (2 * n - 1) ** d)


def translated_union_count(C: LatticeSet, C0: LatticeSet) -> int:
    """``#{y - x : y in C, x in C0}``."""
    if len(C) == 0 or len(C0) == 0:
        return 0
    return len(_differences(C, C0))


def extract_lattice_sets(K: Sequence[Segment], n: int) -> tuple[LatticeSet, LatticeSet]:
    """Cells of the ``1/n``-mesh met by ``K`` and the sub-collection holding midpoints.

    Both are shifted by the same vector so that the smallest occupied index on each
    axis is 0.  Each midpoint belongs to exactly one half-open cell.
    """
    if not K:
        raise InvalidInputError("empty segment list")
    mesh = MeshSpec.at(1.0 / n, K[0].d)
    occ = rasterize(list(K), mesh)
    mids = mesh.cell_of(midpoints(K))
    shift = occ.cells.min(axis=0)
    C = occ.cells - shift
    size = int(C.max()) + 1
    return LatticeSet(size, mesh.d, C), LatticeSet(size, mesh.d, mids - shift)


class ThetaRow(NamedTuple):
    n: int
    d: int
    size: int
    size0: int
    difference_count: int
    union_count: int
    t_hat: float
    theta_hat: float

    @property
    def ratio(self) -> float:
        return self.theta_hat / self.t_hat


def theta_profile(family) -> list[ThetaRow]:
    """Observed exponents ``log|C|/log n`` and ``log#(C - C0)/log n`` per instance."""
    rows = []
    for n, C, C0 in family:
        if len(C) < 2 or n < 2:
            raise InvalidInputError("theta profile needs |C| >= 2 and n >= 2")
        tuc = translated_union_count(C, C0)
        rows.append(ThetaRow(
            n=int(n), d=C.d, size=len(C), size0=len(C0),
            difference_count=len(difference_set(C)), union_count=tuc,
            t_hat=math.log(len(C)) / math.log(n),
            theta_hat=math.log(tuc) / math.log(n),
        ))
    return rows


THETA_CSV_HEADER = ("n", "d", "size", "size0", "difference_count", "union_count", "t_hat", "theta_hat")


def random_lattice_set(n: int, d: int, size: int, rng: np.random.Generator) -> LatticeSet:
    flat = rng.choice(n ** d, size=size, replace=False)
    return LatticeSet(n, d, np.stack(np.unravel_index(flat, (n,) * d), axis=1))


def generic_lattice_set(n: int, d: int, size: int, rng: np.random.Generator) -> LatticeSet:
    """Random set built point by point, each point drawn uniformly from the candidates
    that create no repeated nonzero difference.

    A candidate ``x`` is admissible when it avoids ``C + (C - C)`` (every ``x - c``
    is a new difference) and ``2x`` avoids ``C + C`` (the new differences are
    pairwise distinct).  The forbidden bit grid is updated incrementally.  When
    no candidate is admissible an unused point is drawn uniformly instead, so the
    result always has ``size`` points.
    """
    if size > n ** d:
        raise InvalidInputError("size exceeds the lattice")
    shape = (n,) * d
    taken = np.zeros(shape, dtype=bool)
    # padded by n on each side so sums of lattice points and differences index directly
    pad = np.zeros((3 * n,) * d, dtype=bool)
    forbidden = pad[tuple(slice(n, 2 * n) for _ in range(d))]
    pts = np.empty((0, d), dtype=np.int64)
    diffs = np.empty((0, d), dtype=np.int64)

    def mark(q):
        pad[tuple((q + n).T)] = True

    for _ in range(size):
        free = ~taken
        ok = free & ~forbidden
        pool = np.flatnonzero(ok) if ok.any() else np.flatnonzero(free)
        p = np.array(np.unravel_index(rng.choice(pool), shape), dtype=np.int64)
        new = np.concatenate([p - pts, pts - p])
        halves = p + pts
        mark(halves[(halves % 2 == 0).all(axis=1)] // 2)
        taken[tuple(p)] = True
        pts = np.vstack([pts, p])
        mark((pts[:, None, :] + new[None, :, :]).reshape(-1, d))
        mark(p + diffs)
        diffs = np.concatenate([diffs, new])
    return LatticeSet(n, d, pts)


class SalemResult(NamedTuple):
    ratio: float
    best: LatticeSet
    family: str
    trials: int


def salem_probe(n: int, d: int, size: int, trials: int, seed: int) -> SalemResult:
    """Best ``|C - C| / trivial_bound`` over random and generic-position families.

    Trial ``i`` draws one set from each family with a generator spawned from
    ``seed``, so results do not depend on evaluation order.
    """
    if not 1 <= size <= n ** d:
        raise InvalidInputError("size must lie in [1, n^d]")
    bound = trivial_bound(size, n, d)
    best = (-1.0, None, "")
    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        for family, maker in (("uniform", random_lattice_set), ("generic", generic_lattice_set)):
            C = maker(n, d, size, rng)
            ratio = len(difference_set(C)) / bound
            if ratio > best[0]:
                best = (ratio, C, family)
    return SalemResult(best[0], best[1], best[2], trials)
