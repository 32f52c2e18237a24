import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from kakeyakit._validation import InvalidInputError
from kakeyakit.counting import (MeshSpec, OccupancySet, box_counts, directed_distance, disjoint_packing_count,
                                estimate_box_dimensions, hausdorff_distance, mesh_count, packing_stability,
                                pixel_measure, rasterize)
from kakeyakit.geometry import Ball, Segment, translate
from kakeyakit.kakeya import build_kakeya, fan64

import oracles

small = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
point2 = st.tuples(small, small)
point3 = st.tuples(small, small, small)
dyadic = st.sampled_from([1.0, 0.5, 0.25, 0.125, 1 / 16, 0.3, 0.7])


def off_tolerance(points, delta, origin):
    """True unless some coordinate lies within the snapping tolerance of a face without being on it."""
    for p in points:
        for x, o in zip(p, origin):
            q = (Fraction(float(x)) - Fraction(float(o))) / Fraction(float(delta))
            gap = abs(q - round(q))
            if 0 < gap < Fraction(1, 10 ** 8):
                return False
    return True


def seg_from(p, q):
    p, q = np.asarray(p, float), np.asarray(q, float)
    return Segment(tuple((p + q) / 2), tuple(q - p), float(np.linalg.norm(q - p)))


# rasterization ---------------------------------------------------------------

def test_axis_segment_example():
    occ = rasterize(seg_from((0, 0), (1, 0)), MeshSpec.at(0.25, 2))
    assert occ.to_set() == {(k, 0) for k in range(5)}


def test_ball_example():
    occ = rasterize(Ball((0, 0), 0.5), MeshSpec.at(0.5, 2))
    assert occ.to_set() == {(-1, -1), (-1, 0), (0, -1), (0, 0)}


def test_diagonal_segment_against_oracle():
    mesh = MeshSpec.at(0.5, 2)
    occ = rasterize(seg_from((0, 0), (1, 1)), mesh)
    assert occ.to_set() == oracles.segment_cells([0, 0], [1, 1], 0.5)


def test_fan64_count_against_oracle():
    K = build_kakeya(fan64())
    occ = rasterize(K, MeshSpec.at(1 / 16, 2))
    assert mesh_count(occ) == len(oracles.segments_cells(K, 1 / 16))


@pytest.mark.parametrize("j", range(1, 11))
def test_unit_segment_count(j):
    assert mesh_count(rasterize(seg_from((0, 0), (1, 0)), MeshSpec.at(2.0 ** -j, 2))) == 2 ** j + 1


@settings(max_examples=150, deadline=None)
@given(point2, point2, dyadic, st.tuples(small, small))
def test_segment_matches_cell_oracle_2d(p, q, delta, origin):
    if math.dist(p, q) < 1e-3:
        return
    mesh = MeshSpec.at(delta, 2, origin)
    occ = rasterize(seg_from(p, q), mesh)
    a, b = seg_from(p, q).endpoints
    assume(off_tolerance([a, b], delta, origin))
    assert occ.to_set() == oracles.segment_cells(list(a), list(b), delta, list(origin))


@settings(max_examples=60, deadline=None)
@given(point3, point3, st.sampled_from([0.5, 0.25, 0.4]))
def test_segment_matches_cell_oracle_3d(p, q, delta):
    if math.dist(p, q) < 1e-3:
        return
    occ = rasterize(seg_from(p, q), MeshSpec.at(delta, 3))
    a, b = seg_from(p, q).endpoints
    assume(off_tolerance([a, b], delta, (0, 0, 0)))
    assert occ.to_set() == oracles.segment_cells(list(a), list(b), delta)


@settings(max_examples=40, deadline=None)
@given(st.integers(-8, 8), st.integers(-8, 8), st.integers(-8, 8), st.integers(-8, 8))
def test_grid_aligned_segments_match_oracle(a, b, c, d):
    """Endpoints on grid vertices: the corner and face cases of the supercover.

    Recomputed endpoints can miss the vertex by an ulp; snapping must recover the
    intended segment, so the oracle gets the exact vertices.
    """
    if (a, b) == (c, d):
        return
    p, q = (a / 4, b / 4), (c / 4, d / 4)
    occ = rasterize(seg_from(p, q), MeshSpec.at(0.25, 2))
    assert occ.to_set() == oracles.segment_cells(list(p), list(q), 0.25)


@settings(max_examples=60, deadline=None)
@given(point2, st.floats(0.05, 1.5), st.sampled_from([0.5, 0.25, 0.125, 0.3]), st.booleans())
def test_ball_matches_oracle(c, r, delta, closed):
    assume(not oracles.ball_near_tie(c, r, delta))
    occ = rasterize(Ball(c, r, closed), MeshSpec.at(delta, 2))
    assert occ.to_set() == oracles.ball_cells(c, r, delta, closed=closed)


def test_closed_ball_touching_cells():
    mesh = MeshSpec.at(0.5, 2)
    open_ = rasterize(Ball((0, 0), 0.5), mesh).to_set()
    closed = rasterize(Ball((0, 0), 0.5, closed=True), mesh).to_set()
    # (1/2, 0) lies on the lower face of cell (1, 0) but on the excluded upper face of (1, -1)
    assert closed - open_ == {(1, 0), (0, 1)}
    assert closed == oracles.ball_cells((0, 0), 0.5, 0.5, closed=True)


def test_points_and_empty():
    mesh = MeshSpec.at(0.5, 2)
    occ = rasterize(np.array([[0.1, 0.1], [0.49, 0.2], [-0.1, 0.0]]), mesh)
    assert occ.to_set() == {(0, 0), (-1, 0)}
    assert mesh_count(rasterize([], mesh)) == 0
    assert pixel_measure(OccupancySet.empty(mesh)) == 0


def test_invalid_mesh():
    with pytest.raises(InvalidInputError):
        MeshSpec.at(0.0, 2)
    with pytest.raises(InvalidInputError):
        MeshSpec.at(-1.0, 2)


def test_pixel_measure_examples():
    assert pixel_measure(rasterize(Ball((0, 0), 0.5), MeshSpec.at(0.5, 2))) == 1.0
    m = pixel_measure(rasterize(Ball((0, 0), 0.5), MeshSpec.at(2.0 ** -10, 2)))
    assert abs(m - math.pi / 4) < 0.01 and m >= math.pi / 4


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(point2, point2), min_size=2, max_size=6), st.sampled_from([0.5, 0.25, 0.125]))
def test_union_and_monotonicity(pairs, delta):
    segs = [seg_from(p, q) for p, q in pairs if math.dist(p, q) > 1e-3]
    if len(segs) < 2:
        return
    mesh = MeshSpec.at(delta, 2)
    whole = rasterize(segs, mesh)
    parts = [rasterize(s, mesh) for s in segs]
    union = parts[0]
    for p in parts[1:]:
        union = union | p
    assert whole == union
    assert all(p.issubset(whole) for p in parts)
    assert max(map(len, parts)) <= len(whole) <= sum(map(len, parts))


@settings(max_examples=40, deadline=None)
@given(point2, point2, st.tuples(small, small), st.sampled_from([0.5, 0.25]))
def test_translation_with_reanchored_mesh(p, q, a, delta):
    """M(T_a E, delta, origin - a) = M(E, delta, origin), cell for cell."""
    if math.dist(p, q) < 1e-3:
        return
    s = seg_from(p, q)
    before = rasterize(s, MeshSpec.at(delta, 2))
    after = rasterize(translate(s, a), MeshSpec.at(delta, 2, tuple(-np.asarray(a))))
    assert len(before) == len(after)


def test_sub_segment_monotone():
    mesh = MeshSpec.at(0.125, 2)
    big = rasterize(seg_from((-1, -0.3), (1, 0.7)), mesh)
    sub = rasterize(seg_from((-0.5, -0.05), (0.5, 0.45)), mesh)
    assert sub.issubset(big)


def test_occupancy_text_roundtrip():
    occ = rasterize(build_kakeya(fan64()), MeshSpec.at(1 / 8, 2, (0.1, -0.3)))
    text = occ.to_text()
    assert text.splitlines()[0] == "2 0.125 0.1 -0.3"
    back = OccupancySet.from_text(text)
    assert back == occ and back.to_text() == text
    rows = [tuple(map(int, ln.split())) for ln in text.splitlines()[1:]]
    assert rows == sorted(rows)


def test_dilate():
    mesh = MeshSpec.at(1.0, 2)
    occ = OccupancySet(mesh, [[0, 0]]).dilate(1)
    assert len(occ) == 9
    with pytest.raises(InvalidInputError):
        occ.dilate(-1)


# box dimension -----------------------------------------------------------------

def test_box_dims_segment():
    counts = [(2.0 ** -j, 2 ** j + 1) for j in range(3, 11)]
    est = estimate_box_dimensions(counts)
    assert abs(est.lower - 1) <= 0.02 and abs(est.upper - 1) <= 0.02


def test_box_dims_ball():
    counts = box_counts(Ball((0, 0), 0.5), [2.0 ** -j for j in range(3, 11)], 2)
    est = estimate_box_dimensions(counts)
    assert abs(est.lower - 2) <= 0.05 and abs(est.upper - 2) <= 0.05
    assert 0 <= est.lower <= est.upper <= 2.1


def test_box_dims_constant():
    est = estimate_box_dimensions([(2.0 ** -j, 1) for j in range(3, 8)])
    assert est.lower == est.upper == 0 and np.all(est.slopes == 0)


def test_box_dims_slopes_are_two_point():
    counts = [(0.5, 3), (0.25, 10), (0.125, 40), (1 / 16, 90)]
    est = estimate_box_dimensions(counts)
    expected = [math.log2(10 / 3), math.log2(4), math.log2(90 / 40)]
    assert np.allclose(est.slopes, expected)
    assert est.lower == pytest.approx(min(expected[-1:])) and est.upper == pytest.approx(expected[-1])
    assert estimate_box_dimensions(counts, 1.0).lower == pytest.approx(min(expected))


@pytest.mark.parametrize("counts", [
    [(0.5, 1), (0.25, 2)],
    [(0.25, 1), (0.5, 2), (0.125, 3)],
    [(0.5, 1), (0.25, 0), (0.125, 3)],
])
def test_box_dims_rejects(counts):
    with pytest.raises(InvalidInputError):
        estimate_box_dimensions(counts)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(point2, point2), min_size=1, max_size=8))
def test_box_dims_bounds_on_rasterized_sets(pairs):
    segs = [seg_from(p, q) for p, q in pairs if math.dist(p, q) > 1e-2]
    if not segs:
        return
    est = estimate_box_dimensions(box_counts(segs, [2.0 ** -j for j in range(2, 8)], 2))
    assert 0 <= est.lower <= est.upper <= 2.1


# Hausdorff ---------------------------------------------------------------------

def test_hausdorff_examples():
    assert hausdorff_distance([[0, 0]], [[3, 4]]) == 5
    A = np.array([[0.0, 0.0], [1.0, 0.0]])
    B = np.vstack([A, [[0.0, 2.0]]])
    assert directed_distance(A, B) == 0
    assert hausdorff_distance(A, B) == directed_distance(B, A) == 2
    with pytest.raises(InvalidInputError):
        hausdorff_distance(np.empty((0, 2)), A)


def test_hausdorff_tree_matches_oracle():
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(500, 2)), rng.normal(size=(500, 2))
    h = oracles.hausdorff(A.tolist(), B.tolist())
    assert abs(hausdorff_distance(A, B, method="tree") - h) <= 1e-12
    assert abs(hausdorff_distance(A, B, method="brute") - h) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 30), st.integers(0, 2 ** 31))
def test_hausdorff_is_a_metric(na, nb, nc, seed):
    rng = np.random.default_rng(seed)
    A, B, C = rng.uniform(-1, 1, (na, 2)), rng.uniform(-1, 1, (nb, 2)), rng.uniform(-1, 1, (nc, 2))
    ab, ba = hausdorff_distance(A, B), hausdorff_distance(B, A)
    assert ab == ba
    assert hausdorff_distance(A, C) <= ab + hausdorff_distance(B, C) + 1e-12
    assert hausdorff_distance(A, A) == 0


# packing -----------------------------------------------------------------------

def test_packing_line_example():
    """Points 0, 0.2, ..., 1 with eps 0.2 need centre gaps > 0.4: only two fit."""
    A = np.array([[k / 5] for k in range(6)])
    pk = disjoint_packing_count(A, 0.2)
    assert pk.count == oracles.max_packing(A.tolist(), 0.2) == 2
    assert pk.centres.ravel().tolist() == [0.0, 0.6]


def test_packing_single_point():
    pk = disjoint_packing_count([[0.3, 0.4]], 10.0)
    assert pk.count == 1 and pk.min_gap == math.inf
    with pytest.raises(InvalidInputError):
        disjoint_packing_count(np.empty((0, 2)), 0.1)


def test_packing_replays_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        A = rng.uniform(0, 1, (50, 2))
        pk = disjoint_packing_count(A, 0.1)
        assert [tuple(c) for c in pk.centres] == oracles.greedy_packing(A, 0.1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 80), st.floats(0.01, 0.3), st.integers(0, 2 ** 31))
def test_packing_is_maximal_and_disjoint(n, eps, seed):
    A = np.random.default_rng(seed).uniform(0, 1, (n, 2))
    pk = disjoint_packing_count(A, eps)
    C = pk.centres
    gaps = np.linalg.norm(C[:, None] - C[None], axis=2) + np.eye(len(C)) * 9
    assert np.all(gaps > 2 * eps)
    nearest = np.linalg.norm(A[:, None] - C[None], axis=2).min(axis=1)
    assert np.all(nearest <= 2 * eps)
    if len(C) > 1:
        assert pk.min_gap == pytest.approx(gaps.min() - 2 * eps)


def test_stability_examples():
    rng = np.random.default_rng(11)
    A = rng.uniform(0, 1, (40, 2))
    pk = disjoint_packing_count(A, 0.05)
    assert packing_stability(A, 0.05, A, pk)
    shifted = A + np.array([pk.min_gap / 4, 0])
    rep = packing_stability(A, 0.05, shifted, pk)
    assert rep.stable and rep.guaranteed and rep.witness_count == pk.count


def test_stability_beyond_threshold_is_flagged():
    A = np.array([[0.0, 0.0], [1.0, 0.0]])
    B = np.array([[0.45, 0.0], [0.55, 0.0]])
    rep = packing_stability(A, 0.2, B)
    assert not rep.guaranteed and not rep.stable
