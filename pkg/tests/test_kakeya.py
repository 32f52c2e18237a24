import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kakeyakit._validation import InvalidInputError
from kakeyakit.counting import MeshSpec, pixel_measure, rasterize
from kakeyakit.geometry import Ball
from kakeyakit.kakeya import (_sphere_net, BaseField, CenterField, build_half_extended, build_kakeya,
                              calibrate_fan_density, direction_sample, fan64, fan_directions, field_distance,
                              measure_witness, quantize_field, random_field, raster_distance, sample_gap,
                              shifted_union_is_ball)

import oracles


def constant_field(n, c=(0.0, 0.0), bound=1.0):
    U = fan_directions(n)
    return CenterField(U, np.tile(c, (n, 1)), bound)


# fields ----------------------------------------------------------------------

def test_field_validation():
    with pytest.raises(InvalidInputError):
        CenterField(np.array([[1.0, 0.0], [1.0, 0.0]]), np.zeros((2, 2)), 1.0)
    with pytest.raises(InvalidInputError):
        CenterField(np.array([[-1.0, 0.0]]), np.zeros((1, 2)), 1.0)
    with pytest.raises(InvalidInputError):
        CenterField(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]), 1.0)
    f = CenterField.from_pairs([[0, -1], [-1, 0]], [[0.1, 0.2], [0.3, 0.4]])
    assert f.directions.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert f.centres.tolist() == [[0.1, 0.2], [0.3, 0.4]]


def test_field_text_roundtrip_is_bit_exact():
    f = fan64()
    text = f.to_text()
    g = CenterField.from_text(text, f.bound)
    assert np.array_equal(f.directions, g.directions) and np.array_equal(f.centres, g.centres)
    assert g.to_text() == text
    assert " ; " in text.splitlines()[0]


def test_build_kakeya_single():
    (s,) = build_kakeya(CenterField.from_pairs([[1, 0]], [[5, 5]], 8.0))
    a, b = s.endpoints
    assert a.tolist() == [4.5, 5.0] and b.tolist() == [5.5, 5.0]


def test_build_kakeya_one_segment_per_entry():
    f = random_field(fan_directions(37), 1.5, seed=2)
    K = build_kakeya(f)
    assert len(K) == len(f)
    assert all(s.centre == tuple(c) for s, c in zip(K, f.centres))
    assert all(s.length == 1.0 for s in K)


def test_constant_field_fills_ball():
    mesh = MeshSpec.at(1 / 16, 2)
    ball = rasterize(Ball((0, 0), 0.5, closed=True), mesh)
    prev = 0.0
    for n in (4, 8, 16, 32, 64):
        occ = rasterize(build_kakeya(constant_field(n)), mesh)
        assert occ.issubset(ball)
        m = pixel_measure(occ)
        assert m >= prev
        prev = m
    assert prev == pixel_measure(ball)


def test_fan64_shape():
    f = fan64()
    assert len(f) == 64 and f.bound == 2.0
    assert np.all(np.abs(f.centres) <= 2)
    assert len({tuple(u) for u in f.directions}) == 64


def _halton_oracle(i, base):
    x, denom = 0.0, 1.0
    while i > 0:
        denom *= base
        x += (i % base) / denom
        i //= base
    return x


def test_fan64_endpoints_recomputed():
    """Independent recomputation: angles k*pi/64, Halton centres in (-2, 2)^2."""
    got = {tuple(np.round(s.centre, 12)): s for s in build_kakeya(fan64())}
    assert len(got) == 64
    for k in range(64):
        th = k * math.pi / 64
        u = (math.cos(th), math.sin(th))
        # the Halton point index pairs with the k-th direction in angle order
        c = (4 * (_halton_oracle(k + 1, 2) - 0.5), 4 * (_halton_oracle(k + 1, 3) - 0.5))
        s = got[tuple(np.round(c, 12))]
        a, b = s.endpoints
        oa, ob = oracles.endpoints(c, u)
        if not np.allclose(a, oa, atol=1e-12):
            oa, ob = ob, oa
        assert np.allclose(a, oa, atol=1e-12) and np.allclose(b, ob, atol=1e-12)


def test_field_distance():
    U = fan_directions(12)
    f = random_field(U, 1.0, 1)
    g = random_field(U, 1.0, 2)
    assert field_distance(f, f) == 0
    assert field_distance(f, f.translated((0.3, -0.4))) == pytest.approx(0.5)
    brute = max(math.dist(a, b) for a, b in zip(f.centres, g.centres))
    assert field_distance(f, g) == brute
    with pytest.raises(InvalidInputError):
        field_distance(f, random_field(fan_directions(5), 1.0, 0))


# quantization ----------------------------------------------------------------

def test_quantize_example():
    f0 = CenterField(np.array([[1.0, 0.0]]), np.array([[0.3, 0.3]]), 1.0)
    q = quantize_field(f0, 1.0)
    assert q.n == 2 and q.cube_side == 0.5
    assert q.field.centres.tolist() == [[0.25, 0.25]]
    assert field_distance(q.field, f0) == pytest.approx(math.hypot(0.05, 0.05))


def test_quantize_fixed_point():
    q = quantize_field(random_field(fan_directions(20), 1.0, 4), 0.3)
    again = quantize_field(q.field, 0.3)
    assert np.array_equal(again.field.centres, q.field.centres)


def test_quantize_random_trials():
    rng = np.random.default_rng(5)
    for _ in range(100):
        f0 = random_field(fan_directions(int(rng.integers(1, 50))), float(rng.uniform(0.5, 3)),
                          int(rng.integers(2 ** 32)))
        q = quantize_field(f0, 0.1)
        assert field_distance(q.field, f0) < 0.1
        assert q.field.bound <= f0.bound
        members = sorted(i for g in q.groups for i in g.members)
        assert members == list(range(len(f0)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.floats(0.2, 4.0), st.floats(0.01, 2.0), st.integers(0, 2 ** 32 - 1))
def test_quantize_property(n, bound, eps, seed):
    f0 = random_field(fan_directions(n), bound, seed)
    q = quantize_field(f0, eps)
    assert field_distance(q.field, f0) < eps
    assert q.n == math.floor(bound * math.sqrt(2) / eps) + 1
    assert np.all(np.abs(q.field.centres) < bound)


def test_quantize_rejects_bad_epsilon():
    with pytest.raises(InvalidInputError):
        quantize_field(fan64(), 0.0)


# union-is-ball checks and the measure witness -------------------------------

def test_union_constant_field():
    f = constant_field(16, (0.3, -0.2))
    q = quantize_field(f, 0.7)
    assert len(q.groups) == 1
    assert shifted_union_is_ball(q.field, q.groups, MeshSpec.at(1 / 8, 2))


def test_union_fan64():
    q = quantize_field(fan64(), 0.5)
    mesh = MeshSpec.at(1 / 8, 2)
    assert shifted_union_is_ball(q.field, q.groups, mesh)
    for j in range(len(q.groups)):
        res = shifted_union_is_ball(q.field, q.groups[:j] + q.groups[j + 1:], mesh)
        if any(np.array_equal(q.field.directions[i], [1.0, 0.0]) for i in q.groups[j].members):
            assert not res and res.symmetric_difference > 0


def test_calibrated_density_threshold():
    """The returned fan matches the ball raster, the next smaller power of two does not."""
    mesh = MeshSpec.at(1 / 8, 2)
    n = calibrate_fan_density(1 / 8)
    ball = oracles.ball_cells((0, 0), 0.5, 1 / 8, closed=True)
    assert oracles.segments_cells(build_kakeya(constant_field(n)), 1 / 8) == ball
    assert oracles.segments_cells(build_kakeya(constant_field(n // 2)), 1 / 8) != ball
    assert rasterize(build_kakeya(constant_field(n)), mesh).to_set() == ball


def test_witness_constant_field():
    q = quantize_field(constant_field(16), 1.0)
    mesh = MeshSpec.at(1 / 8, 2)
    w = measure_witness(q.field, q.groups, mesh)
    ball = pixel_measure(rasterize(Ball((0, 0), 0.5, closed=True), mesh))
    assert w.bound == ball and w.measure == ball and w.holds


def test_witness_fan64():
    q = quantize_field(fan64(), 0.5)
    w = measure_witness(q.field, q.groups, MeshSpec.at(1 / 8, 2))
    assert w.holds and w.measure == w.measures.max()
    assert w.bound == pytest.approx(pixel_measure(rasterize(Ball((0, 0), 0.5, closed=True),
                                                            MeshSpec.at(1 / 8, 2))) / len(q.groups))


def test_witness_two_symmetric_groups():
    U = fan_directions(32)
    C = np.where(np.arange(32)[:, None] % 2 == 0, 0.5, -0.5) * np.ones((32, 2))
    q = quantize_field(CenterField(U, C, 1.0), 1.0)
    assert len(q.groups) == 2
    w = measure_witness(q.field, q.groups, MeshSpec.at(1 / 8, 2))
    assert np.all(w.measures >= w.bound)


# Lipschitz bound ---------------------------------------------------------------

def test_lipschitz_random_pairs():
    rng = np.random.default_rng(8)
    mesh = MeshSpec.at(1 / 64, 2)
    U = fan_directions(24)
    for _ in range(20):
        f = random_field(U, 1.0, int(rng.integers(2 ** 32)))
        g = random_field(U, 1.0, int(rng.integers(2 ** 32)))
        assert raster_distance(f, g, mesh) <= field_distance(f, g) + 2 * math.sqrt(2) / 64


# sphere samples and half-extended sets -----------------------------------------

def test_direction_sample_circle_n1():
    S = direction_sample(2, 1)
    assert 4 <= len(S) <= 8
    net = np.stack([np.cos(np.linspace(0, 2 * np.pi, 10_000, endpoint=False)),
                    np.sin(np.linspace(0, 2 * np.pi, 10_000, endpoint=False))], axis=1)
    assert np.linalg.norm(net[:, None] - S[None], axis=2).min(axis=1).max() < 1


@pytest.mark.parametrize("d, n", [(2, 5), (2, 40), (3, 4), (3, 10), (4, 3)])
def test_direction_sample_separated_and_covering(d, n):
    S = direction_sample(d, n)
    dist = np.linalg.norm(S[:, None] - S[None], axis=2) + np.eye(len(S)) * 9
    assert dist.min() >= 1 / n
    assert np.allclose(np.linalg.norm(S, axis=1), 1)
    net = _sphere_net(d, 10_000 if d == 2 else 20_000)
    assert np.linalg.norm(net[:, None] - S[None], axis=2).min(axis=1).max() < 1 / n
    if d <= 3:
        assert sample_gap(S) < 1 / n + 0.05


def test_sample_gap_exact_circle():
    ang = np.arange(8) * np.pi / 4
    U = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    assert sample_gap(U) == pytest.approx(2 * math.sin(math.pi / 16))


def test_half_extended_single():
    (r,) = build_half_extended(BaseField(np.array([[0.0, 1.0]]), np.array([[2.0, -1.0]])))
    assert r.base == (2.0, -1.0) and r.direction == (0.0, 1.0)


def test_half_extended_tube_containment():
    U = direction_sample(2, 20)
    base = BaseField.random(U, 3.0, seed=1, truncation=8.0)
    assert base.base_bound <= 3.0
    rays = build_half_extended(base, U)
    mesh = MeshSpec.at(1 / 8, 2)
    occ = rasterize(rays, mesh, clip=Ball((0, 0), base.truncation, closed=True))
    P = occ.centres()
    half = math.sqrt(2) / 16
    for r in rays:
        b, u = np.asarray(r.base), np.asarray(r.direction)
        t = np.clip((P - b) @ u, 0, None)
        assert np.min(np.linalg.norm(P - (b + t[:, None] * u), axis=1)) <= half + 1e-12
    with pytest.raises(InvalidInputError):
        build_half_extended(base, U[::-1])
