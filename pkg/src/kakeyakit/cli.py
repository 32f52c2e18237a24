"""Command-line runner: ``kakeyakit <command> [--config FILE] [flags]``.

Every flag can also be given as ``key = value`` in a flat config file (``#``
starts a comment); flags given on the command line win.  All randomness comes
from ``--seed`` through ``numpy.random.SeedSequence``: each experiment draws its
own child seeds, so results do not depend on which experiments run.

Exit codes: 0 when every check passes, 1 when a check fails (a JSON report goes
to stderr and to ``failures.json``), 2 on a usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import zlib
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _svg
from .counting import (MeshSpec, box_counts, disjoint_packing_count, estimate_box_dimensions,
                       mesh_count, packing_stability, rasterize)
from .cutmove import (count_sandwich_report, cut_level, partition_by_midpoint, theorem_lbd_experiment)
from .geometry import Ball, SimilarityMap, Segment
from .kakeya import (BaseField, CenterField, build_half_extended, build_kakeya, calibrate_fan_density,
                     direction_sample, fan64, fan_directions, fan_field, field_distance, measure_witness,
                     quantize_field, random_field, raster_distance, sample_gap, shifted_union_is_ball)
from .lattice import (THETA_CSV_HEADER, LatticeSet, difference_set, extract_lattice_sets,
                      random_lattice_set, salem_probe, theta_profile, trivial_bound)
from .tangent import convergence_profile, unit_ball_raster, weak_tangent_covering_check, zoom_out


class UsageError(Exception):
    pass


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str = ""


def _frac(s) -> float:
    try:
        return float(Fraction(str(s).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a number: {s!r}") from exc


def _int(s) -> int:
    try:
        return int(str(s).strip())
    except ValueError as exc:
        raise UsageError(f"not an integer: {s!r}") from exc


def _ints(s) -> list[int]:
    return [_int(x) for x in str(s).split(",") if x.strip()]


def _fracs(s) -> list[float]:
    return [_frac(x) for x in str(s).split(",") if x.strip()]


def _str(s) -> str:
    return str(s).strip()


COMMON = [
    ("seed", _int, "0", "master seed"),
    ("out", _str, "out", "output directory"),
]

OPTIONS = {
    "figure1": [
        ("levels", _ints, "0,1,2,4", "cut levels; level L uses 2^(2L) cubes"),
        ("bound", _frac, "2", "half side of the square holding all centres"),
        ("delta", _frac, "1/32", "mesh side for the per-level counts"),
    ],
    "lbd": [
        ("d", _int, "2", "dimension (2 or 3)"),
        ("directions", _int, "512", "number of directions"),
        ("side", _frac, "4", "centres are uniform in the open cube of this side"),
        ("scales", _fracs, "1/16,1/32,1/64", "mesh sides"),
    ],
    "dimension": [
        ("generator", _str, "ball", "ball, segment or fan64"),
        ("d", _int, "2", "dimension"),
        ("scales", _ints, "3,4,5,6,7,8,9,10", "exponents j of the mesh sides 2^-j"),
        ("finest_fraction", _frac, "1/2", "share of finest slopes used for lower/upper"),
    ],
    "dense": [
        ("delta", _frac, "1/8", "mesh side"),
        ("epsilon", _frac, "1/4", "quantization tolerance"),
        ("trials", _int, "100", "random fields checked against the tolerance"),
    ],
    "diffset": [
        ("d", _int, "2", "lattice dimension"),
        ("n_list", _ints, "16,32,64,128", "lattice sizes"),
        ("density", _frac, "1/10", "density of the random family"),
        ("random_trials", _int, "1000", "random sets checked against the trivial bound"),
        ("salem_n", _int, "32", "lattice size for the Salem probe"),
        ("salem_size", _int, "40", "set size for the Salem probe"),
        ("salem_trials", _int, "0", "Salem probe trials (0 skips the probe)"),
    ],
    "tangent": [
        ("d", _int, "2", "dimension"),
        ("separation", _int, "256", "directions form a maximal 1/separation-separated set"),
        ("base_bound", _frac, "10", "bases are uniform in the ball of this radius"),
        ("ks", _fracs, "10,100,1000", "zoom factors"),
        ("delta", _frac, "1/64", "mesh side"),
        ("covering_samples", _int, "0", "samples for the weak-tangent covering check (0 skips it)"),
    ],
    "selftest": [],
}


HELP = {
    "figure1": "cut-and-move panels of the 64-segment fan (SVG + CSV)",
    "lbd": "mesh run of the d/2 lower-bound argument",
    "dimension": "box-counting dimension of a generator",
    "dense": "quantized fields: union-is-ball check and measure witness",
    "diffset": "difference-set counts and exponent table",
    "tangent": "zoom-out convergence of a half-extended set",
    "selftest": "every experiment at reduced size plus invariant checks",
}


def parse_config(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        if not key:
            raise UsageError(f"config line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kakeyakit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="flat key = value file; flags override its keys")
        for key, _, default, text in COMMON + opts:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                           help=f"{text} (default: {default})")
    return parser


def resolve(command: str, flags: dict, config: dict) -> dict:
    table = COMMON + OPTIONS[command]
    known = {k for k, *_ in table}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    opts = {}
    for key, conv, default, _ in table:
        raw = flags.get(key)
        if raw is None:
            raw = config.get(key, default)
        opts[key] = conv(raw)
    return opts


def child_seeds(seed: int, tag: str, k: int) -> list[int]:
    """``k`` integer seeds for one experiment, independent of the other experiments."""
    salt = zlib.crc32(tag.encode())
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence([seed, salt]).spawn(k)]


class Artifacts:
    """Buffers output files and writes them in one pass at the end."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        self.files[name] = buf.getvalue()

    def text(self, name: str, content: str):
        self.files[name] = content

    def flush(self, out: Path):
        out.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            with open(out / name, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(self.files[name])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# experiments ---------------------------------------------------------------

def run_figure1(o, art: Artifacts) -> list[Check]:
    field = fan64()
    K = build_kakeya(field)
    mesh = MeshSpec.at(o["delta"], 2)
    checks, rows = [], []
    for level in o["levels"]:
        panel = cut_level(K, level, o["bound"])
        expected = Fraction(o["bound"]) * 2 / 2 ** level
        mid_bound = float(np.abs(panel.midpoints).max())
        rows.append((level, str(panel.side), panel.pieces, mid_bound, panel.contained,
                     mesh_count(rasterize(panel.segments, mesh))))
        checks.append(Check(f"figure1.level{level}.side", panel.side == expected,
                            f"side {panel.side}, expected {expected}"))
        checks.append(Check(f"figure1.level{level}.contained", panel.contained,
                            f"max |midpoint| {mid_bound!r}"))
        canvas = _svg.Canvas(3.0)
        for s in panel.segments:
            a, b = s.endpoints
            canvas.line(a, b)
        for m in panel.midpoints:
            canvas.dot(m)
        canvas.square(panel.side)
        canvas.text((-2.9, 2.75), f"level {level}: square of side {panel.side}")
        art.text(f"figure1_level{level}.svg", canvas.render())
    art.csv("figure1.csv", ("level", "cube_side", "pieces", "midpoint_bound", "contained", "mesh_count"), rows)
    return checks


def _lbd_field(o, seed: int) -> CenterField:
    n, d, half = o["directions"], o["d"], o["side"] / 2
    if d == 2:
        return fan_field(n, "random", side=o["side"], seed=seed)
    return random_field(direction_sample(d, max(2, round(n ** (1 / (d - 1))))), half, seed)


def run_lbd(o, art: Artifacts) -> list[Check]:
    if o["d"] not in (2, 3):
        raise UsageError("lbd supports d = 2 or 3")
    (seed,) = child_seeds(o["seed"], "lbd", 1)
    K = build_kakeya(_lbd_field(o, seed))
    report = theorem_lbd_experiment(K, o["scales"])
    rows, checks = [], []
    floor = o["d"] / 2 - 0.1
    for r in report.rows:
        rows.append((r.delta, r.count, r.groups, r.moved_count, r.ball_count, len(r.uncovered),
                     r.implied_ok, r.observed_exponent, r.certified_exponent))
        checks.append(Check(f"lbd.delta={r.delta!r}.covered", r.covered, f"{len(r.uncovered)} uncovered cells"))
        checks.append(Check(f"lbd.delta={r.delta!r}.implied", r.implied_ok, ""))
        checks.append(Check(f"lbd.delta={r.delta!r}.exponent", r.observed_exponent >= floor,
                            f"observed {r.observed_exponent!r} vs floor {floor!r}"))
    art.csv("lbd.csv", ("delta", "count", "groups", "moved_count", "ball_count", "uncovered",
                        "implied_ok", "observed_exponent", "certified_exponent"), rows)
    return checks


def _generator(name: str, d: int):
    if name == "ball":
        return Ball(np.zeros(d), 0.5)
    if name == "segment":
        # [0, 1] along the first axis: both endpoints sit on mesh hyperplanes
        return Segment(tuple([0.5] + [0.0] * (d - 1)), tuple(np.eye(d)[0]), 1.0)
    if name == "fan64":
        if d != 2:
            raise UsageError("fan64 lives in d = 2")
        return build_kakeya(fan64())
    raise UsageError(f"unknown generator {name!r}")


DIMENSION_TOL = {"ball": 0.05, "segment": 0.02}


def run_dimension(o, art: Artifacts) -> list[Check]:
    d, name = o["d"], o["generator"]
    if not 1 <= d <= 4:
        raise UsageError("d must lie in 1..4")
    geometry = _generator(name, d)
    js = sorted(o["scales"])
    counts = box_counts(geometry, [2.0 ** -j for j in js], d)
    est = estimate_box_dimensions(counts, o["finest_fraction"])
    slopes = [""] + [float(s) for s in est.slopes]
    art.csv(f"dimension_{name}_d{d}.csv", ("j", "delta", "count", "slope"),
            [(j, h, c, s) for j, (h, c), s in zip(js, counts, slopes)])
    art.csv(f"dimension_{name}_d{d}_summary.csv", ("lower", "upper", "lsq_slope"),
            [(est.lower, est.upper, est.lsq_slope)])
    checks = []
    if name in DIMENSION_TOL:
        target = d if name == "ball" else 1
        tol = DIMENSION_TOL[name]
        checks.append(Check(f"dimension.{name}.lower", abs(est.lower - target) <= tol, repr(est.lower)))
        checks.append(Check(f"dimension.{name}.upper", abs(est.upper - target) <= tol, repr(est.upper)))
    if name == "segment":
        exact = all(c == 2 ** j + 1 for j, (_, c) in zip(js, counts))
        checks.append(Check("dimension.segment.exact_counts", exact, "count == 2^j + 1"))
    return checks


def _group_of(field: CenterField, groups, direction) -> int:
    i = int(np.argmin(np.linalg.norm(field.directions - np.asarray(direction), axis=1)))
    return next(j for j, g in enumerate(groups) if i in g.members)


def run_dense(o, art: Artifacts) -> list[Check]:
    delta, eps = o["delta"], o["epsilon"]
    n = calibrate_fan_density(delta)
    U = fan_directions(n)
    seeds = child_seeds(o["seed"], "dense", o["trials"] + 1)
    worst = 0.0
    for s in seeds[:-1]:
        f0 = random_field(U, 2.0, s)
        q = quantize_field(f0, eps)
        worst = max(worst, float(np.max(np.linalg.norm(q.field.centres - f0.centres, axis=1))))
    f0 = random_field(U, 2.0, seeds[-1])
    q = quantize_field(f0, eps)
    mesh = MeshSpec.at(delta, 2)
    union = shifted_union_is_ball(q.field, q.groups, mesh)
    witness = measure_witness(q.field, q.groups, mesh)
    drop = _group_of(q.field, q.groups, (1.0, 0.0))
    negative = shifted_union_is_ball(q.field, [g for j, g in enumerate(q.groups) if j != drop], mesh)
    rows = [
        ("fan_size", n), ("groups", len(q.groups)), ("cube_side", q.cube_side),
        ("max_shift", worst), ("union_symmetric_difference", union.symmetric_difference),
        ("witness_measure", witness.measure), ("witness_bound", witness.bound),
        ("negative_symmetric_difference", negative.symmetric_difference),
    ]
    art.csv("dense.csv", ("quantity", "value"), rows)
    return [
        Check("dense.quantize", worst < eps, f"max shift {worst!r} vs {eps!r}"),
        Check("dense.union_is_ball", bool(union), f"{union.symmetric_difference} differing cells"),
        Check("dense.witness", witness.holds, f"{witness.measure!r} >= {witness.bound!r}"),
        Check("dense.negative_control", not negative, f"{negative.symmetric_difference} differing cells"),
    ]


def run_diffset(o, art: Artifacts) -> list[Check]:
    d = o["d"]
    seeds = child_seeds(o["seed"], "diffset", 3)
    rng = np.random.default_rng(seeds[0])
    family, labels, checks = [], [], []
    for n in o["n_list"]:
        full = LatticeSet.full(n, d)
        family.append((n, full, full))
        labels.append("full")
        size = max(2, round(o["density"] * n ** d))
        C = random_lattice_set(n, d, size, rng)
        family.append((n, C, C))
        labels.append("random")
    for n in o["n_list"]:
        C, C0 = extract_lattice_sets(build_kakeya(fan64()), n)
        # t and theta are exponents in the mesh resolution n, not the lattice's bounding size
        family.append((n, C, C0))
        labels.append("fan64")
    rows = theta_profile(family)
    for label, (n, C, C0), r in zip(labels, family, rows):
        if label == "full":
            checks.append(Check(f"diffset.full.n={n}", r.difference_count == (2 * n - 1) ** d,
                                f"{r.difference_count} vs {(2 * n - 1) ** d}"))
        if label == "fan64":
            sub = np.isin(np.ravel_multi_index(tuple(C0.cells.T), (C.n,) * d),
                          np.ravel_multi_index(tuple(C.cells.T), (C.n,) * d)).all()
            checks.append(Check(f"diffset.fan64.n={n}.inclusion", bool(sub)))
        checks.append(Check(f"diffset.{label}.n={n}.bounds",
                            r.union_count <= r.difference_count <= trivial_bound(r.size, C.n, d)))
    art.csv("diffset.csv", ("family",) + THETA_CSV_HEADER + ("ratio",),
            [(lab,) + tuple(r) + (r.ratio,) for lab, r in zip(labels, rows)])

    for m in (1, 2, 7, 50):
        ap = LatticeSet(m, 1, np.arange(m)[:, None])
        checks.append(Check(f"diffset.ap.m={m}", len(difference_set(ap)) == 2 * m - 1))
    rng = np.random.default_rng(seeds[1])
    violations = 0
    for _ in range(o["random_trials"]):
        n = int(rng.integers(2, 17))
        size = int(rng.integers(1, n ** d + 1))
        C = random_lattice_set(n, d, size, rng)
        violations += len(difference_set(C)) > trivial_bound(size, n, d)
    checks.append(Check("diffset.trivial_bound", violations == 0, f"{violations} violations"))
    if o["salem_trials"] > 0:
        res = salem_probe(o["salem_n"], d, o["salem_size"], o["salem_trials"], seeds[2])
        art.csv("salem.csv", ("n", "d", "size", "trials", "family", "ratio"),
                [(o["salem_n"], d, o["salem_size"], res.trials, res.family, res.ratio)])
        art.text("salem_best.txt", res.best.to_text())
    return checks


def run_tangent(o, art: Artifacts) -> list[Check]:
    d, delta = o["d"], o["delta"]
    (seed,) = child_seeds(o["seed"], "tangent", 1)
    U = direction_sample(d, o["separation"])
    base = BaseField.random(U, o["base_bound"], seed)
    K = build_half_extended(base)
    mesh = MeshSpec.at(delta, d)
    g = sample_gap(U)
    prof = convergence_profile(K, o["ks"], mesh, gap=g, base_bound=o["base_bound"])
    art.csv("tangent.csv", ("k", "distance", "bound"), [tuple(r) for r in prof.rows])
    checks = [Check(f"tangent.k={r.k!r}.bound", r.holds, f"{r.distance!r} <= {r.bound!r}") for r in prof.rows]
    final = prof.rows[-1]
    limit = g + 3 * math.sqrt(d) * delta
    checks.append(Check("tangent.final", final.distance <= limit, f"{final.distance!r} <= {limit!r}"))
    checks.append(Check("tangent.monotone", prof.monotone))
    K0 = build_half_extended(BaseField(U, np.zeros_like(U)))
    ref = zoom_out(K0, o["ks"][0], mesh)
    checks.append(Check("tangent.cone_invariance", all(zoom_out(K0, k, mesh) == ref for k in o["ks"][1:])))
    if d == 2:
        canvas = _svg.Canvas(1.1)
        canvas.cells(zoom_out(K, o["ks"][-1], mesh).cells, delta, mesh.origin)
        canvas.circle((0.0, 0.0), 1.0)
        canvas.text((-1.05, 1.0), f"k = {o['ks'][-1]:g}")
        art.text("tangent.svg", canvas.render())
    if o["covering_samples"] > 0:
        A = zoom_out(K, o["ks"][-1], mesh)
        A_hat = unit_ball_raster(mesh)
        pairs = [(1 / 4, 1 / 4), (1 / 4, 1 / 8), (1 / 2, 1 / 16), (1 / 2, 2 * delta)]
        rep = weak_tangent_covering_check(A, A_hat, SimilarityMap(1.0), float(d),
                                          o["covering_samples"], pairs, seed=seed)
        art.csv("tangent_covering.csv", ("sample", "delta", "eps", "count", "bound", "passed"),
                [tuple(r) + (r.passed,) for r in rep.rows])
        checks.append(Check("tangent.covering", rep.passed, f"C = {rep.constant!r}"))
    return checks


def run_selftest(o, art: Artifacts) -> list[Check]:
    base = {"seed": o["seed"], "out": o["out"]}
    checks = []
    for name, extra in (("figure1", {}), ("lbd", {}), ("dimension", {"generator": "ball"}),
                        ("dimension", {"generator": "segment"}), ("dense", {"trials": "20"}),
                        ("diffset", {"n_list": "16,32,64", "random_trials": "200"}),
                        ("tangent", {"covering_samples": "4"})):
        opts = resolve(name, {**{k: str(v) for k, v in base.items()}, **extra}, {})
        checks += COMMANDS[name](opts, art)
    checks += _invariants(o["seed"], art)
    art.csv("selftest.csv", ("check", "passed"), [(c.name, c.passed) for c in checks])
    return checks


def _invariants(seed: int, art: Artifacts) -> list[Check]:
    """Short randomized versions of the count sandwich, Lipschitz and packing checks."""
    s_sand, s_lip, s_pack = child_seeds(seed, "invariants", 3)
    rng = np.random.default_rng(s_sand)
    bad = 0
    for _ in range(10):
        f = random_field(fan_directions(int(rng.integers(4, 32))), 1.0, int(rng.integers(2 ** 32)))
        K = build_kakeya(f)
        p = partition_by_midpoint(K, int(rng.integers(1, 5)), 1.0)
        bad += sum(not r.holds for r in count_sandwich_report(K, p, [1 / 4, 1 / 8, 1 / 16, 1 / 32]))
    rng = np.random.default_rng(s_lip)
    mesh = MeshSpec.at(1 / 64, 2)
    lip = 0
    U = fan_directions(16)
    for _ in range(20):
        f = random_field(U, 1.0, int(rng.integers(2 ** 32)))
        g = random_field(U, 1.0, int(rng.integers(2 ** 32)))
        lip += raster_distance(f, g, mesh) > field_distance(f, g) + 2 * math.sqrt(2) / 64
    rng = np.random.default_rng(s_pack)
    unstable = 0
    for _ in range(20):
        A = rng.uniform(0, 1, size=(60, 2))
        pk = disjoint_packing_count(A, 0.05)
        step = min(pk.min_gap, 1.0) / 2 * 0.99
        v = rng.standard_normal(A.shape)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        B = A + v * rng.uniform(0, step, size=(len(A), 1))
        unstable += not packing_stability(A, 0.05, B, pk).stable
    art.csv("invariants.csv", ("check", "violations"),
            [("sandwich", bad), ("lipschitz", lip), ("packing", unstable)])
    return [Check("invariants.sandwich", bad == 0, f"{bad} violations"),
            Check("invariants.lipschitz", lip == 0, f"{lip} violations"),
            Check("invariants.packing", unstable == 0, f"{unstable} violations")]


COMMANDS = {
    "figure1": run_figure1, "lbd": run_lbd, "dimension": run_dimension, "dense": run_dense,
    "diffset": run_diffset, "tangent": run_tangent, "selftest": run_selftest,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        config = {}
        if args.config:
            try:
                config = parse_config(Path(args.config).read_text(encoding="utf-8"))
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}") from exc
        opts = resolve(args.command, flags, config)
        art = Artifacts()
        checks = COMMANDS[args.command](opts, art)
    except UsageError as exc:
        print(f"kakeyakit: error: {exc}", file=sys.stderr)
        return 2
    failed = [c for c in checks if not c.passed]
    if failed:
        report = json.dumps({"command": args.command, "failures": [c._asdict() for c in failed]},
                            indent=2, sort_keys=True) + "\n"
        art.text("failures.json", report)
    art.flush(Path(opts["out"]))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.detail}".rstrip())
    if failed:
        sys.stderr.write(report)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
