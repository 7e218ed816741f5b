"""Acceptance gate: one test per criterion, summarized at the end of the run.

Criteria 5 and 6 solve the 499 x 499 delayed heat problem a few hundred times
and take several minutes; all delayed-heat runs share one snapshot cache.
"""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigtrack.adaptive import AdaptiveConfig, run_adaptive
from eigtrack.beyn import BeynConfig, solve_nonparametric
from eigtrack.cli import main
from eigtrack.core import Contour, ParametricProblem
from eigtrack.curves import InterpolationConfig, SegmentKind, build_model
from eigtrack.matching import build_cost, flag_bifurcation_pairs, match, solve_assignment
from eigtrack.problems import cubic_companion, delayed_heat, toy_bifurcation
from oracles import brute_force_loss, cubic_roots_inside, delayed_heat_roots

CUBIC_BEYN = BeynConfig(K=1, m=5, n_quad=25)
HEAT_BEYN = BeynConfig(K=5, m=30, n_quad=1000)
HEAT_CONTOUR = Contour(-1, 1)


def matched_error(pred, ref):
    if len(pred) == 0 or len(ref) == 0:
        return 0.0
    return max(match(np.asarray(pred), np.asarray(ref)).pair_costs)


# ---------------------------------------------------------------- criterion 1

@settings(max_examples=20, deadline=None)
@given(st.integers(5, 15), st.integers(0, 2 ** 32 - 1))
def _beyn_planted(k, seed):
    rng = np.random.default_rng(seed)
    n = 50
    inside = []
    while len(inside) < k:
        z = 1.6 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        if all(abs(z - w) > 1e-2 for w in inside):
            inside.append(z)
    outside = (2.6 + 3.4 * rng.uniform(size=n - k)) * np.exp(2j * np.pi * rng.uniform(size=n - k))
    D = np.concatenate([inside, outside])
    V = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = V @ np.diag(D) @ np.linalg.inv(V)
    prob = ParametricProblem(lambda lam, p: A - lam * np.eye(n), (0, 1), size=n)
    snap = solve_nonparametric(prob, 0.0, Contour(0, 2), BeynConfig(K=2, m=16, n_quad=100, seed=seed % 1000))
    assert len(snap) == k, f"{len(snap)} values reported, {k} planted"
    err = matched_error(snap.eigenvalues, inside)
    _beyn_planted.worst = max(getattr(_beyn_planted, "worst", 0.0), err)
    assert err <= 1e-8


def test_criterion_1_beyn_planted_spectra(record_property):
    _beyn_planted()
    record_property("detail", f"20 problems, worst error {_beyn_planted.worst:.1e}")


# ---------------------------------------------------------------- criterion 2

def test_criterion_2_toy_exact_surrogate(record_property):
    prob, contour = toy_bifurcation(), Contour(0, 3)
    cfg = BeynConfig(n_quad=64, m=4)
    model = build_model([solve_nonparametric(prob, p, contour, cfg) for p in (-1.0, 1.0)])
    assert len(model.groups) == 1 and model.groups[0].order == 2
    worst = 0.0
    for p in np.linspace(-1, 1, 50):
        pred = model.values_at(p)
        ref = np.sqrt(complex(p)) * np.array([1, -1])
        assert len(pred) == 2
        worst = max(worst, matched_error(pred, ref))
    record_property("detail", f"max error {worst:.1e}")
    assert worst <= 1e-10


# ------------------------------------------------------------ criteria 3, 4

@pytest.fixture(scope="module")
def cubic_run():
    cfg = AdaptiveConfig(eps=1e-2, delta=0.1, initial_grid=(-50.0, 50.0), beyn=CUBIC_BEYN,
                         interp=InterpolationConfig("linear"))
    model, report = run_adaptive(cubic_companion(), Contour(0, 4), cfg)
    ps = np.linspace(-50, 50, 200)
    errors = np.array([matched_error(model.values_at(p), cubic_roots_inside(p)) for p in ps])
    return model, report, ps, errors


def test_criterion_3_cubic_end_to_end(cubic_run, record_property):
    model, report, ps, errors = cubic_run
    spans = report.flagged_spans
    record_property("detail", f"{report.iterations} iterations, {len(report.final_grid)} points, "
                              f"max error {errors.max():.1e}, spans {[(round(a, 2), round(b, 2)) for a, b in spans]}")
    assert report.converged and report.iterations <= 12
    assert errors.max() <= 1e-2
    assert any(a <= -21.7 <= b for a, b in spans)
    assert any(a <= 0.0 <= b for a, b in spans)


def test_criterion_4_cubic_order3_group(cubic_run, record_property):
    model, report, ps, errors = cubic_run
    around0 = [g for g in model.groups if g.p_range[0] <= 0.0 <= g.p_range[1]]
    assert len(around0) == 1 and around0[0].order == 3
    lo, hi = around0[0].p_range
    inside = (ps >= lo) & (ps <= hi)
    worst = errors[inside].max()
    record_property("detail", f"{inside.sum()} points in [{lo:.2f}, {hi:.2f}], max error {worst:.1e}")
    assert inside.sum() > 0 and worst <= 1e-8


# ------------------------------------------------------------ criteria 5, 6

@pytest.fixture(scope="module")
def heat():
    return delayed_heat(500), {}


def test_criterion_5_delayed_heat(heat, record_property):
    prob, cache = heat
    cfg = AdaptiveConfig(eps=1e-2, beyn=HEAT_BEYN, interp=InterpolationConfig("spline", 3))
    model, report = run_adaptive(prob, HEAT_CONTOUR, cfg, cache=cache)
    grid = model.grid
    near = set()
    for t in model.tracks:
        for j, kind in enumerate(t.kinds):
            if kind == SegmentKind.MIGRATING:
                near.update(range(max(j - 1, 0), min(j + 2, grid.size - 1)))
    worst, worst_all, excluded = 0.0, 0.0, 0
    for p in np.linspace(-0.1, 0.1, 100):
        err = matched_error(model.values_at(p), delayed_heat_roots(p))
        worst_all = max(worst_all, err)
        j = int(np.clip(np.searchsorted(grid, p, side="right") - 1, 0, grid.size - 2))
        if j in near or (p == grid[j] and j - 1 in near):
            excluded += 1
            continue
        worst = max(worst, err)
    record_property("detail", f"{len(grid)} points, max error {worst:.1e} away from migrations "
                              f"({excluded} points excluded, {worst_all:.1e} overall)")
    assert report.converged
    assert worst <= 1e-2


def test_criterion_6_tolerance_scaling(heat, record_property):
    prob, cache = heat
    counts = {}
    for scheme, order in (("spline", 7), ("linear", 3)):
        for eps in (1e-1, 1e-2, 1e-3, 1e-4):
            cfg = AdaptiveConfig(eps=eps, beyn=HEAT_BEYN, interp=InterpolationConfig(scheme, order))
            _, report = run_adaptive(prob, HEAT_CONTOUR, cfg, cache=cache)
            counts[scheme, eps] = len(report.final_grid)
    record_property("detail", "; ".join(
        f"{s}: " + ", ".join(f"{e:g}->{counts[s, e]}" for e in (1e-1, 1e-2, 1e-3, 1e-4))
        for s in ("spline", "linear")))
    for scheme in ("spline", "linear"):
        seq = [counts[scheme, e] for e in (1e-1, 1e-2, 1e-3, 1e-4)]
        assert seq == sorted(seq), f"{scheme} counts not monotone: {seq}"
    assert counts["spline", 1e-4] <= counts["linear", 1e-4]


# ---------------------------------------------------------------- criterion 7

def test_criterion_7_matching_brute_force(record_property):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for t in range(500):
        n1, n2 = rng.integers(1, 8, size=2)
        C = rng.uniform(0, 10, (n1, n2)) if t % 5 else rng.integers(0, 4, (n1, n2)).astype(float)
        if solve_assignment(C).loss != brute_force_loss(C):
            mismatches += 1
    record_property("detail", f"500 matrices, {mismatches} mismatches")
    assert mismatches == 0


# ---------------------------------------------------------------- criterion 8

@settings(max_examples=150, deadline=None)
@given(st.sampled_from([2, 3, 4]), st.floats(0.9, 1.1), st.floats(0, 2 * math.pi),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False), st.floats(0.01, 10))
def _star(k, ratio, theta, center, scale):
    j = np.arange(k)
    a = center + scale * np.exp(1j * (theta + 2 * np.pi * j / k))
    b = center + ratio * scale * np.exp(1j * (theta + 2 * np.pi * j / k + np.pi / k))
    plan = match(a, b)
    assert flag_bifurcation_pairs(build_cost(a, b), 0.1, plan) == plan.pairs


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def _separated(n, seed):
    rng = np.random.default_rng(seed)
    gap = 1.0
    pts = []
    while len(pts) < n:
        z = complex(*rng.uniform(-10, 10, 2))
        if all(abs(z - w) >= gap for w in pts):
            pts.append(z)
    a = np.array(pts)
    step = gap / 10 * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))
    b = a + step
    perm = rng.permutation(n)
    assert flag_bifurcation_pairs(build_cost(a, b[perm]), 0.1) == []


def test_criterion_8_bifurcation_flags(record_property):
    _star()
    _separated()
    record_property("detail", "150 star configurations (k = 2, 3, 4), 150 separated spectra")


# ---------------------------------------------------------------- criterion 9

def test_criterion_9_cli_determinism(tmp_path, record_property):
    cfg = tmp_path / "cubic.toml"
    cfg.write_text("""
seed = 11
[problem]
name = "cubic"
[contour]
center = [0.0, 0.0]
radius = 4.0
[beyn]
K = 1
m = 5
n_quad = 25
[interpolation]
scheme = "linear"
[adaptive]
eps = 1e-2
delta = 0.1
initial_grid = [-50.0, 50.0]
""")
    codes = [main(["run", "--config", str(cfg), "--out", str(tmp_path / d), "--seed", "11"]) for d in ("a", "b")]
    assert codes == [0, 0]
    same = [(tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
            for f in ("curves.csv", "report.json")]
    rows = len((tmp_path / "a" / "curves.csv").read_text().splitlines()) - 1
    record_property("detail", f"curves.csv ({rows} rows) and report.json identical: {all(same)}")
    assert all(same)
    assert json.loads((tmp_path / "a" / "report.json").read_text())["config"]["seed"] == 11
