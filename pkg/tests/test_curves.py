import numpy as np
import pytest
from hypothesis import given, strategies as st

from eigtrack.beyn import EigenSnapshot
from eigtrack.core import Contour
from eigtrack.curves import (InterpolationConfig, SegmentKind, StitchError, Track, build_interpolant,
                             build_model, fit_piece, harmonic_mean_segment, match_snapshots, stitch)
from eigtrack.matching import MatchPlan, match

C = Contour(0, 4)


def snap(p, values, contour=C):
    v = np.asarray(values, complex)
    v = v[np.lexsort((v.imag, v.real))]
    return EigenSnapshot(p, v, np.zeros(v.size), contour)


def test_stitch_follows_matches():
    snaps = [snap(0, [1, 2]), snap(1, [1.1, 2.1]), snap(2, [1.2, 2.2])]
    tracks = stitch(snaps, match_snapshots(snaps))
    assert len(tracks) == 2
    np.testing.assert_allclose(tracks[0].values, [1, 1.1, 1.2])
    assert tracks[0].kinds == [SegmentKind.EXPLICIT] * 2


def test_stitch_births_and_deaths():
    snaps = [snap(0, [1, 3.5]), snap(1, [1.1]), snap(2, [1.2, -3.5])]
    tracks = stitch(snaps, match_snapshots(snaps))
    assert len(tracks) == 3
    assert tracks[1].kinds == [SegmentKind.MIGRATING, SegmentKind.ABSENT]
    assert tracks[2].kinds == [SegmentKind.ABSENT, SegmentKind.MIGRATING]
    assert np.isnan(tracks[2].values[0])


def test_stitch_rejects_bad_plans():
    snaps = [snap(0, [1, 2]), snap(1, [1])]
    with pytest.raises(StitchError):
        stitch(snaps, [])
    with pytest.raises(StitchError):
        stitch(snaps, [MatchPlan((0, 1), (0, 0), (0, 0), 0, (), ())])


def test_track_from_values():
    t = Track.from_values([None, 1, 2, None])
    assert t.kinds == [SegmentKind.MIGRATING, SegmentKind.EXPLICIT, SegmentKind.MIGRATING]
    assert (t.first, t.last) == (1, 2)


def test_harmonic_mean_segment():
    # value at p1, blows up at p2, both directions
    assert harmonic_mean_segment(1 + 1j, 0.0, 1.0, 0j, 0.0) == 1 + 1j
    assert harmonic_mean_segment(2.0, 0.0, 1.0, 1.0, 0.5) == pytest.approx(3.0)
    assert harmonic_mean_segment(2.0, 1.0, 0.0, 0.0, 0.5) == pytest.approx(4.0)
    with pytest.raises(ZeroDivisionError):
        harmonic_mean_segment(1.0, 0.0, 1.0, 0.0, 1.0)


def test_fit_piece_reproduces_polynomials():
    x = np.linspace(0, 1, 8)
    y = x ** 3 + 1j * x
    for order in (3, 5, 7):
        f = fit_piece(x, y, InterpolationConfig("spline", order))
        assert f(0.37) == pytest.approx(0.37 ** 3 + 0.37j, abs=1e-12)
    lin = fit_piece(x[:2], y[:2], InterpolationConfig())
    assert lin(x[1] / 2) == pytest.approx(0.5 * y[1])
    assert lin(2 * x[1]) == pytest.approx(2 * y[1])
    assert fit_piece([0.0], [3j], InterpolationConfig())(9.0) == 3j


def test_linear_extrapolation_of_migrating_value():
    grid = [0.0, 1.0, 2.0]
    t = Track.from_values([1.0, 2.0, None])
    curve = build_interpolant(t, grid)
    assert curve(1.5) == pytest.approx(2.5)
    assert curve(0.25) == pytest.approx(1.25)
    assert curve(2.0) == pytest.approx(3.0)  # extrapolated up to the absent grid point


def test_harmonic_migration_when_too_few_points():
    grid = [0.0, 1.0, 2.0]
    t = Track.from_values([None, 2.0, None])
    curve = build_interpolant(t, grid, InterpolationConfig(migration_mode="harmonic"))
    assert curve(1.5) == pytest.approx(4.0)
    assert curve(0.5) == pytest.approx(4.0)
    curve = build_interpolant(t, grid)  # extrapolation needs 2 points: falls back to harmonic mean
    assert curve(1.5) == pytest.approx(4.0)


def test_config_validation():
    with pytest.raises(ValueError):
        InterpolationConfig("rbf")
    with pytest.raises(ValueError):
        InterpolationConfig("spline", 4)
    with pytest.raises(ValueError):
        InterpolationConfig(migration_mode="teleport")


def test_model_constant_spectrum():
    snaps = [snap(p, [1, 2]) for p in (0, 0.5, 1)]
    model = build_model(snaps)
    assert [tid for tid, _ in model.evaluate(0.3)] == [0, 1]
    np.testing.assert_allclose(model.values_at(0.77), [1, 2])
    with pytest.raises(ValueError):
        model.evaluate(1.5)


def test_model_drops_values_outside_contour():
    snaps = [snap(0, [1, 3.9]), snap(1, [1])]
    model = build_model(snaps, InterpolationConfig(migration_mode="harmonic"))
    kinds = {tid: kind for tid, _, kind in model.evaluate_detailed(0.01)}
    assert kinds[1] == "migrating"
    # harmonic mean reaches radius 4 at p = 1 - 3.9/4
    assert 1 not in dict(model.evaluate(0.5))


def test_model_toy_is_exact():
    snaps = [snap(-1, [1j, -1j], Contour(0, 3)), snap(1, [-1, 1], Contour(0, 3))]
    model = build_model(snaps)
    assert len(model.groups) == 1
    for p in np.linspace(-1, 1, 21):
        pred = model.values_at(p)
        ref = np.sqrt(complex(p)) * np.array([1, -1])
        assert max(match(pred, ref).pair_costs) < 1e-12
        assert all(kind == "implicit" for _, _, kind in model.evaluate_detailed(p))


def test_model_grid_points_return_data():
    snaps = [snap(p, [p, 2 - p]) for p in (0, 0.25, 0.5)]
    model = build_model(snaps, bifurcations=False)
    np.testing.assert_allclose(model.values_at(0.25), [0.25, 1.75])


def test_build_model_validates_order():
    with pytest.raises(ValueError):
        build_model([snap(1, [1]), snap(0, [1])])
    with pytest.raises(ValueError):
        build_model([])


def test_interpolant_small_examples():
    grid = [0.0, 1.0, 2.0]
    assert build_interpolant(Track.from_values([1, 2, 3]), grid)(0.5) == pytest.approx(1.5)
    assert build_interpolant(Track.from_values([1, 2, None]), grid)(2.0) == pytest.approx(3.0)
    harmonic = build_interpolant(Track.from_values([None, 2, None]), grid,
                                 InterpolationConfig(migration_mode="harmonic"))
    assert np.isinf(harmonic(2.0))


def test_shifted_harmonic_mean_example():
    assert harmonic_mean_segment(1 + 1j, 0.0, 1.0, 1.0, 0.5) == pytest.approx(1 + 2j)


def test_exit_then_entry_through_empty_snapshot():
    snaps = [snap(0, [1]), snap(1, []), snap(2, [1])]
    tracks = stitch(snaps, match_snapshots(snaps))
    assert len(tracks) == 2
    assert np.isfinite(tracks[0].values).tolist() == [True, False, False]
    assert np.isfinite(tracks[1].values).tolist() == [False, False, True]


@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.floats(-3, 3), st.floats(0.1, 3))
def test_harmonic_mean_grows_toward_pole(lam1, z0, p1, width):
    if abs(lam1 - z0) < 1e-6:
        return
    p2 = p1 + width
    ts = np.linspace(p1, p2, 40)[:-1]
    dist = [abs(harmonic_mean_segment(lam1, p1, p2, z0, t) - z0) for t in ts]
    assert all(b > a for a, b in zip(dist, dist[1:]))


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=4))
def test_linear_reproduction(coefs):
    a = np.array([complex(x, 0.5 * k) for k, (x, _) in enumerate(coefs)])
    b = np.array([y for _, y in coefs])
    grid = np.linspace(0, 1, 5)
    snaps = [snap(p, a + b * p) for p in grid]
    model = build_model(snaps, bifurcations=False)
    for p in np.linspace(0, 1, 13):
        pred = dict(model.evaluate(p))
        for t in model.tracks:
            k = int(np.argmin(np.abs(a - t.values[0])))
            assert pred[t.id] == pytest.approx(a[k] + b[k] * p, abs=1e-12)
