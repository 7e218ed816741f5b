"""Eigenvalue tracks over the collocation grid and the global curve model."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline

from .bifurcation import BifurcationGroup, ImplicitSurrogate, build_surrogate, detect_groups, roots_at
from .core import Contour
from .matching import MatchPlan, build_cost, match, solve_assignment


class SegmentKind(str, enum.Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"
    MIGRATING = "migrating"
    ABSENT = "absent"


class StitchError(ValueError):
    pass


@dataclass
class Track:
    """One eigenvalue curve sampled on the grid; ``nan`` marks ABSENT values.

    ``indices[j]`` is the position of the value inside snapshot ``j`` (-1 when
    absent). ``kinds[j]`` describes interval ``[p_j, p_{j+1}]`` and
    ``group_of[j]`` names the implicit group covering it (-1 if none).
    """

    id: int
    values: np.ndarray
    indices: np.ndarray
    kinds: list = field(default_factory=list)
    group_of: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.indices = np.asarray(self.indices, dtype=int)
        if not self.kinds:
            self.kinds = default_kinds(self.values)
        if not self.group_of:
            self.group_of = [-1] * len(self.kinds)

    @property
    def finite(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def first(self) -> int:
        return int(np.flatnonzero(self.finite)[0])

    @property
    def last(self) -> int:
        return int(np.flatnonzero(self.finite)[-1])

    @classmethod
    def from_values(cls, values, id: int = 0) -> "Track":
        v = np.array([np.nan if x is None else x for x in values], dtype=complex)
        idx = np.where(np.isnan(v), -1, 0)
        return cls(id, v, idx)


def default_kinds(values) -> list:
    fin = ~np.isnan(np.asarray(values, dtype=complex))
    kinds = []
    for a, b in zip(fin[:-1], fin[1:]):
        if a and b:
            kinds.append(SegmentKind.EXPLICIT)
        elif a or b:
            kinds.append(SegmentKind.MIGRATING)
        else:
            kinds.append(SegmentKind.ABSENT)
    return kinds


@dataclass(frozen=True)
class InterpolationConfig:
    scheme: str = "linear"
    order: int = 3
    migration_mode: str = "extrapolate"
    extrapolation_min_points: int = 2

    def __post_init__(self):
        if self.scheme not in ("linear", "spline"):
            raise ValueError(f"unknown interpolation scheme {self.scheme!r}")
        if self.scheme == "spline" and self.order not in (3, 5, 7):
            raise ValueError(f"spline order must be 3, 5 or 7, got {self.order}")
        if self.migration_mode not in ("extrapolate", "harmonic"):
            raise ValueError(f"unknown migration mode {self.migration_mode!r}")
        if self.extrapolation_min_points < 1:
            raise ValueError("extrapolation_min_points must be positive")


def stitch(snapshots: Sequence, plans: Sequence[MatchPlan]) -> list[Track]:
    """Chain interval matches into tracks, left to right.

    Unmatched values on the left end their track; unmatched values on the
    right start a new one. Tracks are numbered by birth order, and within a
    grid point by snapshot index.
    """
    S = len(snapshots)
    if len(plans) != S - 1:
        raise StitchError(f"{len(plans)} plans for {S} snapshots")
    for j, plan in enumerate(plans):
        n1, n2 = len(snapshots[j]), len(snapshots[j + 1])
        if len(plan.sigma) != min(n1, n2) or len(plan.sigma) + len(plan.unmatched_left) != n1 \
                or len(plan.tau) + len(plan.unmatched_right) != n2:
            raise StitchError(f"plan {j} does not fit snapshot sizes ({n1}, {n2})")
    values, indices = [], []
    owner = {}  # snapshot index at current point -> track number

    def new_track(j, k):
        v = np.full(S, np.nan, dtype=complex)
        idx = np.full(S, -1, dtype=int)
        v[j] = snapshots[j].eigenvalues[k]
        idx[j] = k
        values.append(v)
        indices.append(idx)
        return len(values) - 1

    if S:
        owner = {k: new_track(0, k) for k in range(len(snapshots[0]))}
    for j, plan in enumerate(plans):
        nxt = {}
        for a, b in zip(plan.sigma, plan.tau):
            t = owner[a]
            values[t][j + 1] = snapshots[j + 1].eigenvalues[b]
            indices[t][j + 1] = b
            nxt[b] = t
        for b in plan.unmatched_right:
            nxt[b] = new_track(j + 1, b)
        owner = nxt
    return [Track(i, v, idx) for i, (v, idx) in enumerate(zip(values, indices))]


def harmonic_mean_segment(lam1: complex, p1: float, p2: float, z0: complex, p: float) -> complex:
    """Weighted harmonic mean between ``lam1`` at ``p1`` and infinity at ``p2``,
    shifted so the value escapes radially from ``z0``. Works for ``p2 < p1`` too.
    """
    if p == p2:
        raise ZeroDivisionError("harmonic-mean segment has a pole at p2")
    return (p2 - p1) / (p2 - p) * (lam1 - z0) + z0


def _linear(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, complex)

    def f(p):
        i = int(np.clip(np.searchsorted(x, p) - 1, 0, x.size - 2))
        t = (p - x[i]) / (x[i + 1] - x[i])
        return complex(y[i] + t * (y[i + 1] - y[i]))
    return f


def fit_piece(x, y, config: InterpolationConfig) -> Callable[[float], complex]:
    """Interpolant through ``(x, y)`` that extrapolates beyond ``[x0, x_end]``.

    Spline degree drops to the largest odd value the data supports.
    """
    n = len(x)
    if n == 1:
        c = complex(y[0])
        return lambda p: c
    if config.scheme == "linear" or n < 4:
        return _linear(x, y)
    k = min(config.order, n - 1)
    k -= 1 - k % 2
    spl = make_interp_spline(np.asarray(x, float), np.asarray(y, complex), k=k)
    return lambda p: complex(spl(p))


class TrackCurve:
    """Explicit evaluator of one track: interpolation on EXPLICIT intervals and
    prediction on MIGRATING ones. Returns ``nan`` where the track is ABSENT or
    modeled implicitly.
    """

    def __init__(self, track: Track, grid, config: InterpolationConfig, center: complex = 0j):
        self.track = track
        self.grid = np.asarray(grid, float)
        self.config = config
        self.center = complex(center)
        self.piece_of = {}
        self.pieces = []
        kinds = track.kinds
        fin = track.finite
        j = 0
        S = self.grid.size
        while j < S:
            if not fin[j]:
                j += 1
                continue
            start = j
            while j < S - 1 and kinds[j] == SegmentKind.EXPLICIT:
                j += 1
            pts = list(range(start, j + 1))
            x = self.grid[pts]
            piece = (pts, fit_piece(x, track.values[pts], config))
            for q in pts:
                self.piece_of[q] = len(self.pieces)
            self.pieces.append(piece)
            j += 1

    def _migrating(self, j: int, p: float) -> complex:
        v = self.track.values
        if not np.isnan(v[j]):
            anchor, other = j, j + 1
        else:
            anchor, other = j + 1, j
        pts, fn = self.pieces[self.piece_of[anchor]]
        if self.config.migration_mode == "extrapolate" and len(pts) >= self.config.extrapolation_min_points:
            return fn(p)
        return harmonic_mean_segment(v[anchor], self.grid[anchor], self.grid[other], self.center, p)

    def __call__(self, p: float, interval: int | None = None) -> complex:
        g = self.grid
        if interval is None:
            hit = np.flatnonzero(g == p)
            if hit.size:
                j = int(hit[0])
                if not np.isnan(self.track.values[j]):
                    return complex(self.track.values[j])
                # absent grid point: the end of a migrating interval on either side
                kinds = self.track.kinds
                near = [i for i in (j - 1, j) if 0 <= i < len(kinds) and kinds[i] == SegmentKind.MIGRATING]
                if not near:
                    return complex(np.nan, np.nan)
                try:
                    return self._migrating(near[0], p)
                except ZeroDivisionError:  # pole of the harmonic mean
                    return complex(np.inf, np.inf)
            else:
                interval = int(np.clip(np.searchsorted(g, p) - 1, 0, g.size - 2))
        kind = self.track.kinds[interval] if g.size > 1 else SegmentKind.EXPLICIT
        if kind == SegmentKind.EXPLICIT:
            pts, fn = self.pieces[self.piece_of[interval]]
            return fn(p)
        if kind == SegmentKind.MIGRATING:
            return self._migrating(interval, p)
        return complex(np.nan, np.nan)


def build_interpolant(track: Track, grid, config: InterpolationConfig = InterpolationConfig(),
                      center: complex = 0j) -> TrackCurve:
    return TrackCurve(track, grid, config, center)


@dataclass
class CurveModel:
    """Global surrogate of the eigenvalue curves over ``[grid[0], grid[-1]]``."""

    grid: np.ndarray
    tracks: list
    groups: list
    interp: InterpolationConfig
    contour: Contour
    surrogates: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, float)
        for t in self.tracks:
            if len(t.kinds) != self.grid.size - 1:
                t.kinds = default_kinds(t.values)
                t.group_of = [-1] * len(t.kinds)
        by_id = {t.id: t for t in self.tracks}
        for gid, g in enumerate(self.groups):
            for tid in g.members:
                t = by_id[tid]
                for j in range(g.span[0], g.span[1] + 1):
                    t.kinds[j] = SegmentKind.IMPLICIT
                    t.group_of[j] = gid
        self.surrogates = [build_surrogate(g) for g in self.groups]
        self.curves = [TrackCurve(t, self.grid, self.interp, self.contour.center) for t in self.tracks]

    @property
    def p_range(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def _interval(self, p: float) -> int:
        return int(np.clip(np.searchsorted(self.grid, p) - 1, 0, max(self.grid.size - 2, 0)))

    def evaluate_detailed(self, p: float) -> list[tuple[int, complex, str]]:
        """``(track id, value, segment kind)`` for every track present at ``p``."""
        p = float(p)
        lo, hi = self.p_range
        if not lo <= p <= hi:
            raise ValueError(f"p = {p!r} outside the model range [{lo}, {hi}]")
        out = []
        hit = np.flatnonzero(self.grid == p)
        if hit.size:
            j = hit[0]
            for t in self.tracks:
                v = t.values[j]
                if not np.isnan(v):
                    adjacent = [t.kinds[i] for i in (j - 1, j) if 0 <= i < len(t.kinds)]
                    kind = SegmentKind.IMPLICIT if SegmentKind.IMPLICIT in adjacent else SegmentKind.EXPLICIT
                    out.append((t.id, complex(v), kind.value))
            return sorted(out, key=lambda r: r[0])
        j = self._interval(p)
        done_groups = set()
        for t, curve in zip(self.tracks, self.curves):
            kind = t.kinds[j]
            if kind == SegmentKind.IMPLICIT:
                gid = t.group_of[j]
                if gid not in done_groups:
                    done_groups.add(gid)
                    out.extend(self._implicit(gid, j, p))
            elif kind != SegmentKind.ABSENT:
                out.append((t.id, curve(p, j), kind.value))
        out = [r for r in out if np.isfinite(r[1]) and self.contour.contains(r[1])]
        return sorted(out, key=lambda r: r[0])

    def _implicit(self, gid: int, j: int, p: float):
        g = self.groups[gid]
        roots = roots_at(self.surrogates[gid], p)
        near = j if p - self.grid[j] <= self.grid[j + 1] - p else j + 1
        ref = g.data[near - g.span[0]]
        plan = solve_assignment(build_cost(ref, roots))
        return [(g.members[a], complex(roots[b]), SegmentKind.IMPLICIT.value)
                for a, b in zip(plan.sigma, plan.tau)]

    def evaluate(self, p: float) -> list[tuple[int, complex]]:
        return [(tid, v) for tid, v, _ in self.evaluate_detailed(p)]

    def values_at(self, p: float) -> np.ndarray:
        return np.array([v for _, v in self.evaluate(p)], dtype=complex)

    def flagged_spans(self) -> list[tuple[float, float]]:
        return [g.p_range for g in self.groups]


def evaluate(model: CurveModel, p: float) -> list[tuple[int, complex]]:
    return model.evaluate(p)


def match_snapshots(snapshots) -> list[MatchPlan]:
    return [match(a, b) for a, b in zip(snapshots[:-1], snapshots[1:])]


def build_model(snapshots: Sequence, interp: InterpolationConfig = InterpolationConfig(),
                delta: float = 0.1, w: int = 4, contour: Contour | None = None,
                bifurcations: bool = True) -> CurveModel:
    """Match adjacent snapshots, stitch tracks, flag bifurcation groups, and
    assemble the curve model. ``snapshots`` must be sorted by ``p``.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("need at least one snapshot")
    grid = np.array([s.p for s in snapshots])
    if np.any(np.diff(grid) <= 0):
        raise ValueError("snapshots must have strictly increasing p")
    if contour is None:
        contour = snapshots[0].contour
    plans = match_snapshots(snapshots)
    tracks = stitch(snapshots, plans)
    groups = detect_groups(snapshots, plans, delta, w, tracks) if bifurcations else []
    return CurveModel(grid, tracks, groups, interp, contour, snapshots=snapshots)
