"""Implicit (polynomial) representation of eigenvalues flagged as bifurcating.

A group of ``M`` eigenvalue tracks is modeled over a range of collocation
points by the monic polynomials ``xi_j(lam) = prod_i (lam - lam_j^i)``; their
coefficients are interpolated in ``p`` with the Lagrange basis of the span,
and predictions are the roots of the interpolated polynomial.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matching import MatchPlan, build_cost, flag_bifurcation_pairs


@dataclass(frozen=True)
class BifurcationGroup:
    """Tracks modeled jointly on intervals ``span[0]..span[1]`` (inclusive).

    ``data[k]`` holds the ``M`` member values at grid point ``span[0] + k``,
    in the order of ``members``.
    """

    members: tuple[int, ...]
    span: tuple[int, int]
    grid: np.ndarray
    data: np.ndarray
    flagged_intervals: tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return len(self.members)

    @property
    def points(self) -> range:
        return range(self.span[0], self.span[1] + 2)

    @property
    def p_range(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])


@dataclass(frozen=True)
class ImplicitSurrogate:
    """``xi(lam, p) = sum_j ell_j(p) xi_j(lam)`` stored by monomial coefficients.

    ``coeffs[j]`` are the coefficients of ``xi_j`` from highest degree down,
    leading entry 1.
    """

    grid: np.ndarray
    coeffs: np.ndarray
    bary_weights: np.ndarray

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    def coefficients(self, p: float) -> np.ndarray:
        """Coefficients of ``xi(., p)`` via the barycentric Lagrange formula."""
        diff = p - self.grid
        hit = np.flatnonzero(diff == 0)
        if hit.size:
            return self.coeffs[hit[0]].copy()
        t = self.bary_weights / diff
        return (t @ self.coeffs) / t.sum()


def _bary_weights(x: np.ndarray) -> np.ndarray:
    n = x.size
    w = np.ones(n)
    for j in range(n):
        d = x[j] - np.delete(x, j)
        w[j] = 1.0 / np.prod(d) if d.size else 1.0
    # rescale for range safety; barycentric formula is invariant to it
    return w / np.max(np.abs(w))


def build_surrogate(group: BifurcationGroup) -> ImplicitSurrogate:
    grid = np.asarray(group.grid, dtype=float)
    coeffs = np.array([np.poly(row) for row in np.asarray(group.data, dtype=complex)], dtype=complex)
    coeffs = coeffs.reshape(grid.size, group.order + 1)
    return ImplicitSurrogate(grid=grid, coeffs=coeffs, bary_weights=_bary_weights(grid))


def companion_roots(coeffs) -> np.ndarray:
    """Roots of the monic polynomial with ``coeffs`` (highest degree first)."""
    c = np.asarray(coeffs, dtype=complex)
    c = c / c[0]
    deg = c.size - 1
    if deg == 0:
        return np.empty(0, complex)
    comp = np.zeros((deg, deg), dtype=complex)
    comp[0, :] = -c[1:]
    comp[np.arange(1, deg), np.arange(deg - 1)] = 1.0
    return np.linalg.eigvals(comp)


def roots_at(surrogate: ImplicitSurrogate, p: float) -> np.ndarray:
    """The ``M`` roots of ``xi(., p)``, sorted by (real, imag)."""
    r = companion_roots(surrogate.coefficients(float(p)))
    return r[np.lexsort((r.imag, r.real))]


def _track_lookup(tracks):
    """Map ``(grid index, snapshot index) -> track id``."""
    table = {}
    for t in tracks:
        for j, k in enumerate(t.indices):
            if k >= 0:
                table[(j, int(k))] = t.id
    return table


def detect_groups(snapshots, plans: list[MatchPlan], delta: float = 0.1, w: int = 4,
                  tracks=None) -> list[BifurcationGroup]:
    """Bifurcation groups from the flagged pairs of each interval's match.

    Flagging runs on the square sub-problem of matched pairs only, so migrating
    eigenvalues are never flagged. Pairs flagged on interval ``j`` form a group
    spanning intervals ``j - w .. j + w``; groups sharing a track with
    overlapping or touching spans are merged. Spans are then shrunk to where
    every member is present; groups left with fewer than two members or with
    no flagged interval are dropped.
    """
    if tracks is None:
        from .curves import stitch
        tracks = stitch(snapshots, plans)
    S = len(snapshots)
    if S < 2:
        return []
    lookup = _track_lookup(tracks)
    by_id = {t.id: t for t in tracks}
    raw = []
    for j, plan in enumerate(plans):
        if len(plan) < 2:
            continue
        C = build_cost(snapshots[j], snapshots[j + 1])
        sub = C[np.ix_(plan.sigma, plan.tau)]
        square = MatchPlan(tuple(range(len(plan))), tuple(range(len(plan))), plan.pair_costs,
                           plan.loss, (), ())
        flagged = flag_bifurcation_pairs(sub, delta, plan=square)
        if not flagged:
            continue
        members = {lookup[(j, plan.sigma[a])] for a, _ in flagged}
        raw.append([members, max(0, j - w), min(S - 2, j + w), {j}])

    merged = True
    while merged:
        merged = False
        for a in range(len(raw)):
            for b in range(a + 1, len(raw)):
                ga, gb = raw[a], raw[b]
                if ga[0] & gb[0] and ga[1] <= gb[2] + 1 and gb[1] <= ga[2] + 1:
                    raw[a] = [ga[0] | gb[0], min(ga[1], gb[1]), max(ga[2], gb[2]), ga[3] | gb[3]]
                    del raw[b]
                    merged = True
                    break
            if merged:
                break

    grid = np.array([s.p for s in snapshots])
    groups = []
    for members, lo, hi, flagged in sorted(raw, key=lambda g: (g[1], min(g[0]))):
        if len(members) < 2:
            continue
        first = max(by_id[t].first for t in members)
        last = min(by_id[t].last for t in members)
        lo, hi = max(lo, first), min(hi, last - 1)
        flagged = tuple(sorted(f for f in flagged if lo <= f <= hi))
        if hi < lo or not flagged:
            continue
        ids = tuple(sorted(members))
        pts = range(lo, hi + 2)
        data = np.array([[by_id[t].values[k] for t in ids] for k in pts])
        groups.append(BifurcationGroup(ids, (lo, hi), grid[lo:hi + 2].copy(), data, flagged))
    return groups
