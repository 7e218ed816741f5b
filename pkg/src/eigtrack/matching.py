"""Optimal 1-to-1 matching of eigenvalue lists and bifurcation flagging.

The assignment solver is a shortest-augmenting-path Hungarian method that
works on rectangular matrices directly and tolerates ``inf`` entries
(forbidden pairs). Among plans of equal loss the one with the
lexicographically smallest ``(sigma, tau)`` is returned, so results do not
depend on the internal search order. Losses are compared with ``math.fsum``
and ties are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# plans tie only when their fsum losses are equal; tight edges are detected with
# a small slack so that float noise in the dual potentials cannot hide a tie
TIGHT_SLACK = 1e-13


class InfeasibleMatchError(ValueError):
    """No full matching with finite loss exists."""


@dataclass(frozen=True)
class MatchPlan:
    """Pairs ``(sigma[i], tau[i])`` sorted by ``sigma``; 0-based indices."""

    sigma: tuple[int, ...]
    tau: tuple[int, ...]
    pair_costs: tuple[float, ...]
    loss: float
    unmatched_left: tuple[int, ...]
    unmatched_right: tuple[int, ...]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.sigma, self.tau))

    def __len__(self):
        return len(self.sigma)


def _values(x) -> np.ndarray:
    ev = getattr(x, "eigenvalues", x)
    return np.asarray(ev, dtype=complex).reshape(-1)


def build_cost(a, b) -> np.ndarray:
    """Distance matrix ``c[i, k] = |a_i - b_k|`` between two eigenvalue lists or snapshots."""
    va, vb = _values(a), _values(b)
    return np.abs(va[:, None] - vb[None, :])


def _hungarian(C: np.ndarray):
    """Min-cost assignment of every row of ``C`` (rows <= cols).

    Returns ``(col_of_row, u, v)`` with dual potentials such that
    ``C - u[:, None] - v[None, :] >= 0`` and equality on the chosen pairs.
    """
    n, m = C.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    row_of = np.zeros(m + 1, dtype=int)  # 1-based row matched to column j, 0 = free
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            free = ~used
            free[0] = False
            cur = C[i0 - 1] - u[i0] - v[1:]
            cols = np.flatnonzero(free[1:]) + 1
            better = cur[cols - 1] < minv[cols]
            upd = cols[better]
            minv[upd] = cur[upd - 1]
            way[upd] = j0
            j1 = cols[np.argmin(minv[cols])]
            delta = minv[j1]
            if not np.isfinite(delta):
                raise InfeasibleMatchError("no finite-cost assignment exists")
            u[row_of[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1
    col_of = np.full(n, -1, dtype=int)
    for j in range(1, m + 1):
        if row_of[j]:
            col_of[row_of[j] - 1] = j - 1
    return col_of, u[1:], v[1:]


def _min_loss(C: np.ndarray) -> float:
    """Optimal loss of a rows <= cols sub-problem; ``inf`` when infeasible."""
    if C.shape[0] == 0:
        return 0.0
    try:
        col, _, _ = _hungarian(C)
    except InfeasibleMatchError:
        return math.inf
    return math.fsum(C[np.arange(C.shape[0]), col])


def _lexmin_rows_first(C, tight, target):
    """Lexicographically smallest column choice, rows in order, all rows matched."""
    n, m = C.shape
    avail = list(range(m))
    chosen, acc = [], []
    for i in range(n):
        cands = [c for c in avail if tight[i, c]]
        if len(cands) == 1:
            pick = cands[0]
        else:
            pick, best = None, math.inf
            rest = np.array(range(i + 1, n), dtype=int)
            for c in cands or avail:
                cols = [k for k in avail if k != c]
                sub = C[np.ix_(rest, cols)] if rest.size else np.zeros((0, len(cols)))
                val = math.fsum(acc + [C[i, c], _min_loss(sub)])
                if val <= target:
                    pick = c
                    break
                if val < best:  # kept in case rounding pushes every candidate past target
                    pick, best = c, val
        chosen.append(pick)
        acc.append(C[i, pick])
        avail.remove(pick)
    return chosen


def _choose_rows(C, tight, target):
    """Lexicographically smallest set of matched rows when rows > cols."""
    n1, n2 = C.shape
    eligible = [i for i in range(n1) if tight[i].any()]
    if len(eligible) == n2:
        return eligible
    must, excluded = [], [i for i in range(n1) if i not in eligible]
    for i in eligible:
        if len(must) == n2:
            excluded.append(i)
            continue
        trial = must + [i]
        rows = [r for r in range(n1) if r not in excluded]
        extra = len(rows) - n2
        pad = np.array([[math.inf if r in trial else 0.0] * extra for r in rows]).reshape(len(rows), extra)
        sq = np.hstack([C[rows], pad])
        if _min_loss(sq) <= target:
            must.append(i)
        else:
            excluded.append(i)
    return sorted(must)


def _hungarian_pairs(col, transposed, n1, n2):
    if not transposed:
        return np.arange(n1), np.asarray(col)
    sigma, tau = np.asarray(col), np.arange(n2)
    order = np.argsort(sigma)
    return sigma[order], tau[order]


def solve_assignment(cost) -> MatchPlan:
    """Minimum-loss injective matching of size ``min(N1, N2)``.

    Raises
    ------
    InfeasibleMatchError
        If every full matching uses an ``inf`` entry.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost must be a 2-D array")
    if np.any(np.isnan(C)) or np.any(C < 0):
        raise ValueError("cost entries must be non-negative (inf allowed)")
    n1, n2 = C.shape
    k = min(n1, n2)
    if k == 0:
        return MatchPlan((), (), (), 0.0, tuple(range(n1)), tuple(range(n2)))

    transposed = n1 > n2
    W = C.T if transposed else C
    col, u, v = _hungarian(W)
    target = math.fsum(W[np.arange(W.shape[0]), col])
    finite = C[np.isfinite(C)]
    scale = max(1.0, float(finite.max()) if finite.size else 1.0)
    reduced = W - u[:, None] - v[None, :]
    tight_w = reduced <= TIGHT_SLACK * scale * W.shape[0]
    tight_w[np.arange(W.shape[0]), col] = True
    tight = tight_w.T if transposed else tight_w

    if np.count_nonzero(tight) == k:
        sigma, tau = _hungarian_pairs(col, transposed, n1, n2)
    else:
        rows = _choose_rows(C, tight, target) if transposed else list(range(n1))
        sub = C[rows]
        tau = np.array(_lexmin_rows_first(sub, tight[rows], target))
        sigma = np.array(rows)
        if math.fsum(C[sigma, tau]) > target:  # rounding in the sub-solves; keep the optimum
            sigma, tau = _hungarian_pairs(col, transposed, n1, n2)

    costs = tuple(float(C[i, j]) for i, j in zip(sigma, tau))
    return MatchPlan(
        sigma=tuple(int(i) for i in sigma),
        tau=tuple(int(j) for j in tau),
        pair_costs=costs,
        loss=math.fsum(costs),
        unmatched_left=tuple(sorted(set(range(n1)) - set(int(i) for i in sigma))),
        unmatched_right=tuple(sorted(set(range(n2)) - set(int(j) for j in tau))),
    )


def match(a, b) -> MatchPlan:
    """Shorthand for ``solve_assignment(build_cost(a, b))``."""
    return solve_assignment(build_cost(a, b))


def flag_bifurcation_pairs(cost, delta: float, plan: MatchPlan | None = None) -> list[tuple[int, int]]:
    """Pairs of the optimal plan that a near-optimal alternative avoids.

    Each optimal pair is forbidden in turn (its cost set to ``inf``); when the
    re-solved loss is below ``(1 + delta)`` times the optimum, every optimal
    pair missing from the alternative plan is flagged. The union over all
    forbidden pairs is returned, sorted.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    C = np.asarray(cost, dtype=float)
    if plan is None:
        plan = solve_assignment(C)
    best = set(plan.pairs)
    flagged: set[tuple[int, int]] = set()
    for i, j in plan.pairs:
        forbidden = C.copy()
        forbidden[i, j] = np.inf
        try:
            alt = solve_assignment(forbidden)
        except InfeasibleMatchError:
            continue
        if alt.loss < (1.0 + delta) * plan.loss:
            flagged |= best - set(alt.pairs)
    return sorted(flagged)
