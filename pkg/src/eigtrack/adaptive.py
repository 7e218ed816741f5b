"""Predictor-corrector refinement of the collocation grid.

Each iteration builds a curve model on the current grid (predictor), solves
the non-parametric problem at every interval midpoint (corrector) and
promotes the midpoints where the model misses by more than ``eps``.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beyn import BeynConfig, EigenSnapshot, solve_nonparametric
from .core import Contour, ParametricProblem
from .curves import CurveModel, InterpolationConfig, build_model
from .matching import build_cost, solve_assignment

logger = logging.getLogger(__name__)


class MismatchPolicy(str, enum.Enum):
    LENIENT = "lenient"
    STRICT = "strict"


@dataclass(frozen=True)
class AdaptiveConfig:
    """Settings of the refinement loop.

    ``initial_grid=None`` means the two ends of the parameter range;
    ``min_interval=None`` means ``1e-6`` times the range length. With
    ``refine=False`` the model is built on the initial grid and nothing is
    tested.
    """

    eps: float = 1e-2
    initial_grid: tuple | None = None
    max_iterations: int = 20
    min_interval: float | None = None
    mismatch_policy: MismatchPolicy = MismatchPolicy.LENIENT
    beyn: BeynConfig = field(default_factory=BeynConfig)
    interp: InterpolationConfig = field(default_factory=InterpolationConfig)
    delta: float = 0.1
    w: int = 4
    quarter_points: bool = False
    refine: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.min_interval is not None and not self.min_interval > 0:
            raise ValueError("min_interval must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.w < 0:
            raise ValueError("w must be non-negative")
        object.__setattr__(self, "mismatch_policy", MismatchPolicy(self.mismatch_policy))
        if self.initial_grid is not None:
            g = tuple(float(x) for x in self.initial_grid)
            if len(g) < 2 or any(b <= a for a, b in zip(g[:-1], g[1:])):
                raise ValueError("initial_grid needs at least 2 strictly increasing points")
            object.__setattr__(self, "initial_grid", g)


@dataclass
class RunReport:
    iterations: int
    final_grid: list
    snapshots_computed: int
    flagged_spans: list
    max_errors: list
    converged: bool
    stop_reason: str
    test_counts: list = field(default_factory=list)
    failed_counts: list = field(default_factory=list)
    timings: list = field(default_factory=list)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "snapshots_computed": self.snapshots_computed,
            "final_grid": [float(x) for x in self.final_grid],
            "flagged_spans": [[float(a), float(b)] for a, b in self.flagged_spans],
            "max_errors": [float(e) for e in self.max_errors],
            "test_counts": list(self.test_counts),
            "failed_counts": list(self.failed_counts),
        }
        if include_timings:
            out["timings"] = self.timings
        return out


def model_error_at(model: CurveModel, reference: EigenSnapshot) -> tuple[float, bool]:
    """Largest matched distance between the model and a reference snapshot.

    Values left unmatched when the counts differ do not enter the maximum;
    the second result reports whether the counts differ.
    """
    pred = model.values_at(reference.p)
    ref = reference.eigenvalues
    mismatch = pred.size != ref.size
    if pred.size == 0 or ref.size == 0:
        return 0.0, mismatch
    plan = solve_assignment(build_cost(pred, ref))
    return float(max(plan.pair_costs)), mismatch


def _test_points(grid: np.ndarray, quarter: bool) -> list[tuple[int, float]]:
    pts = []
    for j, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
        mids = [0.5 * (a + b)]
        if quarter:
            mids += [0.75 * a + 0.25 * b, 0.25 * a + 0.75 * b]
        pts += [(j, m) for m in mids]
    return pts


def run_adaptive(problem: ParametricProblem, contour: Contour, config: AdaptiveConfig = AdaptiveConfig(),
                 progress: Callable[[int, int, float], None] | None = None,
                 cache: dict | None = None) -> tuple[CurveModel, RunReport]:
    """Refine the grid until every midpoint test passes.

    ``cache`` maps ``p`` to solved snapshots and may be shared between runs
    with the same problem, contour and Beyn settings; ``snapshots_computed``
    counts only the solves made by this call.
    """
    lo, hi = problem.param_range
    grid = np.array(config.initial_grid if config.initial_grid is not None else (lo, hi), dtype=float)
    if grid[0] < lo or grid[-1] > hi:
        raise ValueError(f"initial grid leaves the parameter range [{lo}, {hi}]")
    min_interval = config.min_interval if config.min_interval is not None else 1e-6 * (hi - lo)
    cache = {} if cache is None else cache
    computed = 0

    def snapshot(p):
        nonlocal computed
        p = float(p)
        if p not in cache:
            cache[p] = solve_nonparametric(problem, p, contour, config.beyn)
            computed += 1
        return cache[p]

    def build(points):
        return build_model([snapshot(p) for p in points], config.interp, config.delta, config.w, contour)

    max_errors, test_counts, failed_counts, timings = [], [], [], []
    iteration = 0
    converged, reason = True, "fixed_grid"
    while config.refine:
        iteration += 1
        t0 = time.perf_counter()
        model = build(grid)
        t1 = time.perf_counter()
        tests = _test_points(grid, config.quarter_points)
        refs = [snapshot(p) for _, p in tests]
        t2 = time.perf_counter()
        worst, failing = 0.0, set()
        for (j, p), ref in zip(tests, refs):
            err, mismatch = model_error_at(model, ref)
            worst = max(worst, err)
            if err > config.eps or (mismatch and config.mismatch_policy == MismatchPolicy.STRICT):
                failing.add(j)
        t3 = time.perf_counter()
        timings.append({"iteration": iteration, "build": t1 - t0, "solve": t2 - t1, "test": t3 - t2})
        max_errors.append(worst)
        test_counts.append(len(tests))
        failed_counts.append(len(failing))
        logger.info("iteration %d: %d points, max test error %.3e, %d failing intervals",
                    iteration, grid.size, worst, len(failing))
        if progress is not None:
            progress(iteration, int(grid.size), worst)

        widths = np.diff(grid)
        promote = sorted(j for j in failing if widths[j] >= 2 * min_interval)
        if not failing:
            grid = np.union1d(grid, [0.5 * (a + b) for a, b in zip(grid[:-1], grid[1:])])
            converged, reason = True, "converged"
            break
        if not promote:
            converged, reason = False, "min_interval"
            break
        grid = np.union1d(grid, [0.5 * (grid[j] + grid[j + 1]) for j in promote])
        if iteration >= config.max_iterations:
            converged, reason = False, "max_iterations"
            break

    t0 = time.perf_counter()
    model = build(grid)
    timings.append({"iteration": "final", "build": time.perf_counter() - t0})
    report = RunReport(
        iterations=iteration,
        final_grid=[float(x) for x in grid],
        snapshots_computed=computed,
        flagged_spans=model.flagged_spans(),
        max_errors=max_errors,
        converged=converged,
        stop_reason=reason,
        test_counts=test_counts,
        failed_counts=failed_counts,
        timings=timings,
    )
    return model, report
