"""Command-line front end: ``eigtrack solve-one | run | validate``.

Runs are described by a TOML file::

    seed = 0

    [problem]
    name = "cubic"            # toy | cubic | delayed_heat | constant
    # manifest = "gun.txt"    # split-form problem instead of a built-in
    # param_range = [-50, 50]
    # M = 500                 # extra keys go to the built-in constructor

    [contour]
    center = [0.0, 0.0]       # real, imaginary
    radius = 4.0

    [beyn]
    K = 1
    m = 5
    n_quad = 25

    [interpolation]
    scheme = "linear"         # linear | spline
    order = 3                 # spline order: 3, 5 or 7
    migration = "extrapolate" # extrapolate | harmonic

    [adaptive]
    eps = 1e-2
    delta = 0.1
    w = 4
    initial_grid = "endpoints" # or "uniform:N", or a list of values
    max_iterations = 20
    mismatch_policy = "lenient"
    refine = true              # false: fixed grid, no refinement

    [output]
    dense_factor = 10

Exit codes: 0 success, 1 configuration error, 2 solver error,
3 no convergence (outputs are still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .adaptive import AdaptiveConfig, MismatchPolicy, model_error_at, run_adaptive
from .beyn import BeynConfig, EigenSnapshot, QuadratureBreakdownError, solve_nonparametric
from .core import Contour, ParametricProblem
from .curves import InterpolationConfig, build_model
from .matching import InfeasibleMatchError
from .problems import BUILTIN, ManifestError, load_split_form

logger = logging.getLogger("eigtrack")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NOT_CONVERGED = 0, 1, 2, 3

_SECTIONS = {
    "problem": None,
    "contour": {"center", "radius"},
    "beyn": {"K", "m", "n_quad", "rank_rtol", "residual_tol", "inside_margin", "seed"},
    "interpolation": {"scheme", "order", "migration", "extrapolation_min_points"},
    "adaptive": {"eps", "delta", "w", "initial_grid", "max_iterations", "min_interval",
                 "mismatch_policy", "quarter_points", "refine"},
    "output": {"dense_factor", "dir"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: ParametricProblem
    problem_spec: dict
    contour: Contour
    beyn: BeynConfig
    interp: InterpolationConfig
    adaptive: AdaptiveConfig
    seed: int = 0
    dense_factor: int = 10
    out: Path | None = None
    raw: dict = field(default_factory=dict)


def _grid_spec(spec, param_range):
    lo, hi = param_range
    if spec is None or spec == "endpoints":
        return None
    if isinstance(spec, str):
        kind, _, n = spec.partition(":")
        if kind != "uniform" or not n.isdigit() or int(n) < 2:
            raise ConfigError(f"grid spec must be 'uniform:N' with N >= 2, got {spec!r}")
        return tuple(np.linspace(lo, hi, int(n)))
    return tuple(float(x) for x in spec)


def _build_problem(spec: dict, base: Path) -> ParametricProblem:
    spec = dict(spec)
    prange = spec.pop("param_range", None)
    if "manifest" in spec:
        path = Path(spec.pop("manifest"))
        if not path.is_absolute():
            path = base / path
        if spec:
            raise ConfigError(f"unknown problem keys for a manifest: {sorted(spec)}")
        return load_split_form(path, prange)
    name = spec.pop("name", None)
    if name not in BUILTIN:
        raise ConfigError(f"unknown problem {name!r}; choose one of {sorted(BUILTIN)} or give a manifest")
    if prange is not None:
        spec["param_range"] = tuple(prange)
    try:
        return BUILTIN[name](**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for problem {name!r}: {exc}") from None


def load_config(path, seed: int | None = None, threads: int | None = None) -> RunConfig:
    """Parse and validate a TOML run file; raises ``ConfigError``."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for key, value in raw.items():
        if key == "seed":
            continue
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section {key!r}")
        allowed = _SECTIONS[key]
        if allowed is not None and set(value) - allowed:
            raise ConfigError(f"unknown keys in [{key}]: {sorted(set(value) - allowed)}")
    if "problem" not in raw or "contour" not in raw:
        raise ConfigError("config needs [problem] and [contour] sections")
    try:
        problem = _build_problem(raw["problem"], path.parent)
        c = raw["contour"]
        center = c.get("center", [0.0, 0.0])
        center = complex(*center) if isinstance(center, list) else complex(center)
        contour = Contour(center, float(c["radius"]))
        b = dict(raw.get("beyn", {}))
        run_seed = int(seed if seed is not None else raw.get("seed", b.pop("seed", 0)))
        b.pop("seed", None)
        beyn = BeynConfig(seed=run_seed, threads=threads or 1, **b)
        i = dict(raw.get("interpolation", {}))
        if "migration" in i:
            i["migration_mode"] = i.pop("migration")
        interp = InterpolationConfig(**i)
        a = dict(raw.get("adaptive", {}))
        a["initial_grid"] = _grid_spec(a.get("initial_grid"), problem.param_range)
        if "mismatch_policy" in a:
            a["mismatch_policy"] = MismatchPolicy(str(a["mismatch_policy"]).lower())
        adaptive = AdaptiveConfig(beyn=beyn, interp=interp, **a)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    out = raw.get("output", {})
    dense = int(out.get("dense_factor", 10))
    if dense < 1:
        raise ConfigError("output.dense_factor must be positive")
    out_dir = out.get("dir")
    if out_dir is not None:
        out_dir = Path(out_dir) if Path(out_dir).is_absolute() else path.parent / out_dir
    return RunConfig(problem, dict(raw["problem"]), contour, beyn, interp, adaptive,
                     run_seed, dense, out_dir, raw)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _snapshot_dict(s: EigenSnapshot) -> dict:
    return {"p": s.p, "re": s.eigenvalues.real.tolist(), "im": s.eigenvalues.imag.tolist(),
            "residuals": s.residuals.tolist(), "near_boundary": s.near_boundary.tolist(),
            "rank_saturated": bool(s.rank_saturated)}


def _snapshot_from(d: dict, contour: Contour) -> EigenSnapshot:
    ev = np.array(d["re"], float) + 1j * np.array(d["im"], float)
    return EigenSnapshot(d["p"], ev, d["residuals"], contour, d.get("near_boundary"),
                         d.get("rank_saturated", False))


def _config_echo(cfg: RunConfig) -> dict:
    a = cfg.adaptive
    return {
        "problem": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.problem_spec.items()},
        "param_range": list(cfg.problem.param_range),
        "contour": {"center": [cfg.contour.center.real, cfg.contour.center.imag],
                    "radius": cfg.contour.radius},
        "beyn": {"K": cfg.beyn.K, "m": cfg.beyn.m, "n_quad": cfg.beyn.n_quad,
                 "rank_rtol": cfg.beyn.rank_rtol, "residual_tol": cfg.beyn.residual_tol,
                 "inside_margin": cfg.beyn.inside_margin},
        "interpolation": {"scheme": cfg.interp.scheme, "order": cfg.interp.order,
                          "migration": cfg.interp.migration_mode,
                          "extrapolation_min_points": cfg.interp.extrapolation_min_points},
        "adaptive": {"eps": a.eps, "delta": a.delta, "w": a.w, "max_iterations": a.max_iterations,
                     "min_interval": a.min_interval, "mismatch_policy": a.mismatch_policy.value,
                     "quarter_points": a.quarter_points, "refine": a.refine,
                     "initial_grid": None if a.initial_grid is None else list(a.initial_grid)},
        "seed": cfg.seed,
    }


def write_curves(model, path: Path, dense_factor: int = 10) -> int:
    """Dense uniform table of the model; returns the number of rows."""
    lo, hi = model.p_range
    n = max(2, dense_factor * model.grid.size)
    rows = 0
    with open(path, "w", newline="\n") as fh:
        fh.write("p,track_id,re,im,segment_kind\n")
        for p in np.linspace(lo, hi, n):
            for tid, v, kind in model.evaluate_detailed(p):
                fh.write(f"{_fmt(p)},{tid},{_fmt(v.real)},{_fmt(v.imag)},{kind}\n")
                rows += 1
    return rows


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_solve_one(cfg: RunConfig, p: float, stream=None) -> int:
    stream = stream or sys.stdout
    snap = solve_nonparametric(cfg.problem, p, cfg.contour, cfg.beyn)
    stream.write("p,re,im,residual\n")
    for v, r in zip(snap.eigenvalues, snap.residuals):
        stream.write(f"{_fmt(p)},{_fmt(v.real)},{_fmt(v.imag)},{_fmt(r)}\n")
    return EXIT_OK


def cmd_run(cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    cache: dict = {}

    def progress(it, size, err):
        logger.info("iteration %d: %d collocation points, max test error %.3e", it, size, err)

    model, report = run_adaptive(cfg.problem, cfg.contour, cfg.adaptive, progress=progress, cache=cache)
    rows = write_curves(model, out / "curves.csv", cfg.dense_factor)
    body = report.to_dict()
    body.update({"config": _config_echo(cfg), "collocation_count": len(report.final_grid),
                 "tracks": len(model.tracks), "groups": [
                     {"members": list(g.members), "p_range": list(g.p_range),
                      "order": g.order} for g in model.groups],
                 "curves_rows": rows})
    _dump_json(body, out / "report.json")
    _dump_json({"grid": [float(x) for x in model.grid], "contour": body["config"]["contour"],
                "snapshots": [_snapshot_dict(s) for s in model.snapshots]}, out / "model.json")
    _dump_json({"phases": report.timings}, out / "timings.json")
    print(f"{'converged' if report.converged else 'NOT converged'} after {report.iterations} "
          f"iterations; {len(report.final_grid)} collocation points; "
          f"{len(model.groups)} bifurcation groups; wrote {out}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def load_model(cfg: RunConfig, out: Path):
    path = out / "model.json"
    if not path.is_file():
        raise ConfigError(f"no model.json in {out}; run 'eigtrack run' first")
    data = json.loads(path.read_text())
    snaps = [_snapshot_from(d, cfg.contour) for d in data["snapshots"]]
    return build_model(snaps, cfg.interp, cfg.adaptive.delta, cfg.adaptive.w, cfg.contour)


def cmd_validate(cfg: RunConfig, out: Path, grid: str = "uniform:200") -> int:
    model = load_model(cfg, out)
    if grid == "collocation":
        points = model.grid
    else:
        points = np.array(_grid_spec(grid, model.p_range))
    worst = 0.0
    mismatches = 0
    with open(out / "validation.csv", "w", newline="\n") as fh:
        fh.write("p,max_matched_error,predicted_count,reference_count\n")
        for p in points:
            ref = solve_nonparametric(cfg.problem, p, cfg.contour, cfg.beyn)
            err, mismatch = model_error_at(model, ref)
            npred = len(model.evaluate(p))
            fh.write(f"{_fmt(p)},{_fmt(err)},{npred},{len(ref)}\n")
            worst = max(worst, err)
            mismatches += mismatch
    print(f"validated {len(points)} points: max matched error {worst:.3e} "
          f"(eps {cfg.adaptive.eps:g}); count mismatches at {mismatches} points")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eigtrack", description="Track eigenvalue curves of parametric nonlinear eigenproblems.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--threads", type=int, default=None, help="default: number of CPUs")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")

    s = sub.add_parser("solve-one", help="eigenvalues at a single parameter value")
    common(s)
    s.add_argument("--p", type=float, required=True)
    r = sub.add_parser("run", help="adaptive run; writes curves.csv and report.json")
    common(r)
    r.add_argument("--out", type=Path, default=None)
    v = sub.add_parser("validate", help="compare a finished run against fresh solves")
    common(v)
    v.add_argument("--out", type=Path, default=None)
    v.add_argument("--grid", default="uniform:200", help="'uniform:N' or 'collocation'")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    try:
        cfg = load_config(args.config, seed=args.seed, threads=max(1, threads))
        if args.command == "solve-one":
            if not cfg.problem.in_range(args.p):
                raise ConfigError(f"p = {args.p} outside the parameter range {cfg.problem.param_range}")
            return cmd_solve_one(cfg, args.p)
        out = args.out or cfg.out
        if out is None:
            raise ConfigError("no output directory: pass --out or set [output] dir")
        if args.command == "run":
            return cmd_run(cfg, out)
        if args.grid != "collocation":
            _grid_spec(args.grid, (0.0, 1.0))
        return cmd_validate(cfg, out, args.grid)
    except (ConfigError, ManifestError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureBreakdownError, InfeasibleMatchError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
