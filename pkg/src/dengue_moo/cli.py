"""Command-line driver: simulate, optimize, pareto, sweep, knee, hypervolume.

Settings come from an optional JSON config (``--config``); flags override
the file and use the same names as its keys (``--n-subproblems`` for
``n_subproblems``). Exit codes are listed in :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import csvio
from .errors import ConfigurationError, DegenerateFrontError, NumericalFailure
from .model import STATE_NAMES, ModelParameters, integrate_rk4, load_model_config
from .nlp import SolveOptions
from .objectives import Evaluator
from .pareto import filter_front, hypervolume_2d, is_convex_front, knee_point, nondominated_filter, normalize_objectives
from .scalarize import METHODS, ScalarizationSpec, clean_weights, approximate_pareto, compute_anchors, solve_scalarized

log = logging.getLogger("dengue_moo")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_FAILURE_QUOTA = 3
EXIT_DEGENERATE = 4
EXIT_CODES = {
    EXIT_OK: "success",
    EXIT_ERROR: "numerical failure",
    EXIT_USAGE: "usage or configuration error",
    EXIT_FAILURE_QUOTA: "more than 20% of subproblems failed",
    EXIT_DEGENERATE: "degenerate front (no knee)",
}
FAILURE_QUOTA = 0.2
SWEEP_DEFAULT = (0.25, 0.375, 0.5, 0.75)
SWEEP_PARAMS = ("beta_hm", "beta_mh")

_MODEL_KEYS = {f.name for f in fields(ModelParameters)} | {"params", "init", "grid"}
_RUN_KEYS = {"method", "methods", "n_subproblems", "solver", "output_dir", "sweep", "workers",
             "control", "eps", "w1", "reference", "archive", "output"}
_SOLVER_KEYS = {f.name for f in fields(SolveOptions)}


class UsageError(Exception):
    pass


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


def resolve_config(args) -> dict:
    """Merge the config file with command-line flags (flags win) and validate keys."""
    cfg = load_config(getattr(args, "config", None))
    unknown = set(cfg) - _MODEL_KEYS - _RUN_KEYS
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for key in sorted(_RUN_KEYS | {"beta_hm", "beta_mh"}):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        if key not in {f.name for f in fields(ModelParameters)}:
            raise UsageError(f"unknown model parameter in --set: {key!r}")
        cfg[key] = float(value)
    solver = cfg.get("solver", {})
    if not isinstance(solver, dict) or set(solver) - _SOLVER_KEYS:
        bad = sorted(set(solver) - _SOLVER_KEYS) if isinstance(solver, dict) else ["solver"]
        raise UsageError(f"unknown solver option(s): {', '.join(bad)}")
    if getattr(args, "max_function_evaluations", None) is not None:
        cfg["solver"] = {**solver, "max_function_evaluations": args.max_function_evaluations}
    return cfg


def _model(cfg: dict):
    return load_model_config({k: v for k, v in cfg.items() if k in _MODEL_KEYS})


def _solver(cfg: dict) -> SolveOptions:
    return SolveOptions(**cfg.get("solver", {}))


def _resolved(cfg: dict, model) -> dict:
    """Full configuration written into output headers (output locations left out)."""
    out = {k: v for k, v in cfg.items() if k in _RUN_KEYS - {"output", "output_dir"}}
    out["params"] = model.params.to_dict()
    out["init"] = model.init.to_dict()
    out["grid"] = model.grid.to_dict()
    out["solver"] = {f.name: getattr(_solver(cfg), f.name) for f in fields(SolveOptions)}
    return out


def _output_dir(cfg: dict) -> Path:
    return Path(cfg.get("output_dir") or ".")


def _control(cfg: dict, grid) -> np.ndarray:
    spec = cfg.get("control", 0.0)
    if _is_number(spec):
        return np.full(grid.n_nodes, float(spec))
    try:
        return csvio.read_control(spec)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None


def _is_number(text) -> bool:
    try:
        float(text)
    except (TypeError, ValueError):
        return False
    return True


def _check_method(method):
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    model = _model(cfg)
    control = _control(cfg, model.grid)
    traj = integrate_rk4(control, model.params, model.grid, model.init)
    out = Path(cfg.get("output") or _output_dir(cfg) / "trajectory.csv")
    csvio.write_trajectory(out, traj, _resolved(cfg, model))
    ev = Evaluator(model.params, model.grid, model.init)
    peak = int(np.argmax(traj.i_h))
    print(f"f1 = {ev.f1(traj.control):.10g}  f2 = {ev.f2(traj.control):.10g}")
    print(f"i_h peak {traj.i_h[peak]:.6g} at t = {traj.times[peak]:g}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = resolve_config(args)
    method = cfg.get("method", "eps-constraint")
    _check_method(method)
    model = _model(cfg)
    ev = Evaluator(model.params, model.grid, model.init)
    opts = _solver(cfg)
    anchors = compute_anchors(ev, opts)
    if method == "eps-constraint":
        eps = cfg.get("eps")
        if eps is None:
            raise UsageError("eps-constraint needs --eps")
        spec = ScalarizationSpec(method, eps=float(eps))
    else:
        w1 = cfg.get("w1")
        if w1 is None:
            raise UsageError(f"{method} needs --w1")
        ref = cfg.get("reference")
        spec = ScalarizationSpec(method, weights=clean_weights(float(w1)),
                                 reference=tuple(ref) if ref is not None else None)
    x0 = _control(cfg, model.grid) if "control" in cfg else None
    control, result = solve_scalarized(spec, ev, x0, anchors, opts)
    out = Path(cfg.get("output") or _output_dir(cfg) / "control.csv")
    resolved = _resolved(cfg, model)
    resolved["spec"] = spec.to_dict()
    csvio.write_control(out, model.grid.times, control, resolved)
    point = ev.point(control)
    print(f"{method} beta={spec.beta_param:.6g}: f1 = {point.f1:.10g}  f2 = {point.f2:.10g}  "
          f"status = {result.status}  evaluations = {result.evaluations_used}")
    print(f"wrote {out}")
    return EXIT_OK if result.success else EXIT_FAILURE_QUOTA


def _archive_hv(archive) -> float:
    front = filter_front(archive.points())
    return hypervolume_2d(normalize_objectives(front, archive.anchors.z_ideal, archive.anchors.z_nadir))


def _run_pareto(task):
    """Worker entry point: one warm-started front run."""
    cfg, method, overrides = task
    model = _model({**cfg, **overrides})
    return approximate_pareto(method, int(cfg.get("n_subproblems", 100)), model.params, model.grid,
                              _solver(cfg), model.init)


def cmd_pareto(args) -> int:
    cfg = resolve_config(args)
    methods = list(METHODS) if cfg.get("method", "normal-constraint") == "all" else [cfg.get("method", "normal-constraint")]
    for m in methods:
        _check_method(m)
    model = _model(cfg)
    outdir = _output_dir(cfg)
    resolved = _resolved(cfg, model)
    over_quota = False
    print(f"{'method':<20}{'HV':>12}{'points':>8}{'failed':>8}")
    for method in methods:
        archive = _run_pareto((cfg, method, {}))
        header = csvio.archive_header(archive, {**archive.config, **resolved, "method": method})
        csvio.write_archive(outdir / f"{method}_archive.csv", archive, header, model.grid.times)
        hv = _archive_hv(archive)
        keep = nondominated_filter(archive.points())
        front = archive.points()[keep]
        csvio.write_front(outdir / f"{method}_front.csv", front, control_refs=keep.tolist(),
                          config={**header, "hypervolume": hv})
        print(f"{method:<20}{hv:>12.6f}{len(front):>8d}{archive.failures():>8d}")
        if archive.failures() > FAILURE_QUOTA * len(archive):
            over_quota = True
    return EXIT_FAILURE_QUOTA if over_quota else EXIT_OK


def _surfaces(archive, ev, outdir: Path, stem: str, header: dict):
    """Control and i_h matrices, rows ordered by ascending f2."""
    pts = archive.points()
    order = np.argsort(pts[:, 1], kind="stable")
    controls = archive.controls()[order]
    ih = np.array([ev.states(c)[:, STATE_NAMES.index("i_h")] for c in controls])
    times = ev.grid.times
    csvio.write_matrix(outdir / f"{stem}_control_surface.csv", pts[order, 1], times, controls, header)
    csvio.write_matrix(outdir / f"{stem}_ih_surface.csv", pts[order, 1], times, ih, header)


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    sweep = cfg.get("sweep") or {p: list(SWEEP_DEFAULT) for p in SWEEP_PARAMS}
    for key in ("beta_hm", "beta_mh"):
        # a list given as a flag replaces the sweep list for that parameter
        if isinstance(cfg.get(key), list):
            sweep = {**sweep, key: cfg[key]}
    if not isinstance(sweep, dict) or set(sweep) - set(SWEEP_PARAMS):
        raise UsageError(f"sweep keys must be among {', '.join(SWEEP_PARAMS)}")
    if any(not values for values in sweep.values()):
        raise UsageError("sweep lists must be non-empty")
    base = {k: v for k, v in cfg.items() if not (k in SWEEP_PARAMS and isinstance(v, list))}
    methods = cfg.get("methods") or [cfg.get("method", "normal-constraint")]
    for m in methods:
        _check_method(m)

    tasks, labels = [], []
    for param, values in sweep.items():
        for value in values:
            overrides = {param: float(value)}
            try:
                ModelParameters().with_overrides(**overrides)
            except ConfigurationError as exc:
                raise UsageError(str(exc)) from None
            for method in methods:
                tasks.append((base, method, overrides))
                labels.append((param, float(value), method))
    workers = int(cfg.get("workers") or min(len(tasks), os.cpu_count() or 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            archives = list(pool.map(_run_pareto, tasks))
    else:
        archives = [_run_pareto(t) for t in tasks]

    outdir = _output_dir(cfg)
    resolved = _resolved(base, _model(base))
    summary = []
    over_quota = False
    for (param, value, method), archive, task in zip(labels, archives, tasks):
        model = _model({**base, **task[2]})
        ev = Evaluator(model.params, model.grid, model.init)
        stem = f"{method}_{param}_{value:g}"
        header = csvio.archive_header(archive, {**resolved, **archive.config, "method": method,
                                               "sweep_param": param, "sweep_value": value})
        csvio.write_archive(outdir / f"{stem}_archive.csv", archive, header, model.grid.times)
        _surfaces(archive, ev, outdir, stem, header)
        for level in (0.0, 1.0):
            traj = integrate_rk4(np.full(model.grid.n_nodes, level), model.params, model.grid, model.init)
            csvio.write_trajectory(outdir / f"{stem}_extreme_c{level:g}.csv", traj, {**header, "control": level})
        hv = _archive_hv(archive)
        keep = nondominated_filter(archive.points())
        normed = normalize_objectives(archive.points()[keep], archive.anchors.z_ideal, archive.anchors.z_nadir)
        try:
            knee = knee_point(normed)
            k = int(keep[knee.index])
            knee_control = archive.entries[k].control
            traj = integrate_rk4(knee_control, model.params, model.grid, model.init)
            csvio.write_trajectory(outdir / f"{stem}_knee_trajectory.csv", traj, header)
            csvio.write_control(outdir / f"{stem}_knee_control.csv", model.grid.times, knee_control, header)
            knee_cols = [*archive.entries[k].point, archive.entries[k].spec.beta_param, ev.f2(knee_control)]
        except DegenerateFrontError:
            knee_cols = [np.nan] * 4
        summary.append([param, value, method, hv, *knee_cols, is_convex_front(normed), archive.failures()])
        if archive.failures() > FAILURE_QUOTA * len(archive):
            over_quota = True

    cols = ["param", "value", "method", "hypervolume", "knee_f1", "knee_f2", "knee_beta",
            "knee_control_integral", "convex", "failures"]
    csvio.write_table(outdir / "sweep_summary.csv", cols,
                 ([str(v) if not isinstance(v, float) else repr(v) for v in row] for row in summary), resolved)
    print(f"{'param':<9}{'value':>7}  {'method':<18}{'HV':>10}{'knee f1':>11}{'knee f2':>10}{'convex':>8}")
    for row in summary:
        print(f"{row[0]:<9}{row[1]:>7g}  {row[2]:<18}{row[3]:>10.6f}{row[4]:>11.5g}{row[5]:>10.5g}{str(row[8]):>8}")
    print(f"wrote {len(summary)} archives to {outdir}")
    return EXIT_FAILURE_QUOTA if over_quota else EXIT_OK


def _normalized(table: csvio.ArchiveTable, points) -> np.ndarray:
    """Normalize with the archive's anchors; bare fronts are taken as already normalized."""
    if table.ideal is None:
        return np.asarray(points, dtype=float)
    return normalize_objectives(points, table.ideal, table.nadir)


def cmd_knee(args) -> int:
    table = _read_table(args.archive)
    keep = nondominated_filter(table.points)
    normed = _normalized(table, table.points[keep])
    try:
        knee = knee_point(normed)
    except DegenerateFrontError as exc:
        print(f"degenerate: {exc}")
        return EXIT_DEGENERATE
    row = int(keep[knee.index])
    f1, f2 = table.points[row]
    beta = table.beta[row]
    label = f"{table.methods[row]} beta={beta:.6g}" if table.methods[row] else f"row {row}"
    print(f"knee: f1 = {f1:.10g}  f2 = {f2:.10g}  ({label}, normalized distance {knee.distance:.6g})")
    if table.controls is not None:
        out = Path(args.output or Path(args.archive).with_name(Path(args.archive).stem + "_knee_control.csv"))
        times = table.control_times if table.control_times is not None else np.arange(table.controls.shape[1])
        csvio.write_control(out, times, table.controls[row], {**table.config, "knee_row": row})
        print(f"wrote {out}")
    return EXIT_OK


def _read_table(path) -> csvio.ArchiveTable:
    try:
        return csvio.read_archive(path)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None


def cmd_hypervolume(args) -> int:
    reference = tuple(args.reference)
    print(f"{'file':<40}{'HV':>12}{'points':>8}")
    for path in args.files:
        table = _read_table(path)
        front = filter_front(table.points)
        hv = hypervolume_2d(_normalized(table, front), reference)
        print(f"{Path(path).name:<40}{hv:>12.6f}{len(front):>8d}")
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dengue-moo", description="Biobjective dengue insecticide control.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a model parameter")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--max-function-evaluations", dest="max_function_evaluations", type=int)
        if output:
            p.add_argument("--output", help="output file")

    p = sub.add_parser("simulate", help="forward run with a fixed control")
    common(p)
    p.add_argument("--control", help="constant level in [0, 1] or a control CSV with a 'c' column")
    p.add_argument("--beta-hm", dest="beta_hm", type=float)
    p.add_argument("--beta-mh", dest="beta_mh", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="one scalarized solve")
    common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--eps", type=float)
    p.add_argument("--w1", type=float)
    p.add_argument("--reference", type=float, nargs=2)
    p.add_argument("--control", help="start control: constant level or control CSV")
    p.add_argument("--beta-hm", dest="beta_hm", type=float)
    p.add_argument("--beta-mh", dest="beta_mh", type=float)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("pareto", help="full warm-started front for one method (or 'all')")
    common(p, output=False)
    p.add_argument("--method", choices=METHODS + ("all",))
    p.add_argument("--n-subproblems", dest="n_subproblems", type=int)
    p.add_argument("--beta-hm", dest="beta_hm", type=float)
    p.add_argument("--beta-mh", dest="beta_mh", type=float)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("sweep", help="fronts over transmission-probability values")
    common(p, output=False)
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--n-subproblems", dest="n_subproblems", type=int)
    p.add_argument("--beta-hm", dest="beta_hm", type=_float_list, help="comma-separated values")
    p.add_argument("--beta-mh", dest="beta_mh", type=_float_list, help="comma-separated values")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("knee", help="knee point of an archive or front CSV")
    p.add_argument("archive")
    p.add_argument("--output", help="where to write the knee control")
    p.set_defaults(func=cmd_knee)

    p = sub.add_parser("hypervolume", help="hypervolume of archive or front CSVs")
    p.add_argument("files", nargs="+")
    p.add_argument("--reference", type=float, nargs=2, default=(1.0, 1.0))
    p.set_defaults(func=cmd_hypervolume)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateFrontError as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
