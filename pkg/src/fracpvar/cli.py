"""Command line front end: ``fracpvar {check,solve,exhaust,diagnose,fuzz}``.

Exit codes: 0 success, 1 a check or fuzz run found violations,
2 hypothesis or configuration error, 3 solver failure, 4 I/O error or grid mismatch.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .diagnostics import (fuzz_negative_part_inequality, pohozaev_residual, pohozaev_sign_test,
                          sobolev_ratio)
from .domain import build_grid, field_from_coordinates, read_field_csv, write_field_csv
from .energy import build_context, negative_part_seminorm
from .errors import HypothesisError, SolverError
from .exhaustion import ExhaustionReport, distributional_residual, run_exhaustion
from .model import verify_f2, verify_f3, verify_W

log = logging.getLogger("fracpvar")

EXIT_OK, EXIT_FAILED, EXIT_HYPOTHESIS, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3, 4
FUZZ_P = (1.5, 2.0, 3.0, 4.7)


class GridMismatch(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_cell(v) for v in row])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _load(args) -> RunConfig:
    return load_config(args.config, seed=args.seed, threads=args.threads, out_dir=args.out)


def _progress(enabled: bool):
    if not enabled:
        return None

    def emit(R, it, value, gnorm):
        print(f"R={R!r} iter={it} energy={value!r} grad={gnorm!r}", file=sys.stderr, flush=True)

    return emit


def _checks(cfg: RunConfig) -> list:
    reports = [verify_f2(cfg.nonlinearity, cfg.params)]
    if cfg.params.superlinear:
        reports.append(verify_f3(cfg.nonlinearity, cfg.params))
    reports.append(verify_W(cfg.weight, cfg.grid()))
    return reports


def cmd_check(args) -> int:
    cfg = _load(args)
    print(f"regime: {cfg.params.regime} (p={cfg.params.p:g}, q={cfg.params.q:g}, "
          f"p*_s={cfg.params.critical_exponent:g})")
    status = EXIT_OK
    for rep in _checks(cfg):
        line = f"{rep.name}: {'PASS' if rep.passed else 'FAIL'}"
        if not rep.passed:
            line += f" {rep.message}"
            if rep.witness is not None:
                line += f" (witness {rep.witness!r})"
            status = EXIT_HYPOTHESIS
        print(line)
    return status


def _require_checks(cfg: RunConfig) -> None:
    for rep in _checks(cfg):
        if not rep.passed:
            raise HypothesisError(f"{rep.name} failed: {rep.message}")


def _report_core(cfg: RunConfig, rep: ExhaustionReport) -> dict:
    return {
        "regime": rep.regime,
        "config": cfg.echo(),
        "constants": rep.constants,
        "verdicts": rep.verdicts,
        "balls": [e.as_dict() for e in rep.entries],
        "sphere_samples": rep.sphere,
        "residual": rep.residual,
    }


def _write_trace(path: Path, rep: ExhaustionReport) -> None:
    rows = [(R, it, val, gn) for R, trace in rep.traces for it, val, gn in trace]
    _write_rows(path, ["R", "iteration", "value", "gradient_norm"], rows)


def cmd_solve(args) -> int:
    cfg = _load(args)
    R = cfg.radii[-1] if args.radius is None else float(args.radius)
    if R not in cfg.radii:
        raise HypothesisError(f"radius {R:g} is not among grid.radii")
    cfg = replace(cfg, radii=[R])
    _require_checks(cfg)
    rep = run_exhaustion(cfg, progress=_progress(args.progress))
    out = _outdir(cfg)
    write_field_csv(out / "solution.csv", rep.limit)
    _write_trace(out / "trace.csv", rep)
    report = _report_core(cfg, rep)
    report["solve"] = {"R": R, **rep.entries[0].as_dict()}
    write_json(out / "report.json", report)
    if not args.no_plots:
        from .plotting import plot_solution
        plot_solution(rep.limit, out / "solution.png", f"R = {R:g}")
    _summary(rep)
    return _verdict_status(rep)


def cmd_exhaust(args) -> int:
    cfg = _load(args)
    if len(cfg.radii) < 2:
        raise HypothesisError("exhaust needs at least two radii")
    _require_checks(cfg)
    rep = run_exhaustion(cfg, progress=_progress(args.progress))
    out = _outdir(cfg)
    p = cfg.params.p
    _write_rows(out / "exhaustion.csv", ["R", "level", "seminorm_p", "neg_part", "T", "iterations"],
                [(e.radius, e.level, e.seminorm_p, e.neg_part, e.T, e.iterations) for e in rep.entries])
    for R, u in zip(rep.radii, rep.solutions):
        write_field_csv(out / f"solution_R{R:g}.csv", u)
    _write_trace(out / "trace.csv", rep)
    c = rep.constants
    bound = c.get("r", c.get("cap"))
    _write_rows(out / "plot_data.csv", ["R", "level", "seminorm_root", "T", "lp_norm", "M", "level_bound"],
                [(e.radius, e.level, e.seminorm_p ** (1 / p), e.T, e.lp_norm, c["M"], bound)
                 for e in rep.entries])
    write_json(out / "report.json", _report_core(cfg, rep))
    if not args.no_plots:
        from .plotting import plot_levels, plot_seminorms, plot_solution
        plot_levels(rep.radii, rep.levels, out / "levels.png", r=c.get("r"), cap=c.get("cap"))
        plot_seminorms(rep.radii, [e.seminorm_p ** (1 / p) for e in rep.entries],
                       out / "seminorms.png", M=c["M"], T=[e.T for e in rep.entries])
        plot_solution(rep.limit, out / "solution.png", f"R = {rep.radii[-1]:g}")
    _summary(rep)
    return _verdict_status(rep)


def _summary(rep: ExhaustionReport) -> None:
    for e in rep.entries:
        print(f"R={e.radius:g} level={e.level!r} seminorm_p={e.seminorm_p!r} neg_part={e.neg_part!r} "
              f"T={e.T!r} iterations={e.iterations}")
    for k in sorted(rep.verdicts):
        print(f"{k}: {rep.verdicts[k]}")


def _verdict_status(rep: ExhaustionReport) -> int:
    # None marks a check that does not apply (e.g. monotonicity with one radius)
    return EXIT_FAILED if any(v is False for v in rep.verdicts.values()) else EXIT_OK


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _match_grid(cfg: RunConfig, coords: np.ndarray):
    for R in cfg.radii:
        grid = build_grid(R, cfg.spacing, cfg.params.dim)
        if grid.nodes.shape == coords.shape:
            return grid
    raise GridMismatch("solution file does not match any configured grid")


def cmd_diagnose(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    path = Path(args.solution) if args.solution else out / "solution.csv"
    coords, values = read_field_csv(path)
    grid = _match_grid(cfg, coords)
    try:
        u = field_from_coordinates(grid, coords, values)
    except HypothesisError as exc:
        raise GridMismatch(str(exc)) from exc
    params = cfg.params
    ctx = build_context(grid, params, cfg.weight, cfg.nonlinearity, threads=cfg.threads,
                        regularize=params.p < 2)
    kernel = ctx.kernel
    zero = not np.any(u.values)
    diag = {
        "solution_file": path.name,
        "R": grid.radius,
        "pohozaev_residual": pohozaev_residual(u, cfg.weight, cfg.nonlinearity, params),
        "negative_part_seminorm": negative_part_seminorm(kernel, u.values),
        "sobolev_ratio": None if zero else sobolev_ratio(u, kernel, params),
        "residual": distributional_residual(u, ctx, cfg.solver.residual_probes, seed=cfg.solver.seed),
        "fuzz": {"trials": args.trials, "seed": cfg.solver.seed,
                 "violations": fuzz_negative_part_inequality(params.p, args.trials, cfg.solver.seed)},
    }
    if cfg.nonlinearity.kind == "power":
        diag["pohozaev_sign_test"] = dict(pohozaev_sign_test(cfg.weight, params, grid, cfg.nonlinearity))
    else:
        diag["pohozaev_sign_test"] = {"verdict": "NOT_APPLICABLE", "note": "non-power nonlinearity"}
    report_path = out / "report.json"
    report = json.loads(report_path.read_text()) if report_path.exists() else {"config": cfg.echo()}
    report["diagnostics"] = diag
    write_json(report_path, report)
    print(json.dumps(_jsonable(diag), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_fuzz(args) -> int:
    ps = args.p or list(FUZZ_P)
    seed = 0 if args.seed is None else args.seed
    total = 0
    for p in ps:
        n = fuzz_negative_part_inequality(p, args.trials, seed)
        total += n
        print(f"p={p:g} trials={args.trials} seed={seed} violations={n}")
    return EXIT_OK if total == 0 else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracpvar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="run configuration file")
        sp.add_argument("--out", help="output directory (overrides outputs.dir)")
        sp.add_argument("--seed", type=int, help="seed override (solver.seed)")
        sp.add_argument("--threads", type=int, help="worker threads (default: $FRACPVAR_THREADS or 1)")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("check", help="verify hypotheses and regime")
    common(sp)
    sp.set_defaults(func=cmd_check)
    for name, func, helptext in (("solve", cmd_solve, "solve on a single ball"),
                                 ("exhaust", cmd_exhaust, "solve on all balls and check the chain")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--progress", action="store_true", help="stream solver records to stderr")
        sp.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
        if name == "solve":
            sp.add_argument("--radius", type=float, help="ball radius (default: largest)")
        sp.set_defaults(func=func)
    sp = sub.add_parser("diagnose", help="run diagnostics on a solution file")
    common(sp)
    sp.add_argument("--solution", help="solution CSV (default: <out>/solution.csv)")
    sp.add_argument("--trials", type=int, default=100_000, help="fuzz samples")
    sp.set_defaults(func=cmd_diagnose)
    sp = sub.add_parser("fuzz", help="fuzz the negative-part inequality")
    common(sp, config=False)
    sp.add_argument("--p", type=float, action="append", help="exponent (repeatable)")
    sp.add_argument("--trials", type=int, default=100_000)
    sp.set_defaults(func=cmd_fuzz)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HypothesisError as exc:
        print(f"hypothesis error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, GridMismatch) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
