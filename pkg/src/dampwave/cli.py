"""``dampwave`` command line.

Every command writes into ``--out DIR`` and finishes by sealing
``DIR/manifest.json``. Failures exit nonzero with a JSON error object on
stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import energy as em
from . import resolvent as rl
from . import scenarios as sc
from . import solver
from .config import ExperimentConfig, parse_config, serialize, with_overrides
from .errors import DampwaveError, ValidationError
from .persist import RunWriter
from .plot import plot_csv
from .rays import check_egc, check_gcc


def _load(args) -> ExperimentConfig:
    cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        cfg = with_overrides(cfg, output={"seed": args.seed})
    return cfg


def _writer(args, cfg: ExperimentConfig | None, command: str) -> RunWriter:
    out = args.out or (cfg.output.dir if cfg else "out")
    seed = cfg.output.seed if cfg else (args.seed or 0)
    w = RunWriter(out, command, cfg.digest() if cfg else None, seed)
    if cfg is not None:
        w.write_text("config.ini", serialize(cfg))
    return w


def _gcc(cfg: ExperimentConfig, p: sc.Problem, threads):
    k = cfg.damper
    return check_gcc(p.damper, p.spec, (k.gcc_n_pos, k.gcc_n_dir), k.gcc_t_max, k.gcc_eps,
                     grid=p.grid, threads=threads)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    w = _writer(args, cfg, "simulate")
    p = sc.Problem.of(cfg)
    report = None
    if cfg.run.theorem_run and p.spec.dim == 2:
        report = _gcc(cfg, p, args.threads)
        w.write_json("gcc.json", report.to_dict())
    result = solver.run(p.spec, p.damper, p.data(), cfg.run.T_end, cfg.run.observer_stride or None,
                        grid=p.grid, safety=cfg.run.safety, theorem_run=cfg.run.theorem_run,
                        gcc_report=report)
    tr = result.trace
    w.write_text("trace.csv", tr.to_csv())
    window = cfg.fit_window()
    fits = {"window": list(window), "max_residual": tr.max_residual}
    for name, values in (("E_r", tr.primary_local()), ("E_total", tr.E_total), ("l2_sq", tr.l2_sq)):
        try:
            fits[name] = sc.fit_json(em.fit_decay(tr.times, values, window))
        except (ValueError, DampwaveError) as exc:
            fits[name] = {"error": getattr(exc, "code", "FIT_FAILED"), "message": str(exc)}
    w.write_json("fit.json", fits)
    st = result.state
    solver.write_snapshot(w.path("u_final.bin"), st.u_curr, p.grid.h, st.t)
    w.record("u_final.bin")
    w.seal()
    print(json.dumps(fits, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    w = _writer(args, cfg, "sweep-resolvent")
    mid, high = sc.resolvent_sweeps(cfg, cfg.output.seed)
    rs = cfg.resolvent
    summary = {"intermediate": mid.summary(), "high": high.summary(),
               "hf_growth_ratio": rl.growth_ratio(high, rs.growth_early, rs.growth_late)}
    w.write_text("sweep_mid.csv", mid.to_csv())
    w.write_text("sweep_high.csv", high.to_csv())
    w.write_json("summary.json", _jsonable(summary))
    w.seal()
    print(json.dumps(_jsonable(summary), indent=2))
    return 1 if mid.failures or high.failures else 0


def cmd_check_gcc(args) -> int:
    cfg = _load(args)
    w = _writer(args, cfg, "check-gcc")
    p = sc.Problem.of(cfg)
    k = cfg.damper
    if args.escape_radius is not None:
        report = check_egc(p.damper, p.spec, (k.gcc_n_pos, k.gcc_n_dir), k.gcc_t_max,
                           args.escape_radius, k.gcc_eps, grid=p.grid, threads=args.threads)
    else:
        report = _gcc(cfg, p, args.threads)
    w.write_json("gcc.json", report.to_dict())
    w.write_text("gcc.txt", report.to_text() + "\n")
    w.seal()
    print(report.to_text())
    return 0


def cmd_fit(args) -> int:
    data = em.read_trace_csv(Path(args.csv).read_text(encoding="utf-8"))
    if args.column not in data:
        raise ValidationError("column", f"no column {args.column!r} in {args.csv}")
    t = data[args.time]
    window = (args.tmin if args.tmin is not None else float(t.min()),
              args.tmax if args.tmax is not None else float(t.max()))
    fit = sc.fit_json(em.fit_decay(t, data[args.column], window))
    if args.out:
        w = RunWriter(args.out, "fit", None, args.seed or 0)
        w.write_json("fit.json", fit | {"column": args.column, "source": str(args.csv)})
        w.seal()
    print(json.dumps(fit, indent=2))
    return 0


def cmd_compare_heat(args) -> int:
    cfg = _load(args)
    w = _writer(args, cfg, "compare-heat")
    _, heat, gap = sc.diffusion_pair(cfg)
    w.write_text("gap.csv", gap.to_csv())
    fits = {k: sc.fit_json(v) for k, v in gap.fits(cfg.fit_window()).items()}
    fits["margin"] = fits["gap"]["exponent"] - fits["u"]["exponent"]
    w.write_json("gap_fit.json", fits)
    w.seal()
    print(json.dumps(fits, indent=2))
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args) if args.config else None
    seed = cfg.output.seed if cfg else (args.seed or 0)
    scale = sc.QUICK if args.quick else sc.FULL
    w = RunWriter(args.out or "verify_out", "verify", cfg.digest() if cfg else None, seed)
    if cfg is not None:
        w.write_text("config.ini", serialize(cfg))
    jobs = sc.suite(cfg, scale, seed, args.threads)
    if args.only:
        wanted = set(args.only.split(","))
        jobs = [j for j in jobs if j[0] in wanted]
    if args.threads and args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            checks = list(pool.map(lambda j: sc.run_check(*j), jobs))
    else:
        checks = [sc.run_check(*j) for j in jobs]
    for c in checks:
        for name, text in c.files.items():
            w.write_text(f"{c.key}/{name}", text)
        w.write_json(f"{c.key}/result.json", _jsonable(
            {"key": c.key, "claim": c.claim, "status": c.status, "detail": c.detail,
             "measured": c.measured, "seconds": round(c.seconds, 3)}))
    table = sc.format_table(checks)
    w.write_text("summary.txt", table + "\n")
    w.seal()
    print(table)
    return 1 if any(c.status in (sc.FAIL, sc.ERROR) for c in checks) else 0


def cmd_plot(args) -> int:
    src = Path(args.csv)
    columns = args.columns.split(",") if args.columns else None
    svg = plot_csv(src.read_text(encoding="utf-8"), columns, x=args.x,
                   loglog=not args.linear, title=src.name)
    w = RunWriter(args.out, "plot", None, args.seed or 0)
    path = w.write_text(f"{src.stem}.svg", svg)
    w.seal()
    print(path)
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=_u64, metavar="U64", help="RNG seed (overrides the config)")
    common.add_argument("--threads", type=int, metavar="K", help="worker threads")

    parser = argparse.ArgumentParser(prog="dampwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, config=True):
        p = sub.add_parser(name, parents=[common], help=help_)
        if config:
            p.add_argument("--config", metavar="PATH", required=config == "required",
                           help="experiment config (key = value sections)")
        p.set_defaults(func=func)
        return p

    add("simulate", cmd_simulate, "run the damped wave solver and fit decay rates", "required")
    add("sweep-resolvent", cmd_sweep, "frequency sweep of the reduced equation", "required")
    p = add("check-gcc", cmd_check_gcc, "ray-sampling geometric control check", "required")
    p.add_argument("--escape-radius", type=float, help="check exterior control with this radius")
    p = add("fit", cmd_fit, "power-law fit of one CSV column", config=False)
    p.add_argument("--csv", required=True, metavar="PATH")
    p.add_argument("--column", required=True)
    p.add_argument("--time", default="t", help="time column (default t)")
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    add("compare-heat", cmd_compare_heat, "wave vs heat gap (diffusion phenomenon)", "required")
    p = add("verify", cmd_verify, "run the acceptance checks and print a pass/fail table", "optional")
    p.add_argument("--quick", action="store_true", help="reduced resolution, for smoke runs")
    p.add_argument("--only", help="comma-separated subset of check keys")
    p = add("plot", cmd_plot, "render a CSV as an SVG line chart", config=False)
    p.add_argument("--csv", required=True, metavar="PATH")
    p.add_argument("--columns", help="comma-separated y columns (default: all but x)")
    p.add_argument("--x", help="x column (default: first)")
    p.add_argument("--linear", action="store_true", help="linear axes instead of log-log")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plot" and not args.out:
        args.out = str(Path(args.csv).parent / "plots")
    try:
        return args.func(args)
    except DampwaveError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(json.dumps({"error": "INVALID_ARGUMENT", "module": "cli-harness", "message": str(exc)}),
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "IO_ERROR", "module": "cli-harness", "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
