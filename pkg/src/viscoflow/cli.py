"""Command-line entry point: run, mms, check and bench subcommands.

Failures exit nonzero and print one JSON object on stderr:
2 config error, 3 solver divergence, 4 invariant failure, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import RunConfig, load_config, serialize
from .constitutive import PressureLaw
from .errors import ConfigError, SnapshotIOError, ViscoflowError
from .grid import Grid
from .initial import build
from .monitors import MonitorCSV, MonitorReport, MonitorSettings, MonitorSuite
from .stepper import Physics, StepConfig, run_simulation

THREADS_ENV = "VISCOFLOW_THREADS"

log = logging.getLogger("viscoflow")


def resolve_threads(configured):
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return configured
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError([f"{THREADS_ENV} = {raw!r} is not an integer"]) from None
    if value < 1:
        raise ConfigError([f"{THREADS_ENV} ≥ 1 violated (got {value})"])
    return value


def physics_from(cfg: RunConfig):
    p = cfg.physics
    return Physics(p.mu, p.lambda_, PressureLaw(p.pressure_a, p.gamma))


def step_config_from(cfg: RunConfig, workers):
    s = cfg.stepping
    return StepConfig(
        dt=s.dt,
        picard_tol=s.picard_tol,
        max_picard=s.max_picard,
        relaxation=s.relaxation,
        dt_min=s.dt_min,
        lame_tol=s.lame_tol,
        lame_max_iter=s.lame_max_iter,
        preconditioner=s.preconditioner,
        ball_radius_guard=s.ball_radius_guard,
        monotone_density=s.monotone_density,
        propagator=s.propagator,
        max_halvings=s.max_halvings,
        workers=workers,
    )


def initial_state_from(cfg: RunConfig):
    g = cfg.grid
    grid = Grid(g.dim, g.resolution(), (g.length,) * g.dim)
    i = cfg.initial
    params = {"mode": i.mode, "velocity": i.velocity, "rho_bar": i.rho_bar, "seed": cfg.run.seed}
    if i.amplitude is not None:
        params["amplitude"] = i.amplitude
    if i.preset == "files":
        params.update(rho_file=i.rho_file, u_file=i.u_file, F_file=i.F_file)
    return build(grid, i.preset, **params)


def run_from_config(cfg: RunConfig, outdir=None, figures=None, threads=None):
    """Execute a configured run; returns the SimulationResult and the
    output directory."""
    from .io import write_snapshot

    workers = threads if threads is not None else resolve_threads(cfg.run.threads)
    out = Path(outdir if outdir is not None else cfg.output.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.used.ini").write_text(serialize(cfg), encoding="utf-8")
    except OSError as exc:
        raise SnapshotIOError(f"cannot prepare output directory {out}: {exc.strerror}", path=str(out)) from exc
    physics = physics_from(cfg)
    initial = initial_state_from(cfg)
    step_cfg = step_config_from(cfg, workers)
    csv_path = out / "monitor.csv"
    m = cfg.monitors
    every = cfg.output.snapshot_every
    write_snapshot(initial, out, 0)
    csv = None
    try:
        suite = None
        if m.enabled:
            try:
                csv = MonitorCSV(csv_path)
            except OSError as exc:
                raise SnapshotIOError(f"cannot open {csv_path}: {exc.strerror}", path=str(csv_path)) from exc
            settings = MonitorSettings(m.q, m.curl_allowance, m.envelope_allowance, m.fnorm_allowance, m.fatal)
            suite = MonitorSuite(initial.grid, physics.law, settings, csv)

        def on_step(index, state):
            if every and index % every == 0:
                write_snapshot(state, out, index)

        result = run_simulation(initial, cfg.stepping.t_final, step_cfg, physics, suite, on_step=on_step)
    finally:
        if csv is not None:
            csv.close()
    nsteps = len(result.steps)
    if not every or nsteps % every:
        write_snapshot(result.final, out, nsteps)
    if (cfg.output.figures if figures is None else figures) and m.enabled:
        from .plotting import plot_monitors

        plot_monitors(csv_path, out / "figures")
    return result, out


def _cmd_run(args):
    cfg = load_config(args.config)
    threads = resolve_threads(args.threads if args.threads is not None else cfg.run.threads)
    result, out = run_from_config(cfg, args.output, False if args.no_figures else None, threads)
    summary = {
        "status": "ok",
        "steps": len(result.steps),
        "t": result.final.t,
        "dt_final": result.dt_final,
        "picard_iterations": result.total_picard,
        "lame_iterations": result.total_lame,
        "output": str(out),
    }
    print(json.dumps(summary))
    return 0


def _cmd_mms(args):
    from .mms import convergence_study, get_case, refinement_levels

    case = get_case(args.case)
    physics = Physics(args.mu, args.lam, PressureLaw(args.a, args.gamma))
    grids, dts = refinement_levels(args.dim, args.n0, args.levels, args.dt0, args.dt_power, args.transverse)
    workers = resolve_threads(args.threads)
    cfg = StepConfig(monotone_density=not args.no_monotone, workers=workers)
    table = convergence_study(case, grids, dts, physics, cfg, t_final=args.t_final)
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SnapshotIOError(f"cannot create {out}: {exc.strerror}", path=str(out)) from exc
    table.write_csv(out / "eoc.csv")
    if not args.no_figures:
        from .plotting import plot_eoc

        plot_eoc(table, out / "eoc.png")
    print((out / "eoc.csv").read_text(encoding="utf-8"), end="")
    return 0


def _cmd_check(args):
    from .io import read_snapshot

    state = read_snapshot(args.snapshot).validate()
    suite = MonitorSuite(state.grid, PressureLaw(args.a, args.gamma), MonitorSettings(q=args.q))
    report = suite.start(state)
    print(",".join(MonitorReport.columns()))
    print(",".join(report.row()))
    return 0


def _cmd_bench(args):
    from .bench import format_table, run_bench, time_ratios

    try:
        sizes = [int(s) for s in args.n.split(",") if s.strip()]
    except ValueError:
        raise ConfigError([f"--n expects comma-separated integers, got {args.n!r}"]) from None
    for n in sizes:
        if n < 8 or n & (n - 1):
            raise ConfigError([f"--n {n}: resolution must be a power of two ≥ 8"])
    rows = run_bench(args.dim, sizes, args.repeats, resolve_threads(args.threads))
    print(format_table(rows))
    for a, b, ratio in time_ratios(rows):
        print(f"lame time ratio n={a}->{b}: {ratio:.3f} (cell ratio {(b / a) ** args.dim:g})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="viscoflow", description="Compressible viscoelastic flow on a periodic box.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log step retries and solver detail")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configured simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("mms", help="manufactured-solution convergence study")
    p.add_argument("--case", default="traveling-wave")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--n0", type=int, default=16)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--dt0", type=float, default=0.1)
    p.add_argument("--dt-power", type=float, default=1.0, help="dt shrinks by 2^power per level")
    p.add_argument("--transverse", type=int, help="fixed resolution on the other axes")
    p.add_argument("--t-final", type=float)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.4)
    p.add_argument("--no-monotone", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", default="mms_output")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_mms)

    p = sub.add_parser("check", help="print the monitor report of a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.4)
    p.add_argument("--q", type=float, default=4.0)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("bench", help="time operators, transport and Lamé solves")
    p.add_argument("--n", default="32,64")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_bench)
    return parser


def _error_line(kind, code, message, **extra):
    payload = {"status": "error", "error": kind, "exit_code": code, "message": message}
    payload.update(extra)
    return json.dumps(payload, ensure_ascii=False)


def run_cli(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(_error_line("ConfigError", exc.exit_code, str(exc), errors=exc.errors), file=sys.stderr)
        return exc.exit_code
    except ViscoflowError as exc:
        extra = {"path": exc.path} if isinstance(exc, SnapshotIOError) else {}
        print(_error_line(type(exc).__name__, exc.exit_code, str(exc), **extra), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(_error_line("IOError", 5, str(exc), path=exc.filename), file=sys.stderr)
        return 5
    except ValueError as exc:
        # parameter validation inside the library (bad case name, dims, ...)
        print(_error_line("ValueError", 2, str(exc)), file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
