"""Command-line front door.

Subcommands: run, check-kernel, compare, sweep, optimize, emit-plot-data.
Machine-readable outputs are written as CSV files under ``--out``; all
diagnostics go to standard error.  Exit codes: 0 success, 1 usage error,
2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import shutil
import sys
from pathlib import Path

from . import csvio, engine, experiments, kernels, scenario
from .errors import GuidesimError, ValidationError

_KERNEL_PARAM_FLAGS = ("dt", "mt", "ct", "x-radius", "mx", "cx", "v")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exception, not sys.exit."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_kernel_args(parser, prefix: str, required: bool, help_role: str) -> None:
    dash = f"--{prefix}" if prefix else "--"
    parser.add_argument(
        f"{dash}kernel" if prefix else "--kernel",
        metavar="FAMILY",
        required=required,
        help=f"{help_role} kernel family ({', '.join(sorted(kernels.FAMILIES))})",
    )
    for flag in _KERNEL_PARAM_FLAGS:
        parser.add_argument(
            f"--{prefix}{flag}" if prefix else f"--{flag}",
            type=float,
            default=None,
            help=argparse.SUPPRESS,
        )


def _collect_kernel(args, prefix: str):
    family = getattr(args, f"{prefix}kernel".replace("-", "_"))
    if family is None:
        return None
    params = {}
    for flag in _KERNEL_PARAM_FLAGS:
        attr = f"{prefix}{flag}".replace("-", "_")
        value = getattr(args, attr)
        if value is not None:
            params[flag.replace("-", "_")] = value
    return kernels.build_kernel(family, params)


def _add_domain_args(parser) -> None:
    parser.add_argument("--x-max", type=float, default=40.0)
    parser.add_argument("--t-max", type=float, default=60.0)
    parser.add_argument("--dx", type=float, default=0.05)
    parser.add_argument("--dt-grid", type=float, default=0.05)


def _domain(args) -> kernels.Domain2D:
    return kernels.Domain2D(args.x_max, args.t_max, args.dx, args.dt_grid)


def _parse_seeds(raw: str) -> list[int]:
    try:
        seeds = [int(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError:
        raise ValidationError(f"--seeds: expected comma-separated integers, got {raw!r}")
    if not seeds:
        raise ValidationError("--seeds: at least one seed is required")
    return seeds


def _parse_grid(raw: str) -> dict[str, list[float]]:
    grid: dict[str, list[float]] = {}
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, values = part.partition("=")
        if not values:
            raise ValidationError(f"--grid: expected name=v1,v2,... in {part!r}")
        try:
            grid[name.strip()] = [float(v) for v in values.split(",")]
        except ValueError:
            raise ValidationError(f"--grid: bad values in {part!r}")
    if not grid:
        raise ValidationError("--grid: empty grid")
    return grid


def _parse_bounds(raw: str) -> dict[str, tuple[float, float]]:
    bounds: dict[str, tuple[float, float]] = {}
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, value = part.partition("=")
        lo, sep, hi = value.partition(":")
        if not sep:
            raise ValidationError(f"--bounds: expected name=lo:hi in {part!r}")
        try:
            bounds[name.strip()] = (float(lo), float(hi))
        except ValueError:
            raise ValidationError(f"--bounds: bad numbers in {part!r}")
    if not bounds:
        raise ValidationError("--bounds: empty bounds")
    return bounds


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> _Parser:
    parser = _Parser(prog="guidesim", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--out", required=True)

    p_check = sub.add_parser("check-kernel", help="admissibility report for a kernel")
    p_check.add_argument("--scenario", help="take the kernel from this scenario file")
    _add_kernel_args(p_check, "", required=False, help_role="inline")
    _add_kernel_args(p_check, "ref-", required=False, help_role="reference")
    _add_domain_args(p_check)
    p_check.add_argument("--out", required=True)

    p_cmp = sub.add_parser("compare", help="equivalence trial between two kernels")
    p_cmp.add_argument("--scenario", required=True)
    _add_kernel_args(p_cmp, "a-", required=True, help_role="first")
    _add_kernel_args(p_cmp, "b-", required=True, help_role="second")
    p_cmp.add_argument("--seeds", required=True)
    p_cmp.add_argument(
        "--match-integral",
        action="store_true",
        help="solve kernel B's missing scale parameter to match A's integral",
    )
    p_cmp.add_argument(
        "--allow-divergent",
        action="store_true",
        help="permit spatially uniform kernels (demonstration mode)",
    )
    _add_domain_args(p_cmp)
    p_cmp.add_argument("--jobs", type=int, default=1)
    p_cmp.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", help="grid evaluation of a kernel family")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--family", required=True)
    p_sweep.add_argument("--grid", required=True, help="e.g. 'ct=1,5,25;cx=2,4'")
    p_sweep.add_argument("--seeds", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", required=True)

    p_opt = sub.add_parser("optimize", help="minimize mean ATT over a parameter box")
    p_opt.add_argument("--scenario", required=True)
    p_opt.add_argument("--family", required=True)
    p_opt.add_argument("--bounds", required=True, help="e.g. 'cx=0.5:24;ct=0.5:24'")
    p_opt.add_argument("--budget", type=int, required=True)
    p_opt.add_argument("--seeds", required=True)
    p_opt.add_argument("--jobs", type=int, default=1)
    p_opt.add_argument("--out", required=True)

    p_plot = sub.add_parser(
        "emit-plot-data", help="consolidate run outputs into plot-ready CSVs"
    )
    p_plot.add_argument("run_dirs", nargs="+", metavar="RUN_DIR")
    p_plot.add_argument("--out", required=True)

    return parser


def _cmd_run(args) -> int:
    cfg = scenario.load_scenario(args.scenario)
    out = _out_dir(args)
    metrics, ts = engine.run(cfg)
    engine.write_metrics_csv(metrics, out / "metrics.csv")
    engine.write_timeseries_csv(ts, out / "timeseries.csv")
    shutil.copyfile(args.scenario, out / "scenario_used.cfg")
    return 0


def _cmd_check_kernel(args) -> int:
    if args.scenario:
        kernel = scenario.load_scenario(args.scenario).kernel
    else:
        kernel = _collect_kernel(args, "")
        if kernel is None:
            raise ValidationError("check-kernel needs --scenario or --kernel")
    reference = _collect_kernel(args, "ref_")
    if reference is None:
        reference = kernels.NaturalSpaceTime(cx=1.0, ct=1.0)
    dom = _domain(args)
    report = kernels.check_principles(kernel, reference, dom)
    out = _out_dir(args)
    csvio.write_csv(
        out / "kernel_report.csv",
        ["kernel", "principle1", "integral", "phase_distance_to_reference"],
        [[
            kernel.family,
            report.principle1.value,
            report.principle1_integral,
            report.principle2_distance,
        ]],
    )
    return 0


def _cmd_compare(args) -> int:
    cfg = scenario.load_scenario(args.scenario)
    dom = _domain(args)
    kernel_a = _collect_kernel(args, "a_")
    seeds = _parse_seeds(args.seeds)
    if args.match_integral:
        family = getattr(args, "b_kernel")
        fixed = {}
        for flag in _KERNEL_PARAM_FLAGS:
            value = getattr(args, f"b_{flag}".replace("-", "_"))
            if value is not None:
                fixed[flag.replace("-", "_")] = value
        target = kernels.total_influence(kernel_a, dom)
        kernel_b = experiments.match_integral(family, fixed, target, dom)
    else:
        kernel_b = _collect_kernel(args, "b_")
    report = experiments.equivalence_trial(
        cfg, kernel_a, kernel_b, seeds, dom,
        allow_divergent=args.allow_divergent, jobs=args.jobs,
    )
    out = _out_dir(args)
    csvio.write_csv(
        out / "equivalence.csv",
        ["integral_1", "integral_2", "integral_rel_diff", "eta_1", "eta_2",
         "eta_rel_diff", "phase_distance", "seeds_used"],
        [[
            report.integral_1, report.integral_2, report.integral_rel_diff,
            report.eta_1, report.eta_2, report.eta_rel_diff,
            report.phase_distance, report.seeds_used,
        ]],
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = scenario.load_scenario(args.scenario)
    grid = _parse_grid(args.grid)
    rows = experiments.sweep(cfg, args.family, grid, _parse_seeds(args.seeds), args.jobs)
    out = _out_dir(args)
    names = list(grid)
    csvio.write_csv(
        out / "sweep.csv",
        names + ["mean_att", "std_att", "mean_oscillation"],
        [
            [row.params[n] for n in names]
            + [row.mean_att, row.std_att, row.mean_oscillation]
            for row in rows
        ],
    )
    return 0


def _cmd_optimize(args) -> int:
    cfg = scenario.load_scenario(args.scenario)
    bounds = _parse_bounds(args.bounds)
    result = experiments.optimize(
        cfg, args.family, bounds, args.budget, _parse_seeds(args.seeds), args.jobs
    )
    out = _out_dir(args)
    names = list(bounds)
    csvio.write_csv(
        out / "optimize.csv",
        ["eval"] + names + ["eta"],
        [
            [i] + [params[n] for n in names] + [eta]
            for i, (params, eta) in enumerate(result.trace)
        ],
    )
    print(
        f"optimize: best {result.best_params} eta={result.best_eta:.6f} "
        f"({result.evaluations} evaluations)",
        file=sys.stderr,
    )
    return 0


def emit_plot_data(run_dirs: list[str], out_dir) -> None:
    """Align windowed ATT across runs and grid the first run's kernel."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    labels: list[str] = []
    series: list[list[str]] = []
    for run_dir in run_dirs:
        ts_path = Path(run_dir) / "timeseries.csv"
        if not ts_path.exists():
            raise ValidationError(f"{run_dir}: missing timeseries.csv")
        try:
            header, rows = csvio.read_csv(ts_path)
            att_idx = header.index("att_window")
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{ts_path}: malformed timeseries ({exc})")
        label = Path(run_dir).name or str(run_dir)
        while label in labels:
            label += "_"
        labels.append(label)
        series.append([row[att_idx] for row in rows])

    shortest = min(len(s) for s in series)
    if any(len(s) != shortest for s in series):
        print(
            f"emit-plot-data: runs differ in length; truncating to {shortest} steps",
            file=sys.stderr,
        )
    csvio.write_csv(
        out / "att_compare.csv",
        ["step"] + labels,
        [[i] + [s[i] for s in series] for i in range(shortest)],
    )

    cfg_path = Path(run_dirs[0]) / "scenario_used.cfg"
    if not cfg_path.exists():
        raise ValidationError(f"{run_dirs[0]}: missing scenario_used.cfg")
    kernel = scenario.parse_scenario(
        cfg_path.read_text(encoding="utf-8"), base_dir=cfg_path.parent
    ).kernel
    x_scale = getattr(kernel, "cx", None) or getattr(kernel, "x_radius", None) or 12.5
    t_scale = getattr(kernel, "ct", None) or getattr(kernel, "dt", None) or 12.5
    x_max, t_max, n = 4.0 * x_scale, 4.0 * t_scale, 81
    rows = []
    for i in range(n):
        x = i * x_max / (n - 1)
        for j in range(n):
            t = j * t_max / (n - 1)
            rows.append([x, t, kernels.evaluate(kernel, x, t)])
    csvio.write_csv(out / "kernel_heatmap.csv", ["x", "t", "p"], rows)


def _cmd_emit_plot_data(args) -> int:
    emit_plot_data(args.run_dirs, args.out)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "check-kernel": _cmd_check_kernel,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "optimize": _cmd_optimize,
    "emit-plot-data": _cmd_emit_plot_data,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage())
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"guidesim: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"guidesim: {exc}", file=sys.stderr)
        return 2
    except GuidesimError as exc:
        print(f"guidesim: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # unexpected runtime failure
        print(f"guidesim: internal error: {exc}", file=sys.stderr)
        return 3


def main(argv: list[str] | None = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
