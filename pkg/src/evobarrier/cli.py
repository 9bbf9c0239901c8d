"""Command-line front end.

Subcommands: analyze, kernel, simulate, rate, diagnose, emit-example.
CSV output uses a header row, "." decimals, LF line endings and
17-significant-digit floats, so files are byte-stable for fixed inputs.
A JSON config file can supply any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import kernel as kernel_mod
from . import simulate as sim_mod
from .cost_graph import parse_model
from .errors import EvobarrierError, ModelSchemaError
from .presets import BUILTIN_NAMES, emit_builtin, make_builtin
from .tree_calculus import full_report, min_coradius

DEFAULT_SEED = 12345
DEFAULT_CAP = 10**7


class CliError(EvobarrierError):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# ---------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def render_csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def rate_csv_text(est: sim_mod.RateEstimate, u_norms=None) -> str:
    header = ["n", "mean_err", "stderr"]
    columns = [est.checkpoints, est.mean_err, est.stderr]
    if u_norms is not None:
        header += ["u0", "u1", "u2", "u3"]
        columns += [u_norms.u0, u_norms.u1, u_norms.u2, u_norms.u3]
    rows = list(zip(*columns))
    return render_csv(header, rows)


def analyze_text(model, report, mcr) -> str:
    rows = [
        (s, report.tilde_V[i], report.V[i])
        for i, s in enumerate(model.states)
    ]
    head = render_csv(["state", "tilde_V", "V"], rows)
    wx, wy = report.barrier_witness if report.barrier_witness else ("", "")
    summary = render_csv(
        ["key", "value"],
        [
            ("c0", report.c0),
            ("theta", report.theta),
            ("energy_barrier", report.energy_barrier),
            ("mCR", mcr),
            ("witness_x", wx),
            ("witness_y", wy),
        ],
    )
    return head + "\n" + summary


_RATE_GP = """set datafile separator ","
set logscale xy
set xlabel "n"
set ylabel "mean sup-norm error"
plot "rate.csv" skip 1 using 1:2 with linespoints title "mean error"
"""

_GRID_GP = """set datafile separator ","
set logscale xy
set xlabel "eps"
set ylabel "spectral gap"
plot "kernel_grid.csv" skip 1 using 1:2 with linespoints title "exact gap", \\
     "kernel_grid.csv" skip 1 using 1:3 with linespoints title "routing bound"
"""


# ---------------------------------------------------------------------------
# argument plumbing


def _add_model_flags(p):
    p.add_argument("--model", help="path to a model JSON file")
    p.add_argument("--example", choices=BUILTIN_NAMES, help="builtin model name")
    p.add_argument("--a", type=float, help="example1 outward cost")
    p.add_argument("--b", type=float, help="example1 inward cost")
    p.add_argument("--N", type=int, help="example1/example3/cloez size")
    p.add_argument("--k", type=float, help="example3 prefactor")
    p.add_argument("--kappa", type=float, help="cloez perturbation strength")


def _add_common_flags(p):
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--config", help="JSON file supplying flags (CLI overrides)")


def build_parser():
    parser = _Parser(prog="evobarrier")
    sub = parser.add_subparsers(dest="command", required=True)

    def new_cmd(name, func):
        p = sub.add_parser(name)
        p.set_defaults(func=func)
        _add_model_flags(p)
        _add_common_flags(p)
        return p

    new_cmd("analyze", cmd_analyze)

    p = new_cmd("kernel", cmd_kernel)
    p.add_argument("--eps", type=float, help="single eps to analyze")
    p.add_argument("--grid", action="store_true", help="sweep the default eps grid")

    p = new_cmd("simulate", cmd_simulate)
    p.add_argument("--A", type=float, required=False, default=0.25)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=10**5)
    p.add_argument("--start", help="initial state (default: first declared)")

    p = new_cmd("rate", cmd_rate)
    p.add_argument("--A", type=float, required=False, default=0.25)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=10**5)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--u-norms", dest="u_norms", action="store_true",
                   help="add noise-term norms of replication 0 (approximate mode)")

    p = new_cmd("diagnose", cmd_diagnose)
    p.add_argument("--A", type=float, required=False, default=0.25)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--grid-ns", dest="grid_ns",
                   help="comma-separated indices (default: log grid 100..100000)")

    p = new_cmd("emit-example", cmd_emit_example)
    p.add_argument("--path", help="output file (default <out>/<example>.json)")
    return parser


def _apply_config(parser, argv, args):
    if not args.config:
        return args
    path = Path(args.config)
    if not path.exists():
        raise CliError(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON config: {exc}") from exc
    if not isinstance(config, dict):
        raise CliError("config must be a JSON object of flag values")
    known = set(vars(args))
    unknown = set(config) - known
    if unknown:
        raise CliError(f"config supplies unknown flags: {sorted(unknown)}")
    parser.set_defaults(**config)
    return parser.parse_args(argv)


def _load_model(args):
    if args.model and args.example:
        raise CliError("use either --model or --example, not both")
    if args.model:
        return parse_model(args.model)
    if args.example:
        return make_builtin(
            args.example, a=args.a, b=args.b, N=args.N, k=args.k, kappa=args.kappa
        )
    raise CliError("one of --model or --example is required")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule(model, args):
    schedule = sim_mod.make_schedule(
        model, args.A, scale=args.scale, kappa=args.kappa or 0.0
    )
    from .tree_calculus import energy_barrier

    barrier = energy_barrier(model.graph)
    if 2.0 * args.A * barrier >= 1.0:
        print(
            f"warning: 2*A*energy_barrier = {fmt(2.0 * args.A * barrier)} >= 1; "
            "almost-sure occupation convergence is not guaranteed for this schedule",
            file=sys.stderr,
        )
    return schedule


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args) -> int:
    model = _load_model(args)
    report = full_report(model.graph, cap=args.cap)
    mcr = min_coradius(model.graph)
    text = analyze_text(model, report, mcr)
    (_out_dir(args) / "analyze.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_kernel(args) -> int:
    model = _load_model(args)
    target = kernel_mod.limit_distribution(model, cap=args.cap)
    if args.grid or args.eps is None:
        grid = kernel_mod.default_eps_grid(model)
        rows = []
        for eps in grid:
            analysis = kernel_mod.analyze_kernel(model, float(eps))
            err = float(np.abs(analysis.pi - target).max())
            rows.append((eps, analysis.gap, analysis.gap_lower_bound, err))
        out = _out_dir(args)
        (out / "kernel_grid.csv").write_text(
            render_csv(["eps", "gap", "bound", "pi_err"], rows), encoding="utf-8"
        )
        (out / "kernel_grid.gp").write_text(_GRID_GP, encoding="utf-8")
        sys.stdout.write(f"wrote {out / 'kernel_grid.csv'}\n")
        return 0
    analysis = kernel_mod.analyze_kernel(model, args.eps)
    err = float(np.abs(analysis.pi - target).max())
    lines = [
        ("eps", fmt(analysis.eps)),
        ("pi", ",".join(fmt(v) for v in analysis.pi)),
        ("gap", fmt(analysis.gap)),
        ("poincare_bound", fmt(analysis.gap_lower_bound)),
        ("pi_err_vs_limit", fmt(err)),
        ("poisson_residual_left", fmt(analysis.poisson_residuals[0])),
        ("poisson_residual_right", fmt(analysis.poisson_residuals[1])),
    ]
    sys.stdout.write("".join(f"{k},{v}\n" for k, v in lines))
    return 0


def cmd_simulate(args) -> int:
    model = _load_model(args)
    schedule = _schedule(model, args)
    series = sim_mod.simulate_chain(
        model, schedule, args.horizon, args.seed, start=args.start
    )
    rows = [
        (int(n), *series.v[i]) for i, n in enumerate(series.checkpoints)
    ]
    text = render_csv(["n", *model.states], rows)
    (_out_dir(args) / "simulate.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_rate(args) -> int:
    model = _load_model(args)
    schedule = _schedule(model, args)
    est = sim_mod.estimate_rate(
        model, schedule, args.horizon, args.reps, args.seed, workers=args.workers
    )
    decomposition = None
    if args.u_norms:
        series = sim_mod.simulate_chain(
            model, schedule, args.horizon, args.seed, keep_path=True
        )
        decomposition = sim_mod.noise_decomposition(
            model, schedule, series, exact=args.horizon <= sim_mod.EXACT_DECOMPOSITION_CAP
        )
    out = _out_dir(args)
    (out / "rate.csv").write_text(rate_csv_text(est, decomposition), encoding="utf-8")
    (out / "rate.gp").write_text(_RATE_GP, encoding="utf-8")
    window = est.checkpoints[est.window]
    sys.stdout.write(
        f"slope,{fmt(est.fit.slope)}\n"
        f"halfwidth95,{fmt(est.fit.halfwidth95)}\n"
        f"window,{int(window[0])}:{int(window[-1])}\n"
    )
    return 0


def cmd_diagnose(args) -> int:
    model = _load_model(args)
    schedule = _schedule(model, args)
    if args.grid_ns:
        ns = [int(s) for s in args.grid_ns.split(",")]
    else:
        ns = sorted({int(round(10 ** (2 + 3 * j / 9))) for j in range(10)})
    diag = sim_mod.q2_diagnostics(model, schedule, ns)
    rows = list(
        zip(
            diag.ns,
            diag.eps,
            diag.q_norm,
            diag.p_step,
            diag.pi_err,
            diag.pi_step,
            diag.update_residual,
        )
    )
    text = render_csv(
        ["n", "eps", "q_norm", "p_step", "pi_err", "pi_step", "update_residual"], rows
    )
    (_out_dir(args) / "diagnose.csv").write_text(text, encoding="utf-8")
    for name, value in diag.exponents.items():
        sys.stdout.write(f"exponent,{name},{'none' if value is None else fmt(value)}\n")
    for name, ok in diag.checks.items():
        sys.stdout.write(f"check,{name},{'pass' if ok else 'fail'}\n")
    return 0


def cmd_emit_example(args) -> int:
    if not args.example:
        raise CliError("emit-example requires --example")
    path = Path(args.path) if args.path else _out_dir(args) / f"{args.example}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    emit_builtin(
        args.example,
        {"a": args.a, "b": args.b, "N": args.N, "k": args.k, "kappa": args.kappa},
        path,
    )
    sys.stdout.write(f"wrote {path}\n")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, argv, args)
        return args.func(args)
    except EvobarrierError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 2
    except OSError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
