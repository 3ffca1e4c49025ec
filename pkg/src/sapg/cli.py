"""Command-line front end.

Subcommands
-----------
solve     run one algorithm and write its trace
compare   run all three algorithms from the same start and write gap series
check     run the verification suites
describe  print the size of the configured instance

Exit codes: 0 success, 1 failed property, 2 usage or config error,
3 numerical breakdown (the partial trace is still written).
"""

import argparse
import csv
import logging
import math
import sys
import time
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import checks
from .config import load_config
from .errors import ConfigError, InvalidGeometry, NumericalBreakdown, SapgError
from .solvers import Algorithm, TraceRow, lyapunov_series, run

log = logging.getLogger("sapg")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BREAKDOWN = 0, 1, 2, 3

BASE_COLUMNS = [
    "k", "f_x", "f_mu_x", "mu_k", "L_k", "a_k",
    "feas_residual_box", "feas_residual_budget", "step_norm", "time_s",
]
OPTIONAL_COLUMNS = ["e_k", "etilde_k", "bound_rhs"]
assert [f.name for f in fields(TraceRow)] == BASE_COLUMNS + OPTIONAL_COLUMNS


def _fmt(v):
    """Shortest round-trip text for a number; blank for missing values."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace(path, rows):
    """Write trace rows as CSV; the optional columns appear only when some row has them."""
    columns = list(BASE_COLUMNS)
    for name in OPTIONAL_COLUMNS:
        if any(getattr(r, name) is not None for r in rows):
            columns.append(name)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in columns])
    return path


def read_trace(path):
    """Read a trace file back into a dict of column name -> float array."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for i, name in enumerate(header):
        out[name] = np.array([float(r[i]) if r[i] != "" else math.nan for r in body])
    return out


def write_gaps(path, ks, gaps):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"gap_{a.value}" for a in gaps])
        for i, k in enumerate(ks):
            w.writerow([str(int(k))] + [_fmt(g[i]) for g in gaps.values()])
    return path


def write_svg(path, ks, gaps, floor=1e-16):
    """Minimal semilog line chart of the gap series."""
    width, height, pad = 640, 400, 60
    colors = {Algorithm.SAPG: "#d62728", Algorithm.SPG: "#1f77b4", Algorithm.SUBGRAD: "#2ca02c"}
    logs = {a: np.log10(np.maximum(g, floor)) for a, g in gaps.items()}
    lo = math.floor(min(float(np.min(v)) for v in logs.values()))
    hi = math.ceil(max(float(np.max(v)) for v in logs.values()))
    hi = max(hi, lo + 1)
    kmax = max(int(ks[-1]), 1)

    def px(k):
        return pad + (width - 2 * pad) * k / kmax

    def py(v):
        return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
    ]
    for e in range(lo, hi + 1):
        y = py(e)
        parts.append(f'<line x1="{pad}" y1="{y:.1f}" x2="{width - pad}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{pad - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for i in range(5):
        k = kmax * i / 4
        parts.append(f'<text x="{px(k):.1f}" y="{height - pad + 16}" text-anchor="middle">{k:g}</text>')
    parts.append(f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle">iteration k</text>')
    parts.append(f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" text-anchor="middle">(f(x^k) - f*) / f*</text>')
    for j, (a, v) in enumerate(logs.items()):
        pts = " ".join(f"{px(k):.1f},{py(u):.1f}" for k, u in zip(ks, v))
        parts.append(f'<polyline fill="none" stroke="{colors[a]}" stroke-width="1.2" points="{pts}"/>')
        parts.append(f'<text x="{width - pad - 70}" y="{pad + 16 + 14 * j}" fill="{colors[a]}">{a.value}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return path


# ---------------------------------------------------------------------------


def _experiment(args):
    cfg = load_config(args.config)
    run_cfg = cfg.run
    overrides = {}
    if getattr(args, "iters", None) is not None:
        overrides["iterations"] = args.iters
    if getattr(args, "stride", None) is not None:
        overrides["stride"] = args.stride
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if overrides:
        run_cfg = replace(run_cfg, **overrides)
        if run_cfg.iterations < 0:
            raise ConfigError("iterations must be nonnegative", key="iterations")
        if run_cfg.stride < 1:
            raise ConfigError("stride must be at least 1", key="stride")
    return replace(cfg, run=run_cfg)


def _problem(cfg):
    from .truss import build_paper_instance

    try:
        return build_paper_instance(cfg.instance)
    except (InvalidGeometry, ValueError) as exc:
        raise ConfigError(f"[instance] {exc}") from None


def cmd_solve(args):
    cfg = _experiment(args)
    algo = Algorithm(args.algo) if args.algo else Algorithm.SAPG
    problem = _problem(cfg)
    out = Path(cfg.run.output_dir)
    path = out / f"trace_{algo.value}.csv"
    t0 = time.perf_counter()
    try:
        trace = run(cfg.solver(algo), problem.objective, problem.feasible, problem.initial_design())
    except NumericalBreakdown as exc:
        rows = exc.trace.rows if exc.trace is not None else []
        write_trace(path, rows)
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        print(f"partial trace ({len(rows)} rows) written to {path}", file=sys.stderr)
        return EXIT_BREAKDOWN
    wall = time.perf_counter() - t0
    write_trace(path, trace.rows)
    last = trace.rows[-1]
    print(f"algorithm   {algo.value}")
    print(f"iterations  {last.k}")
    print(f"final f     {last.f_x:.10g}")
    if cfg.run.reference is not None:
        print(f"final gap   {(last.f_x - cfg.run.reference) / abs(cfg.run.reference):.6e}")
    print(f"wall time   {wall:.2f} s")
    print(f"trace       {path}")
    return EXIT_OK


def cmd_compare(args):
    cfg = _experiment(args)
    problem = _problem(cfg)
    out = Path(cfg.run.output_dir)
    x0 = problem.initial_design()
    traces = {}
    for algo in Algorithm:
        solver = cfg.solver(algo)
        if algo is Algorithm.SAPG and cfg.run.surrogate_iters > 0:
            solver = replace(solver, keep_states=True)
        try:
            traces[algo] = run(solver, problem.objective, problem.feasible, x0)
        except NumericalBreakdown as exc:
            rows = exc.trace.rows if exc.trace is not None else []
            path = write_trace(out / f"trace_{algo.value}.csv", rows)
            print(f"numerical breakdown in {algo.value}: {exc}", file=sys.stderr)
            print(f"partial trace ({len(rows)} rows) written to {path}", file=sys.stderr)
            return EXIT_BREAKDOWN
        log.info("%s done, final f = %.10g", algo.value, traces[algo].rows[-1].f_x)

    candidates = [t.best_value() for t in traces.values()]
    if cfg.run.reference is not None:
        candidates.append(cfg.run.reference)
    xhat, drift = None, None
    if cfg.run.surrogate_iters > 0:
        try:
            xhat, fhat, drift = checks.surrogate_optimum(
                problem, cfg.solver(Algorithm.SAPG), cfg.run.surrogate_iters, stride=max(1, cfg.run.surrogate_iters // 400)
            )
        except NumericalBreakdown as exc:
            print(f"numerical breakdown in the reference run: {exc}", file=sys.stderr)
            return EXIT_BREAKDOWN
        candidates.append(fhat)
        log.info("surrogate f = %.12g (drift over second half %.3e)", fhat, drift)
    fstar = min(candidates)

    sapg = traces[Algorithm.SAPG]
    if xhat is not None:
        diag = lyapunov_series(sapg, problem.objective, xhat, fstar)
        for row in sapg.rows:
            row.e_k, row.etilde_k = float(diag.E[row.k]), float(diag.Etilde[row.k])
            row.bound_rhs = None if row.k == 0 else float(diag.bound_rhs[row.k])
        sapg.states.clear()

    for algo, trace in traces.items():
        write_trace(out / f"trace_{algo.value}.csv", trace.rows)
    ks = sapg.ks
    gaps = {algo: t.relative_gap(fstar) for algo, t in traces.items()}
    write_gaps(out / "gaps.csv", ks, gaps)
    if args.svg:
        write_svg(out / "gaps.svg", ks, gaps)

    lines = [f"reference f* = {fstar!r}"]
    if drift is not None:
        lines.append(f"reference drift = {drift!r}")
    lines += [f"{'algorithm':<10} {'final f':>20} {'final gap':>14} {'best gap':>14}"]
    for algo, trace in traces.items():
        g = gaps[algo]
        lines.append(f"{algo.value:<10} {trace.rows[-1].f_x:>20.12g} {g[-1]:>14.6e} {np.min(g):>14.6e}")
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_check(args):
    cfg = _experiment(args)
    suite = args.suite or "all"
    if suite not in checks.SUITES + ("all",):
        print(f"unknown suite {suite!r}; choose from {', '.join(checks.SUITES + ('all',))}", file=sys.stderr)
        return EXIT_CONFIG
    seed = cfg.run.seed
    selected = checks.SUITES if suite == "all" else (suite,)
    problem = _problem(cfg) if {"grad", "smoothing"} & set(selected) else None
    print(f"# check suite={suite} seed={seed}")
    results = []
    for name in selected:
        if name == "grad":
            results += checks.grad_suite(problem, seed=seed)
        elif name == "smoothing":
            results += checks.smoothing_suite(problem, seed=seed)
        elif name == "project":
            results += checks.projection_suite(seed=seed)
        elif name == "lyapunov":
            results += checks.a_sequence_check()
            results += checks.lyapunov_suite()
            results += checks.smooth_recovery_check()
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"# {len(results) - failed} passed, {failed} failed")
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_describe(args):
    from .truss import describe_instance

    cfg = _experiment(args)
    try:
        info = describe_instance(cfg.instance)
    except (InvalidGeometry, ValueError) as exc:
        raise ConfigError(f"[instance] {exc}") from None
    print(f"nodes            {info['nodes']}")
    print(f"bars (m)         {info['bars']}")
    print(f"free dofs (d)    {info['free_dofs']}")
    print(f"load columns (n) {info['load_columns']}")
    print(f"total length     {info['total_length']:.10g}")
    print(f"x_min * sum(l)   {info['min_volume']:.6g}  (V0 = {cfg.instance.volume_budget:.6g})")
    if info["budget_feasible"]:
        print("budget           feasible")
    else:
        print("warning: x_min * sum(l) exceeds V0; the design set is empty")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="sapg", description="Feasible smoothing accelerated projected gradient experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="experiment file (defaults built in)")
        return sp

    s = common(sub.add_parser("solve", help="run one algorithm"))
    s.add_argument("--algo", choices=[a.value for a in Algorithm], help="algorithm (default sapg)")
    s.add_argument("--out", metavar="DIR")
    s.add_argument("--iters", type=int, metavar="N")
    s.add_argument("--stride", type=int, metavar="N")
    s.add_argument("--seed", type=int, metavar="N")
    s.set_defaults(func=cmd_solve)

    c = common(sub.add_parser("compare", help="run all algorithms and write gap series"))
    c.add_argument("--out", metavar="DIR")
    c.add_argument("--iters", type=int, metavar="N")
    c.add_argument("--stride", type=int, metavar="N")
    c.add_argument("--seed", type=int, metavar="N")
    c.add_argument("--svg", action="store_true", help="also write gaps.svg")
    c.set_defaults(func=cmd_compare)

    k = common(sub.add_parser("check", help="run verification suites"))
    k.add_argument("--suite", metavar="NAME", help=f"one of {', '.join(checks.SUITES)}, all")
    k.add_argument("--seed", type=int, metavar="N")
    k.set_defaults(func=cmd_check)

    d = common(sub.add_parser("describe", help="report instance size"))
    d.set_defaults(func=cmd_describe)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SapgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN if isinstance(exc, ArithmeticError) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
