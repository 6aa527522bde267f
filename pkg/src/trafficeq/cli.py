"""Command-line front end: validate inputs, run a solver, compare against oracles.

Exit codes: 0 success, 1 usage/parse error, 2 validation failure, 3 iteration
budget exhausted (results still written), 4 solver/oracle mismatch beyond
tolerance, 5 brute-force guard tripped.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import block_descent, frank_wolfe, mirror_descent, oracles
from .costs import edge_times
from .exceptions import FormatError, InfeasibleError, OracleGuardError, TrafficEqError
from .network import DemandTable, Network, parse_demands, parse_network, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3
EXIT_MISMATCH = 4
EXIT_GUARD = 5

MODEL_METHODS = {"beckmann": ("fw",), "stable_dynamics": ("md", "bcd")}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _load_inputs(net_path: str, dem_path: str) -> tuple[Network, DemandTable]:
    with open(net_path, encoding="utf-8") as fh:
        net = parse_network(fh)
    with open(dem_path, encoding="utf-8") as fh:
        dem = parse_demands(fh, net)
    return net, dem


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("network", help="network file")
    parser.add_argument("demands", help="demand file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trafficeq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a network/demand pair")
    _add_common(p_val)

    p_solve = sub.add_parser("solve", help="run a solver and write flows, trace, summary")
    _add_common(p_solve)
    p_solve.add_argument("--model", choices=sorted(MODEL_METHODS), required=True)
    p_solve.add_argument("--method", choices=("fw", "md", "bcd"), required=True)
    p_solve.add_argument("--tol", type=float, default=0.01,
                         help="relative for beckmann, absolute duality gap for stable_dynamics")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--max-iter", type=int, default=None,
                         help="iteration/epoch budget (method-specific default)")
    p_solve.add_argument("--variant", choices=mirror_descent.VARIANTS, default="deterministic")
    p_solve.add_argument("--recovery", choices=mirror_descent.RECOVERIES, default="multiplier")
    p_solve.add_argument("--out-dir", required=True)
    p_solve.add_argument("--threads", type=int, default=None,
                         help="per-origin shortest-path parallelism (default: TRAFFICEQ_THREADS or 1)")
    p_solve.add_argument("--no-timing", action="store_true",
                         help="omit wall time and zero the seconds column, for byte-stable outputs")

    p_cmp = sub.add_parser("compare", help="run a solver and its oracle, report the deltas")
    _add_common(p_cmp)
    p_cmp.add_argument("--model", choices=sorted(MODEL_METHODS), required=True)
    p_cmp.add_argument("--method", choices=("fw", "md", "bcd"), required=True)
    p_cmp.add_argument("--rel-tol", type=float, default=1e-2)
    p_cmp.add_argument("--tol", type=float, default=0.01)
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--max-iter", type=int, default=None)
    p_cmp.add_argument("--variant", choices=mirror_descent.VARIANTS, default="deterministic")
    p_cmp.add_argument("--recovery", choices=mirror_descent.RECOVERIES, default="multiplier")
    p_cmp.add_argument("--threads", type=int, default=None)

    p_orc = sub.add_parser("oracle", help="brute-force reference value for a tiny instance")
    _add_common(p_orc)
    p_orc.add_argument("--model", choices=sorted(MODEL_METHODS), required=True)
    p_orc.add_argument("--tol", type=float, default=1e-8)

    return parser


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("TRAFFICEQ_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def cmd_validate(args) -> int:
    net, dem = _load_inputs(args.network, args.demands)
    diag = validate(net, dem)
    for line in diag.messages():
        print(line)
    print("validation:", "pass" if diag.passed else "fail")
    return EXIT_OK if diag.passed else EXIT_INVALID


def _run_solver(args, net, dem, threads):
    """Dispatch on (model, method); returns a uniform summary dict plus files content."""
    model, method = args.model, args.method
    if method not in MODEL_METHODS[model]:
        raise _UsageError(f"method {method!r} does not apply to model {model!r}")
    if model == "beckmann":
        cfg = frank_wolfe.FwConfig(
            rel_tol=args.tol,
            max_iter=args.max_iter if args.max_iter is not None else 10_000,
        )
        res = frank_wolfe.solve_beckmann(net, dem, cfg, threads=threads)
        times = edge_times(net, res.flows)
        return {
            "flows": res.flows,
            "times": times,
            "trace_csv": res.trace.to_csv(include_timing=not args.no_timing),
            "summary": {
                "model": model,
                "method": method,
                "objective": res.objective,
                "gap": res.certified_gap,
                "violation": 0.0,
                "iterations": res.iterations,
                "restarts": 0,
                "seed": args.seed,
            },
            "converged": res.converged,
            "wall_time": res.wall_time,
        }
    if method == "md":
        cfg = mirror_descent.MdConfig(
            iterations=args.max_iter if args.max_iter is not None else 20_000,
            tol=args.tol,
            variant=args.variant,
            recovery=args.recovery,
            seed=args.seed,
        )
        res = mirror_descent.solve_stable_dynamics_md(net, dem, cfg, threads=threads)
        return {
            "flows": res.flows,
            "times": res.times,
            "trace_csv": res.trace.to_csv(),
            "summary": {
                "model": model,
                "method": method,
                "objective": res.objective,
                "gap": res.gap,
                "violation": res.violation,
                "iterations": res.iterations_total,
                "restarts": res.restarts,
                "seed": res.seed,
            },
            "converged": res.converged,
            "wall_time": res.metadata["wall_time"],
        }
    cfg = block_descent.SmoothConfig(
        target_eps=args.tol,
        max_epochs=args.max_iter if args.max_iter is not None else 500_000,
        seed=args.seed,
    )
    res = block_descent.solve_stable_dynamics_bcd(net, dem, cfg, threads=threads)
    return {
        "flows": res.flows,
        "times": res.times,
        "trace_csv": res.trace.to_csv(),
        "summary": {
            "model": model,
            "method": method,
            "objective": res.objective,
            "gap": res.gap,
            "violation": res.violation,
            "iterations": res.epochs,
            "restarts": 0,
            "seed": res.seed,
        },
        "converged": res.converged,
        "wall_time": res.wall_time,
    }


class _UsageError(Exception):
    pass


def _write_outputs(out_dir: str, net, run, no_timing: bool) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["edge\ttail\thead\tflow\ttime"]
    for e in range(net.edge_count):
        rows.append(
            f"{e}\t{int(net.tails[e])}\t{int(net.heads[e])}\t"
            f"{_fmt(run['flows'][e])}\t{_fmt(run['times'][e])}"
        )
    (out / "flows.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    (out / "trace.csv").write_text(run["trace_csv"], encoding="utf-8")
    summary = dict(run["summary"])
    summary["converged"] = run["converged"]
    if not no_timing:
        summary["wall_time"] = run["wall_time"]
    lines = []
    for key, value in summary.items():
        if isinstance(value, float):
            lines.append(f"{key}={_fmt(value)}")
        else:
            lines.append(f"{key}={value}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_solve(args) -> int:
    net, dem = _load_inputs(args.network, args.demands)
    diag = validate(net, dem)
    if not diag.passed:
        for line in diag.messages():
            print(line, file=sys.stderr)
        return EXIT_INVALID
    run = _run_solver(args, net, dem, _threads(args))
    _write_outputs(args.out_dir, net, run, args.no_timing)
    print(f"objective={_fmt(run['summary']['objective'])} gap={_fmt(run['summary']['gap'])}")
    return EXIT_OK if run["converged"] else EXIT_BUDGET


def cmd_compare(args) -> int:
    net, dem = _load_inputs(args.network, args.demands)
    args.no_timing = True
    run = _run_solver(args, net, dem, _threads(args))
    if args.model == "beckmann":
        _, reference = oracles.beckmann_oracle(net, dem)
    else:
        _, reference = oracles.stable_dynamics_oracle(net, dem)
    value = run["summary"]["objective"]
    abs_delta = abs(value - reference)
    rel_delta = abs_delta / max(abs(reference), 1e-30)
    print(f"solver={_fmt(value)} oracle={_fmt(reference)}")
    print(f"abs_delta={_fmt(abs_delta)} rel_delta={_fmt(rel_delta)}")
    return EXIT_OK if rel_delta <= args.rel_tol else EXIT_MISMATCH


def cmd_oracle(args) -> int:
    net, dem = _load_inputs(args.network, args.demands)
    if args.model == "beckmann":
        flows, value = oracles.beckmann_oracle(net, dem, tol=args.tol)
    else:
        flows, value = oracles.stable_dynamics_oracle(net, dem)
    print(f"value={_fmt(value)}")
    for e in range(net.edge_count):
        print(f"edge {e}: flow={_fmt(flows[e])}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_oracle(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OracleGuardError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (_UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrafficEqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
