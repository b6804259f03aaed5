"""Command-line entry point.

Exit codes: 0 equilibrium found (or check passed), 1 no equilibrium (or
check failed), 2 a resource limit was hit, 3 unreadable or malformed input,
4 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .adaptive import (DEFAULT_ALPHA0, DEFAULT_FACTOR, DEFAULT_TOL, SearchStatus, Variant,
                       best_alpha)
from .bnc import InvalidApproximation, Limits, Status, Tolerances, check_ne, solve
from .flowgame import (FlowError, GenParams, check_implementation, decode, dump_flow, encode,
                       flow_from_dict, generate, is_flow_document)
from .model import Game, ModelError, game_from_dict
from .oracle import Oracle, OracleError
from .report import write_report

EXIT_NE, EXIT_NO_NE, EXIT_LIMIT, EXIT_INPUT, EXIT_USAGE = 0, 1, 2, 3, 4
DEFAULTS = Tolerances()


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _numbers(text: str) -> float | list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or a comma-separated list: {text!r}")
    return values[0] if len(values) == 1 else values


def _positive(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _load(path: str) -> tuple[Game, Any]:
    """The game in ``path`` plus the flow instance when the file holds one."""
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not a JSON document: {exc}") from None
    try:
        if is_flow_document(doc):
            flow = flow_from_dict(doc)
            return encode(flow), flow
        return game_from_dict(doc), None
    except (ModelError, FlowError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(doc: dict[str, Any], out: str | None) -> None:
    text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, "utf-8")


def _tolerances(args: argparse.Namespace) -> Tolerances:
    return Tolerances(ne=args.tol_ne, prune=args.tol_prune, cut=args.tol_cut)


def _limits(args: argparse.Namespace) -> Limits:
    return Limits(time_s=args.time_limit, nodes=args.node_limit, memory_mb=args.memory_limit)


def cmd_solve(args: argparse.Namespace) -> int:
    game, flow = _load(args.instance)
    try:
        res = solve(game, args.alpha, args.beta, _limits(args), tolerances=_tolerances(args))
    except InvalidApproximation as exc:
        raise UsageError(str(exc)) from None
    doc = {"instance": Path(args.instance).name, **res.to_dict(not args.no_timing, args.cuts)}
    if flow is not None and res.witness is not None:
        d = decode(flow, res.witness)
        doc["flow"] = {"flows": [list(f) for f in d.flows], "active": list(d.active),
                       "prices": list(d.prices)}
    _emit(doc, args.out)
    if res.status is Status.NE_FOUND:
        return EXIT_NE
    if res.status is Status.NO_NE:
        return EXIT_NO_NE
    return EXIT_LIMIT


def cmd_best_alpha(args: argparse.Namespace) -> int:
    game, _ = _load(args.instance)
    res = best_alpha(game, args.variant, args.alpha0, args.factor, args.tol,
                     limits=_limits(args), tolerances=_tolerances(args))
    doc = {"instance": Path(args.instance).name, **res.to_dict(not args.no_timing)}
    _emit(doc, args.out)
    if args.trace:
        Path(args.trace).write_text(res.trace_csv(not args.no_timing), "utf-8")
    if res.status is SearchStatus.CONVERGED:
        return EXIT_NE
    if res.status is SearchStatus.UNBOUNDED:
        return EXIT_NO_NE
    return EXIT_LIMIT


def cmd_generate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        params = GenParams(args.nodes, args.edges, args.players,
                           (args.demand_min, args.demand_max), (args.mu_min, args.mu_max),
                           (args.capacity_min, args.capacity_max), args.seed + k,
                           args.common_source, args.common_utility)
        try:
            inst = generate(params)
        except FlowError as exc:
            raise UsageError(str(exc)) from None
        (out / f"flow-{k:03d}.json").write_text(dump_flow(inst), "utf-8")
    return EXIT_NE


def cmd_verify(args: argparse.Namespace) -> int:
    game, flow = _load(args.instance)
    if args.profile is not None:
        x = np.asarray(args.profile if isinstance(args.profile, list) else [args.profile])
        if len(x) != game.n_vars:
            raise UsageError(f"profile needs {game.n_vars} values, got {len(x)}")
        try:
            chk = check_ne(game, x, args.alpha, args.beta, args.tol_ne)
        except InvalidApproximation as exc:
            raise UsageError(str(exc)) from None
        doc: dict[str, Any] = {"is_ne": chk.is_ne, "violators": chk.violators,
                               "pi": [float(v) for v in chk.pi],
                               "phi": [float(v) for v in chk.phi]}
        ok = chk.is_ne
        if flow is not None:
            d = decode(flow, x)
            impl = check_implementation(flow, d.flows, d.prices)
            doc["implementation"] = {
                "load_within_target": impl.load_within_target,
                "equilibrium": impl.equilibrium,
                "slack_edges_free": impl.slack_edges_free,
                "prices_bounded": impl.prices_bounded,
            }
        _emit(doc, args.out)
        return EXIT_NE if ok else EXIT_NO_NE

    try:
        oracle = Oracle(game)
        expected = oracle.ne_set(args.alpha, args.beta)
    except OracleError as exc:
        raise UsageError(f"cannot enumerate this game: {exc}") from None
    try:
        res = solve(game, args.alpha, args.beta, _limits(args), tolerances=_tolerances(args))
    except InvalidApproximation as exc:
        raise UsageError(str(exc)) from None
    if res.status.is_limit:
        agree = False
    elif res.status is Status.NE_FOUND:
        agree = tuple(int(round(v)) for v in res.witness) in set(expected)
    else:
        agree = not expected
    _emit({"agree": agree, "solver": res.to_dict(not args.no_timing),
           "oracle": oracle.report(args.alpha, args.beta).to_dict()}, args.out)
    if res.status.is_limit:
        return EXIT_LIMIT
    return EXIT_NE if agree else EXIT_NO_NE


def cmd_report(args: argparse.Namespace) -> int:
    results = Path(args.results)
    if not results.is_dir():
        raise InputError(f"{results} is not a directory")
    ecdf, hist = write_report(results, args.out or results, args.measure)
    print(ecdf)
    print(hist)
    return EXIT_NE


def _common(p: argparse.ArgumentParser, approximation: bool = True) -> None:
    p.add_argument("--instance", required=True, help="game or flow-instance JSON document")
    if approximation:
        p.add_argument("--alpha", type=_numbers, default=1.0,
                       help="multiplicative factor, scalar or per-player list (default 1)")
        p.add_argument("--beta", type=_numbers, default=0.0,
                       help="additive slack, scalar or per-player list (default 0)")
    p.add_argument("--time-limit", type=_positive, default=3600.0,
                   help="wall-clock seconds (default 3600)")
    p.add_argument("--node-limit", type=int, default=None, help="node budget (default none)")
    p.add_argument("--memory-limit", type=_positive, default=None,
                   help="advisory peak-RSS cap in MB, checked between nodes "
                        "(default none; the reference setting is 3072)")
    p.add_argument("--tol-ne", type=float, default=DEFAULTS.ne,
                   help=f"slack in the equilibrium test (default {DEFAULTS.ne:g}, "
                        "the reference setting)")
    p.add_argument("--tol-prune", type=float, default=DEFAULTS.prune,
                   help=f"prune nodes whose LP value exceeds this (default {DEFAULTS.prune:g}, "
                        "the reference setting)")
    p.add_argument("--tol-cut", type=float, default=DEFAULTS.cut,
                   help=f"minimum normalized cut violation (default {DEFAULTS.cut:g}, "
                        "the reference setting)")
    p.add_argument("--seed", type=int, default=0,
                   help="accepted for uniformity; the solver is deterministic (default 0)")
    p.add_argument("--out", default=None, help="write the result document here instead of stdout")
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall-clock times so documents are byte-identical across runs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nashbc", description="Branch-and-cut for approximate pure equilibria "
                     "of integer games.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="search for an (alpha, beta)-NE")
    _common(p)
    p.add_argument("--cuts", action="store_true", help="include every added cut in the document")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("best-alpha", help="bisection for the smallest uniform alpha")
    _common(p, approximation=False)
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.REUSE_CUTS.value,
                   help="multitree, reuse-tree or reuse-cuts (default reuse-cuts)")
    p.add_argument("--alpha0", type=float, default=DEFAULT_ALPHA0,
                   help=f"first upper-bound probe (default {DEFAULT_ALPHA0:g})")
    p.add_argument("--factor", type=float, default=DEFAULT_FACTOR,
                   help=f"growth factor for the upper bound (default {DEFAULT_FACTOR:g})")
    p.add_argument("--tol", type=_positive, default=DEFAULT_TOL,
                   help=f"final interval width (default {DEFAULT_TOL:g})")
    p.add_argument("--trace", default=None, help="write the per-probe CSV trace here")
    p.set_defaults(func=cmd_best_alpha)

    for name in ("generate", "gen"):
        p = sub.add_parser(name, help="write random flow-pricing instances")
        p.add_argument("--count", type=int, default=1, help="number of instances (default 1)")
        p.add_argument("--nodes", type=int, default=4, help="graph nodes (default 4)")
        p.add_argument("--edges", type=int, default=6, help="graph edges (default 6)")
        p.add_argument("--players", type=int, default=2, help="flow players (default 2)")
        p.add_argument("--demand-min", type=int, default=1)
        p.add_argument("--demand-max", type=int, default=2)
        p.add_argument("--mu-min", type=int, default=0)
        p.add_argument("--mu-max", type=int, default=5)
        p.add_argument("--capacity-min", type=int, default=1)
        p.add_argument("--capacity-max", type=int, default=2)
        p.add_argument("--common-source", action="store_true", help="one source for all players")
        p.add_argument("--common-utility", action="store_true", help="one utility vector for all")
        p.add_argument("--seed", type=int, default=0, help="seed of the first instance (default 0)")
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="check a profile, or cross-check the solver by enumeration")
    _common(p)
    p.add_argument("--profile", type=_numbers, default=None,
                   help="comma-separated strategy profile to test")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="ECDF and alpha-histogram CSVs from result documents")
    p.add_argument("--results", required=True, help="directory of result JSON documents")
    p.add_argument("--out", default=None, help="output directory (default: the results directory)")
    p.add_argument("--measure", choices=["time", "nodes"], default="time",
                   help="ECDF measure (default time)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"nashbc: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"nashbc: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
