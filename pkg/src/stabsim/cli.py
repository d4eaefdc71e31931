"""Command-line front end.

Exit codes: 0 success (bounds hold), 1 usage, 2 validation, 3 bound
violated, 4 budget exceeded.
"""

import argparse
import csv
import io
import json
import sys

from . import analysis
from .analysis import (BudgetExceeded, INF, PREDICATES, closure_check,
                       did_worst_case, fmt_time, speculation_report, starvation_check,
                       sync_worst_case)
from .clock import ClockError
from .daemons import DaemonError, SplitMix64, parse_daemon
from .engine import StepError, run
from .protocols import EmssParams, ParameterError, make_dijkstra, make_emss, make_protocol
from .topology import (EnumerationLimitError, GraphError, diameter, generate,
                       largest_hole, cyclomatic_characteristic, parse_graph_spec)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_BOUND, EXIT_BUDGET = 0, 1, 2, 3, 4
CSV_FIELDS = ["name", "n", "diam", "stab_time", "method", "bound", "bound_satisfied"]


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def ceil_half(x):
    return -(-x // 2)


def sync_bound(p):
    """The synchronous bound checked by ``verify``: ceil(diam/2) for EMSS,
    n for Dijkstra's ring, none for plain unison."""
    if p.name == "emss":
        return ceil_half(diameter(p.graph))
    if p.name == "dijkstra":
        return p.n
    return None


def bound_holds(measured, bound):
    if measured is None or measured == INF:
        return False
    return bound is None or measured <= bound


def csv_row(report, bound):
    return {
        "name": report.protocol,
        "n": report.graph["n"],
        "diam": report.graph["diam"],
        "stab_time": fmt_time(report.stab_time),
        "method": report.method,
        "bound": "finite" if bound is None else bound,
        "bound_satisfied": str(bound_holds(report.stab_time, bound)).lower(),
    }


def to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def emit(text, path=None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_protocol(args, g):
    return make_protocol(args.protocol, g, alpha=args.alpha, k=args.k)


# --------------------------------------------------------------- commands

def cmd_params(args):
    g = parse_graph_spec(args.graph)
    ep = EmssParams(g.n, diameter(g))
    out = {"n": g.n, "diam": ep.diam}
    try:
        out["trou"] = largest_hole(g, args.limit)
        out["cyclo"] = cyclomatic_characteristic(g, args.limit)
    except EnumerationLimitError:
        out["trou"] = out["cyclo"] = f"<= {g.n}"
    out.update(alpha=ep.alpha, K=ep.k, targets=list(ep.targets))
    emit(json.dumps(out) + "\n", args.out)
    return EXIT_OK


def initial_config(p, spec):
    if spec == "legitimate":
        return (0,) * p.n
    kind, _, arg = spec.partition(":")
    if kind == "uniform-random":
        rng = SplitMix64(int(arg))
        return tuple(p.values[rng.below(len(p.values))] for _ in range(p.n))
    try:
        config = tuple(int(x) for x in spec.split(","))
    except ValueError:
        raise StepError(f"cannot parse initial configuration {spec!r}") from None
    return p.check_config(config)


def cmd_run(args):
    g = parse_graph_spec(args.graph)
    p = build_protocol(args, g)
    config = initial_config(p, args.init)
    daemon = parse_daemon(args.daemon)
    stop = None
    if args.until:
        pred = PREDICATES[args.until]
        stop = lambda c: pred(p, c)  # noqa: E731
    trace = run(p, config, daemon, args.max_steps, stop_when=stop)
    emit(trace.to_jsonl(), args.out)
    return EXIT_OK


def _sync_report(p, args):
    return sync_worst_case(p, mode=args.mode, samples=args.samples, seed=args.seed,
                           budget=args.budget)


def cmd_verify(args):
    g = parse_graph_spec(args.graph)
    p = build_protocol(args, g)
    report = _sync_report(p, args)
    bound = sync_bound(p)
    ok = bound_holds(report.stab_time, bound)
    reports, rows = [report], [csv_row(report, bound)]
    if args.did:
        did = did_worst_case(p, budget=args.budget)
        reports.append(did)
        rows.append(csv_row(did, None))
        ok = ok and did.stab_time != INF
    if args.format == "csv":
        emit(to_csv(rows), args.out)
    elif args.format == "json":
        payload = [r.to_dict() for r in reports]
        payload[0]["bound"] = bound
        payload[0]["bound_satisfied"] = bound_holds(report.stab_time, bound)
        emit(json.dumps(payload, sort_keys=True) + "\n", args.out)
    else:
        emit("".join(verify_lines(p, reports, bound)), args.out)
    if report.stab_time is None:
        return EXIT_BUDGET
    return EXIT_OK if ok else EXIT_BOUND


def verify_lines(p, reports, bound):
    sync = reports[0]
    measured = fmt_time(sync.stab_time)
    if bound is None:
        relation = f"measured {measured} (bound: finite)"
    elif sync.stab_time == bound and sync.method == "exhaustive":
        relation = f"measured {measured} == bound {bound}"
    elif bound_holds(sync.stab_time, bound):
        relation = f"measured {measured} <= bound {bound}"
    else:
        relation = f"measured {measured} > bound {bound}"
    yield f"protocol   {p.name}\n"
    yield f"graph      n={sync.graph['n']} diam={sync.graph['diam']}\n"
    yield f"sync       {relation}  [{sync.method}, {sync.configs} configs]\n"
    yield f"witness    {list(sync.witness)}\n"
    for r in reports[1:]:
        yield f"did        W_max {fmt_time(r.stab_time)}  [game_search, target {r.extra['target_size']}]\n"


def cmd_model_check(args):
    g = parse_graph_spec(args.graph)
    p = build_protocol(args, g)
    pred = PREDICATES[args.pred] if args.pred else analysis.default_predicate(p)
    space = analysis.StateSpace(p, args.budget)
    closure = closure_check(p, pred, space=space)
    did = did_worst_case(p, pred, space=space)
    starve = starvation_check(p, did.target, space=space)
    out = {
        "protocol": p.name,
        "predicate": pred.name,
        "configs": space.size,
        "closed": closure.closed,
        "closure_counterexample": [list(x) if isinstance(x, tuple) else x
                                   for x in closure.counterexample] if closure.counterexample else None,
        "did": did.to_dict(),
        "starvation_free": starve.ok,
        "starvation": {"node": starve.node, "lasso": starve.lasso} if not starve.ok else None,
    }
    emit(json.dumps(out, sort_keys=True, default=list) + "\n", args.out)
    ok = closure.closed and did.stab_time != INF and starve.ok
    return EXIT_OK if ok else EXIT_BOUND


def parse_family(spec):
    """``ring:3..5`` -> [ring(3), ring(4), ring(5)]; a single size also works."""
    kind, _, sizes = spec.partition(":")
    lo, sep, hi = sizes.partition("..")
    try:
        lo = int(lo)
        hi = int(hi) if sep else lo
    except ValueError:
        raise UsageError(f"bad family {spec!r}; expected e.g. ring:3..6") from None
    return [(f"{kind}:{s}", generate(kind, s)) for s in range(lo, hi + 1)]


def _sync_auto(p, args):
    try:
        return sync_worst_case(p, "exhaustive", budget=args.budget)
    except BudgetExceeded:
        return sync_worst_case(p, "sampled", samples=args.samples, seed=args.seed)


def cmd_compare(args):
    rows, specs, table = [], [], []
    for name, g in parse_family(args.family):
        emss = make_emss(g)
        e_sync = _sync_auto(emss, args)
        rows.append(csv_row(e_sync, sync_bound(emss)))
        try:
            e_did = did_worst_case(emss, budget=args.did_budget)
            rows.append(csv_row(e_did, None))
        except BudgetExceeded:
            e_did = analysis.StabilizationReport(
                protocol="emss", graph=e_sync.graph, daemon="distributed_unfair",
                stab_time=None, method="skipped(budget)")
        spec = speculation_report(e_did, e_sync)
        specs.append(spec.to_dict())
        try:
            dij = make_dijkstra(g)
        except GraphError:
            d_sync = None
        else:
            d_sync = _sync_auto(dij, args)
            rows.append(csv_row(d_sync, sync_bound(dij)))
        table.append((name, g.n, e_sync.graph["diam"], fmt_time(e_sync.stab_time),
                      ceil_half(e_sync.graph["diam"]),
                      fmt_time(d_sync.stab_time) if d_sync else "n/a",
                      fmt_time(e_did.stab_time), spec.to_dict()["ratio"]))
    if args.format == "csv":
        emit(to_csv(rows), args.out)
    elif args.format == "json":
        emit(json.dumps({"rows": rows, "speculation": specs}, sort_keys=True) + "\n", args.out)
    else:
        head = ("graph", "n", "diam", "emss_ds", "ceil(d/2)", "dijkstra_ds", "emss_did", "did/ds")
        lines = [head] + [tuple(str(x) for x in r) for r in table]
        widths = [max(len(r[i]) for r in lines) for i in range(len(head))]
        emit("".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) + "\n" for r in lines),
             args.out)
    return EXIT_OK


# ----------------------------------------------------------------- parser

def add_protocol_args(sp):
    sp.add_argument("--graph", required=True, help="ring:4, line:2, grid:2x3, ... or edge-list file")
    sp.add_argument("--protocol", default="emss", choices=["emss", "unison", "dijkstra"])
    sp.add_argument("--alpha", type=int, help="unison: initial tail length")
    sp.add_argument("--k", type=int, help="unison: clock size; dijkstra: number of states")
    sp.add_argument("--out", help="write output to this file instead of stdout")


def make_parser():
    parser = Parser(prog="stabsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    sp = sub.add_parser("params", help="topology constants and EMSS parameters")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--limit", type=int, default=12, help="enumeration limit for trou/cyclo")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("run", help="simulate one execution, JSONL trace")
    add_protocol_args(sp)
    sp.add_argument("--daemon", default="sync", help="sync | random:<seed> | scripted:<file> | minmax:<min|max>")
    sp.add_argument("--init", default="legitimate",
                    help="comma-separated registers, uniform-random:<seed> or legitimate")
    sp.add_argument("--max-steps", type=int, default=100)
    sp.add_argument("--until", choices=sorted(PREDICATES), help="stop once this predicate holds")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify", help="worst-case stabilization time against the bounds")
    add_protocol_args(sp)
    sp.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=analysis.DEFAULT_CONFIG_BUDGET)
    sp.add_argument("--did", action="store_true", help="also run the unfair-daemon game search")
    sp.add_argument("--format", choices=["text", "json", "csv"], default="text")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("model-check", help="closure, unfair-daemon convergence and starvation")
    add_protocol_args(sp)
    sp.add_argument("--pred", choices=sorted(PREDICATES))
    sp.add_argument("--budget", type=int, default=analysis.DEFAULT_CONFIG_BUDGET)
    sp.set_defaults(func=cmd_model_check)

    sp = sub.add_parser("compare", help="EMSS vs Dijkstra and did/ds ratio over a graph family")
    sp.add_argument("--family", required=True, help="e.g. ring:3..5")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=analysis.DEFAULT_CONFIG_BUDGET)
    sp.add_argument("--did-budget", type=int, default=50_000)
    sp.add_argument("--format", choices=["text", "json", "csv"], default="text")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return e.code
    try:
        return args.func(args)
    except UsageError as e:
        print(f"stabsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as e:
        print(f"stabsim: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (GraphError, ParameterError, ClockError, StepError, DaemonError, OSError) as e:
        print(f"stabsim: invalid input: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
