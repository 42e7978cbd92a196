"""Command line front end.

Exit status: 0 on success, 1 on invalid input (bad flags, JSON, parameter
ranges), 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import bounds, graphio
from .dist import LabelDistribution, ScaledFamily, edge_weights, make_scaled_discrete, renyi_half
from .errors import InfiniteDivergenceError, ValidationError
from .generate import Assignment, censored_model, generate_wsbm, scaled_model, submatrix_model
from .ml import (
    EXACT_CLASS_CAP,
    exact_ml,
    hamming_mod_perm,
    local_search_ml,
    num_equivalence_classes,
    score,
    swap_certificate,
)
from .montecarlo import (
    DEFAULT_RESTARTS,
    TrialConfig,
    load_grid,
    rows_to_csv,
    sweep,
    worker_count,
)
from .svgplot import failure_plot


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _num(x: float, digits: int = 6) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{digits}f")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wsbm", description="Weighted stochastic block model experiments.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def model_flags(p, gaussian=True):
        p.add_argument("--K", type=int, default=2)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--a", type=_floats)
        p.add_argument("--b", type=_floats)
        p.add_argument("--p", type=float)
        p.add_argument("--q1", type=float)
        p.add_argument("--q2", type=float)
        if gaussian:
            p.add_argument("--mu", type=float)
            p.add_argument("--sigma", type=float, default=1.0)

    def run_flags(p):
        p.add_argument("--trials", type=int)
        p.add_argument("--solver", choices=["exact", "local_search", "certificate_only"], default="exact")
        p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="CSV path for the Monte Carlo row")

    g = sub.add_parser("gen", help="sample a graph and write it with a JSON sidecar")
    model_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    m = sub.add_parser("ml", help="recover communities of a stored graph")
    m.add_argument("--graph", required=True)
    m.add_argument("--solver", choices=["exact", "local_search"])
    m.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", help="write the result as JSON")

    r = sub.add_parser("renyi", help="Renyi divergence of order 1/2")
    r.add_argument("--discrete-p", type=_floats)
    r.add_argument("--discrete-q", type=_floats)
    r.add_argument("--a", type=_floats)
    r.add_argument("--b", type=_floats)
    r.add_argument("--n", type=int)
    r.add_argument("--mu", type=float)
    r.add_argument("--sigma", type=float, default=1.0)

    b = sub.add_parser("bound", help="evaluate a failure-probability bound")
    b.add_argument("--thm", choices=["1", "K"], default="1")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--K", type=int, default=2)
    b.add_argument("--I", type=float, required=True)

    s = sub.add_parser("sweep", help="run a JSON grid of Monte Carlo settings")
    s.add_argument("--grid", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--svg")

    c = sub.add_parser("censored", help="censored block model statistic (optionally simulate)")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--q1", type=float, required=True)
    c.add_argument("--q2", type=float, required=True)
    run_flags(c)

    x = sub.add_parser("submatrix", help="square submatrix localization statistic (optionally simulate)")
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--K", type=int, default=2)
    x.add_argument("--mu", type=float, required=True)
    x.add_argument("--sigma", type=float, default=1.0)
    run_flags(x)
    return parser


def _spec_from_flags(args):
    if args.a is not None or args.b is not None:
        if args.a is None or args.b is None:
            raise UsageError("--a and --b must be given together")
        fam = ScaledFamily(args.a, args.b, args.n)
        return scaled_model(fam, args.K)
    if args.p is not None:
        if args.q1 is None or args.q2 is None:
            raise UsageError("--p needs --q1 and --q2")
        if args.K != 2:
            raise UsageError("the censored model has K = 2")
        return censored_model(args.n, args.p, args.q1, args.q2)
    if getattr(args, "mu", None) is not None:
        return submatrix_model(args.n, args.K, args.mu, args.sigma)
    raise UsageError("specify a model: --a/--b, --p/--q1/--q2 or --mu/--sigma")


def cmd_gen(args, out):
    spec = _spec_from_flags(args)
    graph, _ = generate_wsbm(spec, args.seed, workers=worker_count())
    graphio.write_graph(args.out, graph, spec, args.seed)
    print(f"wrote {args.out} (N={graph.N}, K={spec.K}, kind={spec.kind})", file=out)


def cmd_ml(args, out):
    graph, spec, _ = graphio.read_graph(args.graph)
    table = edge_weights(spec.within, spec.between)
    solver = args.solver
    if solver is None:
        solver = "exact" if num_equivalence_classes(spec.K, spec.n) <= EXACT_CLASS_CAP else "local_search"
    if solver == "exact":
        result = exact_ml(graph, table, spec.K, spec.n)
    else:
        result = local_search_ml(graph, table, spec.K, spec.n, restarts=args.restarts, seed=args.seed)
    truth = Assignment.truth(spec.K, spec.n)
    hamming = hamming_mod_perm(result.assignment, truth, spec.K)
    cert = swap_certificate(graph, table, truth)
    report = {
        "method": result.method,
        "restarts_used": result.restarts_used,
        "score": result.score,
        "truth_score": score(graph, table, truth),
        "hamming": hamming,
        "recovered": hamming == 0,
        "certificate": list(cert) if cert else None,
        "spec": spec.to_json(),
        "assignment": result.assignment.tolist(),
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(
        f"method={result.method} score={_num(result.score)} truth_score={_num(report['truth_score'])} "
        f"hamming={hamming} recovered={str(hamming == 0).lower()} "
        f"certificate={'none' if cert is None else f'{cert[0]},{cert[1]}'}",
        file=out,
    )


def cmd_renyi(args, out):
    if args.discrete_p is not None or args.discrete_q is not None:
        if args.discrete_p is None or args.discrete_q is None:
            raise UsageError("--discrete-p and --discrete-q must be given together")
        p, q = LabelDistribution.discrete(args.discrete_p), LabelDistribution.discrete(args.discrete_q)
    elif args.a is not None:
        if args.b is None or args.n is None:
            raise UsageError("--a needs --b and --n")
        p, q = make_scaled_discrete(ScaledFamily(args.a, args.b, args.n))
    elif args.mu is not None:
        var = args.sigma ** 2
        p, q = LabelDistribution.gaussian(args.mu, var), LabelDistribution.gaussian(0.0, var)
    else:
        raise UsageError("specify --discrete-p/--discrete-q, --a/--b/--n or --mu/--sigma")
    try:
        print(_num(renyi_half(p, q)), file=out)
    except InfiniteDivergenceError:
        print("inf", file=out)


def cmd_bound(args, out):
    if args.thm == "1":
        value = bounds.thm1_failure_bound(args.n, args.I)
    else:
        value = bounds.thmK_failure_bound(args.n, args.K, args.I)
    print(_num(value), file=out)


def _maybe_simulate(args, config_json, out):
    if args.trials is None:
        return
    config = TrialConfig.from_json(
        dict(config_json, solver=args.solver, trials=args.trials, base_seed=args.seed, restarts=args.restarts)
    )
    rows = sweep([config])
    row = rows[0]
    if row.error:
        raise RuntimeError(row.error)
    print(
        f"failure_rate={_num(row.failure_rate)} ci=[{_num(row.ci_low)}, {_num(row.ci_high)}] "
        f"certificate_rate={_num(row.certificate_rate)} trials={row.trials}",
        file=out,
    )
    if args.out:
        Path(args.out).write_text(rows_to_csv(rows))


def cmd_censored(args, out):
    spec = censored_model(args.n, args.p, args.q1, args.q2)
    stat = bounds.censored_stat(args.n, args.p, args.q1, args.q2)
    I = renyi_half(spec.within, spec.between)
    ratio = args.n * I / math.log(args.n)
    print(
        f"stat={_num(stat)} I={_num(I, 9)} n_I_over_log_n={_num(ratio)} verdict={bounds.verdict(stat)}",
        file=out,
    )
    _maybe_simulate(args, {"n": args.n, "p": args.p, "q1": args.q1, "q2": args.q2}, out)


def cmd_submatrix(args, out):
    spec = submatrix_model(args.n, args.K, args.mu, args.sigma)
    I = renyi_half(spec.within, spec.between)
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    report = bounds.recovery_regime(I, args.n)
    print(
        f"I={_num(I, 9)} n_I_over_log_n={_num(report.n_I_over_log_n)} verdict={report.verdict}",
        file=out,
    )
    _maybe_simulate(args, {"n": args.n, "K": args.K, "mu": args.mu, "sigma": args.sigma}, out)


def cmd_sweep(args, out):
    try:
        doc = json.loads(Path(args.grid).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {args.grid}: {exc}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read {args.grid}: {exc.strerror}") from exc
    grid = load_grid(doc)
    rows = sweep(grid, worker_count())
    Path(args.out).write_text(rows_to_csv(rows))
    if args.svg:
        Path(args.svg).write_text(failure_plot(rows))
    for i, row in enumerate(rows):
        if row.error:
            print(f"row {i}: {row.error}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.out}", file=out)


COMMANDS = {
    "gen": cmd_gen,
    "ml": cmd_ml,
    "renyi": cmd_renyi,
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "censored": cmd_censored,
    "submatrix": cmd_submatrix,
}


def run_cli(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        resolved = {k: v for k, v in sorted(vars(args).items())}
        resolved["threads"] = worker_count()
        print("config: " + json.dumps(resolved, sort_keys=True), file=err)
        COMMANDS[args.subcommand](args, out)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=err)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
