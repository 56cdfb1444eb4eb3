"""Command-line front end.

Exit status: 0 success, 1 usage or parse error, 2 model validation error,
3 solver error.  Diagnostics go to stderr as ``error[CODE]: message``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from . import oracle
from .engines import QueryError, QueryGoal, ReachGoal, fmt_list
from .eqsolve import DEFAULT_MAX_ITER, DEFAULT_TOL, FIXPOINT, STRATIFIED, SolverError, dump_equations
from .explgraph import GraphBudgetError, dump_graph
from .model import (
    ModelSyntaxError,
    ModelValidationError,
    make_plcg,
    parse_cfg,
    parse_markov_chain,
    parse_pcfg,
    parse_plan_model,
)
from .queries import (
    QueryResult,
    SolverOptions,
    next_symbol_table,
    plan_table,
    plcg_prefix_probability,
    prefix_probability,
    reach_probability,
    sentence_probability,
)

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    code = "E_USAGE"


class NonConvergenceError(SolverError):
    code = "E_NONCONVERGED"


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default, which is reserved for model errors
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class Outcome:
    """One answered query, ready for printing."""

    query: str
    result: QueryResult
    ranking: list | None = None
    ranking_key: str = ""
    oracle_lower_bound: float | None = None


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _budget(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--solver", choices=(STRATIFIED, FIXPOINT), default=STRATIFIED)
    common.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)
    common.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    common.add_argument("--start", help="start symbol (overrides the model file)")
    common.add_argument("--json", action="store_true", help="print one JSON object")
    common.add_argument("--dump-graph", metavar="PATH")
    common.add_argument("--dump-equations", metavar="PATH")
    common.add_argument("--oracle-check", type=_budget, metavar="BUDGET")
    common.add_argument("--batch", metavar="PATH", help="file with one query per line")

    parser = _Parser(prog="cyclicprob", description="Probabilities of infinite sums via cyclic explanation graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in (
        ("prefix-prob", "PCFG prefix probability"),
        ("sentence-prob", "PCFG sentence probability"),
        ("next-symbol", "rank next terminals by conditional prefix probability"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--grammar", required=True)
        p.add_argument("--prefix", help='whitespace-separated words, e.g. "a b"')

    p = sub.add_parser("plan-recognize", parents=[common], help="rank plans given observed actions")
    p.add_argument("--grammar", required=True)
    p.add_argument("--actions", help='whitespace-separated actions, e.g. "play clean"')
    p.add_argument("--normalize", action="store_true", help="divide joints by their sum")

    p = sub.add_parser("plcg-prefix-prob", parents=[common], help="PLCG prefix probability")
    p.add_argument("--grammar", required=True)
    p.add_argument("--params", help="PLCG parameter overrides")
    p.add_argument("--prefix")

    p = sub.add_parser("reach", parents=[common], help="Markov chain reachability probability")
    p.add_argument("--chain", required=True)
    p.add_argument("--from", dest="src")
    p.add_argument("--to", dest="dst")
    return parser


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc


def _query_lines(args, single: str | None, flag: str) -> list[str]:
    if args.batch:
        if single is not None:
            raise UsageError(f"--batch and {flag} are mutually exclusive")
        if args.dump_graph or args.dump_equations:
            raise UsageError("dumps are not available with --batch")
        lines = [ln.split("#", 1)[0].strip() for ln in _read(args.batch).splitlines()]
        return [ln for ln in lines if ln]
    if single is None:
        raise UsageError(f"{flag} is required")
    return [single]


def _words(line: str) -> list[str]:
    words = line.split()
    if not words:
        raise QueryError("empty prefix: at least one word is required")
    return words


def _solve_pcfg(args, model, options, sentence: bool):
    fn = sentence_probability if sentence else prefix_probability
    budget_fn = oracle.oracle_sentence_pcfg if sentence else oracle.oracle_prefix_pcfg
    pred = "pcfg" if sentence else "pre_pcfg"
    out = []
    for line in _query_lines(args, args.prefix, "--prefix"):
        words = _words(line)
        res = fn(model, words, args.start, options)
        o = Outcome(str(QueryGoal(pred, tuple(words))), res)
        if args.oracle_check is not None:
            o.oracle_lower_bound = budget_fn(model, words, args.start, args.oracle_check).lower_bound
        out.append(o)
    return out


def _run_next(args, model, options):
    out = []
    for line in _query_lines(args, args.prefix, "--prefix"):
        words = _words(line)
        base, ranking = next_symbol_table(model, words, args.start, options)
        o = Outcome(f"next_symbol({fmt_list(words)})", base, ranking, "next")
        if args.oracle_check is not None:
            o.oracle_lower_bound = oracle.oracle_prefix_pcfg(model, words, args.start, args.oracle_check).lower_bound
        out.append(o)
    return out


def _run_plan(args, plan_model, options):
    out = []
    for line in _query_lines(args, args.actions, "--actions"):
        actions = _words(line)
        rows = plan_table(plan_model, actions, options)
        ranking = [(y, p) for y, p, _ in rows]
        if args.normalize:
            total = sum(p for _, p in ranking)
            if total > 0:
                ranking = [(y, p / total) for y, p in ranking]
        top, _, top_res = rows[0]
        res = QueryResult(
            ranking[0][1],
            top_res.cyclic,
            top_res.scc_count,
            top_res.solver,
            top_res.iterations,
            all(r.converged for _, _, r in rows),
            graph=top_res.graph,
            system=top_res.system,
        )
        o = Outcome(f"recognize_plan({fmt_list(actions)})", res, ranking, "plans")
        if args.oracle_check is not None and not args.normalize:
            est = oracle.oracle_prefix_pcfg(plan_model.pcfg, actions, top, args.oracle_check)
            o.oracle_lower_bound = plan_model.plan_prob(top) * est.lower_bound
        out.append(o)
    return out


def _run_plcg(args, plcg, options):
    out = []
    for line in _query_lines(args, args.prefix, "--prefix"):
        words = _words(line)
        res = plcg_prefix_probability(plcg, words, options)
        o = Outcome(str(QueryGoal("pre_plcg", tuple(words))), res)
        if args.oracle_check is not None:
            o.oracle_lower_bound = oracle.oracle_plcg_prefix(plcg, words, args.oracle_check).lower_bound
        out.append(o)
    return out


def _run_reach(args, chain, options):
    if args.batch:
        pairs = [ln.split() for ln in _query_lines(args, None, "--from/--to")]
        for pr in pairs:
            if len(pr) != 2:
                raise UsageError(f"batch line {' '.join(pr)!r} is not '<from> <to>'")
    else:
        if args.src is None or args.dst is None:
            raise UsageError("--from and --to are required")
        pairs = [(args.src, args.dst)]
    out = []
    for src, dst in pairs:
        res = reach_probability(chain, src, dst, options)
        o = Outcome(str(ReachGoal(src, dst)), res)
        if args.oracle_check is not None:
            o.oracle_lower_bound = oracle.oracle_reach(chain, src, dst, args.oracle_check).lower_bound
        out.append(o)
    return out


def _dispatch(args) -> list[Outcome]:
    options = SolverOptions(args.solver, args.tol, args.max_iter)
    cmd = args.command
    if cmd == "reach":
        return _run_reach(args, parse_markov_chain(_read(args.chain)), options)
    text = _read(args.grammar)
    if cmd == "plan-recognize":
        return _run_plan(args, parse_plan_model(text, args.start), options)
    if cmd == "plcg-prefix-prob":
        overrides = _read(args.params) if args.params else None
        return _run_plcg(args, make_plcg(parse_cfg(text, args.start), overrides), options)
    model = parse_pcfg(text, args.start)
    if cmd == "next-symbol":
        return _run_next(args, model, options)
    return _solve_pcfg(args, model, options, sentence=cmd == "sentence-prob")


def _as_dict(o: Outcome) -> dict:
    r = o.result
    d = {
        "query": o.query,
        "probability": r.probability,
        "cyclic": r.cyclic,
        "scc_count": r.scc_count,
        "solver": r.solver,
        "iterations": r.iterations,
        "converged": r.converged,
        "oracle_lower_bound": o.oracle_lower_bound,
    }
    if o.ranking is not None:
        d[o.ranking_key] = [[k, v] for k, v in o.ranking]
    return d


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _human(o: Outcome, budget) -> str:
    r = o.result
    lines = [f"query: {o.query}", f"probability: {_fmt(r.probability)}"]
    if o.ranking is not None:
        lines.append(f"{o.ranking_key}:")
        lines.extend(f"  {k} {_fmt(v)}" for k, v in o.ranking)
    lines.append(f"cyclic: {str(r.cyclic).lower()}")
    lines.append(f"scc_count: {r.scc_count}")
    solver = r.solver + (" (stratified fallback: nonlinear system)" if r.fell_back else "")
    lines.append(f"solver: {solver}")
    if r.iterations is not None:
        lines.append(f"iterations: {r.iterations}")
    lines.append(f"converged: {str(r.converged).lower()}")
    if o.oracle_lower_bound is not None:
        gap = r.probability - o.oracle_lower_bound
        lines.append(f"oracle_lower_bound: {_fmt(o.oracle_lower_bound)} (budget {budget}, gap {_fmt(gap)})")
    return "\n".join(lines)


def _fail(code: str, message: str, status: int) -> int:
    print(f"error[{code}]: {message}", file=sys.stderr)
    return status


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        outcomes = _dispatch(args)
        for o in outcomes:
            if not o.result.converged:
                raise NonConvergenceError(
                    f"fixpoint iteration did not converge within {args.max_iter} iterations for {o.query}"
                )
        if len(outcomes) == 1:
            o = outcomes[0]
            if args.dump_graph:
                _write(args.dump_graph, dump_graph(o.result.graph))
            if args.dump_equations:
                _write(args.dump_equations, dump_equations(o.result.system) if o.result.system else "")
    except UsageError as exc:
        return _fail(UsageError.code, str(exc), EXIT_USAGE)
    except ModelSyntaxError as exc:
        return _fail(exc.code, str(exc), EXIT_USAGE)
    except ModelValidationError as exc:
        return _fail(exc.code, str(exc), EXIT_MODEL)
    except QueryError as exc:
        return _fail(exc.code, str(exc), EXIT_USAGE)
    except SolverError as exc:
        return _fail(exc.code, str(exc), EXIT_SOLVER)
    except GraphBudgetError as exc:
        return _fail(exc.code, str(exc), EXIT_SOLVER)

    if args.json:
        payload = _as_dict(outcomes[0]) if not args.batch else {"batch": [_as_dict(o) for o in outcomes]}
        print(json.dumps(payload))
    else:
        print("\n\n".join(_human(o, args.oracle_check) for o in outcomes))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
