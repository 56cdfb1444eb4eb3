"""Query layer: model + engine + explanation graph + solver."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engines import (
    QueryError,
    markov_reach_engine,
    pcfg_prefix_engine,
    pcfg_sentence_engine,
    plcg_prefix_engine,
)
from .eqsolve import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    FIXPOINT,
    STRATIFIED,
    EquationSystem,
    SccDecomposition,
    assemble,
    check_linearity,
    decompose_scc,
    solve_fixpoint,
    solve_stratified,
)
from .explgraph import ExplanationGraph, build_graph, is_cyclic
from .model import MarkovChain, Pcfg, PlanModel, PlcgModel

SOLVERS = (STRATIFIED, FIXPOINT)


@dataclass(frozen=True)
class SolverOptions:
    solver: str = STRATIFIED
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class QueryResult:
    probability: float
    cyclic: bool
    scc_count: int
    solver: str
    iterations: int | None = None
    converged: bool = True
    linear: bool = True
    fell_back: bool = False  # stratified was requested but the system was nonlinear
    graph: ExplanationGraph | None = field(default=None, repr=False)
    system: EquationSystem | None = field(default=None, repr=False)
    decomposition: SccDecomposition | None = field(default=None, repr=False)
    spectral: dict = field(default_factory=dict, repr=False)


def evaluate(engine, options: SolverOptions | None = None) -> QueryResult:
    """Build the graph for ``engine.root`` and solve its equations."""
    options = options or SolverOptions()
    graph = build_graph(engine)
    if graph is None:
        return QueryResult(0.0, False, 0, options.solver)
    system = assemble(graph)
    dec = decompose_scc(system)
    linear = not check_linearity(system, dec)
    cyclic = is_cyclic(graph)
    if options.solver == STRATIFIED and linear:
        sol = solve_stratified(system, dec)
        return QueryResult(
            sol.root_value, cyclic, len(dec), STRATIFIED,
            graph=graph, system=system, decomposition=dec, spectral=sol.spectral,
        )
    sol = solve_fixpoint(system, tol=options.tol, max_iter=options.max_iter)
    return QueryResult(
        sol.root_value,
        cyclic,
        len(dec),
        FIXPOINT,
        iterations=sol.iterations,
        converged=sol.converged,
        linear=linear,
        fell_back=options.solver == STRATIFIED,
        graph=graph,
        system=system,
        decomposition=dec,
    )


def prefix_probability(pcfg: Pcfg, words, start: str | None = None, options: SolverOptions | None = None) -> QueryResult:
    return evaluate(pcfg_prefix_engine(pcfg, words, start), options)


def sentence_probability(pcfg: Pcfg, words, start: str | None = None, options: SolverOptions | None = None) -> QueryResult:
    return evaluate(pcfg_sentence_engine(pcfg, words, start), options)


def plcg_prefix_probability(plcg: PlcgModel, words, options: SolverOptions | None = None) -> QueryResult:
    return evaluate(plcg_prefix_engine(plcg, words), options)


def reach_probability(chain: MarkovChain, src: str, dst: str, options: SolverOptions | None = None) -> QueryResult:
    return evaluate(markov_reach_engine(chain, src, dst), options)


def _ranked(pairs):
    return sorted(pairs, key=lambda kv: (-kv[1], kv[0]))


def next_symbol_table(pcfg: Pcfg, words, start: str | None = None, options: SolverOptions | None = None):
    """The prefix result for ``words`` and the ranked conditional continuations."""
    words = list(words)
    base = prefix_probability(pcfg, words, start, options)
    if base.probability <= 0.0:
        raise QueryError(f"prefix {' '.join(words)!r} has probability 0")
    out = []
    for w in sorted(pcfg.terminals):
        p = prefix_probability(pcfg, words + [w], start, options).probability
        out.append((w, p / base.probability))
    return base, _ranked(out)


def conditional_next(pcfg: Pcfg, words, start: str | None = None, options: SolverOptions | None = None):
    """Rank every terminal w by P_prefix(u w) / P_prefix(u)."""
    return next_symbol_table(pcfg, words, start, options)[1]


def plan_table(plan_model: PlanModel, actions, options: SolverOptions | None = None):
    """Per plan: (plan, joint probability, prefix result from the plan), ranked."""
    actions = list(actions)
    if not actions:
        raise QueryError("empty action sequence")
    rows = []
    for y in plan_model.plans:
        res = prefix_probability(plan_model.pcfg, actions, start=y, options=options)
        rows.append((y, plan_model.plan_prob(y) * res.probability, res))
    return sorted(rows, key=lambda r: (-r[1], r[0]))


def recognize_plan(plan_model: PlanModel, actions, options: SolverOptions | None = None, normalize: bool = False):
    """Joint probability of each plan y with the observed action prefix.

    The joint is theta(S -> y) times the prefix probability of ``actions``
    from y.  With ``normalize`` the joints are divided by their sum (left as
    is when the sum is zero).
    """
    out = [(y, p) for y, p, _ in plan_table(plan_model, actions, options)]
    if normalize:
        total = sum(p for _, p in out)
        if total > 0:
            out = [(y, p / total) for y, p in out]
    return out
