"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``RESULTS`` and repeated in the pytest
terminal summary (see conftest.py), so they show up without ``-s``.
Run ``python3 tests/test_acceptance.py`` to get just the eleven lines.
"""

from __future__ import annotations

import time
from collections import Counter

import numpy as np

from cyclicprob.engines import pcfg_prefix_engine, plcg_prefix_engine
from cyclicprob.eqsolve import (
    assemble,
    check_linearity,
    dump_equations,
    max_norm_distance,
    solve_fixpoint,
    solve_stratified,
)
from cyclicprob.explgraph import build_graph, dump_graph, is_cyclic
from cyclicprob.model import make_plcg, parse_cfg, parse_markov_chain, parse_pcfg, parse_plan_model
from cyclicprob.oracle import oracle_prefix_pcfg, oracle_sentence_pcfg
from cyclicprob.queries import (
    FIXPOINT,
    SolverOptions,
    conditional_next,
    plcg_prefix_probability,
    prefix_probability,
    reach_probability,
    recognize_plan,
    sentence_probability,
)

from conftest import CHAIN_TEXT, G0_TEXT, MODELS
from suite import SUITE_ORACLE_BUDGET, suite_cases, suite_grammars
from test_explgraph import REF_PREFIX_A, graph_structure

RESULTS: list[str] = []

# the ten PLCG equations for prefix "a b", as (coefficient, factor multiset) per head
PLCG_AB_PATTERN = {
    "pre_plcg([a,b])": [(1.0, ["g_call([s],[a,b],[])"])],
    "g_call([s],[a,b],[])": [(0.5, ["lc_call(s,a,[b],[])"])],
    "lc_call(s,a,[b],[])": [(1.0, ["g_call([],[b],[b])", "att_or_pro(s,pro)", "lc_call(s,s,[b],[])"])],
    "g_call([],[b],[b])": [(1.0, [])],
    "lc_call(s,s,[b],[])": [
        (1.0, ["g_call([s],[b],[])", "att_or_pro(s,att)"]),
        (1.0, ["g_call([s],[b],[])", "att_or_pro(s,pro)", "lc_call(s,s,[],[])"]),
    ],
    "g_call([s],[b],[])": [(0.5, ["lc_call(s,b,[],[])"])],
    "lc_call(s,b,[],[])": [
        (1.0, ["att_or_pro(s,att)"]),
        (1.0, ["att_or_pro(s,pro)", "lc_call(s,s,[],[])"]),
    ],
    "lc_call(s,s,[],[])": [
        (1.0, ["att_or_pro(s,att)"]),
        (1.0, ["att_or_pro(s,pro)", "lc_call(s,s,[],[])"]),
    ],
    "att_or_pro(s,att)": [(0.5, [])],
    "att_or_pro(s,pro)": [(0.5, [])],
}


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def _pattern(system) -> dict:
    names = [str(g) for g in system.goals]
    return {
        names[i]: Counter((t.coef, tuple(sorted(names[s] for s in t.subgoals))) for t in eq)
        for i, eq in enumerate(system.equations)
    }


def test_criterion_01_prefix_g0():
    g0 = parse_pcfg(G0_TEXT)
    strat = prefix_probability(g0, ["a"])
    fix = prefix_probability(g0, ["a"], options=SolverOptions(FIXPOINT, tol=1e-12))
    graph = build_graph(pcfg_prefix_engine(g0, ["a"]))
    text = dump_graph(graph)
    ok = (
        abs(strat.probability - 0.5) <= 1e-9
        and abs(fix.probability - 0.5) <= 1e-9
        and strat.cyclic
        and len(graph) == 4
        and graph_structure(text) == graph_structure(REF_PREFIX_A)
    )
    report(
        1,
        ok,
        f"prefix [a] stratified={strat.probability!r} fixpoint={fix.probability!r} "
        f"cyclic={strat.cyclic} goals={len(graph)}",
    )


def test_criterion_02_sentence_g0():
    g0 = parse_pcfg(G0_TEXT)
    sent = sentence_probability(g0, ["a"]).probability
    pre = prefix_probability(g0, ["a"]).probability
    report(2, abs(sent - 0.3) <= 1e-12 and sent < pre, f"sentence [a]={sent!r} < prefix {pre!r}")


def test_criterion_03_plcg():
    m = make_plcg(parse_cfg(G0_TEXT))
    res = plcg_prefix_probability(m, ["a", "b"])
    system = assemble(build_graph(plcg_prefix_engine(m, ["a", "b"])))
    expect = {h: Counter((c, tuple(sorted(f))) for c, f in terms) for h, terms in PLCG_AB_PATTERN.items()}
    sol = solve_stratified(system)
    x8 = sol.values[system.goals[[str(g) for g in system.goals].index("lc_call(s,s,[],[])")]]
    n_eq = len(dump_equations(system).splitlines())
    ok = abs(res.probability - 0.125) <= 1e-9 and n_eq == 10 and _pattern(system) == expect and abs(x8 - 1) <= 1e-9
    report(3, ok, f"PLCG [a,b]={res.probability!r} equations={n_eq} pattern_match={_pattern(system) == expect} "
                  f"lc_call(s,s,[],[])={x8!r}")


def test_criterion_04_plans():
    model = parse_plan_model((MODELS / "plan.pcfg").read_text())
    ranked = recognize_plan(model, ["play", "clean"])
    top, joint = ranked[0]
    est = model.plan_prob(top) * oracle_prefix_pcfg(model.pcfg, ["play", "clean"], top, 25).lower_bound
    ok = top == "St" and abs(joint - 0.0272) <= 1e-4 and abs(joint - est) <= 1e-3
    report(4, ok, f"argmax={top} joint={joint:.6f} oracle@25={est:.6f}")


def test_criterion_05_reach():
    p = reach_probability(parse_markov_chain(CHAIN_TEXT), "s0", "s3").probability
    report(5, abs(p - 0.6) <= 1e-12, f"reach(s0,s3)={p!r}")


def test_criterion_06_linearity():
    grammars = suite_grammars()
    prefix_cases = [c for c in suite_cases() if c.prefix]
    bad = sum(1 for c in prefix_cases if check_linearity(c.system, c.decomposition))
    ok = len(grammars) >= 200 and bad == 0
    report(6, ok, f"{len(grammars)} grammars, {len(prefix_cases)} prefix graphs, {bad} linearity violations")


def test_criterion_07_cyclicity():
    by_grammar: dict[str, list[bool]] = {}
    lc_cyclic = {}
    for c in suite_cases():
        if c.prefix:
            by_grammar.setdefault(c.grammar.text, []).append(is_cyclic(c.graph))
            lc_cyclic[c.grammar.text] = c.grammar.lc_cyclic
    acyclic_bad = sum(1 for t, cyc in by_grammar.items() if not lc_cyclic[t] and any(cyc))
    cyclic_missing = sum(1 for t, cyc in by_grammar.items() if lc_cyclic[t] and not any(cyc))
    n_cyc = sum(lc_cyclic.values())
    report(
        7,
        acyclic_bad == 0 and cyclic_missing == 0 and n_cyc > 0,
        f"acyclic-LC grammars with a cyclic graph: {acyclic_bad}; "
        f"cyclic-LC grammars ({n_cyc}) without a cyclic witness: {cyclic_missing}",
    )


def test_criterion_08_solver_agreement():
    worst, monotone_bad, above_one = 0.0, 0, 0
    for c in suite_cases():
        trace: list = []
        fix = solve_fixpoint(c.system, tol=1e-12, trace=trace)
        worst = max(worst, max_norm_distance(solve_stratified(c.system, c.decomposition), fix))
        for a, b in zip(trace, trace[1:]):
            if np.any(b < a):
                monotone_bad += 1
            if np.any(b > 1 + 1e-12):
                above_one += 1
    ok = worst <= 1e-8 and monotone_bad == 0 and above_one == 0
    report(8, ok, f"{len(suite_cases())} systems, max distance {worst:.2e}, "
                  f"non-monotone steps {monotone_bad}, iterates above 1: {above_one}")


def test_criterion_09_oracle_bounds():
    g0 = parse_pcfg(G0_TEXT)
    g0_gap = 0.5 - oracle_prefix_pcfg(g0, ["a"], budget=20).lower_bound
    budgets = (0, 10, 20, SUITE_ORACLE_BUDGET)
    not_monotone = over = 0
    worst_gap = 0.0
    start = time.perf_counter()
    for c in suite_cases():
        fn = oracle_prefix_pcfg if c.prefix else oracle_sentence_pcfg
        exact = solve_stratified(c.system, c.decomposition).root_value
        vals = [fn(c.grammar.pcfg, c.words, budget=b).lower_bound for b in budgets]
        not_monotone += any(y < x - 1e-15 for x, y in zip(vals, vals[1:]))
        over += any(v > exact + 1e-9 for v in vals)
        worst_gap = max(worst_gap, exact - vals[-1])
    elapsed = time.perf_counter() - start
    ok = g0_gap <= 1e-3 and not_monotone == 0 and over == 0 and worst_gap <= 1e-3
    report(
        9,
        ok,
        f"G0 [a] gap@20={g0_gap:.2e}; suite budgets {budgets}: non-monotone {not_monotone}, "
        f"above solver {over}, worst gap@{SUITE_ORACLE_BUDGET}={worst_gap:.2e} ({elapsed:.1f}s)",
    )


def test_criterion_10_spectral():
    worst, count = 0.0, 0
    for c in suite_cases():
        if not c.prefix:
            continue
        for est in solve_stratified(c.system, c.decomposition).spectral.values():
            count += 1
            worst = max(worst, est)
    g0 = parse_pcfg(G0_TEXT)
    fig = list(solve_stratified(assemble(build_graph(pcfg_prefix_engine(g0, ["a"])))).spectral.values())
    ok = worst < 1 and fig == [0.4]
    report(10, ok, f"{count} cyclic SCC matrices, max estimate {worst:.4f}; G0 [a] SCC estimate {fig}")


def test_criterion_11_decomposition():
    g0 = parse_pcfg(G0_TEXT)
    aa = prefix_probability(g0, ["a", "a"]).probability
    ab = prefix_probability(g0, ["a", "b"]).probability
    a = prefix_probability(g0, ["a"]).probability
    s = sentence_probability(g0, ["a"]).probability
    nxt = dict(conditional_next(g0, ["a"]))
    ok = abs(aa + ab + s - a) <= 1e-9 and abs(nxt["a"] - 0.2) <= 1e-9 and abs(nxt["b"] - 0.2) <= 1e-9
    report(11, ok, f"P(aa)+P(ab)+P_sent(a)={aa + ab + s!r} vs P(a)={a!r}; next a={nxt['a']!r} b={nxt['b']!r}")


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
