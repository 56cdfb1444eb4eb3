"""Budget-bounded brute-force validators.

Each oracle sums the probability of every run that uses at most ``budget``
switch draws (rule applications, PLCG choices, chain transitions).  Runs are
grouped by their exact draw count and the groups are summed with memoized
recursion, so no explanation graph or equation solver is involved.  The sums
are lower bounds that increase with the budget toward the exact probability.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from functools import lru_cache

from .model import MarkovChain, Pcfg, PlcgModel


@dataclass(frozen=True)
class MassEstimate:
    lower_bound: float
    budget: int
    runs_counted: int


def _check_budget(budget: int) -> None:
    if budget < 0:
        raise ValueError("budget must be >= 0")


def _deep():
    # memoized recursion depth grows with the budget and the prefix length
    if sys.getrecursionlimit() < 20000:
        sys.setrecursionlimit(20000)


def _pcfg_tables(pcfg: Pcfg, words: tuple[str, ...], unit: bool):
    """Mass (or run count when ``unit``) of derivations by exact application count."""
    n_words = len(words)
    one = 1 if unit else 1.0
    zero = 0 if unit else 0.0

    def theta(rule):
        return 1 if unit else rule.prob

    @lru_cache(maxsize=None)
    def full(x: str, i: int, k: int, n: int):
        # x derives exactly words[i:k] with n rule applications
        if pcfg.is_terminal(x):
            return one if (n == 0 and k == i + 1 and i < n_words and words[i] == x) else zero
        if n == 0 or k - i < 1:
            return zero
        return sum((theta(r) * seq_full(r.rhs, i, k, n - 1) for r in pcfg.rules_for(x)), zero)

    @lru_cache(maxsize=None)
    def seq_full(beta: tuple, i: int, k: int, n: int):
        if not beta:
            return one if (i == k and n == 0) else zero
        if k - i < len(beta):
            return zero
        x, rest = beta[0], beta[1:]
        total = zero
        for k1 in range(i + 1, k - len(rest) + 1):
            for m in range(n + 1):
                a = full(x, i, k1, m)
                if a:
                    total += a * seq_full(rest, k1, k, n - m)
        return total

    @lru_cache(maxsize=None)
    def pfx(x: str, i: int, n: int):
        # leftmost derivations from x at i that consume words[i:] (pseudo success)
        if pcfg.is_terminal(x):
            return one if (n == 0 and i == n_words - 1 and words[i] == x) else zero
        if n == 0:
            return zero
        return sum((theta(r) * seq_pfx(r.rhs, i, n - 1) for r in pcfg.rules_for(x)), zero)

    @lru_cache(maxsize=None)
    def seq_pfx(beta: tuple, i: int, n: int):
        if not beta:
            return zero
        x, rest = beta[0], beta[1:]
        total = pfx(x, i, n)
        if rest:
            for k in range(i + 1, n_words):
                for m in range(n + 1):
                    a = full(x, i, k, m)
                    if a:
                        total += a * seq_pfx(rest, k, n - m)
        return total

    return full, pfx


def oracle_prefix_pcfg(pcfg: Pcfg, words, start: str | None = None, budget: int = 20) -> MassEstimate:
    _check_budget(budget)
    _deep()
    words = tuple(words)
    start = start or pcfg.start
    if not words:
        raise ValueError("empty prefix")
    _, pfx = _pcfg_tables(pcfg, words, unit=False)
    _, pfx_count = _pcfg_tables(pcfg, words, unit=True)
    mass = sum(pfx(start, 0, n) for n in range(budget + 1))
    runs = sum(pfx_count(start, 0, n) for n in range(budget + 1))
    return MassEstimate(mass, budget, runs)


def oracle_sentence_pcfg(pcfg: Pcfg, words, start: str | None = None, budget: int = 20) -> MassEstimate:
    _check_budget(budget)
    _deep()
    words = tuple(words)
    start = start or pcfg.start
    if not words:
        raise ValueError("empty sentence")
    full, _ = _pcfg_tables(pcfg, words, unit=False)
    full_count, _ = _pcfg_tables(pcfg, words, unit=True)
    n_words = len(words)
    mass = sum(full(start, 0, n_words, n) for n in range(budget + 1))
    runs = sum(full_count(start, 0, n_words, n) for n in range(budget + 1))
    return MassEstimate(mass, budget, runs)


def _plcg_tables(plcg: PlcgModel, words: tuple[str, ...], unit: bool):
    cfg = plcg.cfg
    n_words = len(words)
    one = 1 if unit else 1.0
    zero = 0 if unit else 0.0

    def w(p):
        return 1 if unit else p

    def cont(rest, k, j, r):
        # after a shift ends at k: pseudo success at the end of the prefix
        if k == n_words:
            return one if (j == n_words and r == 0) else zero
        return g_call(rest, k, j, r)

    @lru_cache(maxsize=None)
    def g_call(stack: tuple, i: int, j: int, n: int):
        if not stack:
            return one if (i == j and n == 0) else zero
        if i >= n_words or j < i:
            return zero
        g, rest = stack[0], stack[1:]
        wd = words[i]
        if cfg.is_terminal(g):
            return cont(rest, i + 1, j, n) if g == wd else zero
        p = plcg.first_dist.get(g, {}).get(wd)
        if p is None or n == 0:
            return zero
        total = zero
        for k in range(i + 1, n_words + 1):
            for m in range(n):
                a = lc_call(g, wd, i + 1, k, m)
                if a:
                    total += w(p) * a * cont(rest, k, j, n - 1 - m)
        return total

    @lru_cache(maxsize=None)
    def lc_call(g: str, b: str, i: int, j: int, n: int):
        # n counts the lc draw made here plus everything below it
        dist = plcg.lc_dist.get((g, b))
        if not dist or n == 0 or j < i:
            return zero
        total = zero
        for rule, p in dist.items():
            a, gamma = rule.lhs, rule.rhs[1:]
            if i == n_words:
                parts = [(n_words, 0, one)]
            else:
                parts = [
                    (k, m, g_call(gamma, i, k, m))
                    for k in range(i, j + 1)
                    for m in range(n)
                ]
            for k, m, sub in parts:
                if not sub:
                    continue
                r = n - 1 - m
                if g == a:
                    att = plcg.att_dist.get(a)
                    if att is None:
                        tail = one if (k == j and r == 0) else zero
                    else:
                        tail = (w(att["att"]) if (k == j and r == 1) else zero) + (
                            w(att["pro"]) * lc_call(g, a, k, j, r - 1) if r >= 1 else zero
                        )
                else:
                    tail = lc_call(g, a, k, j, r)
                total += w(p) * sub * tail
        return total

    return g_call


def oracle_plcg_prefix(plcg: PlcgModel, words, budget: int = 30) -> MassEstimate:
    _check_budget(budget)
    _deep()
    words = tuple(words)
    if not words:
        raise ValueError("empty prefix")
    n_words = len(words)
    root = (plcg.start,)
    g_call = _plcg_tables(plcg, words, unit=False)
    g_count = _plcg_tables(plcg, words, unit=True)
    mass = sum(g_call(root, 0, n_words, n) for n in range(budget + 1))
    runs = sum(g_count(root, 0, n_words, n) for n in range(budget + 1))
    return MassEstimate(mass, budget, runs)


def oracle_reach(chain: MarkovChain, src: str, dst: str, budget: int = 30) -> MassEstimate:
    """Probability of paths from ``src`` first hitting ``dst`` within ``budget`` steps."""
    _check_budget(budget)
    if src == dst:
        return MassEstimate(1.0, budget, 1)
    mass = 0.0
    runs = 0
    # state -> (probability of paths not yet at dst, number of such paths)
    frontier = {src: (1.0, 1)}
    for _ in range(budget):
        nxt: dict[str, tuple[float, int]] = {}
        for s, (p, c) in frontier.items():
            for t, q in chain.successors(s):
                pp, cc = nxt.get(t, (0.0, 0))
                nxt[t] = (pp + p * q, cc + c)
        hit = nxt.pop(dst, (0.0, 0))
        mass += hit[0]
        runs += hit[1]
        frontier = nxt
        if not frontier:
            break
    return MassEstimate(mass, budget, runs)
