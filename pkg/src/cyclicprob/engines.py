"""Derivation engines: ground goals and their candidate defining clauses.

Word positions index the prefix ``words``; a goal spanning ``start..end`` is
printed the way a difference list would be, as the remaining word suffixes,
e.g. ``pre_pcfg([s,s],[a],[])``.  A parse goal ending at ``N`` may have been
satisfied by pseudo success, i.e. the prefix ran out with symbols pending.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .explgraph import Alternative, SwitchChoice
from .model import Cfg, MarkovChain, Pcfg, PlcgModel, Rule


class QueryError(ValueError):
    code = "E_QUERY"


def fmt_list(items) -> str:
    return "[" + ",".join(items) + "]"


def _span(words, i: int) -> str:
    return fmt_list(words[i:])


@dataclass(frozen=True)
class QueryGoal:
    """Top goal wrapping the whole prefix, e.g. ``pre_pcfg([a])``."""

    pred: str
    words: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.pred}({fmt_list(self.words)})"


@dataclass(frozen=True)
class ParseGoal:
    pred: str
    symbols: tuple[str, ...]
    start: int
    end: int
    words: tuple[str, ...] = field(compare=False, repr=False, default=())

    def __str__(self) -> str:
        return f"{self.pred}({fmt_list(self.symbols)},{_span(self.words, self.start)},{_span(self.words, self.end)})"


@dataclass(frozen=True)
class GCall:
    stack: tuple[str, ...]
    start: int
    end: int
    words: tuple[str, ...] = field(compare=False, repr=False, default=())

    def __str__(self) -> str:
        return f"g_call({fmt_list(self.stack)},{_span(self.words, self.start)},{_span(self.words, self.end)})"


@dataclass(frozen=True)
class LcCall:
    goal: str
    corner: str
    start: int
    end: int
    words: tuple[str, ...] = field(compare=False, repr=False, default=())

    def __str__(self) -> str:
        return f"lc_call({self.goal},{self.corner},{_span(self.words, self.start)},{_span(self.words, self.end)})"


@dataclass(frozen=True)
class AttOrPro:
    nonterminal: str
    op: str

    def __str__(self) -> str:
        return f"att_or_pro({self.nonterminal},{self.op})"


@dataclass(frozen=True)
class ReachGoal:
    src: str
    dst: str

    def __str__(self) -> str:
        return f"reach({self.src},{self.dst})"


def _check_words(words) -> tuple[str, ...]:
    words = tuple(words)
    if not words:
        raise QueryError("empty prefix: at least one word is required")
    return words


class PcfgEngine:
    """Top-down PCFG parser, with or without pseudo success at the prefix end."""

    def __init__(self, pcfg: Pcfg, words, start: str | None = None, prefix: bool = True):
        self.pcfg = pcfg
        self.words = _check_words(words)
        self.start = start or pcfg.start
        if not pcfg.is_nonterminal(self.start):
            raise QueryError(f"start symbol {self.start!r} is not a nonterminal")
        self.prefix = prefix
        self.pred = "pre_pcfg" if prefix else "pcfg"
        self.root = QueryGoal(self.pred, self.words)

    def goal(self, symbols, i: int, j: int) -> ParseGoal:
        return ParseGoal(self.pred, tuple(symbols), i, j, self.words)

    def expand(self, goal) -> list[Alternative]:
        n = len(self.words)
        if isinstance(goal, QueryGoal):
            return [Alternative((self.goal((self.start,), 0, n),))]
        syms, i, j = goal.symbols, goal.start, goal.end
        if not syms:
            return [Alternative()] if i == j else []
        if i >= n:
            return []
        head, rest = syms[0], syms[1:]
        alts = []
        if self.pcfg.is_terminal(head):
            if head == self.words[i]:
                alt = self._then(rest, i + 1, j, (), ())
                if alt is not None:
                    alts.append(alt)
            return alts
        for rule in self.pcfg.rules_for(head):
            choice = SwitchChoice(head, fmt_list(rule.rhs), rule.prob)
            for k in range(i + 1, n + 1):
                if k < n and (k > j or len(rule.rhs) > k - i):
                    continue
                if not self.prefix and len(rule.rhs) > k - i:
                    continue
                alt = self._then(rest, k, j, (self.goal(rule.rhs, i, k),), (choice,))
                if alt is not None:
                    alts.append(alt)
        return alts

    def _then(self, rest, k, j, subgoals, choices):
        n = len(self.words)
        if self.prefix and k == n:
            # pseudo success: the prefix is consumed, pending symbols are skipped
            return Alternative(subgoals, choices) if j == n else None
        if k > j:
            return None
        return Alternative(subgoals + (self.goal(rest, k, j),), choices)


def pcfg_prefix_engine(pcfg: Pcfg, words, start: str | None = None) -> PcfgEngine:
    return PcfgEngine(pcfg, words, start, prefix=True)


def pcfg_sentence_engine(pcfg: Pcfg, words, start: str | None = None) -> PcfgEngine:
    return PcfgEngine(pcfg, words, start, prefix=False)


def rule_outcome(rule: Rule) -> str:
    return f"rule({rule.lhs},{fmt_list(rule.rhs)})"


class PlcgEngine:
    """Prefix parser for a probabilistic left-corner grammar (shift/attach/project)."""

    def __init__(self, plcg: PlcgModel, words):
        self.plcg = plcg
        self.cfg: Cfg = plcg.cfg
        self.words = _check_words(words)
        self.root = QueryGoal("pre_plcg", self.words)

    def expand(self, goal) -> list[Alternative]:
        if isinstance(goal, QueryGoal):
            return [Alternative((GCall((self.cfg.start,), 0, len(self.words), self.words),))]
        if isinstance(goal, GCall):
            return self._g_call(goal)
        if isinstance(goal, LcCall):
            return self._lc_call(goal)
        if isinstance(goal, AttOrPro):
            return self._att_or_pro(goal)
        raise TypeError(f"not a PLCG goal: {goal!r}")

    def _g_call(self, goal: GCall) -> list[Alternative]:
        n, words = len(self.words), self.words
        stack, i, j = goal.stack, goal.start, goal.end
        if not stack:
            return [Alternative()] if i == j else []
        if i >= n:
            return []
        g, rest = stack[0], stack[1:]
        wd = words[i]
        options = []
        if self.cfg.is_terminal(g):
            if g == wd:
                options.append(((), (), i + 1))
        else:
            p = self.plcg.first_dist.get(g, {}).get(wd)
            if p is None:
                return []
            choice = SwitchChoice(f"first({g})", wd, p)
            for k in range(i + 1, n + 1):
                options.append(((LcCall(g, wd, i + 1, k, words),), (choice,), k))
        alts = []
        for subs, choices, k in options:
            if k == n:
                if j == n:
                    alts.append(Alternative(subs, choices))
            elif k <= j:
                alts.append(Alternative(subs + (GCall(rest, k, j, words),), choices))
        return alts

    def _lc_call(self, goal: LcCall) -> list[Alternative]:
        n, words = len(self.words), self.words
        g, b, i, j = goal.goal, goal.corner, goal.start, goal.end
        dist = self.plcg.lc_dist.get((g, b))
        if not dist:
            return []
        alts = []
        for rule, p in dist.items():
            a, gamma = rule.lhs, rule.rhs[1:]
            if not (g == a or (g, a) in self.plcg.lc):
                continue
            choice = SwitchChoice(f"lc({g},{b})", rule_outcome(rule), p)
            if i == n:
                parts = [((), n)]
            else:
                parts = [((GCall(gamma, i, k, words),), k) for k in range(i, min(j, n) + 1)]
            for subs, k in parts:
                if k > j:
                    continue
                if g == a:
                    if k == j:
                        alts.append(Alternative(subs + (AttOrPro(a, "att"),), (choice,)))
                    alts.append(Alternative(subs + (AttOrPro(a, "pro"), LcCall(g, a, k, j, words)), (choice,)))
                else:
                    alts.append(Alternative(subs + (LcCall(g, a, k, j, words),), (choice,)))
        return alts

    def _att_or_pro(self, goal: AttOrPro) -> list[Alternative]:
        dist = self.plcg.att_dist.get(goal.nonterminal)
        if dist is None:
            return [Alternative()] if goal.op == "att" else []
        return [Alternative((), (SwitchChoice(f"att({goal.nonterminal})", goal.op, dist[goal.op]),))]


def plcg_prefix_engine(plcg: PlcgModel, words) -> PlcgEngine:
    return PlcgEngine(plcg, words)


class ReachEngine:
    def __init__(self, chain: MarkovChain, src: str, dst: str):
        for s in (src, dst):
            if s not in chain.states:
                raise QueryError(f"unknown state {s!r}")
        self.chain = chain
        self.root = ReachGoal(src, dst)

    def expand(self, goal: ReachGoal) -> list[Alternative]:
        if goal.src == goal.dst:
            return [Alternative()]
        return [
            Alternative((ReachGoal(nxt, goal.dst),), (SwitchChoice(f"trans({goal.src})", nxt, p),))
            for nxt, p in self.chain.successors(goal.src)
        ]


def markov_reach_engine(chain: MarkovChain, src: str, dst: str) -> ReachEngine:
    return ReachEngine(chain, src, dst)
