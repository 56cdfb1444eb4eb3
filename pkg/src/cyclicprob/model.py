"""Probabilistic models: PCFGs, PLCGs, Markov chains and plan grammars.

All models are read from small line-oriented text files and validated at
ingestion time.  Symbols are plain strings; a symbol is a nonterminal iff it
occurs as the left-hand side of some rule.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

SUM_TOL = 1e-9
DEFAULT_START = "s"

_PROB_RE = re.compile(r"^[+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")


class ModelError(Exception):
    """Base class for model ingestion errors."""

    code = "E_MODEL"


class ModelSyntaxError(ModelError):
    code = "E_SYNTAX"

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ModelValidationError(ModelError):
    code = "E_MODEL"


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[str, ...]
    prob: float | None = None

    def __str__(self) -> str:
        body = f"{self.lhs} -> {' '.join(self.rhs)}"
        return body if self.prob is None else f"{body} : {self.prob:g}"


@dataclass(frozen=True)
class Cfg:
    """A context-free grammar; rule probabilities, if present, are ignored."""

    start: str
    rules: tuple[Rule, ...]

    @property
    def nonterminals(self) -> frozenset[str]:
        return frozenset(r.lhs for r in self.rules)

    @property
    def terminals(self) -> frozenset[str]:
        nts = self.nonterminals
        return frozenset(s for r in self.rules for s in r.rhs if s not in nts)

    def is_nonterminal(self, sym: str) -> bool:
        return sym in self._by_lhs

    def is_terminal(self, sym: str) -> bool:
        return sym not in self._by_lhs

    def rules_for(self, lhs: str) -> tuple[Rule, ...]:
        return self._by_lhs.get(lhs, ())

    @property
    def _by_lhs(self) -> Mapping[str, tuple[Rule, ...]]:
        # cached on first use; frozen dataclass so go through object.__setattr__
        try:
            return self.__dict__["_by_lhs_cache"]
        except KeyError:
            grouped: dict[str, list[Rule]] = defaultdict(list)
            for r in self.rules:
                grouped[r.lhs].append(r)
            cache = {k: tuple(v) for k, v in grouped.items()}
            object.__setattr__(self, "_by_lhs_cache", cache)
            return cache


@dataclass(frozen=True)
class Pcfg(Cfg):
    """A validated PCFG.  Every rule carries a probability in (0, 1]."""

    def prob(self, rule: Rule) -> float:
        return rule.prob  # type: ignore[return-value]


@dataclass(frozen=True)
class LeftCornerRelation:
    """Transitive closure of the direct left-corner relation X -> Y ..."""

    pairs: frozenset[tuple[str, str]]

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return pair in self.pairs

    def is_cyclic(self) -> bool:
        return any(x == y for x, y in self.pairs)

    def corners(self, x: str) -> frozenset[str]:
        return frozenset(y for a, y in self.pairs if a == x)


# ---------------------------------------------------------------------------
# grammar files


def _parse_prob(tok: str, lineno: int) -> float:
    if not _PROB_RE.match(tok):
        raise ModelSyntaxError(f"bad probability {tok!r}", lineno)
    return float(tok)


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_rule_tokens(toks: list[str], lineno: int, need_prob: bool) -> Rule:
    # <lhs> -> <sym> ... [: <prob>]
    if len(toks) < 2 or toks[1] != "->":
        raise ModelSyntaxError("expected '<lhs> -> <sym> ... : <prob>'", lineno)
    lhs = toks[0]
    body = toks[2:]
    prob = None
    if ":" in body:
        idx = body.index(":")
        if idx != len(body) - 2:
            raise ModelSyntaxError("expected exactly one probability after ':'", lineno)
        prob = _parse_prob(body[-1], lineno)
        body = body[:idx]
    elif need_prob:
        raise ModelSyntaxError("missing ': <prob>'", lineno)
    for sym in body:
        if sym in ("->", ":"):
            raise ModelSyntaxError(f"unexpected token {sym!r}", lineno)
    if not body:
        raise ModelValidationError(f"line {lineno}: epsilon rule for {lhs!r} is not allowed")
    if prob is not None and not 0.0 < prob <= 1.0:
        raise ModelValidationError(f"line {lineno}: rule probability {prob} not in (0,1]")
    return Rule(lhs, tuple(body), prob)


def _read_grammar(text: str, need_prob: bool, allow_plans: bool = False):
    start = None
    rules: list[Rule] = []
    plans: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        # allow "s->a" style without spaces around the arrow and colon
        line = line.replace("->", " -> ").replace(":", " : ")
        toks = line.split()
        if toks[0] == "start" and "->" not in toks:
            if len(toks) != 2:
                raise ModelSyntaxError("expected 'start <nonterminal>'", lineno)
            if start is not None:
                raise ModelSyntaxError("duplicate start declaration", lineno)
            start = toks[1]
        elif toks[0] == "plan" and "->" not in toks:
            if not allow_plans:
                raise ModelSyntaxError("'plan' declarations are only allowed in plan-model files", lineno)
            if len(toks) != 2:
                raise ModelSyntaxError("expected 'plan <nonterminal>'", lineno)
            plans.append(toks[1])
        else:
            rules.append(_parse_rule_tokens(toks, lineno, need_prob))
    if not rules:
        raise ModelValidationError("grammar has no rules")
    return start or DEFAULT_START, rules, plans


def _check_structure(start: str, rules: list[Rule]) -> None:
    lhss = {r.lhs for r in rules}
    if start not in lhss:
        raise ModelValidationError(f"start symbol {start!r} has no rules")
    seen = set()
    for r in rules:
        if (r.lhs, r.rhs) in seen:
            raise ModelValidationError(f"duplicate rule {r.lhs} -> {' '.join(r.rhs)}")
        seen.add((r.lhs, r.rhs))
    useless = detect_useless(rules, start)
    if useless:
        raise ModelValidationError(f"useless nonterminals: {', '.join(sorted(useless))}")


def _check_sums(rules: list[Rule]) -> None:
    sums: dict[str, float] = defaultdict(float)
    for r in rules:
        sums[r.lhs] += r.prob
    for lhs, total in sums.items():
        if abs(total - 1.0) > SUM_TOL:
            raise ModelValidationError(f"probabilities for {lhs!r} sum to {total:.12g}, not 1")


def parse_pcfg(text: str, start: str | None = None) -> Pcfg:
    """Parse and validate a PCFG grammar file.

    ``start`` overrides any ``start`` line in the file.
    """
    file_start, rules, _ = _read_grammar(text, need_prob=True)
    start = start or file_start
    _check_sums(rules)
    _check_structure(start, rules)
    return Pcfg(start, tuple(rules))


def parse_cfg(text: str, start: str | None = None) -> Cfg:
    """Parse a CFG; probabilities are optional and dropped."""
    file_start, rules, _ = _read_grammar(text, need_prob=False)
    start = start or file_start
    rules = [Rule(r.lhs, r.rhs) for r in rules]
    _check_structure(start, rules)
    return Cfg(start, tuple(rules))


def detect_useless(rules: Iterable[Rule], start: str) -> set[str]:
    """Nonterminals that are non-productive or unreachable from ``start``."""
    rules = list(rules)
    nts = {r.lhs for r in rules}

    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for r in rules:
            if r.lhs not in productive and all(s not in nts or s in productive for s in r.rhs):
                productive.add(r.lhs)
                changed = True

    # reachability only through productive rules
    reachable = {start} if start in nts else set()
    changed = True
    while changed:
        changed = False
        for r in rules:
            if r.lhs in reachable and all(s not in nts or s in productive for s in r.rhs):
                for s in r.rhs:
                    if s in nts and s not in reachable:
                        reachable.add(s)
                        changed = True
    return {x for x in nts if x not in productive or x not in reachable}


def left_corner_closure(rules: Iterable[Rule]) -> LeftCornerRelation:
    direct: dict[str, set[str]] = defaultdict(set)
    for r in rules:
        direct[r.lhs].add(r.rhs[0])
    pairs = set()
    for x in list(direct):
        stack = list(direct[x])
        seen: set[str] = set()
        while stack:
            y = stack.pop()
            if y in seen:
                continue
            seen.add(y)
            stack.extend(direct.get(y, ()))
        pairs.update((x, y) for y in seen)
    return LeftCornerRelation(frozenset(pairs))


def first_sets(rules: Iterable[Rule]) -> dict[str, frozenset[str]]:
    rules = list(rules)
    nts = {r.lhs for r in rules}
    lc = left_corner_closure(rules)
    out: dict[str, set[str]] = {x: set() for x in nts}
    for x, y in lc.pairs:
        if y not in nts:
            out[x].add(y)
    return {x: frozenset(v) for x, v in out.items()}


# ---------------------------------------------------------------------------
# PLCG


@dataclass(frozen=True)
class PlcgModel:
    """Probabilistic left-corner grammar over a CFG.

    first_dist[G][t]            shift distribution for nonterminal goal G
    lc_dist[(G, B)][rule]       projection rule choice when a B-tree grows toward G
    att_dist[A]["att"|"pro"]    attach/project choice; absent when (A, A) is not
                                a left-corner pair, in which case attach is forced
    """

    cfg: Cfg
    lc: LeftCornerRelation
    first_dist: Mapping[str, Mapping[str, float]]
    lc_dist: Mapping[tuple[str, str], Mapping[Rule, float]]
    att_dist: Mapping[str, Mapping[str, float]]

    @property
    def start(self) -> str:
        return self.cfg.start

    def has_att_switch(self, a: str) -> bool:
        return a in self.att_dist


def _uniform(outcomes) -> dict:
    outcomes = list(outcomes)
    return {o: 1.0 / len(outcomes) for o in outcomes}


def plcg_switch_outcomes(cfg: Cfg):
    """Outcome spaces of every PLCG switch, in a deterministic order."""
    lc = left_corner_closure(cfg.rules)
    firsts = first_sets(cfg.rules)
    order = _symbol_order(cfg)
    first_out = {g: sorted(firsts[g], key=order.get) for g in sorted(cfg.nonterminals, key=order.get)}
    lc_out: dict[tuple[str, str], list[Rule]] = {}
    for g, b in sorted(lc.pairs, key=lambda p: (order[p[0]], order[p[1]])):
        cands = [r for r in cfg.rules if r.rhs[0] == b and (r.lhs == g or (g, r.lhs) in lc)]
        lc_out[(g, b)] = [Rule(r.lhs, r.rhs) for r in cands]
    att_out = {a: ["att", "pro"] for a in first_out if (a, a) in lc}
    return lc, first_out, lc_out, att_out


def _symbol_order(cfg: Cfg) -> dict[str, int]:
    order: dict[str, int] = {}
    for r in cfg.rules:
        for s in (r.lhs, *r.rhs):
            order.setdefault(s, len(order))
    return order


def make_plcg(cfg: Cfg, overrides: str | None = None) -> PlcgModel:
    """Build a PLCG with equiprobable switches, then apply parameter overrides.

    ``overrides`` is the text of a PLCG parameter file.  Overridden switches
    must still sum to one; nothing is renormalized.
    """
    plain = Cfg(cfg.start, tuple(Rule(r.lhs, r.rhs) for r in cfg.rules))
    lc, first_out, lc_out, att_out = plcg_switch_outcomes(plain)
    first = {g: _uniform(v) for g, v in first_out.items() if v}
    lcd = {k: _uniform(v) for k, v in lc_out.items()}
    att = {a: _uniform(v) for a, v in att_out.items()}
    if overrides:
        touched = _apply_plcg_overrides(overrides, plain, first, lcd, att)
        for kind, key in touched:
            dist = {"first": first, "lc": lcd, "att": att}[kind][key]
            total = sum(dist.values())
            if abs(total - 1.0) > SUM_TOL:
                raise ModelValidationError(
                    f"overridden switch {_switch_name(kind, key)} sums to {total:.12g}, not 1"
                )
    return PlcgModel(plain, lc, first, lcd, att)


def _switch_name(kind: str, key) -> str:
    if kind == "lc":
        return f"lc({key[0]},{key[1]})"
    return f"{kind}({key})"


def _override_prob(tok: str, lineno: int) -> float:
    p = _parse_prob(tok, lineno)
    if not 0.0 < p <= 1.0:
        raise ModelValidationError(f"line {lineno}: parameter {p} not in (0,1]")
    return p


def _apply_plcg_overrides(text, cfg, first, lcd, att) -> set:
    touched = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        line = line.replace("->", " -> ").replace(":", " : ")
        toks = line.split()
        kind = toks[0]
        if kind == "first":
            if len(toks) != 4:
                raise ModelSyntaxError("expected 'first <G> <terminal> <prob>'", lineno)
            _, g, t, p = toks
            dist = first.get(g)
            if dist is None or t not in dist:
                raise ModelValidationError(f"line {lineno}: no switch outcome first({g})={t}")
            dist[t] = _override_prob(p, lineno)
            touched.add(("first", g))
        elif kind == "lc":
            if len(toks) < 4:
                raise ModelSyntaxError("expected 'lc <G> <b> <A> -> <sym> ... : <prob>'", lineno)
            g, b = toks[1], toks[2]
            rule = _parse_rule_tokens(toks[3:], lineno, need_prob=True)
            dist = lcd.get((g, b))
            key = Rule(rule.lhs, rule.rhs)
            if dist is None or key not in dist:
                raise ModelValidationError(f"line {lineno}: no switch outcome lc({g},{b})={key}")
            dist[key] = rule.prob
            touched.add(("lc", (g, b)))
        elif kind == "att":
            if len(toks) != 4 or toks[2] not in ("att", "pro"):
                raise ModelSyntaxError("expected 'att <G> att|pro <prob>'", lineno)
            _, a, op, p = toks
            if a not in att:
                raise ModelValidationError(f"line {lineno}: no switch att({a}); attach is forced for {a}")
            att[a][op] = _override_prob(p, lineno)
            touched.add(("att", a))
        else:
            raise ModelSyntaxError(f"unknown parameter kind {kind!r}", lineno)
    return touched


# ---------------------------------------------------------------------------
# Markov chains


@dataclass(frozen=True)
class MarkovChain:
    states: tuple[str, ...]
    trans: Mapping[str, tuple[tuple[str, float], ...]]

    def successors(self, state: str) -> tuple[tuple[str, float], ...]:
        return self.trans.get(state, ())

    def is_absorbing(self, state: str) -> bool:
        return not self.trans.get(state)


def parse_markov_chain(text: str) -> MarkovChain:
    states: dict[str, None] = {}
    trans: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        toks = line.split()
        if toks[0] == "state" and len(toks) == 2:
            states.setdefault(toks[1])
            continue
        if toks[0] != "trans" or len(toks) != 4:
            raise ModelSyntaxError("expected 'trans <from> <to> <prob>'", lineno)
        _, src, dst, p = toks
        prob = _parse_prob(p, lineno)
        if not 0.0 < prob <= 1.0:
            raise ModelValidationError(f"line {lineno}: transition probability {prob} not in (0,1]")
        if any(d == dst for d, _ in trans[src]):
            raise ModelValidationError(f"line {lineno}: duplicate transition {src} -> {dst}")
        states.setdefault(src)
        states.setdefault(dst)
        trans[src].append((dst, prob))
    if not states:
        raise ModelValidationError("chain has no transitions")
    for src, outs in trans.items():
        total = sum(p for _, p in outs)
        if abs(total - 1.0) > SUM_TOL:
            raise ModelValidationError(f"transitions from {src!r} sum to {total:.12g}, not 1")
    return MarkovChain(tuple(states), {k: tuple(v) for k, v in trans.items()})


# ---------------------------------------------------------------------------
# plan recognition


@dataclass(frozen=True)
class PlanModel:
    pcfg: Pcfg
    plans: tuple[str, ...]

    def plan_prob(self, plan: str) -> float:
        for r in self.pcfg.rules_for(self.pcfg.start):
            if r.rhs == (plan,):
                return r.prob
        return 0.0


def parse_plan_model(text: str, start: str | None = None) -> PlanModel:
    """Parse a plan grammar: a PCFG whose start symbol has only unit rules S -> plan.

    Without ``plan`` declarations every unit target of the start symbol is a plan.
    """
    file_start, rules, plans = _read_grammar(text, need_prob=True, allow_plans=True)
    start = start or file_start
    _check_sums(rules)
    _check_structure(start, rules)
    pcfg = Pcfg(start, tuple(rules))
    targets = []
    for r in pcfg.rules_for(start):
        if len(r.rhs) != 1 or pcfg.is_terminal(r.rhs[0]):
            raise ModelValidationError(f"start rule '{r}' is not of the form {start} -> <plan nonterminal>")
        targets.append(r.rhs[0])
    if not plans:
        plans = targets
    for y in plans:
        if not pcfg.is_nonterminal(y):
            raise ModelValidationError(f"plan {y!r} is not a nonterminal")
        if y not in targets:
            raise ModelValidationError(f"plan {y!r} has no rule {start} -> {y}")
    if len(set(plans)) != len(plans):
        raise ModelValidationError("duplicate plan declaration")
    return PlanModel(pcfg, tuple(plans))
