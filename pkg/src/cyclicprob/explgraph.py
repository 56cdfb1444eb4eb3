"""Explanation graphs and the tabled graph builder.

A derivation engine supplies ``expand(goal)``, the candidate defining clauses
of a ground goal.  ``build_graph`` first explores the closure of goals
reachable from the root, then keeps only goals with a finite proof (the least
fixpoint of provability), exactly as exhaustive tabled search would.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Hashable, Mapping, Protocol, Sequence

DEFAULT_GOAL_BUDGET = 10**7


class GraphBudgetError(RuntimeError):
    code = "E_BUDGET"


@dataclass(frozen=True)
class SwitchChoice:
    switch: str
    outcome: str
    prob: float

    def __str__(self) -> str:
        return f"msw({self.switch},{self.outcome})"


@dataclass(frozen=True)
class Alternative:
    subgoals: tuple[Hashable, ...] = ()
    choices: tuple[SwitchChoice, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.subgoals and not self.choices

    @property
    def coefficient(self) -> float:
        c = 1.0
        for ch in self.choices:
            c *= ch.prob
        return c

    def __str__(self) -> str:
        parts = [str(g) for g in self.subgoals] + [str(c) for c in self.choices]
        return " & ".join(parts) if parts else "true"


@dataclass(frozen=True)
class DefiningFormula:
    head: Hashable
    alternatives: tuple[Alternative, ...]

    @property
    def is_fact(self) -> bool:
        return len(self.alternatives) == 1 and self.alternatives[0].is_empty


class DerivationEngine(Protocol):
    root: Hashable

    def expand(self, goal) -> Sequence[Alternative]: ...


@dataclass(frozen=True)
class ExplanationGraph:
    """Provable goals reachable from ``root`` and their defining formulas.

    ``formulas`` preserves discovery order, which fixes dump order.
    """

    root: Hashable
    formulas: Mapping[Hashable, DefiningFormula]

    def __len__(self) -> int:
        return len(self.formulas)

    def __contains__(self, goal) -> bool:
        return goal in self.formulas

    @property
    def goals(self) -> list:
        return list(self.formulas)

    def children(self, goal) -> list:
        out = []
        for alt in self.formulas[goal].alternatives:
            for g in alt.subgoals:
                if g not in out:
                    out.append(g)
        return out


def build_graph(engine: DerivationEngine, root=None, budget: int = DEFAULT_GOAL_BUDGET):
    """Return the explanation graph of ``root``, or None when it is unprovable."""
    root = engine.root if root is None else root

    # explore: depth-first preorder over the goal universe
    candidates: dict = {}
    stack = [root]
    while stack:
        goal = stack.pop()
        if goal in candidates:
            continue
        if len(candidates) >= budget:
            raise GraphBudgetError(f"goal universe exceeded {budget} goals")
        alts = _dedupe(engine.expand(goal))
        candidates[goal] = alts
        fresh = []
        for alt in alts:
            for sub in alt.subgoals:
                if sub not in candidates and sub not in fresh:
                    fresh.append(sub)
        stack.extend(reversed(fresh))

    provable = _provable(candidates)
    if root not in provable:
        return None

    kept = {
        g: tuple(a for a in candidates[g] if all(s in provable for s in a.subgoals))
        for g in provable
    }
    # keep goals still reachable through surviving alternatives, in DFS preorder
    formulas: dict = {}
    stack = [root]
    while stack:
        g = stack.pop()
        if g in formulas:
            continue
        formulas[g] = DefiningFormula(g, kept[g])
        subs = [s for alt in kept[g] for s in alt.subgoals]
        stack.extend(s for s in reversed(subs) if s not in formulas)
    return ExplanationGraph(root, formulas)


def _dedupe(alts) -> tuple[Alternative, ...]:
    seen = set()
    out = []
    for a in alts:
        if a not in seen:
            seen.add(a)
            out.append(a)
    return tuple(out)


def _provable(candidates: Mapping) -> set:
    # Horn-style propagation: an alternative fires once all its subgoals are proved.
    waiting: dict = {}
    pending: list[int] = []
    heads: list = []
    ready = deque()
    for g, alts in candidates.items():
        for a in alts:
            idx = len(pending)
            heads.append(g)
            subs = set(a.subgoals)
            pending.append(len(subs))
            if not subs:
                ready.append(idx)
            for s in subs:
                waiting.setdefault(s, []).append(idx)
    proved: set = set()
    while ready:
        g = heads[ready.popleft()]
        if g in proved:
            continue
        proved.add(g)
        for idx in waiting.get(g, ()):
            pending[idx] -= 1
            if pending[idx] == 0:
                ready.append(idx)
    return proved


def is_cyclic(graph: ExplanationGraph) -> bool:
    """True iff some goal is its own ancestor."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {g: WHITE for g in graph.formulas}
    for start in graph.formulas:
        if color[start] != WHITE:
            continue
        color[start] = GREY
        stack = [(start, iter(graph.children(start)))]
        while stack:
            g, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[g] = BLACK
                stack.pop()
            elif color[nxt] == GREY:
                return True
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(graph.children(nxt))))
    return False


def dump_graph(graph: ExplanationGraph | None) -> str:
    if graph is None:
        return ""
    lines = []
    for g, f in graph.formulas.items():
        if f.is_fact:
            lines.append(str(g))
        else:
            lines.append(f"{g} <=>")
            lines.append("   " + " v ".join(str(a) for a in f.alternatives))
    return "\n".join(lines) + "\n"
