"""Probability equations over explanation graphs and their solvers.

Each goal H gets one variable X_H and one equation

    X_H = sum over alternatives of (product of switch probabilities) * (product of X_C)

The stratified solver handles the system SCC by SCC in dependency order; inside
a stratum the equations are linear, X = M X + Y, and are solved by Gaussian
elimination.  The fixpoint solver iterates X <- T(X) from zero and needs no
linearity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from .explgraph import ExplanationGraph

PIVOT_TOL = 1e-12
CLAMP_SLACK = 1e-9
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10**6
POWER_ITERATIONS = 50

STRATIFIED = "stratified-linear"
FIXPOINT = "fixpoint"


class SolverError(RuntimeError):
    code = "E_SOLVER"


class SingularStratumError(SolverError):
    code = "E_SINGULAR"

    def __init__(self, goals, pivot: float, spectral: float):
        self.goals = list(goals)
        self.pivot = pivot
        self.spectral = spectral
        names = ", ".join(str(g) for g in self.goals)
        super().__init__(
            f"singular stratum (pivot {pivot:.3g} < {PIVOT_TOL:g}, spectral estimate {spectral:.6g}): {names}"
        )


class LinearityError(SolverError):
    code = "E_NONLINEAR"


class RangeError(SolverError):
    code = "E_RANGE"


@dataclass(frozen=True)
class Term:
    coef: float
    subgoals: tuple[int, ...]


@dataclass(frozen=True)
class EquationSystem:
    """Variables are indexed by position in ``goals``; ``equations[i]`` is the
    list of product terms whose sum defines variable ``i``."""

    goals: tuple[Hashable, ...]
    equations: tuple[tuple[Term, ...], ...]
    root: int = 0

    @classmethod
    def from_terms(cls, terms: dict, root=None) -> "EquationSystem":
        """Build a system from ``{goal: [(coef, [subgoal, ...]), ...]}``."""
        goals = tuple(terms)
        index = {g: i for i, g in enumerate(goals)}
        eqs = tuple(
            tuple(Term(float(c), tuple(index[s] for s in subs)) for c, subs in terms[g])
            for g in goals
        )
        return cls(goals, eqs, index[root] if root is not None else 0)

    def __len__(self) -> int:
        return len(self.goals)

    def index(self, goal) -> int:
        return self.goals.index(goal)

    def dependencies(self, i: int) -> list[int]:
        out: list[int] = []
        for t in self.equations[i]:
            for s in t.subgoals:
                if s not in out:
                    out.append(s)
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """One application of T."""
        coefs, heads, idx = self._compiled
        ext = np.append(x, 1.0)
        vals = coefs * np.prod(ext[idx], axis=1) if idx.shape[1] else coefs.copy()
        return np.bincount(heads, weights=vals, minlength=len(self.goals))

    @property
    def _compiled(self):
        try:
            return self.__dict__["_compiled_cache"]
        except KeyError:
            pass
        n = len(self.goals)
        width = max((len(t.subgoals) for eq in self.equations for t in eq), default=0)
        coefs, heads, rows = [], [], []
        for h, eq in enumerate(self.equations):
            for t in eq:
                coefs.append(t.coef)
                heads.append(h)
                # pad with the index of the trailing constant 1
                rows.append(list(t.subgoals) + [n] * (width - len(t.subgoals)))
        compiled = (
            np.array(coefs, dtype=float),
            np.array(heads, dtype=np.intp),
            np.array(rows, dtype=np.intp).reshape(len(coefs), width),
        )
        object.__setattr__(self, "_compiled_cache", compiled)
        return compiled


def assemble(graph: ExplanationGraph) -> EquationSystem:
    goals = tuple(graph.formulas)
    index = {g: i for i, g in enumerate(goals)}
    eqs = []
    for g in goals:
        eqs.append(
            tuple(
                Term(alt.coefficient, tuple(index[s] for s in alt.subgoals))
                for alt in graph.formulas[g].alternatives
            )
        )
    return EquationSystem(goals, tuple(eqs), index[graph.root])


@dataclass(frozen=True)
class Stratum:
    members: tuple[int, ...]
    self_loop: bool

    @property
    def cyclic(self) -> bool:
        return len(self.members) > 1 or self.self_loop


@dataclass(frozen=True)
class SccDecomposition:
    strata: tuple[Stratum, ...]
    component: tuple[int, ...]  # variable index -> stratum index

    def __len__(self) -> int:
        return len(self.strata)


def decompose_scc(system: EquationSystem) -> SccDecomposition:
    """Tarjan's algorithm, iterative.  Components come out referenced-first."""
    n = len(system)
    deps = [system.dependencies(i) for i in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            while pos < len(deps[v]):
                w = deps[v][pos]
                pos += 1
                if index[w] == -1:
                    work.append((v, pos))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    component = [0] * n
    strata = []
    for c, members in enumerate(comps):
        for m in members:
            component[m] = c
        loop = len(members) == 1 and members[0] in deps[members[0]]
        strata.append(Stratum(tuple(members), loop))
    return SccDecomposition(tuple(strata), tuple(component))


@dataclass(frozen=True)
class LinearityViolation:
    goal: Hashable
    alternative: int
    pair: tuple[Hashable, Hashable]

    def __str__(self) -> str:
        return f"{self.goal}: alternative {self.alternative} has {self.pair[0]} and {self.pair[1]} in one SCC"


def check_linearity(system: EquationSystem, dec: SccDecomposition) -> list[LinearityViolation]:
    """Empty list iff no product term has two factors from the same SCC."""
    out = []
    comp = dec.component
    for h, eq in enumerate(system.equations):
        for a, term in enumerate(eq):
            seen: dict[int, int] = {}
            for s in term.subgoals:
                c = comp[s]
                if c in seen:
                    out.append(LinearityViolation(system.goals[h], a, (system.goals[seen[c]], system.goals[s])))
                    break
                seen[c] = s
    return out


@dataclass
class Solution:
    values: dict
    method: str
    root: Hashable = None
    iterations: int | None = None
    converged: bool = True
    spectral: dict = field(default_factory=dict)  # stratum index -> spectral estimate
    residual: float | None = None

    def __getitem__(self, goal) -> float:
        return self.values[goal]

    @property
    def root_value(self) -> float:
        return self.values[self.root]


def spectral_radius_estimate(m) -> float:
    """Power-iteration estimate of the spectral radius of a non-negative matrix.

    Iterates on M + I, whose Perron root is rho(M) + 1 and which is primitive
    whenever M is irreducible, so periodic matrices converge too.
    """
    m = np.asarray(m, dtype=float)
    k = m.shape[0]
    if k == 0:
        return 0.0
    if k == 1:
        return abs(float(m[0, 0]))
    shifted = m + np.eye(k)
    v = np.full(k, 1.0 / k)
    est = 1.0
    for _ in range(POWER_ITERATIONS):
        w = shifted @ v
        est = float(w.sum())  # v has unit 1-norm and everything is non-negative
        v = w / est
    return max(est - 1.0, 0.0)


def gauss_solve(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve a x = b by Gaussian elimination with partial pivoting.

    Returns the solution and the smallest pivot magnitude met.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = a.shape[0]
    min_pivot = np.inf
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        piv = abs(a[p, k])
        min_pivot = min(min_pivot, piv)
        if piv < PIVOT_TOL:
            return np.full(n, np.nan), piv
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(f, a[k, k:])
        b[k + 1 :] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x, float(min_pivot)


def _clamp(value: float, goal) -> float:
    if value < -CLAMP_SLACK or value > 1.0 + CLAMP_SLACK or np.isnan(value):
        raise RangeError(f"value {value!r} for {goal} is outside [0,1]")
    return min(max(value, 0.0), 1.0)


def stratum_matrix(system: EquationSystem, dec: SccDecomposition, s: int, values: dict):
    """M and Y of stratum ``s`` given solved values of all lower strata."""
    members = dec.strata[s].members
    pos = {v: r for r, v in enumerate(members)}
    k = len(members)
    m = np.zeros((k, k))
    y = np.zeros(k)
    for r, h in enumerate(members):
        for t in system.equations[h]:
            c = t.coef
            inner = None
            for sub in t.subgoals:
                if sub in pos:
                    if inner is not None:
                        raise LinearityError(f"nonlinear term in equation for {system.goals[h]}")
                    inner = sub
                else:
                    c *= values[sub]
            if inner is None:
                y[r] += c
            else:
                m[r, pos[inner]] += c
    return m, y


def solve_stratified(system: EquationSystem, dec: SccDecomposition | None = None) -> Solution:
    dec = dec or decompose_scc(system)
    violations = check_linearity(system, dec)
    if violations:
        raise LinearityError(f"system is not linear: {violations[0]}")
    values: dict[int, float] = {}
    spectral = {}
    for s, stratum in enumerate(dec.strata):
        members = stratum.members
        if not stratum.cyclic:
            h = members[0]
            total = 0.0
            for t in system.equations[h]:
                c = t.coef
                for sub in t.subgoals:
                    c *= values[sub]
                total += c
            values[h] = _clamp(total, system.goals[h])
            continue
        m, y = stratum_matrix(system, dec, s, values)
        rho = spectral_radius_estimate(m)
        spectral[s] = rho
        x, pivot = gauss_solve(np.eye(len(members)) - m, y)
        if pivot < PIVOT_TOL:
            raise SingularStratumError([system.goals[v] for v in members], pivot, rho)
        for v, val in zip(members, x):
            values[v] = _clamp(float(val), system.goals[v])
    return Solution(
        {system.goals[i]: values[i] for i in range(len(system))},
        STRATIFIED,
        root=system.goals[system.root],
        spectral=spectral,
    )


def solve_fixpoint(
    system: EquationSystem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    trace: list | None = None,
) -> Solution:
    """Iterate X_{k+1} = T(X_k) from X_0 = 0 until the max-norm change is below ``tol``.

    Iterates must be componentwise non-decreasing and bounded by one; a
    violation means the system is not a probability system and raises.
    ``trace``, if given, receives every iterate.  ``iterations`` counts the
    steps taken before the final, confirming one.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    x = np.zeros(len(system))
    if trace is not None:
        trace.append(x.copy())
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        nxt = system.apply(x)
        if np.any(nxt < x):
            bad = int(np.argmax(x - nxt))
            raise SolverError(f"non-monotone iterate at {system.goals[bad]}")
        if np.any(nxt > 1.0 + CLAMP_SLACK):
            bad = int(np.argmax(nxt))
            raise RangeError(f"iterate {nxt[bad]!r} for {system.goals[bad]} exceeds 1")
        delta = float(np.max(nxt - x)) if len(x) else 0.0
        x = nxt
        if trace is not None:
            trace.append(x.copy())
        if delta < tol:
            converged = True
            break
    values = {g: min(float(v), 1.0) for g, v in zip(system.goals, x)}
    return Solution(
        values,
        FIXPOINT,
        root=system.goals[system.root] if len(system) else None,
        iterations=it - 1 if converged else it,
        converged=converged,
    )


def dump_equations(system: EquationSystem) -> str:
    lines = []
    for h, eq in enumerate(system.equations):
        terms = []
        for t in eq:
            factors = [repr(t.coef)] + [f"X({system.goals[s]})" for s in t.subgoals]
            terms.append("*".join(factors))
        lines.append(f"X({system.goals[h]}) = " + (" + ".join(terms) if terms else "0"))
    return "\n".join(lines) + "\n"


def max_norm_distance(a: Solution, b: Solution) -> float:
    return max((abs(a.values[g] - b.values[g]) for g in a.values), default=0.0)
