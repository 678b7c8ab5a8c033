"""Brute-force ground truth for small instances.

Everything here enumerates the grid naively, in ascending lexicographic
order over the free vertices, and accumulates in log space.  The point is
that correctness is evident by inspection; speed is not a goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetExceededError, ModelError
from .model import ConstraintSet, Model

DEFAULT_BUDGET = 10**8
CHUNK = 1 << 18


@dataclass(frozen=True)
class ExactResult:
    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf


def _beta_dict(model: Model, beta: Optional[ConstraintSet]) -> dict:
    out = {}
    for v, m in (beta or {}).items():
        v, m = int(v), int(m)
        if not 0 <= v < model.n:
            raise ModelError(f"constraint on unknown vertex {v}")
        if not 0 <= m < model.N:
            raise ModelError(f"constraint level {m} for vertex {v} outside [0, {model.N - 1}]")
        out[v] = m
    return out


def f_eval(model: Model, assignment) -> float:
    """``ln f`` at the grid point ``assignment / N``."""
    levels = [int(x) for x in assignment]
    if len(levels) != model.n:
        raise ModelError(f"assignment has {len(levels)} levels for {model.n} vertices")
    if any(not 0 <= x < model.N for x in levels):
        raise ModelError(f"assignment levels must lie in [0, {model.N - 1}]")
    total = 0.0
    for e, tab in zip(model.graph.edges, model.log_tables):
        idx = 0
        for u in e:
            idx = idx * model.N + levels[u]
        total += tab[idx]
    return total


def _log_terms(model: Model, beta: dict, removed: frozenset, budget: int):
    """Yield chunks of ``ln f`` over all completions of ``beta`` on the live graph."""
    N = model.N
    free = [u for u in range(model.n) if u not in removed and u not in beta]
    u = len(free)
    count = N**u
    if count > budget:
        raise BudgetExceededError(
            f"exact enumeration needs N^u = {N}^{u} = {count} evaluations, budget is {budget}",
            required=count,
            budget=budget,
        )
    col = {w: i for i, w in enumerate(free)}
    live = [
        (e, tab)
        for e, tab in zip(model.graph.edges, model.log_tables)
        if not any(w in removed for w in e)
    ]
    powers = np.array([N ** (u - 1 - i) for i in range(u)], dtype=np.int64)
    for lo in range(0, count, CHUNK):
        codes = np.arange(lo, min(count, lo + CHUNK), dtype=np.int64)
        digits = (codes[:, None] // powers[None, :]) % N if u else np.zeros((len(codes), 0), np.int64)
        logf = np.zeros(len(codes))
        for e, tab in live:
            idx = np.zeros(len(codes), dtype=np.int64)
            for w in e:
                idx = idx * N + (beta[w] if w in beta else digits[:, col[w]])
            logf += tab[idx]
        yield logf


def z_exact(
    model: Model,
    beta: Optional[ConstraintSet] = None,
    *,
    removed: Iterable[int] = (),
    budget: int = DEFAULT_BUDGET,
) -> ExactResult:
    """Restricted partition function ``Z(G, beta)`` by full enumeration.

    ``removed`` deletes vertices together with every edge touching them,
    which is how the subgraphs ``G \\ v`` of the recursion are formed.
    """
    b = _beta_dict(model, beta)
    removed = frozenset(int(x) for x in removed)
    if removed & b.keys():
        raise ModelError("a removed vertex cannot carry a constraint")
    acc = -math.inf
    for chunk in _log_terms(model, b, removed, budget):
        acc = float(np.logaddexp(acc, logsumexp(chunk)))
    return ExactResult(acc)


def marginals_exact(
    model: Model,
    v: int,
    beta: Optional[ConstraintSet] = None,
    *,
    removed: Iterable[int] = (),
    budget: int = DEFAULT_BUDGET,
) -> np.ndarray:
    """``x(G, v <- m, beta)`` for every level ``m``."""
    b = _beta_dict(model, beta)
    removed = frozenset(int(x) for x in removed)
    if v in b:
        raise ModelError(f"vertex {v} is already constrained")
    if v in removed:
        raise ModelError(f"vertex {v} has been removed")
    logs = np.array(
        [z_exact(model, {**b, v: m}, removed=removed, budget=budget).log_value for m in range(model.N)]
    )
    return np.exp(logs - logsumexp(logs))


def marginal_exact(
    model: Model,
    v: int,
    m: int,
    beta: Optional[ConstraintSet] = None,
    *,
    removed: Iterable[int] = (),
    budget: int = DEFAULT_BUDGET,
) -> float:
    """``Z(G, (beta, v <- m)) / Z(G, beta)``."""
    if not 0 <= m < model.N:
        raise ModelError(f"level {m} outside [0, {model.N - 1}]")
    return float(marginals_exact(model, v, beta, removed=removed, budget=budget)[m])


def conditional_marginals_exact(
    model: Model,
    v: int,
    beta: Optional[ConstraintSet] = None,
    *,
    removed: Iterable[int] = (),
    budget: int = DEFAULT_BUDGET,
):
    """Exact conditional marginals of ``v``'s free neighbors in ``G \\ v``.

    Table ``j`` holds ``P(v_j = y_j | v_1..v_{j-1} = y_1..y_{j-1})`` under
    ``beta``; these are the inputs for which ``g_m`` reproduces the true
    marginal of ``v``.
    """
    from .decay import ConditionalMarginals, unconstrained_neighbors

    b = _beta_dict(model, beta)
    removed = frozenset(int(x) for x in removed)
    nbrs = unconstrained_neighbors(model, v, b, removed)
    sub_removed = removed | {v}
    N = model.N
    tables = []
    for j, u in enumerate(nbrs):
        tab = np.empty((N,) * (j + 1))
        for p in np.ndindex(*((N,) * j)):
            cond = dict(b)
            cond.update({nbrs[i]: int(p[i]) for i in range(j)})
            tab[p] = marginals_exact(model, u, cond, removed=sub_removed, budget=budget)
        tables.append(tab)
    return ConditionalMarginals(tuple(nbrs), tuple(tables))


@dataclass(frozen=True)
class QuadratureResult:
    M: int
    value_M: float
    value_2M: float

    @property
    def value(self) -> float:
        return self.value_2M

    @property
    def extrapolated(self) -> float:
        # midpoint error is O(M^-2) for smooth integrands
        return (4.0 * self.value_2M - self.value_M) / 3.0

    @property
    def change(self) -> float:
        return abs(self.value_2M - self.value_M)


def _midpoint(model: Model, M: int) -> float:
    n = model.n
    nodes = (np.arange(M) + 0.5) / M
    logf = np.zeros((M,) * n)
    for e, p in zip(model.graph.edges, model.potentials):
        r = len(e)
        mesh = np.stack(np.meshgrid(*([nodes] * r), indexing="ij"), axis=-1)
        vals = np.log(np.asarray(p.evaluate(mesh), dtype=float))
        # axes of vals follow the edge's vertex order; move them to ascending vertex order
        order = np.argsort(e)
        vals = np.transpose(vals, order)
        shape = [1] * n
        for u in e:
            shape[u] = M
        logf = logf + vals.reshape(shape)
    return math.exp(float(logsumexp(logf)) - n * math.log(M))


def integral_reference(model: Model, M: int = 32, *, budget: int = 10**7) -> QuadratureResult:
    """Midpoint-rule value of the integral of ``f`` over ``[0, 1]^n`` at ``M`` and ``2M``.

    A test oracle only; limited to ``n <= 4`` and analytic potentials.
    """
    if not model.is_analytic:
        raise ModelError("table potentials have no continuous counterpart; cannot integrate")
    if model.n > 4:
        raise ModelError(f"reference quadrature supports n <= 4, model has n = {model.n}")
    need = (2 * M) ** model.n
    if need > budget:
        raise BudgetExceededError(
            f"quadrature at 2M = {2 * M} needs {need} evaluations, budget is {budget}", required=need, budget=budget
        )
    return QuadratureResult(M, _midpoint(model, M), _midpoint(model, 2 * M))
