"""Correlation-decay estimates of marginals and partition functions.

The marginal of a vertex ``v`` is a function ``g_m`` of the conditional
marginals of its free neighbors in ``G \\ v`` (``v`` deleted with all its
edges)::

    U_m = sum_{y_1..y_k} prod_j x(y_1..y_j) * prod_{e ∋ v} phi_e(m, y_{e\\v})
    g_m = U_m / sum_l U_l

:func:`approx_prob` replaces the exact conditional marginals by recursive
estimates of depth ``d - 1`` and bottoms out at the uniform guess ``1/N``.
:func:`approx_z` telescopes the partition function into ``n`` such
marginals, pinning vertices to level 0 one at a time.

The recursion itself lives in a kernel module (compiled or pure Python,
see :mod:`corrdecay._backend`).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _backend
from .errors import ModelError
from .model import ConstraintSet, Model

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ConditionalMarginals:
    """Conditional marginal tables over an ordered neighbor list.

    ``tables[j]`` has shape ``(N,) * (j + 1)``; entry ``[y_1, ..., y_j+1]``
    is the probability that ``neighbor_order[j]`` takes level ``y_j+1``
    given the earlier neighbors' levels.
    """

    neighbor_order: tuple
    tables: tuple

    def __post_init__(self):
        if len(self.neighbor_order) != len(self.tables):
            raise ModelError("one table per neighbor is required")
        tabs = tuple(np.asarray(t, dtype=float) for t in self.tables)
        for j, t in enumerate(tabs):
            if t.ndim != j + 1 or len(set(t.shape)) > 1:
                raise ModelError(f"table {j} must have shape (N,)*{j + 1}, got {t.shape}")
            if np.any(t < 0) or np.any(t > 1):
                raise ModelError(f"table {j} has entries outside [0, 1]")
        object.__setattr__(self, "tables", tabs)

    def is_stochastic(self, tol: float = 1e-9) -> bool:
        return all(np.all(np.abs(t.sum(axis=-1) - 1.0) <= tol) for t in self.tables)

    def flat(self) -> list:
        return [t.reshape(-1) for t in self.tables]

    @classmethod
    def from_flat(cls, neighbor_order, flat_tables, N) -> "ConditionalMarginals":
        return cls(
            tuple(neighbor_order),
            tuple(np.asarray(t, dtype=float).reshape((N,) * (j + 1)) for j, t in enumerate(flat_tables)),
        )


@dataclass(frozen=True)
class DecayEstimate:
    value: float
    depth_used: int
    error_bound: float
    recursive_calls: int


def _state(model: Model, beta: Optional[ConstraintSet], removed: Iterable[int]):
    rem = np.zeros(model.n, dtype=np.uint8)
    for u in removed:
        rem[int(u)] = 1
    bet = np.full(model.n, -1, dtype=np.int32)
    for u, m in (beta or {}).items():
        u, m = int(u), int(m)
        if not 0 <= u < model.n:
            raise ModelError(f"constraint on unknown vertex {u}")
        if not 0 <= m < model.N:
            raise ModelError(f"constraint level {m} for vertex {u} outside [0, {model.N - 1}]")
        if rem[u]:
            raise ModelError(f"removed vertex {u} cannot carry a constraint")
        bet[u] = m
    return rem, bet


def unconstrained_neighbors(
    model: Model, v: int, beta: Optional[ConstraintSet] = None, removed: Iterable[int] = ()
) -> list:
    """Free neighbors of ``v`` through edges with no removed vertex, ascending."""
    removed = set(int(x) for x in removed)
    beta = beta or {}
    out = set()
    for e in model.graph.incident[v]:
        verts = model.graph.edges[e]
        if any(u in removed for u in verts):
            continue
        out.update(u for u in verts if u != v and u not in beta)
    return sorted(out)


def _check_vertex(model, v, rem, bet):
    if not 0 <= v < model.n:
        raise ModelError(f"unknown vertex {v}")
    if bet[v] >= 0:
        raise ModelError(f"vertex {v} is already constrained")
    if rem[v]:
        raise ModelError(f"vertex {v} has been removed")


def g_vector(
    model: Model,
    v: int,
    beta: Optional[ConstraintSet],
    marginals: ConditionalMarginals,
    *,
    removed: Iterable[int] = (),
    kernel=None,
) -> np.ndarray:
    """``g_m`` for every level ``m`` at once."""
    kernel = _backend.get_kernel(kernel)
    removed = tuple(removed)
    rem, bet = _state(model, beta, removed)
    _check_vertex(model, v, rem, bet)
    expected = unconstrained_neighbors(model, v, beta, removed)
    if list(marginals.neighbor_order) != expected:
        raise ModelError(
            f"marginal tables are ordered {list(marginals.neighbor_order)}, "
            f"vertex {v} has free neighbors {expected}"
        )
    for j, t in enumerate(marginals.tables):
        if t.shape[0] != model.N:
            raise ModelError(f"table {j} is sized for N={t.shape[0]}, model has N={model.N}")
    kg = model.kernel_graph(kernel)
    return np.asarray(kernel.g_vec(kg, rem, bet, v, expected, marginals.flat()))


def g_m_eval(
    model: Model,
    v: int,
    beta: Optional[ConstraintSet],
    m: int,
    marginals: ConditionalMarginals,
    *,
    removed: Iterable[int] = (),
    kernel=None,
) -> float:
    """Marginal of ``v`` at level ``m`` implied by neighbor tables ``marginals``."""
    if not 0 <= m < model.N:
        raise ModelError(f"level {m} outside [0, {model.N - 1}]")
    return float(g_vector(model, v, beta, marginals, removed=removed, kernel=kernel)[m])


def approx_marginals(
    model: Model,
    v: int,
    beta: Optional[ConstraintSet],
    d: int,
    *,
    removed: Iterable[int] = (),
    cache=False,
    threads: int = 1,
    kernel=None,
) -> tuple:
    """Depth-``d`` estimates of ``x(G, v <- m, beta)`` for all ``m``.

    Returns ``(values, calls)``.  ``cache`` may be ``True`` or a dict to
    share between calls; it never changes the values.  With ``threads > 1``
    the top-level branches run concurrently; each branch writes its own
    table slot, so the result does not depend on the thread count.
    """
    if d < 0:
        raise ModelError(f"depth must be >= 0, got {d}")
    kernel = _backend.get_kernel(kernel)
    removed = tuple(removed)
    rem, bet = _state(model, beta, removed)
    _check_vertex(model, v, rem, bet)
    kg = model.kernel_graph(kernel)
    memo = cache if isinstance(cache, dict) else ({} if cache else None)
    N = model.N

    if threads <= 1 or d == 0:
        vals, calls = kernel.approx_vec(kg, rem, bet, v, d, memo)
        return np.asarray(vals), calls

    nbrs = unconstrained_neighbors(model, v, beta, removed)
    sub_rem = rem.copy()
    sub_rem[v] = 1
    tasks = []
    for j, u in enumerate(nbrs):
        for p in np.ndindex(*((N,) * j)):
            b = bet.copy()
            for i in range(j):
                b[nbrs[i]] = p[i]
            tasks.append((j, p, u, b))

    def run(task):
        j, p, u, b = task
        return kernel.approx_vec(kg, sub_rem, b, u, d - 1, memo)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(run, tasks))

    tables = [np.empty((N,) * (j + 1)) for j in range(len(nbrs))]
    calls = 0
    for (j, p, _, _), (sub, c) in zip(tasks, results):
        tables[j][p] = np.clip(sub, 0.0, 1.0)
        calls += N * (1 + c)
    vals = kernel.g_vec(kg, rem, bet, v, nbrs, [t.reshape(-1) for t in tables])
    return np.asarray(vals), calls


def approx_prob(
    model: Model,
    v: int,
    beta: Optional[ConstraintSet],
    m: int,
    d: int,
    *,
    removed: Iterable[int] = (),
    cache=False,
    threads: int = 1,
    kernel=None,
) -> DecayEstimate:
    """Estimate ``x(G, v <- m, beta)`` to within ``(1 - delta)^d``."""
    if not 0 <= m < model.N:
        raise ModelError(f"level {m} outside [0, {model.N - 1}]")
    vals, calls = approx_marginals(
        model, v, beta, d, removed=removed, cache=cache, threads=threads, kernel=kernel
    )
    return DecayEstimate(float(vals[m]), d, (1.0 - model.delta) ** d, calls)


def choose_depth(delta: float, N: int, n: int) -> int:
    """Smallest depth with ``(1 - delta)^d <= 1 / (sqrt(2) N n^2)``."""
    if not delta > 0:
        raise ModelError("delta = 0 certifies no finite depth; supply delta > 0 or set the depth explicitly")
    if not delta < 1:
        raise ModelError(f"delta must be < 1, got {delta}")
    if N < 1 or n < 1:
        raise ModelError("N and n must be >= 1")
    target = 1.0 / (SQRT2 * N * n * n)
    d = max(1, math.ceil(math.log(SQRT2 * N * n * n) / -math.log1p(-delta)))
    while (1.0 - delta) ** d > target:
        d += 1
    return d


def call_count_estimate(model: Model, d: int) -> int:
    """Worst-case recursion call count ``(sum_{j=1..eta} N^j)^d``.

    Measured ``recursive_calls`` never exceed this: below the root every
    vertex has lost at least one neighbor, which more than pays for the
    calls the pure power form leaves out.
    """
    if d < 0:
        raise ModelError(f"depth must be >= 0, got {d}")
    branching = sum(model.N**j for j in range(1, model.eta + 1))
    return branching**d


@dataclass(frozen=True)
class ZCertificate:
    """Error certificate for :func:`approx_z`.

    ``ratio_lower``/``ratio_upper`` bound ``Z_est / Z`` using only the depth
    (every step error ``(1-delta)^d`` against the floor ``1/(sqrt(2) N)``);
    the ``posterior_*`` bounds use the computed step values instead and
    treat steps whose recursion was provably exact as error free.
    """

    depth: int
    delta: float
    step_error: float
    step_lower_bound: float
    step_rel_error: float
    ratio_lower: float
    ratio_upper: float
    error_bound_rel: float
    posterior_ratio_lower: float
    posterior_ratio_upper: float
    exact_steps: int

    @property
    def posterior_error_bound_rel(self) -> float:
        return max(self.posterior_ratio_upper - 1.0, 1.0 - self.posterior_ratio_lower)


@dataclass(frozen=True)
class ZEstimate:
    log_z: float
    log_f0: float
    steps: tuple
    calls: int
    certificate: ZCertificate

    @property
    def z(self) -> float:
        return math.exp(self.log_z) if self.log_z < 709.0 else math.inf


def approx_z(model: Model, d: int, *, cache=False, threads: int = 1, kernel=None) -> ZEstimate:
    """Estimate ``ln Z(G)`` by telescoping over vertices pinned to level 0."""
    if d < 1:
        raise ModelError(f"depth must be >= 1, got {d}")
    n = model.n
    log_f0 = float(sum(t[0] for t in model.log_tables))
    memo = cache if isinstance(cache, dict) else ({} if cache else None)
    beta = {}
    steps = []
    calls = 0
    step_err = (1.0 - model.delta) ** d
    post_lo = post_hi = 1.0
    exact = 0
    for v in range(n):
        vals, c = approx_marginals(model, v, beta, d, cache=memo, threads=threads, kernel=kernel)
        p = float(vals[0])
        if not p > 0:
            raise RuntimeError(f"step {v}: estimated marginal {p} is not positive")
        steps.append(p)
        calls += c
        # d >= #free vertices makes the recursion exact (each level deletes one)
        if d >= n - len(beta):
            exact += 1
        else:
            t = step_err / p
            post_lo *= max(0.0, 1.0 - t)
            post_hi *= 1.0 + t
        beta[v] = 0
    log_z = log_f0 - float(sum(math.log(p) for p in steps))

    lower = 1.0 / (SQRT2 * model.N)
    t = SQRT2 * model.N * step_err
    ratio_lo = max(0.0, 1.0 - t) ** n
    ratio_hi = (1.0 + t) ** n
    cert = ZCertificate(
        depth=d,
        delta=model.delta,
        step_error=step_err,
        step_lower_bound=lower,
        step_rel_error=t,
        ratio_lower=ratio_lo,
        ratio_upper=ratio_hi,
        error_bound_rel=max(ratio_hi - 1.0, 1.0 - ratio_lo),
        posterior_ratio_lower=post_lo,
        posterior_ratio_upper=post_hi,
        exact_steps=exact,
    )
    return ZEstimate(log_z, log_f0, tuple(steps), calls, cert)
