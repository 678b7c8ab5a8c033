"""Small reference models and a seeded generator of random admissible ones."""

from __future__ import annotations

import math

import numpy as np

from .model import Hypergraph, Model, build_model, max_admissible_delta
from .potentials import CallablePotential, ExpBilinearPotential, TablePotential


def path3_table(delta: float = 0.2) -> Model:
    """Path 0-1-2 with the N=2 grid table of ``1 + 0.04 u v``; ``Z = 8.0401``."""
    t = TablePotential([1.0, 1.0, 1.0, 1.01], 2, 2)
    return build_model(Hypergraph(3, ((0, 1), (1, 2))), [t, t], 2, delta)


def path3_exp(epsilon: float = 0.04, N: int = 2, delta=0.2) -> Model:
    p = ExpBilinearPotential(1.0, epsilon, 2)
    return build_model(Hypergraph(3, ((0, 1), (1, 2))), [p, p], N, delta)


def bilinear_callable(strength: float = 0.04) -> CallablePotential:
    """``1 + strength * u * v`` with exact bounds ``c = 1``, spread ``1 + strength``."""
    return CallablePotential(
        lambda y: 1.0 + strength * y[..., 0] * y[..., 1],
        2,
        1.0,
        1.0 + strength,
        k=strength * math.sqrt(2.0),
        vectorized=True,
    )


def path3_callable(strength: float = 0.04, N: int = 2, delta=0.2) -> Model:
    p = bilinear_callable(strength)
    return build_model(Hypergraph(3, ((0, 1), (1, 2))), [p, p], N, delta)


def constant_model(n: int, edges, N: int, c: float = 1.0, delta="auto") -> Model:
    pots = [ExpBilinearPotential(c, 0.0, len(e)) for e in edges]
    return build_model(Hypergraph(n, tuple(tuple(e) for e in edges)), pots, N, delta)


def random_hypergraph(rng: np.random.Generator, n: int, max_degree: int = 3, max_arity: int = 3, connected=False):
    """Random hypergraph with every degree <= ``max_degree``."""
    degree = [0] * n
    edges = []
    attempts = 4 * n
    if connected and n > 1:
        # random spanning tree of pairs first
        order = rng.permutation(n)
        for i in range(1, n):
            cands = [int(order[j]) for j in range(i) if degree[int(order[j])] < max_degree]
            if not cands:
                return None
            u = int(rng.choice(cands))
            w = int(order[i])
            edges.append((u, w) if rng.random() < 0.5 else (w, u))
            degree[u] += 1
            degree[w] += 1
    for _ in range(int(rng.integers(0, attempts + 1))):
        r = int(rng.integers(1, min(max_arity, n) + 1))
        e = tuple(int(x) for x in rng.choice(n, size=r, replace=False))
        if any(degree[u] >= max_degree for u in e):
            continue
        if tuple(sorted(e)) in {tuple(sorted(f)) for f in edges}:
            continue
        edges.append(e)
        for u in e:
            degree[u] += 1
    return Hypergraph(n, tuple(edges))


def random_model(
    rng: np.random.Generator,
    *,
    n_range=(1, 5),
    N_choices=(2, 3),
    max_degree: int = 3,
    max_arity: int = 3,
    family: str = "mixed",
    delta_fraction: float = 0.9,
    connected: bool = False,
) -> Model:
    """Random admissible model with ``delta = delta_fraction * delta_max``.

    Potential spreads are drawn up to the ``delta = 0`` window so instances
    range from nearly constant to the admissibility edge.
    """
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        g = random_hypergraph(rng, n, max_degree, max_arity, connected)
        if g is None:
            continue
        N = int(rng.choice(N_choices))
        if g.Delta >= 1 and g.eta >= 1:
            base = 1.0 + math.log1p(1.0 / g.eta) / (2 * g.Delta)
        else:
            base = 1.5
        pots = []
        for e in g.edges:
            rho = 1.0 + (base - 1.0) * float(rng.uniform(0.05, 1.0))
            fam = family if family != "mixed" else ("table" if rng.random() < 0.5 else "exp-bilinear")
            c = float(np.exp(rng.uniform(-1.0, 1.0)))
            if fam == "table":
                vals = c * (1.0 + (rho - 1.0) * rng.random(N ** len(e)))
                vals[int(rng.integers(len(vals)))] = c
                pots.append(TablePotential(vals, N, len(e), c=c))
            else:
                pots.append(ExpBilinearPotential(c, math.log(rho), len(e)))
        rho_max = max((p.upper_factor for p in pots), default=1.0)
        if g.Delta >= 1 and g.eta >= 1:
            dstar = max_admissible_delta(rho_max, g.Delta, g.eta)
            if dstar <= 0:
                continue
            delta = delta_fraction * dstar
        else:
            delta = 0.5
        return build_model(g, pots, N, delta)
