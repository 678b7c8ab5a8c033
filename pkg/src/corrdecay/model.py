"""Hypergraph models and their admissibility conditions.

A :class:`Model` couples a :class:`Hypergraph` with one potential per edge,
a grid resolution ``N`` (discrete level ``m`` stands for the point
``m / N``) and a decay margin ``delta``.  Construction checks that every
potential fits inside the admissibility window, which is what makes the
recursive marginal estimates in :mod:`corrdecay.decay` contract.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.stats import qmc

from .errors import AdmissibilityError, ModelError, ModelFormatError, WindowExceededError
from .potentials import Potential, grid_points, potential_from_json

# A constraint set maps vertex index -> discrete level in [0, N-1].
ConstraintSet = Mapping[int, int]


@dataclass(frozen=True)
class Hypergraph:
    """Vertices ``0..vertex_count-1`` and an ordered list of hyperedges.

    Degree, neighbor lists, ``Delta`` (max degree), ``eta`` (max neighbor
    count) and ``R`` (max edge cardinality) are computed on construction.
    Neighbor lists are sorted ascending.
    """

    vertex_count: int
    edges: tuple
    names: Optional[tuple] = None
    degree: tuple = field(init=False, repr=False, compare=False)
    neighbors: tuple = field(init=False, repr=False, compare=False)
    incident: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.vertex_count
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ModelError(f"vertex_count must be a positive integer, got {n!r}")
        edges = tuple(tuple(int(u) for u in e) for e in self.edges)
        for i, e in enumerate(edges):
            if len(e) == 0:
                raise ModelError(f"edge {i} is empty")
            if len(set(e)) != len(e):
                raise ModelError(f"edge {i} {list(e)} contains a duplicate vertex")
            for u in e:
                if not 0 <= u < n:
                    raise ModelError(f"edge {i} references vertex {u} outside [0, {n - 1}]")
        object.__setattr__(self, "edges", edges)
        if self.names is not None:
            if len(self.names) != n:
                raise ModelError("names must have one entry per vertex")
            object.__setattr__(self, "names", tuple(self.names))

        incident = [[] for _ in range(n)]
        nbrs = [set() for _ in range(n)]
        for i, e in enumerate(edges):
            for u in e:
                incident[u].append(i)
                nbrs[u].update(w for w in e if w != u)
        object.__setattr__(self, "incident", tuple(tuple(x) for x in incident))
        object.__setattr__(self, "degree", tuple(len(x) for x in incident))
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(s)) for s in nbrs))
        assert self.eta <= self.R * self.Delta

    @property
    def n(self) -> int:
        return self.vertex_count

    @property
    def Delta(self) -> int:
        return max(self.degree, default=0)

    @property
    def eta(self) -> int:
        return max((len(s) for s in self.neighbors), default=0)

    @property
    def R(self) -> int:
        return max((len(e) for e in self.edges), default=0)

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in self.neighbors[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.vertex_count

    def relabeled(self, perm: Sequence[int]) -> "Hypergraph":
        """Graph with vertex ``u`` renamed ``perm[u]``."""
        return Hypergraph(self.vertex_count, tuple(tuple(perm[u] for u in e) for e in self.edges))


def admissibility_window(delta: float, Delta: int, eta: int) -> float:
    """Largest allowed ratio ``max phi_e / c_e`` for decay margin ``delta``.

    ``(1 - delta)^(1/(2 Delta)) * (1 + ln(1 + 1/eta) / (2 Delta))``
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if Delta < 1:
        raise ValueError(f"Delta must be >= 1, got {Delta}")
    if eta < 1:
        raise ValueError(f"eta must be >= 1, got {eta}")
    return (1.0 - delta) ** (1.0 / (2 * Delta)) * (1.0 + math.log1p(1.0 / eta) / (2 * Delta))


def max_admissible_delta(rho: float, Delta: int, eta: int) -> float:
    """Largest ``delta`` whose window still contains spread ``rho``.

    Raises :class:`WindowExceededError` if ``rho`` exceeds the window even at
    ``delta = 0``.
    """
    if rho < 1.0:
        raise ValueError(f"rho must be >= 1, got {rho}")
    if Delta < 1 or eta < 1:
        raise ValueError("Delta and eta must be >= 1")
    base = 1.0 + math.log1p(1.0 / eta) / (2 * Delta)
    if rho > base:
        raise WindowExceededError(
            f"potential spread {rho:.6g} exceeds the window {base:.6g} available at delta=0",
            window=base,
        )
    return max(0.0, 1.0 - (rho / base) ** (2 * Delta))


def _window_for(delta: float, Delta: int, eta: int) -> float:
    # No interacting neighbors (no edges, or only unary edges): any spread is admissible.
    if Delta < 1 or eta < 1:
        return math.inf
    return admissibility_window(delta, Delta, eta)


@dataclass(frozen=True)
class EdgeCheck:
    edge: int
    vertices: tuple
    family: str
    upper_factor: float
    window: float
    margin: float
    passed: bool
    offending_point: Optional[tuple] = None


@dataclass(frozen=True)
class AdmissibilityReport:
    window: float
    edges: tuple

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.edges)

    @property
    def failures(self) -> list:
        return [e for e in self.edges if not e.passed]


@dataclass(frozen=True)
class Model:
    """Validated model; build with :func:`build_model` or :func:`load_model`."""

    graph: Hypergraph
    potentials: tuple
    N: int
    delta: float

    @property
    def n(self) -> int:
        return self.graph.vertex_count

    @property
    def Delta(self) -> int:
        return self.graph.Delta

    @property
    def eta(self) -> int:
        return self.graph.eta

    @property
    def R(self) -> int:
        return self.graph.R

    @property
    def window(self) -> float:
        return _window_for(self.delta, self.Delta, self.eta)

    @property
    def max_upper_factor(self) -> float:
        return max((p.upper_factor for p in self.potentials), default=1.0)

    @property
    def is_analytic(self) -> bool:
        return all(p.is_analytic for p in self.potentials)

    @cached_property
    def log_tables(self) -> tuple:
        """``ln phi_e`` on the grid, one flat lexicographic array per edge."""
        return tuple(np.asarray(p.grid_log_values(self.N), dtype=float) for p in self.potentials)

    @cached_property
    def normalized_tables(self) -> tuple:
        """``phi_e / c_e`` on the grid; entries lie in ``[1, upper_factor]``."""
        return tuple(np.asarray(p.grid_values(self.N), dtype=float) / p.c for p in self.potentials)

    @cached_property
    def admissibility(self) -> AdmissibilityReport:
        return check_admissible(self)

    def kernel_graph(self, kernel):
        """Compiled graph for ``kernel`` (cached per backend)."""
        cache = self.__dict__.setdefault("_kernel_graphs", {})
        if kernel.NAME not in cache:
            cache[kernel.NAME] = kernel.make_graph(
                self.n, self.N, self.graph.edges, self.normalized_tables, self.graph.incident
            )
        return cache[kernel.NAME]

    def with_N(self, N: int, delta=None, strict: bool = True) -> "Model":
        """Same potentials on a different grid (analytic families only)."""
        return build_model(self.graph, self.potentials, N, self.delta if delta is None else delta, strict=strict)

    def with_delta(self, delta, strict: bool = True) -> "Model":
        return build_model(self.graph, self.potentials, self.N, delta, strict=strict)

    def scaled_edge(self, edge: int, gamma: float) -> "Model":
        pots = list(self.potentials)
        pots[edge] = pots[edge].scaled(gamma)
        return build_model(self.graph, pots, self.N, self.delta, strict=False)

    def describe(self) -> dict:
        return {
            "n": self.n,
            "edges": len(self.graph.edges),
            "N": self.N,
            "delta": self.delta,
            "Delta": self.Delta,
            "eta": self.eta,
            "R": self.R,
        }


def resolve_delta(graph: Hypergraph, potentials: Sequence[Potential], delta) -> float:
    """Turn ``"auto"``/``None`` into the largest admissible margin."""
    if delta is not None and delta != "auto":
        return float(delta)
    rho = max((p.upper_factor for p in potentials), default=1.0)
    if graph.Delta < 1 or graph.eta < 1:
        # Every margin is admissible; pick the midpoint of (0, 1).
        return 0.5
    d = max_admissible_delta(rho, graph.Delta, graph.eta)
    # Guard against the round trip landing one ulp outside the window.
    while d > 0 and admissibility_window(d, graph.Delta, graph.eta) < rho:
        d = float(np.nextafter(d, 0.0))
    if d <= 0:
        raise WindowExceededError(
            f"potential spread {rho:.6g} leaves no positive delta", window=admissibility_window(0, graph.Delta, graph.eta)
        )
    return d


def build_model(graph: Hypergraph, potentials: Sequence[Potential], N: int, delta, *, strict: bool = True) -> Model:
    """Validate and assemble a :class:`Model`.

    ``delta`` may be a float in ``(0, 1)`` or ``"auto"``.  With ``strict``
    (the default) an inadmissible potential raises
    :class:`~corrdecay.errors.AdmissibilityError`; otherwise the failure is
    only recorded in ``model.admissibility``.
    """
    potentials = tuple(potentials)
    if len(potentials) != len(graph.edges):
        raise ModelError(f"{len(potentials)} potentials supplied for {len(graph.edges)} edges")
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ModelError(f"N must be a positive integer, got {N!r}")
    for i, (e, p) in enumerate(zip(graph.edges, potentials)):
        if p.arity != len(e):
            raise ModelError(f"edge {i} has {len(e)} vertices but its potential has arity {p.arity}")
        if p.family == "table" and p.N != N:
            raise ModelError(f"edge {i} table potential is bound to N={p.N}, model uses N={N}")
    delta = resolve_delta(graph, potentials, delta)
    if not 0.0 < delta < 1.0:
        raise ModelError(f"delta must lie in (0, 1), got {delta}")
    model = Model(graph, potentials, int(N), delta)
    if strict:
        report = model.admissibility
        if not report.passed:
            bad = report.failures[0]
            where = f" at grid point {bad.offending_point}" if bad.offending_point is not None else ""
            raise AdmissibilityError(
                f"edge {bad.edge} {list(bad.vertices)}: spread {bad.upper_factor:.6g} exceeds window "
                f"{bad.window:.6g}{where}",
                edge=bad.edge,
                window=bad.window,
            )
    return model


def check_admissible(model: Model) -> AdmissibilityReport:
    """Per-edge admissibility with margins ``window - spread``.

    Table potentials are checked value by value against ``[c, window * c]``;
    analytic families are checked through their declared spread.
    """
    window = model.window
    checks = []
    for i, (e, p) in enumerate(zip(model.graph.edges, model.potentials)):
        offending = None
        if p.family == "table":
            vals = np.asarray(p.values)
            bad = np.flatnonzero((vals < p.c) | (vals > window * p.c))
            passed = bad.size == 0
            if not passed:
                offending = tuple(int(x) for x in np.unravel_index(int(bad[0]), (p.N,) * p.arity))
        else:
            passed = p.upper_factor <= window
        checks.append(
            EdgeCheck(i, e, p.family, p.upper_factor, window, window - p.upper_factor, bool(passed), offending)
        )
    return AdmissibilityReport(window, tuple(checks))


@dataclass(frozen=True)
class GradientCheck:
    edge: int
    declared_k: float
    max_ratio: float
    passed: bool
    argmax: tuple


def _fd_gradient_norms(p: Potential, pts: np.ndarray, h: float) -> np.ndarray:
    r = p.arity
    grads = np.empty_like(pts)
    for i in range(r):
        e = np.zeros(r)
        e[i] = h
        lo_ok = pts[:, i] - h >= 0.0
        hi_ok = pts[:, i] + h <= 1.0
        g = np.empty(len(pts))
        central = lo_ok & hi_ok
        if central.any():
            q = pts[central]
            g[central] = (p.evaluate(q + e) - p.evaluate(q - e)) / (2 * h)
        fwd = ~lo_ok
        if fwd.any():
            q = pts[fwd]
            g[fwd] = (-3 * p.evaluate(q) + 4 * p.evaluate(q + e) - p.evaluate(q + 2 * e)) / (2 * h)
        bwd = lo_ok & ~hi_ok
        if bwd.any():
            q = pts[bwd]
            g[bwd] = (3 * p.evaluate(q) - 4 * p.evaluate(q - e) + p.evaluate(q - 2 * e)) / (2 * h)
        grads[:, i] = g
    return np.linalg.norm(grads, axis=1)


def check_gradient_bound(model: Model, samples: int = 256, step: float = 1e-5, rtol: float = 1e-4) -> list:
    """Probe ``||grad phi_e||_2 <= k_e c_e`` at Halton points plus cube corners.

    Returns one :class:`GradientCheck` per edge.  Gradients are central
    differences (second-order one-sided at the faces).
    """
    out = []
    for i, p in enumerate(model.potentials):
        if not p.is_analytic:
            raise ModelError(f"edge {i}: table potentials have no continuous counterpart")
        if p.k is None:
            raise ModelError(f"edge {i}: {p.family} potential declares no gradient bound k")
        r = p.arity
        halton = qmc.Halton(d=r, scramble=False).random(samples)
        corners = grid_points(2, r) * 2.0  # {0,1}^r
        pts = np.vstack([halton, corners])
        norms = _fd_gradient_norms(p, pts, step) / p.c
        j = int(np.argmax(norms))
        ratio = float(norms[j])
        out.append(GradientCheck(i, float(p.k), ratio, ratio <= p.k * (1 + rtol) + 1e-12, tuple(pts[j].tolist())))
    return out


# ---------------------------------------------------------------------------
# model files


def _vertex_index(token, names, n, where):
    if isinstance(token, bool):
        raise ModelFormatError("expected a vertex index or name", where)
    if isinstance(token, int):
        if not 0 <= token < n:
            raise ModelFormatError(f"vertex {token} outside [0, {n - 1}]", where)
        return token
    if isinstance(token, str) and names is not None and token in names:
        return names.index(token)
    raise ModelFormatError(f"unknown vertex {token!r}", where)


def parse_model(data: dict, N: Optional[int] = None, delta=None, *, strict: bool = True) -> Model:
    """Build a model from the decoded JSON document.

    ``N`` and ``delta`` override the document's fields when given.
    """
    if not isinstance(data, dict):
        raise ModelFormatError("top level must be an object")
    if "vertices" not in data:
        raise ModelFormatError("missing field", "vertices")
    vspec = data["vertices"]
    names = None
    if isinstance(vspec, bool):
        raise ModelFormatError("expected a count or a list of names", "vertices")
    if isinstance(vspec, int):
        n = vspec
    elif isinstance(vspec, list) and all(isinstance(s, str) for s in vspec):
        names = list(vspec)
        if len(set(names)) != len(names):
            raise ModelFormatError("duplicate vertex name", "vertices")
        n = len(names)
    else:
        raise ModelFormatError("expected a count or a list of names", "vertices")
    if n < 1:
        raise ModelFormatError("need at least one vertex", "vertices")

    if N is None:
        N = data.get("N")
    if N is not None and (isinstance(N, bool) or not isinstance(N, int) or N < 1):
        raise ModelFormatError(f"N must be a positive integer, got {N!r}", "N")
    if delta is None:
        delta = data.get("delta", "auto")
    if not (delta == "auto" or (isinstance(delta, (int, float)) and not isinstance(delta, bool))):
        raise ModelFormatError(f"delta must be a number or \"auto\", got {delta!r}", "delta")

    edges_spec = data.get("edges", [])
    if not isinstance(edges_spec, list):
        raise ModelFormatError("expected a list", "edges")
    edges, pots = [], []
    for i, item in enumerate(edges_spec):
        where = f"edges[{i}]"
        if not isinstance(item, dict) or "vertices" not in item:
            raise ModelFormatError("expected an object with a \"vertices\" list", where)
        verts = item["vertices"]
        if not isinstance(verts, list) or not verts:
            raise ModelFormatError("expected a non-empty list", f"{where}.vertices")
        idx = [_vertex_index(t, names, n, f"{where}.vertices[{j}]") for j, t in enumerate(verts)]
        if len(set(idx)) != len(idx):
            raise ModelFormatError("duplicate vertex in edge", f"{where}.vertices")
        if "potential" not in item:
            raise ModelFormatError("missing field", f"{where}.potential")
        pots.append(potential_from_json(item["potential"], len(idx), N, f"{where}.potential"))
        edges.append(tuple(idx))

    if N is None:
        table_N = {p.N for p in pots if p.family == "table"}
        if len(table_N) == 1:
            N = table_N.pop()
        else:
            raise ModelFormatError("no grid resolution given; set \"N\" in the file or pass --N", "N")
    graph = Hypergraph(n, tuple(edges), tuple(names) if names else None)
    return build_model(graph, pots, N, delta, strict=strict)


def load_model(path: Union[str, Path], N: Optional[int] = None, delta=None, *, strict: bool = True) -> Model:
    """Read a UTF-8 JSON model file; see :func:`parse_model`."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return parse_model(data, N, delta, strict=strict)
