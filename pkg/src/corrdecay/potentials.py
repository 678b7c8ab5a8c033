"""Edge potential families.

Every potential is a positive function on ``[0, 1]^r`` carrying a lower
bound ``c`` and a multiplicative spread ``upper_factor`` such that
``c <= phi(y) <= upper_factor * c``.  Analytic families additionally carry a
gradient constant ``k`` with ``||grad phi||_2 <= k * c``.

Three families are provided:

``table``
    One value per grid point ``m / N``; exact on the grid and nowhere else.
``exp-bilinear``
    ``c * exp(epsilon * prod(y))``.
``generic-callable``
    Any Python callable together with declared bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ModelError

GRID_TOLERANCE = 1e-9


def grid_points(N: int, arity: int) -> np.ndarray:
    """All grid points ``levels / N`` of ``[0, 1]^arity`` in lexicographic order."""
    if arity == 0:
        return np.zeros((1, 0))
    levels = np.array(list(itertools.product(range(N), repeat=arity)), dtype=float)
    return levels / N


class Potential:
    family: str
    arity: int
    c: float
    upper_factor: float
    k: Optional[float]

    def value(self, point) -> float:
        raise NotImplementedError

    def log_value(self, point) -> float:
        raise NotImplementedError

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over the last axis of ``points``."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, self.arity)
        out = np.array([self.value(p) for p in flat])
        return out.reshape(pts.shape[:-1])

    def grid_values(self, N: int) -> np.ndarray:
        """Values at every grid point of the level-``N`` discretization, lexicographic."""
        return np.asarray(self.evaluate(grid_points(N, self.arity)), dtype=float).reshape(-1)

    def grid_log_values(self, N: int) -> np.ndarray:
        return np.log(self.grid_values(N))

    @property
    def is_analytic(self) -> bool:
        return True

    def scaled(self, gamma: float) -> "Potential":
        """Return the potential ``gamma * phi`` with ``c`` scaled alongside."""
        raise NotImplementedError

    def _check_point(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.shape[0] != self.arity:
            raise ModelError(f"point has {p.shape[0]} coordinates, potential arity is {self.arity}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ModelError(f"point {p.tolist()} lies outside the unit cube")
        return p


@dataclass(frozen=True)
class TablePotential(Potential):
    """Potential given by its values on the ``N``-grid.

    ``values`` is indexed lexicographically by the discrete levels of the
    edge's vertices, in the edge's vertex order.  ``c`` defaults to the
    smallest stored value.
    """

    values: tuple
    N: int
    arity: int
    c: float = None  # type: ignore[assignment]
    family: str = field(default="table", init=False)

    def __post_init__(self):
        vals = tuple(float(x) for x in np.asarray(self.values, dtype=float).reshape(-1))
        if self.N < 1:
            raise ModelError("table potential needs N >= 1")
        if self.arity < 1:
            raise ModelError("table potential needs arity >= 1")
        if len(vals) != self.N**self.arity:
            raise ModelError(
                f"table potential has {len(vals)} values, expected N^r = {self.N}^{self.arity} = {self.N**self.arity}"
            )
        if any(not math.isfinite(x) or x <= 0.0 for x in vals):
            raise ModelError("table potential values must be finite and strictly positive")
        object.__setattr__(self, "values", vals)
        c = min(vals) if self.c is None else float(self.c)
        if not c > 0.0:
            raise ModelError("table potential needs c > 0")
        if c > min(vals):
            raise ModelError(f"table potential has a value {min(vals)!r} below its declared c = {c!r}")
        object.__setattr__(self, "c", c)

    @property
    def upper_factor(self) -> float:
        return max(max(self.values) / self.c, 1.0)

    @property
    def k(self):
        return None

    @property
    def is_analytic(self) -> bool:
        return False

    def index_of(self, point) -> int:
        p = self._check_point(point)
        scaled = p * self.N
        levels = np.rint(scaled)
        if np.any(np.abs(scaled - levels) > GRID_TOLERANCE) or np.any(levels > self.N - 1):
            raise ModelError(f"point {p.tolist()} is not on the N={self.N} grid")
        idx = 0
        for lv in levels.astype(int):
            idx = idx * self.N + int(lv)
        return idx

    def value(self, point) -> float:
        return self.values[self.index_of(point)]

    def log_value(self, point) -> float:
        return math.log(self.value(point))

    def evaluate(self, points):
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, self.arity)
        return np.array([self.value(p) for p in flat]).reshape(pts.shape[:-1])

    def grid_values(self, N: int) -> np.ndarray:
        if N != self.N:
            raise ModelError(f"table potential is bound to N={self.N}, requested N={N}")
        return np.array(self.values)

    def scaled(self, gamma):
        return TablePotential([gamma * x for x in self.values], self.N, self.arity, c=gamma * self.c)


@dataclass(frozen=True)
class ExpBilinearPotential(Potential):
    """``phi(y) = c * exp(epsilon * prod_i y_i)`` on ``[0, 1]^arity``."""

    c: float
    epsilon: float
    arity: int
    family: str = field(default="exp-bilinear", init=False)

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ModelError("exp-bilinear potential needs finite c > 0")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ModelError("exp-bilinear potential needs finite epsilon >= 0")
        if self.arity < 1:
            raise ModelError("exp-bilinear potential needs arity >= 1")

    @property
    def upper_factor(self) -> float:
        return math.exp(self.epsilon)

    @property
    def k(self) -> float:
        # sup of ||grad||_2 / c is eps * e^eps * ||(prod_{j!=i} y_j)_i||_2 <= eps e^eps sqrt(r)
        return self.epsilon * math.exp(self.epsilon) * math.sqrt(self.arity)

    def log_value(self, point) -> float:
        p = self._check_point(point)
        return math.log(self.c) + self.epsilon * float(np.prod(p))

    def value(self, point) -> float:
        p = self._check_point(point)
        return self.c * math.exp(self.epsilon * float(np.prod(p)))

    def evaluate(self, points):
        pts = np.asarray(points, dtype=float)
        return self.c * np.exp(self.epsilon * np.prod(pts, axis=-1))

    def grid_log_values(self, N: int) -> np.ndarray:
        return math.log(self.c) + self.epsilon * np.prod(grid_points(N, self.arity), axis=-1)

    def scaled(self, gamma):
        return ExpBilinearPotential(gamma * self.c, self.epsilon, self.arity)


@dataclass(frozen=True)
class CallablePotential(Potential):
    """Arbitrary potential with declared constants.

    ``func`` maps a length-``arity`` array to a positive float, or maps an
    array of shape ``(..., arity)`` to shape ``(...)`` when ``vectorized`` is
    true.  All guarantees rest on the declared ``c``, ``upper_factor`` and
    ``k``; use :func:`corrdecay.model.check_gradient_bound` and
    :func:`corrdecay.model.check_admissible` to probe them.
    """

    func: Callable
    arity: int
    c: float
    upper_factor: float
    k: Optional[float] = None
    vectorized: bool = False
    family: str = field(default="generic-callable", init=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ModelError("callable potential needs c > 0")
        if not self.upper_factor >= 1:
            raise ModelError("callable potential needs upper_factor >= 1")
        if self.k is not None and self.k < 0:
            raise ModelError("callable potential needs k >= 0")
        if self.arity < 1:
            raise ModelError("callable potential needs arity >= 1")

    def value(self, point) -> float:
        p = self._check_point(point)
        out = float(self.func(p))
        if not out > 0:
            raise ModelError(f"callable potential returned non-positive value {out} at {p.tolist()}")
        return out

    def log_value(self, point) -> float:
        return math.log(self.value(point))

    def evaluate(self, points):
        if not self.vectorized:
            return super().evaluate(points)
        return np.asarray(self.func(np.asarray(points, dtype=float)), dtype=float)

    def scaled(self, gamma):
        func = self.func
        return CallablePotential(
            lambda y: gamma * func(y), self.arity, gamma * self.c, self.upper_factor, self.k, self.vectorized
        )


def potential_eval(spec: Potential, point) -> tuple[float, float]:
    """Return ``(phi(point), ln phi(point))``."""
    return spec.value(point), spec.log_value(point)


def potential_bounds(spec: Potential) -> tuple[float, float]:
    """Return ``(c, upper_factor)``."""
    return spec.c, spec.upper_factor


def potential_gradient_bound(spec: Potential) -> float:
    """Declared or analytic ``k`` with ``||grad phi||_2 <= k * c``."""
    if not spec.is_analytic:
        raise ModelError("table potentials have no continuous counterpart; no gradient bound")
    if spec.k is None:
        raise ModelError(f"{spec.family} potential declares no gradient bound k")
    return float(spec.k)


def potential_from_json(block: dict, arity: int, N: Optional[int], where: str = "potential") -> Potential:
    """Build a potential from a model-file block.

    Raises :class:`~corrdecay.errors.ModelFormatError` naming the offending
    field on malformed input.
    """
    from .errors import ModelFormatError

    if not isinstance(block, dict):
        raise ModelFormatError("expected an object", where)
    family = block.get("family")
    try:
        if family == "exp-bilinear":
            if "epsilon" not in block:
                raise ModelFormatError("missing field", f"{where}.epsilon")
            return ExpBilinearPotential(float(block.get("c", 1.0)), float(block["epsilon"]), arity)
        if family == "table":
            if "values" not in block:
                raise ModelFormatError("missing field", f"{where}.values")
            values = block["values"]
            if not isinstance(values, list):
                raise ModelFormatError("expected a list of numbers", f"{where}.values")
            if N is None:
                N = round(len(values) ** (1.0 / arity))
            return TablePotential(values, N, arity, c=block.get("c"))
    except ModelFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(str(exc), where) from exc
    raise ModelFormatError(f"unknown or unsupported family {family!r}", f"{where}.family")
