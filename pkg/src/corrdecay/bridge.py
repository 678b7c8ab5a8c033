"""From the discrete partition function to the integral over the unit cube.

With ``||grad phi_e||_2 <= k c_e`` the left-endpoint Riemann sum
``Z / N^n`` and the integral differ by at most the factor
``(1 +- sqrt(n) k / N)^|E|``.  :func:`estimate_integral` combines that
sandwich with the certificate of :func:`corrdecay.decay.approx_z`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Union

from .decay import approx_z, choose_depth
from .errors import ModelError
from .model import Model


def _ratio(k: float, n: int, N: int) -> float:
    return math.sqrt(n) * k / N


def closed_form_N(k: float, n: int, edge_count: int) -> int:
    """``ceil(k n^(3/2) |E|)`` before the finite-n containment check."""
    if not (k > 0 and n >= 1 and edge_count >= 1):
        raise ModelError("k must be > 0 and n, |E| >= 1")
    return max(1, math.ceil(k * n**1.5 * edge_count))


def _contained(k, n, edge_count, N) -> bool:
    x = _ratio(k, n, N)
    if x >= 1.0:
        return False
    return (1.0 + x) ** edge_count <= math.exp(1.0 / n) and (1.0 - x) ** edge_count >= math.exp(-1.0 / n)


def choose_N(k: float, n: int, edge_count: int) -> int:
    """Grid resolution putting both sandwich factors inside ``[e^(-1/n), e^(1/n)]``.

    Starts from ``ceil(k n^(3/2) |E|)`` and increases ``N`` until the
    containment actually holds; the lower side needs a slightly larger ``N``
    than the closed form because ``(1 - x)^E < e^(-xE)``.
    """
    N = closed_form_N(k, n, edge_count)
    while not _contained(k, n, edge_count, N):
        N += 1
    return N


def sandwich_bounds(k: float, n: int, edge_count: int, N: int) -> tuple:
    """``((1 - sqrt(n) k / N)^|E|, (1 + sqrt(n) k / N)^|E|)``."""
    if k < 0 or n < 1 or edge_count < 0 or N < 1:
        raise ModelError("need k >= 0, n >= 1, |E| >= 0, N >= 1")
    x = _ratio(k, n, N)
    if x >= 1.0:
        raise ModelError(f"sqrt(n) k / N = {x:.6g} >= 1 makes the bounds vacuous; increase N")
    return (1.0 - x) ** edge_count, (1.0 + x) ** edge_count


@dataclass(frozen=True)
class IntegralEstimate:
    """``log_value`` is ``ln(Z_est / N^n)``.

    ``interval_lower``/``interval_upper`` bracket the true integral given
    both certificates; ``combined_rel_bound`` bounds ``|V_est / I - 1|``.
    """

    log_value: float
    N_used: int
    k: float
    depth: int
    delta: float
    lower_factor: float
    upper_factor: float
    z_ratio_lower: float
    z_ratio_upper: float
    combined_rel_bound: float
    interval_lower: float
    interval_upper: float
    log_z: float
    calls: int
    wall_seconds: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf


def resolve_k(model: Model, k: Union[str, float, None] = "auto") -> float:
    """Global gradient constant: max of the declared per-edge values unless given."""
    if k is not None and k != "auto":
        k = float(k)
        if k < 0:
            raise ModelError("k must be >= 0")
        return k
    ks = []
    for i, p in enumerate(model.potentials):
        if not p.is_analytic:
            raise ModelError(f"edge {i}: table potentials have no continuous counterpart")
        if p.k is None:
            raise ModelError(f"edge {i}: {p.family} potential declares no gradient bound k")
        ks.append(float(p.k))
    return max(ks, default=0.0)


def resolve_N(model: Model, k: float, N: Union[str, int, None] = "auto") -> int:
    if N is not None and N != "auto":
        return int(N)
    edges = len(model.graph.edges)
    if edges == 0 or k == 0:
        # f is constant on every cell; any grid is exact
        return 1
    return choose_N(k, model.n, edges)


def estimate_integral(
    model: Model,
    k: Union[str, float, None] = "auto",
    N: Union[str, int, None] = "auto",
    depth: Union[str, int, None] = "auto",
    *,
    delta=None,
    cache=False,
    threads: int = 1,
    kernel=None,
) -> IntegralEstimate:
    """Certified estimate of the integral of ``f`` over ``[0, 1]^n``.

    ``model`` supplies the hypergraph and analytic potentials; it is
    re-gridded at the chosen ``N``.  ``delta`` defaults to the model's own
    margin.
    """
    if not model.is_analytic:
        raise ModelError("integral estimation needs analytic potentials (no tables)")
    kval = resolve_k(model, k)
    Nval = resolve_N(model, kval, N)
    edges = len(model.graph.edges)
    lower_f, upper_f = sandwich_bounds(kval, model.n, edges, Nval)
    grid_model = model.with_N(Nval, delta=model.delta if delta is None else delta)
    if not grid_model.delta > 0:
        raise ModelError("delta must be > 0")
    d = choose_depth(grid_model.delta, Nval, model.n) if depth in (None, "auto") else int(depth)

    start = time.perf_counter()
    z = approx_z(grid_model, d, cache=cache, threads=threads, kernel=kernel)
    wall = time.perf_counter() - start
    cert = z.certificate
    # tighter of the prior and posterior certificates; both are valid
    zr_lo = max(cert.ratio_lower, cert.posterior_ratio_lower)
    zr_hi = min(cert.ratio_upper, cert.posterior_ratio_upper)

    log_v = z.log_z - model.n * math.log(Nval)
    v = math.exp(log_v)
    # V/I = (Z_est/Z) * (Z N^-n / I), and I / (Z N^-n) lies in [lower_f, upper_f]
    rel_hi = zr_hi / lower_f
    rel_lo = zr_lo / upper_f
    combined = max(rel_hi - 1.0, 1.0 - rel_lo)
    return IntegralEstimate(
        log_value=log_v,
        N_used=Nval,
        k=kval,
        depth=d,
        delta=grid_model.delta,
        lower_factor=lower_f,
        upper_factor=upper_f,
        z_ratio_lower=zr_lo,
        z_ratio_upper=zr_hi,
        combined_rel_bound=combined,
        interval_lower=v / rel_hi,
        interval_upper=v / rel_lo if rel_lo > 0 else math.inf,
        log_z=z.log_z,
        calls=z.calls,
        wall_seconds=wall,
    )
