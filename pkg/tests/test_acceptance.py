"""Acceptance suite: one test, and one PASS/FAIL line, per criterion.

Expected values are either frozen constants computed by hand or produced
by the brute-force oracle, never by the estimator under test.
"""

import math
from functools import lru_cache

import numpy as np
import pytest

from corrdecay.bridge import estimate_integral, sandwich_bounds
from corrdecay.decay import (
    ConditionalMarginals,
    approx_marginals,
    approx_prob,
    approx_z,
    call_count_estimate,
    choose_depth,
    g_vector,
    unconstrained_neighbors,
)
from corrdecay.instances import path3_table, random_model
from corrdecay.model import Hypergraph, admissibility_window, build_model
from corrdecay.oracle import conditional_marginals_exact, integral_reference, marginals_exact, z_exact
from corrdecay.potentials import CallablePotential, ExpBilinearPotential

SQRT2 = math.sqrt(2.0)
# (1 + ln(4/3) / 6), evaluated by hand to 16 digits
WINDOW_0_3_3 = 1.0479470120752967


@lru_cache(maxsize=None)
def decay_instances():
    """200 admissible instances, n <= 5, N <= 3, Delta <= 3, half of them connected."""
    rng = np.random.default_rng(1729)
    out = []
    for i in range(200):
        out.append(
            random_model(
                rng,
                n_range=(1, 5),
                N_choices=(2, 3),
                max_degree=3,
                max_arity=3,
                family="mixed",
                delta_fraction=0.9,
                connected=i % 2 == 0,
            )
        )
    return tuple(out)


@lru_cache(maxsize=None)
def exact_marginals(i):
    m = decay_instances()[i]
    return tuple(marginals_exact(m, v) for v in range(m.n))


def stochastic_point(rng, nbrs, N, alpha=1.0, floor=0.0):
    tabs = []
    for j in range(len(nbrs)):
        rows = rng.dirichlet(np.full(N, alpha), size=N**j)
        rows = (1.0 - floor) * rows + floor / N
        tabs.append(rows.reshape((N,) * (j + 1)))
    return ConditionalMarginals(tuple(nbrs), tuple(tabs))


def test_c01_window_constant(report_criterion):
    w = admissibility_window(0.0, 3, 3)
    ok = abs(w - 1.047947) <= 1e-5 and abs(w - WINDOW_0_3_3) <= 1e-15
    assert report_criterion(1, "window constant", ok, f"admissibility_window(0, 3, 3) = {w:.10f}")


def test_c02_decay_contract(report_criterion):
    models = decay_instances()
    families = {p.family for m in models for p in m.potentials}
    worst = -math.inf
    checks = 0
    for i, m in enumerate(models):
        assert m.n <= 5 and m.N <= 3 and m.Delta <= 3
        exact = exact_marginals(i)
        for v in range(m.n):
            for d in range(7):
                est, _ = approx_marginals(m, v, {}, d)
                err = np.abs(est - exact[v]).max()
                worst = max(worst, err - (1.0 - m.delta) ** d)
                checks += m.N
    ok = worst <= 1e-9 and len(models) >= 200 and {"table", "exp-bilinear"} <= families
    detail = f"{len(models)} instances, {checks} (vertex, level, d) checks, max(err - (1-delta)^d) = {worst:.3e}"
    assert report_criterion(2, "decay contract", ok, detail)


def test_c03_gradient_bound(report_criterion):
    rng = np.random.default_rng(31)
    h = 1e-5
    instances = points = 0
    worst_l1 = worst_coord = -math.inf
    while instances < 50:
        m = random_model(rng, n_range=(2, 5), N_choices=(2, 3), connected=True)
        v = int(rng.integers(m.n))
        nbrs = unconstrained_neighbors(m, v)
        if not nbrs or sum(m.N ** (j + 1) for j in range(len(nbrs))) > 400:
            continue
        instances += 1
        N = m.N
        for _ in range(10):
            # keep every entry at least 1e-3 inside [0, 1] so both FD probes stay valid
            cm = stochastic_point(rng, nbrs, N, floor=0.01)
            flat = cm.flat()
            grad = [np.empty((len(t), N)) for t in flat]
            for k, t in enumerate(flat):
                for idx in range(len(t)):
                    up = [x.copy() for x in flat]
                    dn = [x.copy() for x in flat]
                    up[k][idx] += h
                    dn[k][idx] -= h
                    gu = g_vector(m, v, {}, ConditionalMarginals.from_flat(nbrs, up, N))
                    gd = g_vector(m, v, {}, ConditionalMarginals.from_flat(nbrs, dn, N))
                    grad[k][idx] = (gu - gd) / (2 * h)
            l1 = sum(np.abs(g).sum(axis=0) for g in grad)
            worst_l1 = max(worst_l1, float(l1.max()) - (1.0 - m.delta))
            for k, t in enumerate(cm.tables):
                # product of x(ybar_j), j < k, for the prefix of every entry of table k
                pre = np.ones((N,) * k)
                for j in range(k):
                    pre = pre * cm.tables[j].reshape((N,) * (j + 1) + (1,) * (k - 1 - j))
                bound = (1.0 - m.delta) * np.repeat(pre.reshape(-1), N) / (m.eta * N)
                excess = np.abs(grad[k]) - bound[:, None]
                worst_coord = max(worst_coord, float(excess.max()))
            points += 1
    ok = worst_l1 <= 1e-3 and worst_coord <= 1e-3
    detail = (
        f"{instances} instances x 10 points, max(||grad g||_1 - (1-delta)) = {worst_l1:.3e}, "
        f"max per-coordinate excess = {worst_coord:.3e}"
    )
    assert report_criterion(3, "gradient bound", ok, detail)


def test_c04_lower_bound(report_criterion):
    rng = np.random.default_rng(4)
    worst = math.inf
    count = 0
    for m in decay_instances():
        if not m.graph.is_connected():
            continue
        count += 1
        floor = 1.0 / (SQRT2 * m.N)
        for v in range(m.n):
            nbrs = unconstrained_neighbors(m, v)
            inputs = [conditional_marginals_exact(m, v)]
            inputs += [stochastic_point(rng, nbrs, m.N, alpha=a) for a in (0.2, 1.0, 5.0)]
            for cm in inputs:
                worst = min(worst, float(g_vector(m, v, {}, cm).min()) - floor)
    ok = worst >= -1e-12 and count > 0
    assert report_criterion(4, "g_m lower bound", ok, f"{count} connected instances, min(g - 1/(sqrt2 N)) = {worst:.3e}")


def test_c05_exactness_identity(report_criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for i, m in enumerate(decay_instances()):
        exact = exact_marginals(i)
        for v in range(m.n):
            g = g_vector(m, v, {}, conditional_marginals_exact(m, v))
            worst = max(worst, float(np.abs(g - exact[v]).max()))
            if m.n > 1:
                u = int(rng.choice([w for w in range(m.n) if w != v]))
                beta = {u: int(rng.integers(m.N))}
                g = g_vector(m, v, beta, conditional_marginals_exact(m, v, beta))
                worst = max(worst, float(np.abs(g - marginals_exact(m, v, beta)).max()))
    ok = worst <= 1e-10
    assert report_criterion(5, "exactness identity", ok, f"200 instances, max |g - x| = {worst:.3e}")


def test_c06_depth_exactness(report_criterion):
    rng = np.random.default_rng(6)
    worst_p = worst_z = 0.0
    for i, m in enumerate(decay_instances()):
        exact = exact_marginals(i)
        for v in range(m.n):
            for m_ in range(m.N):
                est = approx_prob(m, v, {}, m_, m.n)
                worst_p = max(worst_p, abs(est.value - exact[v][m_]))
        if m.n > 1:
            u = int(rng.integers(m.n))
            beta = {u: int(rng.integers(m.N))}
            v = (u + 1) % m.n
            vals, _ = approx_marginals(m, v, beta, m.n - 1)
            worst_p = max(worst_p, float(np.abs(vals - marginals_exact(m, v, beta)).max()))
        z = approx_z(m, m.n)
        worst_z = max(worst_z, abs(math.expm1(z.log_z - z_exact(m).log_value)))
    ok = worst_p <= 1e-9 and worst_z <= 1e-8
    detail = f"max |approx_prob - exact| = {worst_p:.3e}, max |Z_est/Z - 1| = {worst_z:.3e}"
    assert report_criterion(6, "depth-exactness", ok, detail)


def test_c07_end_to_end_z(report_criterion):
    models = [path3_table(0.2)] + [m for m in decay_instances()]
    worst = -math.inf
    for m in models:
        d = choose_depth(m.delta, m.N, m.n)
        z = approx_z(m, d)
        rel = abs(math.expm1(z.log_z - z_exact(m).log_value))
        worst = max(worst, rel - ((1.0 + 1.0 / m.n**2) ** m.n - 1.0))
    ok = worst <= 0.0
    assert report_criterion(7, "end-to-end Z bound", ok, f"{len(models)} instances, max(rel err - bound) = {worst:.3e}")


def _analytic_instances():
    rng = np.random.default_rng(8)
    out = []
    graphs = [
        Hypergraph(1, ((0,),)),
        Hypergraph(2, ((0, 1),)),
        Hypergraph(3, ((0, 1), (1, 2))),
        Hypergraph(3, ((0, 1), (1, 2), (0, 2))),
        Hypergraph(3, ((0, 1, 2),)),
        Hypergraph(3, ((0, 1, 2), (1, 2))),
    ]
    for g in graphs:
        base = 1.0 + math.log1p(1.0 / g.eta) / (2 * g.Delta) if g.eta else math.e
        for _ in range(3):
            pots = []
            for e in g.edges:
                c = float(np.exp(rng.uniform(-0.5, 0.5)))
                if rng.random() < 0.5:
                    pots.append(ExpBilinearPotential(c, math.log(base) * float(rng.uniform(0.1, 0.9)), len(e)))
                else:
                    s = (base - 1.0) * float(rng.uniform(0.1, 0.9))
                    if len(e) == 2:
                        f = lambda y, c=c, s=s: c * (1.0 + s * y[..., 0] * y[..., 1])
                        k = s * SQRT2
                    else:
                        f = lambda y, c=c, s=s: c * (1.0 + s * y[..., 0])
                        k = s
                    pots.append(CallablePotential(f, len(e), c, 1.0 + s, k=k, vectorized=True))
            out.append(build_model(g, pots, 2, "auto"))
    return out


def test_c08_sandwich(report_criterion):
    worst_factor = -math.inf
    misses = 0
    runs = 0
    for model in _analytic_instances():
        q = integral_reference(model, 32)
        k = max(float(p.k) for p in model.potentials)
        for N in (2, 4, 8):
            if math.sqrt(model.n) * k / N >= 1.0:
                continue
            lo, hi = sandwich_bounds(k, model.n, len(model.graph.edges), N)
            riemann = z_exact(model.with_N(N)).value / N**model.n
            ratio = q.value / riemann
            # quadrature tolerance: its own M -> 2M change
            tol = q.change / riemann
            worst_factor = max(worst_factor, lo - ratio - tol, ratio - hi - tol)
            est = estimate_integral(model, N=N)
            if not (est.interval_lower - q.change <= q.value <= est.interval_upper + q.change):
                misses += 1
            runs += 1
    ok = worst_factor <= 0.0 and misses == 0
    detail = f"{runs} (instance, N) pairs, max sandwich violation = {worst_factor:.3e}, interval misses = {misses}"
    assert report_criterion(8, "sandwich", ok, detail)


def _complexity_graphs():
    cycle = lambda n: Hypergraph(n, tuple((i, (i + 1) % n) for i in range(n)))
    k4 = Hypergraph(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))
    return [
        ("2-path", Hypergraph(2, ((0, 1),))),
        ("3-path", Hypergraph(3, ((0, 1), (1, 2)))),
        ("star", Hypergraph(4, ((0, 1), (0, 2), (0, 3)))),
        ("C5", cycle(5)),
        ("C8", cycle(8)),
        ("K4", k4),
        ("hyper-cycle", Hypergraph(6, ((0, 1, 2), (2, 3, 4), (4, 5, 0)))),
    ]


def test_c09_complexity_shape(report_criterion):
    rows = 0
    over_estimate = over_shape = non_monotone = 0
    for name, g in _complexity_graphs():
        for N in (2, 3):
            pots = [ExpBilinearPotential(1.0, 0.001, len(e)) for e in g.edges]
            m = build_model(g, pots, N, "auto")
            prev = -1
            for d in range(7):
                calls = approx_prob(m, 0, {}, 0, d).recursive_calls
                rows += 1
                over_estimate += calls > call_count_estimate(m, d)
                if d >= 1:
                    over_shape += calls > m.eta * d * N ** (m.eta * d)
                non_monotone += calls < prev
                prev = calls
    ok = over_estimate == over_shape == non_monotone == 0
    detail = (
        f"{rows} (graph, N, d) rows: calls > estimate {over_estimate}, "
        f"calls > eta d N^(eta d) {over_shape}, non-monotone in d {non_monotone}"
    )
    assert report_criterion(9, "complexity shape", ok, detail)


def test_c10_determinism(report_criterion):
    from corrdecay import _backend

    differences = 0
    cases = 0
    for m in decay_instances()[:40]:
        for kern in _backend.available():
            ref = approx_z(m, 3, kernel=kern)
            again = approx_z(m, 3, kernel=kern)
            differences += ref != again
            for t in (1, 2, 8):
                differences += approx_z(m, 3, threads=t, kernel=kern) != ref
                vals, calls = approx_marginals(m, 0, {}, 4, threads=t, kernel=kern)
                base, bcalls = approx_marginals(m, 0, {}, 4, kernel=kern)
                differences += vals.tobytes() != base.tobytes() or calls != bcalls
            cases += 1
    for model in _analytic_instances()[:6]:
        a = estimate_integral(model, N=4)
        b = estimate_integral(model, N=4, threads=8)
        differences += a.log_value != b.log_value or a.interval_lower != b.interval_lower
        cases += 1
    ok = differences == 0
    assert report_criterion(10, "determinism", ok, f"{cases} cases over threads 1/2/8 and repeats, {differences} differences")
