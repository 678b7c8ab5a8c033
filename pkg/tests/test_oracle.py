import itertools
import math

import numpy as np
import pytest

from corrdecay.errors import BudgetExceededError, ModelError
from corrdecay.instances import constant_model, path3_callable, path3_exp, path3_table, random_model
from corrdecay.model import build_model
from corrdecay.oracle import (
    conditional_marginals_exact,
    f_eval,
    integral_reference,
    marginal_exact,
    marginals_exact,
    z_exact,
)

# 8 grid points by hand: 4 with the middle vertex at 0, then 1 + 2 * 1.01 + 1.01^2
PATH3_Z = 8.0401


def test_path3_reference_values():
    m = path3_table()
    assert z_exact(m).value == pytest.approx(PATH3_Z, abs=1e-12)
    assert marginal_exact(m, 1, 0) == pytest.approx(4.0 / PATH3_Z, abs=1e-14)
    assert z_exact(m, {1: 0}).value == pytest.approx(4.0, abs=1e-14)
    assert z_exact(m, removed=[1]).value == pytest.approx(4.0, abs=1e-14)


def test_constant_model_closed_form():
    m = constant_model(4, [(0, 1, 2), (2, 3)], 3, c=2.0)
    assert z_exact(m).log_value == pytest.approx(4 * math.log(3) + 2 * math.log(2.0), abs=1e-12)


def test_f_eval_matches_direct_product():
    m = path3_exp(0.03)
    for y in itertools.product(range(2), repeat=3):
        direct = sum(p.log_value([y[u] / 2 for u in e]) for e, p in zip(m.graph.edges, m.potentials))
        assert f_eval(m, y) == pytest.approx(direct, abs=1e-14)
    with pytest.raises(ModelError):
        f_eval(m, [0, 2, 0])


def test_telescoping_identity(rng):
    for _ in range(20):
        m = random_model(rng)
        order = rng.permutation(m.n)
        beta = {}
        log_z = z_exact(m).log_value
        acc = 0.0
        for v in order:
            acc += math.log(marginal_exact(m, int(v), 0, beta))
            beta[int(v)] = 0
        assert log_z == pytest.approx(f_eval(m, [0] * m.n) - acc, abs=1e-10)


def test_relabel_and_edge_order_invariance(rng):
    for _ in range(15):
        m = random_model(rng)
        perm = [int(x) for x in rng.permutation(m.n)]
        g = m.graph.relabeled(perm)
        relabeled = build_model(g, m.potentials, m.N, m.delta, strict=False)
        assert z_exact(relabeled).log_value == pytest.approx(z_exact(m).log_value, abs=1e-11)
        order = rng.permutation(len(m.graph.edges))
        shuffled = build_model(
            type(m.graph)(m.n, tuple(m.graph.edges[i] for i in order)),
            [m.potentials[i] for i in order],
            m.N,
            m.delta,
            strict=False,
        )
        assert z_exact(shuffled).log_value == pytest.approx(z_exact(m).log_value, abs=1e-11)


def test_edge_scaling_scales_z_and_keeps_marginals(rng):
    for _ in range(10):
        m = random_model(rng)
        if not m.graph.edges:
            continue
        s = m.scaled_edge(0, 3.7)
        assert z_exact(s).log_value == pytest.approx(z_exact(m).log_value + math.log(3.7), abs=1e-11)
        np.testing.assert_allclose(marginals_exact(s, 0), marginals_exact(m, 0), atol=1e-13)


def test_marginals_are_distributions(rng):
    m = random_model(rng, n_range=(3, 5))
    for v in range(m.n):
        x = marginals_exact(m, v, {(v + 1) % m.n: 1} if m.n > 1 else {})
        assert x.sum() == pytest.approx(1.0, abs=1e-13) and np.all(x > 0)


def test_conditional_marginals_are_stochastic(rng):
    m = random_model(rng, n_range=(4, 5), connected=True)
    cm = conditional_marginals_exact(m, 0)
    assert list(cm.neighbor_order) == sorted(m.graph.neighbors[0])
    assert cm.is_stochastic(1e-12)


def test_budget_refusal_names_the_count():
    m = path3_table()
    with pytest.raises(BudgetExceededError, match="2\\^3 = 8") as exc:
        z_exact(m, budget=7)
    assert exc.value.required == 8
    # constraining a vertex halves the work
    assert z_exact(m, {0: 1}, budget=4).value > 0


def test_bad_constraints_rejected():
    m = path3_table()
    with pytest.raises(ModelError):
        z_exact(m, {5: 0})
    with pytest.raises(ModelError):
        z_exact(m, {0: 2})
    with pytest.raises(ModelError):
        z_exact(m, {0: 0}, removed=[0])


def test_quadrature_converges_for_path3():
    m = path3_callable(0.04)
    q = integral_reference(m, 32)
    # integral of (1 + s ab)(1 + s bc) is 1 + s/2 + s^2/12
    exact = 1.0 + 2 * 0.04 / 4 + 0.04**2 / 12
    assert q.value == pytest.approx(exact, rel=1e-6)
    assert q.change < 1e-5


def test_quadrature_limits():
    with pytest.raises(ModelError):
        integral_reference(path3_table())
