import subprocess
import sys

import numpy as np
import pytest

from corrdecay import _backend
from corrdecay.decay import approx_marginals, approx_z, g_vector, unconstrained_neighbors
from corrdecay.instances import random_model

from .test_decay import stochastic_tables

needs_both = pytest.mark.skipif(len(_backend.available()) < 2, reason="compiled kernel not built")


@needs_both
def test_backends_agree_bit_for_bit(rng):
    for _ in range(30):
        m = random_model(rng, n_range=(2, 6), max_degree=3)
        v = int(rng.integers(m.n))
        beta = {}
        if m.n > 2:
            u = (v + 1) % m.n
            beta[u] = int(rng.integers(m.N))
        for d in (0, 1, 3, 5):
            a, ca = approx_marginals(m, v, beta, d, kernel="python")
            b, cb = approx_marginals(m, v, beta, d, kernel="cython")
            assert ca == cb
            assert a.tobytes() == b.tobytes()
        nbrs = unconstrained_neighbors(m, v, beta)
        cm = stochastic_tables(rng, nbrs, m.N)
        assert g_vector(m, v, beta, cm, kernel="python").tobytes() == g_vector(m, v, beta, cm, kernel="cython").tobytes()


def test_cache_is_value_transparent(rng, kernel):
    for _ in range(15):
        m = random_model(rng, n_range=(3, 6))
        for d in (2, 4):
            for v in range(m.n):
                plain, calls = approx_marginals(m, v, {}, d, kernel=kernel)
                cached, ccalls = approx_marginals(m, v, {}, d, cache=True, kernel=kernel)
                assert plain.tobytes() == cached.tobytes()
                assert calls == ccalls
        shared = {}
        z1 = approx_z(m, 3, cache=shared, kernel=kernel)
        z2 = approx_z(m, 3, cache=shared, kernel=kernel)
        assert z1 == z2 == approx_z(m, 3, kernel=kernel)


def test_thread_count_does_not_change_outputs(rng, kernel):
    for _ in range(8):
        m = random_model(rng, n_range=(3, 6))
        ref = approx_z(m, 4, kernel=kernel)
        for t in (2, 8):
            assert approx_z(m, 4, threads=t, kernel=kernel) == ref
            assert approx_z(m, 4, threads=t, cache=True, kernel=kernel) == ref


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _backend.get_kernel("fortran")


def test_environment_selects_backend():
    code = "import corrdecay; print(corrdecay.KERNEL)"
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env={"CORRDECAY_KERNEL": "python", "PATH": ""}
    )
    assert out.stdout.strip() == "python"
