"""Pure-Python recursion kernel.

Reference backend for :mod:`corrdecay._ckernel`; both expose the same three
functions and perform floating-point operations in the same order, so their
outputs agree to the last bit on the same platform.

State passed between calls:

``removed``
    per-vertex flag, 1 if the vertex has been deleted (with all its edges).
``beta``
    per-vertex level, -1 if unconstrained.
"""

NAME = "python"


class KernelGraph:
    __slots__ = ("n", "N", "edges", "tabs", "strides", "incident")

    def __init__(self, n, N, edges, tabs, incident):
        self.n = n
        self.N = N
        self.edges = [tuple(e) for e in edges]
        self.tabs = [[float(x) for x in t] for t in tabs]
        self.strides = [tuple(N ** (len(e) - 1 - i) for i in range(len(e))) for e in self.edges]
        self.incident = [tuple(x) for x in incident]


def make_graph(n, N, edges, normalized_tables, incident):
    return KernelGraph(n, N, edges, normalized_tables, incident)


def _live(kg, removed, e):
    for u in kg.edges[e]:
        if removed[u]:
            return False
    return True


def neighbors(kg, removed, beta, v):
    """Unconstrained neighbors of ``v`` through live edges, ascending."""
    out = set()
    for e in kg.incident[v]:
        if not _live(kg, removed, e):
            continue
        for u in kg.edges[e]:
            if u != v and beta[u] < 0:
                out.add(u)
    return sorted(out)


def _edge_terms(kg, removed, beta, v, nbrs):
    pos = {u: i for i, u in enumerate(nbrs)}
    terms = []
    for e in kg.incident[v]:
        if not _live(kg, removed, e):
            continue
        base = 0
        vstride = 0
        pairs = []
        for u, s in zip(kg.edges[e], kg.strides[e]):
            if u == v:
                vstride = s
            elif beta[u] >= 0:
                base += beta[u] * s
            else:
                pairs.append((pos[u], s))
        terms.append((kg.tabs[e], base, vstride, pairs))
    return terms


def _g(kg, removed, beta, v, nbrs, tables):
    N = kg.N
    k = len(nbrs)
    terms = _edge_terms(kg, removed, beta, v, nbrs)
    nt = len(terms)
    U = [0.0] * N
    y = [0] * k
    prefix_p = [1.0] * (k + 1)
    prefix_idx = [0] * (k + 1)
    start = 0
    eidx = [0] * nt
    while True:
        for j in range(start, k):
            idx = prefix_idx[j] * N + y[j]
            prefix_idx[j + 1] = idx
            prefix_p[j + 1] = prefix_p[j] * tables[j][idx]
        P = prefix_p[k]
        for t in range(nt):
            tab, base, vstride, pairs = terms[t]
            s = base
            for i, st in pairs:
                s += y[i] * st
            eidx[t] = s
        for m in range(N):
            w = 1.0
            for t in range(nt):
                term = terms[t]
                w *= term[0][eidx[t] + m * term[2]]
            U[m] += P * w
        # odometer, last coordinate fastest
        j = k - 1
        while j >= 0:
            y[j] += 1
            if y[j] < N:
                break
            y[j] = 0
            j -= 1
        if j < 0:
            break
        start = j
    L = 0.0
    for m in range(N):
        L += U[m]
    return [u / L for u in U]


def g_vec(kg, removed, beta, v, nbrs, tables):
    """``U_m / L`` for every level ``m`` given flat conditional-marginal tables.

    ``tables[j]`` has ``N^(j+1)`` entries indexed lexicographically by the
    levels of ``nbrs[0..j]``.
    """
    removed = [int(x) for x in removed]
    beta = [int(x) for x in beta]
    nbrs = [int(u) for u in nbrs]
    if len(tables) != len(nbrs):
        raise ValueError(f"{len(tables)} marginal tables for {len(nbrs)} neighbors")
    N = kg.N
    tabs = []
    for j, t in enumerate(tables):
        t = [float(x) for x in t]
        if len(t) != N ** (j + 1):
            raise ValueError(f"table {j} has {len(t)} entries, expected {N ** (j + 1)}")
        tabs.append(t)
    return _g(kg, removed, beta, v, nbrs, tabs)


def _rec(kg, removed, beta, v, d, cache):
    N = kg.N
    if d == 0:
        return [1.0 / N] * N, 0
    if cache is not None:
        key = (bytes(removed), tuple(beta), v, d)
        hit = cache.get(key)
        if hit is not None:
            return list(hit[0]), hit[1]
    nbrs = neighbors(kg, removed, beta, v)
    removed[v] = 1
    tables = []
    calls = 0
    for j, u in enumerate(nbrs):
        size = N**j
        tab = [0.0] * (size * N)
        for p in range(size):
            q = p
            for i in range(j - 1, -1, -1):
                beta[nbrs[i]] = q % N
                q //= N
            sub, c = _rec(kg, removed, beta, u, d - 1, cache)
            off = p * N
            for yv in range(N):
                x = sub[yv]
                tab[off + yv] = 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)
            calls += N * (1 + c)
        for i in range(j):
            beta[nbrs[i]] = -1
        tables.append(tab)
    removed[v] = 0
    out = _g(kg, removed, beta, v, nbrs, tables)
    if cache is not None:
        cache[key] = (tuple(out), calls)
    return out, calls


def approx_vec(kg, removed, beta, v, d, cache=None):
    """Estimated marginal of ``v`` at every level after ``d`` recursion levels.

    Returns ``(values, calls)`` where ``calls`` counts the scalar
    marginal-estimation invocations the recursion stands for.
    """
    removed = bytearray(int(x) for x in removed)
    beta = [int(x) for x in beta]
    out, calls = _rec(kg, removed, beta, int(v), int(d), cache)
    return out, calls
