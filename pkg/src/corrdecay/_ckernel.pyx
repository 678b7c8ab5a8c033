# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled recursion kernel.

Same interface and floating-point operation order as ``_pykernel``.  The
recursion runs without the GIL unless a memo cache is supplied, in which
case the GIL is re-acquired only around cache lookups and stores.
"""

from libc.stdlib cimport malloc, free, calloc
from cpython.bytes cimport PyBytes_FromStringAndSize

import numpy as np

NAME = "cython"


cdef struct Graph:
    int n
    int N
    int* edge_ptr
    int* edge_verts
    long long* strides
    long long* tab_off
    double* tab
    int* inc_ptr
    int* inc_edges


cdef class KernelGraph:
    cdef Graph g
    cdef object _arrays
    cdef public int n
    cdef public int N

    def __init__(self, int n, int N, edges, tables, incident):
        edge_ptr = [0]
        verts = []
        strides = []
        offs = []
        flat = []
        off = 0
        for e, t in zip(edges, tables):
            r = len(e)
            verts.extend(int(u) for u in e)
            strides.extend(N ** (r - 1 - pos) for pos in range(r))
            edge_ptr.append(len(verts))
            offs.append(off)
            t = np.asarray(t, dtype=np.float64).reshape(-1)
            flat.append(t)
            off += t.shape[0]
        inc_ptr = [0]
        inc = []
        for lst in incident:
            inc.extend(int(x) for x in lst)
            inc_ptr.append(len(inc))
        # pad so that &a[0] is always valid
        a_edge_ptr = np.ascontiguousarray(edge_ptr, dtype=np.int32)
        a_verts = np.ascontiguousarray(verts + [0], dtype=np.int32)
        a_strides = np.ascontiguousarray(strides + [0], dtype=np.int64)
        a_offs = np.ascontiguousarray(offs + [0], dtype=np.int64)
        a_tab = np.ascontiguousarray(np.concatenate(flat + [np.zeros(1)]), dtype=np.float64)
        a_inc_ptr = np.ascontiguousarray(inc_ptr, dtype=np.int32)
        a_inc = np.ascontiguousarray(inc + [0], dtype=np.int32)
        self._arrays = (a_edge_ptr, a_verts, a_strides, a_offs, a_tab, a_inc_ptr, a_inc)

        cdef int[::1] m_edge_ptr = a_edge_ptr
        cdef int[::1] m_verts = a_verts
        cdef long long[::1] m_strides = a_strides
        cdef long long[::1] m_offs = a_offs
        cdef double[::1] m_tab = a_tab
        cdef int[::1] m_inc_ptr = a_inc_ptr
        cdef int[::1] m_inc = a_inc
        self.g.n = n
        self.g.N = N
        self.g.edge_ptr = &m_edge_ptr[0]
        self.g.edge_verts = &m_verts[0]
        self.g.strides = &m_strides[0]
        self.g.tab_off = &m_offs[0]
        self.g.tab = &m_tab[0]
        self.g.inc_ptr = &m_inc_ptr[0]
        self.g.inc_edges = &m_inc[0]
        self.n = n
        self.N = N


def make_graph(n, N, edges, normalized_tables, incident):
    return KernelGraph(n, N, edges, normalized_tables, incident)


cdef inline int _live(const Graph* g, const unsigned char* removed, int e) noexcept nogil:
    cdef int i
    for i in range(g.edge_ptr[e], g.edge_ptr[e + 1]):
        if removed[g.edge_verts[i]]:
            return 0
    return 1


cdef int _neighbors(const Graph* g, const unsigned char* removed, const int* beta, int v,
                    int* out, unsigned char* mark) noexcept nogil:
    # mark: zeroed scratch of length n, left zeroed on return
    cdef int a, e, i, u, count = 0
    for a in range(g.inc_ptr[v], g.inc_ptr[v + 1]):
        e = g.inc_edges[a]
        if not _live(g, removed, e):
            continue
        for i in range(g.edge_ptr[e], g.edge_ptr[e + 1]):
            u = g.edge_verts[i]
            if u != v and beta[u] < 0:
                mark[u] = 1
    for u in range(g.n):
        if mark[u]:
            out[count] = u
            count += 1
            mark[u] = 0
    return count


cdef int _g(const Graph* g, const unsigned char* removed, const int* beta, int v,
            const int* nbrs, int k, double** tables, double* out) noexcept nogil:
    cdef int N = g.N
    cdef int n = g.n
    cdef int deg = g.inc_ptr[v + 1] - g.inc_ptr[v]
    cdef int a, e, i, u, j, m, t, nt = 0, npairs = 0
    cdef long long s, idx
    cdef double P, w, L
    cdef int total_members = 0
    for a in range(g.inc_ptr[v], g.inc_ptr[v + 1]):
        e = g.inc_edges[a]
        total_members += g.edge_ptr[e + 1] - g.edge_ptr[e]

    cdef int* pos = <int*>malloc((n + 1) * sizeof(int))
    cdef double** t_tab = <double**>malloc((deg + 1) * sizeof(double*))
    cdef long long* t_base = <long long*>malloc((deg + 1) * sizeof(long long))
    cdef long long* t_vstride = <long long*>malloc((deg + 1) * sizeof(long long))
    cdef int* t_pair_ptr = <int*>malloc((deg + 2) * sizeof(int))
    cdef int* p_pos = <int*>malloc((total_members + 1) * sizeof(int))
    cdef long long* p_stride = <long long*>malloc((total_members + 1) * sizeof(long long))
    cdef long long* eidx = <long long*>malloc((deg + 1) * sizeof(long long))
    cdef int* y = <int*>calloc(k + 1, sizeof(int))
    cdef double* prefix_p = <double*>malloc((k + 1) * sizeof(double))
    cdef long long* prefix_idx = <long long*>malloc((k + 1) * sizeof(long long))
    cdef double* U = <double*>calloc(N, sizeof(double))
    cdef int ok = (pos != NULL and t_tab != NULL and t_base != NULL and t_vstride != NULL
                   and t_pair_ptr != NULL and p_pos != NULL and p_stride != NULL and eidx != NULL
                   and y != NULL and prefix_p != NULL and prefix_idx != NULL and U != NULL)
    cdef int start
    if ok:
        for j in range(k):
            pos[nbrs[j]] = j
        t_pair_ptr[0] = 0
        for a in range(g.inc_ptr[v], g.inc_ptr[v + 1]):
            e = g.inc_edges[a]
            if not _live(g, removed, e):
                continue
            s = 0
            t_vstride[nt] = 0
            for i in range(g.edge_ptr[e], g.edge_ptr[e + 1]):
                u = g.edge_verts[i]
                if u == v:
                    t_vstride[nt] = g.strides[i]
                elif beta[u] >= 0:
                    s += beta[u] * g.strides[i]
                else:
                    p_pos[npairs] = pos[u]
                    p_stride[npairs] = g.strides[i]
                    npairs += 1
            t_tab[nt] = g.tab + g.tab_off[e]
            t_base[nt] = s
            nt += 1
            t_pair_ptr[nt] = npairs

        prefix_p[0] = 1.0
        prefix_idx[0] = 0
        start = 0
        while True:
            for j in range(start, k):
                idx = prefix_idx[j] * N + y[j]
                prefix_idx[j + 1] = idx
                prefix_p[j + 1] = prefix_p[j] * tables[j][idx]
            P = prefix_p[k]
            for t in range(nt):
                s = t_base[t]
                for i in range(t_pair_ptr[t], t_pair_ptr[t + 1]):
                    s += y[p_pos[i]] * p_stride[i]
                eidx[t] = s
            for m in range(N):
                w = 1.0
                for t in range(nt):
                    w *= t_tab[t][eidx[t] + m * t_vstride[t]]
                U[m] += P * w
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
        for m in range(N):
            out[m] = U[m] / L

    free(pos); free(t_tab); free(t_base); free(t_vstride); free(t_pair_ptr)
    free(p_pos); free(p_stride); free(eidx); free(y); free(prefix_p); free(prefix_idx); free(U)
    return 0 if ok else -1


cdef object _cache_key(const Graph* g, const unsigned char* removed, const int* beta, int v, int d):
    return (PyBytes_FromStringAndSize(<const char*>removed, g.n),
            PyBytes_FromStringAndSize(<const char*>beta, g.n * sizeof(int)), v, d)


cdef int _cache_get(void* cache, const Graph* g, const unsigned char* removed, const int* beta,
                    int v, int d, double* out, long long* calls) noexcept with gil:
    cdef int m
    hit = (<dict>cache).get(_cache_key(g, removed, beta, v, d))
    if hit is None:
        return 0
    vals = hit[0]
    for m in range(g.N):
        out[m] = vals[m]
    calls[0] = hit[1]
    return 1


cdef void _cache_put(void* cache, const Graph* g, const unsigned char* removed, const int* beta,
                     int v, int d, const double* out, long long calls) noexcept with gil:
    (<dict>cache)[_cache_key(g, removed, beta, v, d)] = (tuple([out[m] for m in range(g.N)]), calls)


cdef long long _rec(const Graph* g, unsigned char* removed, int* beta, int v, int d,
                    void* cache, double* out) noexcept nogil:
    cdef int N = g.N
    cdef int n = g.n
    cdef int m, j, i, k, yv
    cdef long long p, q, size, off, total, calls = 0, c
    cdef double x
    if d == 0:
        for m in range(N):
            out[m] = 1.0 / N
        return 0
    if cache != NULL:
        if _cache_get(cache, g, removed, beta, v, d, out, &calls):
            return calls

    cdef int* nbrs = <int*>malloc((n + 1) * sizeof(int))
    cdef unsigned char* mark = <unsigned char*>calloc(n + 1, 1)
    if nbrs == NULL or mark == NULL:
        free(nbrs); free(mark)
        return -1
    k = _neighbors(g, removed, beta, v, nbrs, mark)
    free(mark)

    total = 0
    size = N
    for j in range(k):
        total += size
        size *= N
    cdef double* block = <double*>malloc((total + 1) * sizeof(double))
    cdef double** tables = <double**>malloc((k + 1) * sizeof(double*))
    cdef double* sub = <double*>malloc(N * sizeof(double))
    if block == NULL or tables == NULL or sub == NULL:
        free(nbrs); free(block); free(tables); free(sub)
        return -1
    off = 0
    size = N
    for j in range(k):
        tables[j] = block + off
        off += size
        size *= N

    removed[v] = 1
    size = 1
    for j in range(k):
        for p in range(size):
            q = p
            for i in range(j - 1, -1, -1):
                beta[nbrs[i]] = <int>(q % N)
                q = q // N
            c = _rec(g, removed, beta, nbrs[j], d - 1, cache, sub)
            if c < 0:
                calls = -1
                break
            for yv in range(N):
                x = sub[yv]
                tables[j][p * N + yv] = 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)
            calls += N * (1 + c)
        for i in range(j):
            beta[nbrs[i]] = -1
        if calls < 0:
            break
        size *= N
    removed[v] = 0

    if calls >= 0 and _g(g, removed, beta, v, nbrs, k, tables, out) < 0:
        calls = -1
    free(nbrs); free(block); free(tables); free(sub)

    if cache != NULL and calls >= 0:
        _cache_put(cache, g, removed, beta, v, d, out, calls)
    return calls


def approx_vec(KernelGraph kg, removed, beta, int v, int d, cache=None):
    """Estimated marginal of ``v`` at every level; returns ``(values, calls)``."""
    cdef unsigned char[::1] rem = np.array(removed, dtype=np.uint8).reshape(-1)
    cdef int[::1] bet = np.array(beta, dtype=np.int32).reshape(-1)
    if rem.shape[0] != kg.g.n or bet.shape[0] != kg.g.n:
        raise ValueError("removed/beta must have one entry per vertex")
    out = np.empty(kg.g.N, dtype=np.float64)
    cdef double[::1] o = out
    cdef long long calls
    cdef void* cp = NULL
    if cache is not None:
        if not isinstance(cache, dict):
            raise TypeError("cache must be a dict")
        cp = <void*>cache
        calls = _rec(&kg.g, &rem[0], &bet[0], v, d, cp, &o[0])
    else:
        with nogil:
            calls = _rec(&kg.g, &rem[0], &bet[0], v, d, NULL, &o[0])
    if calls < 0:
        raise MemoryError("recursion kernel ran out of memory")
    return out.tolist(), int(calls)


def neighbors(KernelGraph kg, removed, beta, int v):
    cdef unsigned char[::1] rem = np.array(removed, dtype=np.uint8).reshape(-1)
    cdef int[::1] bet = np.array(beta, dtype=np.int32).reshape(-1)
    cdef int[::1] out = np.empty(kg.g.n + 1, dtype=np.int32)
    cdef unsigned char[::1] mark = np.zeros(kg.g.n + 1, dtype=np.uint8)
    cdef int k = _neighbors(&kg.g, &rem[0], &bet[0], v, &out[0], &mark[0])
    return [out[i] for i in range(k)]


def g_vec(KernelGraph kg, removed, beta, int v, nbrs, tables):
    """``U_m / L`` for every level ``m`` given flat conditional-marginal tables."""
    cdef unsigned char[::1] rem = np.array(removed, dtype=np.uint8).reshape(-1)
    cdef int[::1] bet = np.array(beta, dtype=np.int32).reshape(-1)
    cdef int[::1] nb = np.array(list(nbrs) + [0], dtype=np.int32)
    cdef int k = len(nbrs)
    cdef int N = kg.g.N
    cdef int j
    if len(tables) != k:
        raise ValueError(f"{len(tables)} marginal tables for {k} neighbors")
    arrs = []
    for j in range(k):
        t = np.ascontiguousarray(np.asarray(tables[j], dtype=np.float64).reshape(-1))
        if t.shape[0] != N ** (j + 1):
            raise ValueError(f"table {j} has {t.shape[0]} entries, expected {N ** (j + 1)}")
        arrs.append(t)
    cdef double** ptrs = <double**>malloc((k + 1) * sizeof(double*))
    cdef double[::1] tv
    for j in range(k):
        tv = arrs[j]
        ptrs[j] = &tv[0]
    out = np.empty(N, dtype=np.float64)
    cdef double[::1] o = out
    cdef int rc = _g(&kg.g, &rem[0], &bet[0], v, &nb[0], k, ptrs, &o[0])
    free(ptrs)
    if rc < 0:
        raise MemoryError("g evaluation ran out of memory")
    return out.tolist()
