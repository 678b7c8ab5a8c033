"""Time the compiled recursion kernel against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each case runs approx_z on a fixed model with both kernels, checks that the
two produce identical output, and reports the best wall time of
``--repeat`` runs.  ``calls`` is the number of scalar invocations of the
recursion the run stands for; the kernels evaluate all ``N`` levels of a
subproblem at once, so the work actually done is much smaller.
"""

import argparse
import json
import sys
import time

from corrdecay import _backend
from corrdecay.decay import approx_z
from corrdecay.model import Hypergraph, build_model
from corrdecay.potentials import ExpBilinearPotential


def ring(n, chords=()):
    edges = [(i, (i + 1) % n) for i in range(n)] + list(chords)
    return Hypergraph(n, tuple(edges))


def grid(rows, cols):
    edges = []
    for i in range(rows):
        for j in range(cols):
            u = i * cols + j
            if j + 1 < cols:
                edges.append((u, u + 1))
            if i + 1 < rows:
                edges.append((u, u + cols))
    return Hypergraph(rows * cols, tuple(edges))


CASES = [
    # name, graph, N, depth
    ("K6 N=2 d=5", Hypergraph(6, tuple((i, j) for i in range(6) for j in range(i + 1, 6))), 2, 5),
    ("ring-12+chords N=3 d=8", ring(12, [(0, 6), (3, 9)]), 3, 8),
    ("hyper-ring-9 N=3 d=6", Hypergraph(9, ((0, 1, 2), (2, 3, 4), (4, 5, 6), (6, 7, 8), (8, 0, 4))), 3, 6),
    ("grid-4x4 N=3 d=7", grid(4, 4), 3, 7),
]


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None, help="also write the rows to this file")
    args = ap.parse_args(argv)

    kernels = _backend.available()
    if "cython" not in kernels:
        print("compiled kernel not built; only the Python kernel is available", file=sys.stderr)

    rows = []
    for name, g, N, d in CASES:
        pots = [ExpBilinearPotential(1.0, 0.01, len(e)) for e in g.edges]
        model = build_model(g, pots, N, "auto")
        row = {"case": name, "n": g.n, "N": N, "depth": d}
        results = {}
        for k in kernels:
            t, z = best_time(lambda: approx_z(model, d, kernel=k), args.repeat)
            row[f"{k}_seconds"] = t
            results[k] = z
        row["calls"] = results[kernels[0]].calls
        row["identical"] = len({r for r in results.values()}) == 1
        if "cython" in kernels:
            row["speedup"] = row["python_seconds"] / row["cython_seconds"]
        rows.append(row)

    header = f"{'case':24s} {'calls':>12s} " + " ".join(f"{k + ' [s]':>12s}" for k in kernels)
    if "cython" in kernels:
        header += f" {'speedup':>8s}"
    print(header)
    for r in rows:
        line = f"{r['case']:24s} {r['calls']:12d} " + " ".join(f"{r[k + '_seconds']:12.4f}" for k in kernels)
        if "speedup" in r:
            line += f" {r['speedup']:7.1f}x"
        if not r["identical"]:
            line += "  OUTPUTS DIFFER"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
    return 0 if all(r["identical"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
