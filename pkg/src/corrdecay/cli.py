"""Command-line interface.

Usage::

    corrdecay check MODEL.json
    corrdecay oracle MODEL.json [--beta "1=0,2=1"] [--marginals]
    corrdecay estimate-z MODEL.json [--delta auto|x] [--depth auto|d] [--cache on|off]
    corrdecay estimate-integral MODEL.json [--k auto|x] [--N auto|n] [--depth auto|d]
    corrdecay compare MODEL.json [--max-depth D] [--csv out.csv]

Every subcommand prints a key-sorted JSON report on stdout and a short
summary on stderr.  Exit codes: 0 success, 1 admissibility or validation
failure, 2 budget or feasibility refusal, 3 parse error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .bridge import estimate_integral, resolve_k, resolve_N
from .decay import approx_marginals, approx_z, call_count_estimate, choose_depth
from .errors import BudgetExceededError, ModelError, ModelFormatError, WindowExceededError
from .model import check_admissible, check_gradient_bound, load_model, max_admissible_delta
from .oracle import DEFAULT_BUDGET, marginals_exact, z_exact

EXIT_OK, EXIT_INVALID, EXIT_REFUSED, EXIT_PARSE = 0, 1, 2, 3
CALL_LIMIT = 10**9


class Refusal(Exception):
    """Run declined before starting (exit code 2)."""


def _clean(obj):
    """Make a report JSON-safe: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _emit(report: dict, out=None) -> None:
    out = out or sys.stdout
    out.write(json.dumps(_clean(report), sort_keys=True, indent=2) + "\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _auto_or_float(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None


def _auto_or_int(text: str):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or an integer, got {text!r}") from None


def _parse_beta(text: str, model) -> dict:
    beta = {}
    if not text:
        return beta
    names = model.graph.names
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ModelFormatError(f"expected v=m, got {item!r}", "--beta")
        v, m = (s.strip() for s in item.split("=", 1))
        if names is not None and v in names:
            vi = names.index(v)
        else:
            try:
                vi = int(v)
            except ValueError:
                raise ModelFormatError(f"unknown vertex {v!r}", "--beta") from None
        try:
            mi = int(m)
        except ValueError:
            raise ModelFormatError(f"level must be an integer, got {m!r}", "--beta") from None
        if not 0 <= vi < model.n or not 0 <= mi < model.N:
            raise ModelFormatError(f"constraint {item!r} out of range", "--beta")
        if vi in beta:
            raise ModelFormatError(f"vertex {v!r} constrained twice", "--beta")
        beta[vi] = mi
    return beta


def _base(args, subcommand: str) -> dict:
    return {
        "subcommand": subcommand,
        "input": str(args.model),
        "input_sha256": _digest(args.model),
        "kernel": _backend.get_kernel(args.kernel).NAME,
        "version": __version__,
    }


def _predicted_calls(model, d: int) -> int:
    # recursion levels are capped by the vertex count: each level deletes a vertex
    return model.n * call_count_estimate(model, min(d, max(model.n - 1, 0)))


# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    report = _base(args, "check")
    try:
        model = load_model(args.model, N=args.N, delta=args.delta, strict=False)
        delta_note = None
    except WindowExceededError:
        # no positive margin exists; report the delta -> 0 window instead
        model = load_model(args.model, N=args.N, delta=1e-300, strict=False)
        delta_note = "no admissible delta; window shown in the delta -> 0 limit"
    g = model.graph
    adm = check_admissible(model)
    try:
        dmax = max_admissible_delta(model.max_upper_factor, g.Delta, g.eta) if g.Delta and g.eta else None
    except WindowExceededError:
        dmax = None
    report["parameters"] = {"N": model.N, "delta": model.delta}
    res = {
        "n": model.n,
        "edges": len(g.edges),
        "Delta": g.Delta,
        "eta": g.eta,
        "R": g.R,
        "window": adm.window,
        "max_upper_factor": model.max_upper_factor,
        "max_admissible_delta": dmax,
        "admissible": adm.passed,
        "per_edge": [
            {
                "edge": c.edge,
                "vertices": list(c.vertices),
                "family": c.family,
                "upper_factor": c.upper_factor,
                "margin": c.margin,
                "passed": c.passed,
                "offending_point": list(c.offending_point) if c.offending_point is not None else None,
            }
            for c in adm.edges
        ],
    }
    warnings = []
    if delta_note:
        warnings.append(delta_note)
    if g.Delta == 0:
        warnings.append("trivial product model: no edges, Delta = 0")
    if model.is_analytic and all(p.k is not None for p in model.potentials) and g.edges:
        grads = check_gradient_bound(model, samples=args.samples)
        res["gradient_checks"] = [
            {"edge": c.edge, "declared_k": c.declared_k, "max_observed": c.max_ratio, "passed": c.passed}
            for c in grads
        ]
        if not all(c.passed for c in grads):
            warnings.append("declared gradient bound k violated on some edge")
    res["warnings"] = warnings
    report["results"] = res
    _emit(report)
    _say(f"n={model.n} |E|={len(g.edges)} Delta={g.Delta} eta={g.eta} R={g.R} window={adm.window:.6g}")
    for w in warnings:
        _say(f"warning: {w}")
    for c in adm.failures:
        _say(f"edge {c.edge} {list(c.vertices)}: spread {c.upper_factor:.6g} exceeds window {c.window:.6g}")
    return EXIT_OK if adm.passed else EXIT_INVALID


def cmd_oracle(args) -> int:
    model = load_model(args.model, N=args.N, delta=args.delta)
    beta = _parse_beta(args.beta, model)
    report = _base(args, "oracle")
    report["parameters"] = {"N": model.N, "beta": {str(k): v for k, v in sorted(beta.items())}, "budget": args.budget}
    start = time.perf_counter()
    z = z_exact(model, beta, budget=args.budget)
    res = {"log_z": z.log_value, "z": z.value}
    if args.marginals:
        res["marginals"] = {
            str(v): marginals_exact(model, v, beta, budget=args.budget).tolist()
            for v in range(model.n)
            if v not in beta
        }
    report["results"] = res
    report["wall_seconds"] = time.perf_counter() - start
    _emit(report)
    _say(f"Z(G, beta) = {z.value:.12g} (ln = {z.log_value:.12g})")
    return EXIT_OK


def _resolve_depth(args, model) -> int:
    if args.depth == "auto":
        return choose_depth(model.delta, model.N, model.n)
    if args.depth < 1:
        raise ModelError("--depth must be >= 1")
    return args.depth


def cmd_estimate_z(args) -> int:
    model = load_model(args.model, N=args.N, delta=args.delta)
    d = _resolve_depth(args, model)
    predicted = _predicted_calls(model, d)
    if predicted > CALL_LIMIT and not args.force:
        raise Refusal(f"predicted {predicted:.3g} recursive calls exceeds {CALL_LIMIT:.0e}; pass --force to run anyway")
    start = time.perf_counter()
    z = approx_z(model, d, cache=args.cache == "on", threads=args.threads, kernel=args.kernel)
    wall = time.perf_counter() - start
    c = z.certificate
    report = _base(args, "estimate-z")
    report["parameters"] = {
        "N": model.N,
        "delta": model.delta,
        "depth": d,
        "cache": args.cache,
        "threads": args.threads,
    }
    report["results"] = {
        "log_z": z.log_z,
        "z": z.z,
        "depth": d,
        "delta": model.delta,
        "error_bound_rel": c.error_bound_rel,
        "posterior_error_bound_rel": c.posterior_error_bound_rel,
        "ratio_bounds": [c.ratio_lower, c.ratio_upper],
        "posterior_ratio_bounds": [c.posterior_ratio_lower, c.posterior_ratio_upper],
        "step_error": c.step_error,
        "exact_steps": c.exact_steps,
        "steps": list(z.steps),
        "calls": z.calls,
        "predicted_calls": predicted,
    }
    report["wall_seconds"] = wall
    _emit(report)
    _say(f"Z ~ {z.z:.12g} (ln = {z.log_z:.12g}), depth {d}, delta {model.delta:.6g}")
    _say(f"certified |Z_est/Z - 1| <= {min(c.error_bound_rel, c.posterior_error_bound_rel):.3g}")
    return EXIT_OK


def cmd_estimate_integral(args) -> int:
    base = _load_for_integral(args)
    k = resolve_k(base, args.k)
    N = resolve_N(base, k, args.N)
    grid = base.with_N(N)
    d = choose_depth(grid.delta, N, grid.n) if args.depth == "auto" else args.depth
    predicted = _predicted_calls(grid, d)
    if predicted > CALL_LIMIT and not args.force:
        raise Refusal(
            f"N={N}, depth={d}: predicted {predicted:.3g} recursive calls exceeds {CALL_LIMIT:.0e}; "
            "pass --N/--depth for a desk-scale run or --force to run anyway"
        )
    est = estimate_integral(base, k, N, d, cache=args.cache == "on", threads=args.threads, kernel=args.kernel)
    report = _base(args, "estimate-integral")
    report["parameters"] = {"N": N, "k": k, "delta": est.delta, "depth": d, "cache": args.cache, "threads": args.threads}
    report["results"] = {
        "log_value": est.log_value,
        "value": est.value,
        "log_z": est.log_z,
        "N": est.N_used,
        "k": est.k,
        "depth": est.depth,
        "delta": est.delta,
        "lower_factor": est.lower_factor,
        "upper_factor": est.upper_factor,
        "z_ratio_bounds": [est.z_ratio_lower, est.z_ratio_upper],
        "combined_rel_bound": est.combined_rel_bound,
        "interval": [est.interval_lower, est.interval_upper],
        "calls": est.calls,
        "predicted_calls": predicted,
    }
    report["wall_seconds"] = est.wall_seconds
    _emit(report)
    _say(f"integral ~ {est.value:.12g} in [{est.interval_lower:.12g}, {est.interval_upper:.12g}] (N={N}, depth={d})")
    return EXIT_OK


def _load_for_integral(args):
    # the file may omit N; any placeholder grid works since the model is re-gridded
    try:
        return load_model(args.model, delta=args.delta)
    except ModelFormatError as exc:
        if exc.location != "N":
            raise
        return load_model(args.model, N=1, delta=args.delta)


def cmd_compare(args) -> int:
    model = load_model(args.model, N=args.N, delta=args.delta)
    need = model.N**model.n
    if need > args.budget:
        raise Refusal(
            f"oracle needs N^n = {model.N}^{model.n} = {need} evaluations (budget {args.budget}); "
            "use estimate-z for models this large"
        )
    vertices = [args.vertex] if args.vertex is not None else list(range(model.n))
    exact = {v: marginals_exact(model, v, budget=args.budget) for v in vertices}
    z_true = z_exact(model, budget=args.budget).log_value
    rows = []
    summary = []
    memo = {} if args.cache == "on" else None
    for d in range(args.max_depth + 1):
        bound = (1.0 - model.delta) ** d
        worst = 0.0
        for v in vertices:
            approx, _ = approx_marginals(model, v, {}, d, cache=memo, threads=args.threads, kernel=args.kernel)
            for m in range(model.N):
                err = abs(float(approx[m]) - float(exact[v][m]))
                worst = max(worst, err)
                rows.append(["marginal", v, m, d, float(approx[m]), float(exact[v][m]), err, bound])
        entry = {"depth": d, "bound": bound, "max_abs_error": worst, "respected": worst <= bound + 1e-12}
        if d >= 1:
            z = approx_z(model, d, cache=memo, threads=args.threads, kernel=args.kernel)
            rel = abs(math.expm1(z.log_z - z_true))
            cert = min(z.certificate.error_bound_rel, z.certificate.posterior_error_bound_rel)
            rows.append(["z", "", "", d, z.log_z, z_true, rel, cert])
            entry.update({"z_rel_error": rel, "z_certified_rel_bound": cert})
        summary.append(entry)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "vertex", "level", "depth", "approx", "exact", "abs_error", "bound"])
            w.writerows(rows)
    report = _base(args, "compare")
    report["parameters"] = {"N": model.N, "delta": model.delta, "max_depth": args.max_depth, "vertices": vertices}
    report["results"] = {
        "log_z_exact": z_true,
        "per_depth": summary,
        "envelope_respected": all(s["respected"] for s in summary),
        "csv": args.csv,
    }
    _emit(report)
    for s in summary:
        _say(f"d={s['depth']:2d}  max|x_est - x| = {s['max_abs_error']:.3e}  bound = {s['bound']:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrdecay",
        description="Deterministic correlation-decay estimates of hypergraph partition functions and integrals.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, N_type=int):
        p.add_argument("model", help="model JSON file")
        p.add_argument("--N", type=N_type, default=None, help="grid resolution (overrides the file)")
        p.add_argument("--delta", type=_auto_or_float, default=None, help="decay margin or 'auto'")
        p.add_argument("--kernel", choices=_backend.available(), default=None, help="recursion kernel backend")

    def running(p):
        p.add_argument("--depth", type=_auto_or_int, default="auto", help="recursion depth or 'auto'")
        p.add_argument("--cache", choices=("on", "off"), default="off", help="memoize recursive subproblems")
        p.add_argument("--threads", type=int, default=1, help="workers for the top-level fan-out")
        p.add_argument("--force", action="store_true", help="run even when the predicted call count is huge")

    p = sub.add_parser("check", help="structure, admissibility window and per-edge margins")
    common(p)
    p.add_argument("--samples", type=int, default=256, help="points for the gradient-bound probe")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="exact Z(G, beta) by enumeration")
    common(p)
    p.add_argument("--beta", default="", help='constraints as "v=m,v=m"')
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum evaluations")
    p.add_argument("--marginals", action="store_true", help="also report every free vertex's marginal")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("estimate-z", help="approximate Z(G) by correlation decay")
    common(p)
    running(p)
    p.set_defaults(func=cmd_estimate_z)

    p = sub.add_parser("estimate-integral", help="certified estimate of the integral over the unit cube")
    common(p, N_type=_auto_or_int)
    running(p)
    p.add_argument("--k", type=_auto_or_float, default="auto", help="gradient constant or 'auto'")
    p.set_defaults(func=cmd_estimate_integral)

    p = sub.add_parser("compare", help="decay estimates against the exact oracle, per depth")
    common(p)
    p.add_argument("--max-depth", type=int, default=5)
    p.add_argument("--vertex", type=int, default=None, help="restrict to one vertex")
    p.add_argument("--csv", default=None, help="write per-instance rows to this CSV file")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--cache", choices=("on", "off"), default="off")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "N", None) == "auto" and args.command != "estimate-integral":
        parser.error("--N auto is only meaningful for estimate-integral")
    try:
        return args.func(args)
    except ModelFormatError as exc:
        _say(f"parse error: {exc}")
        return EXIT_PARSE
    except (BudgetExceededError, Refusal) as exc:
        _say(f"refused: {exc}")
        return EXIT_REFUSED
    except ModelError as exc:
        _say(f"invalid model: {exc}")
        return EXIT_INVALID
    except FileNotFoundError as exc:
        _say(f"parse error: {exc}")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
