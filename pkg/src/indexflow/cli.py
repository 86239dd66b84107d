"""Config-driven command line front end.

Usage: ``indexflow sf|signatures|maslov|pair|yn|approx <config.json>
[--out DIR] [--seed N] [--tol X]``.

Each run writes ``report.json`` (deterministic for a fixed config and seed),
``trace.csv`` and ``plot.dat`` (eigenvalue flows where meaningful) and
``meta.json`` (timestamps and tool version; kept out of the report so reports
are byte-reproducible).  Exit codes: 0 success, 2 when a consistency check
finds a mismatch, 1 on errors.
"""
from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import MatrixPolyPath, PiecewiseAnalyticPath, SampledPath, as_piecewise, mollify
from .errors import ContractViolation, IndexflowError
from .dirac1d import discretize, yn_check
from .maslov import (
    maslov_pair,
    maslov_pair_via_signatures,
    maslov_single,
    maslov_single_via_signatures,
)
from .serialize import (
    curve_from_json,
    family_from_json,
    path_from_json,
    poly_path_to_json,
)
from .sigflow import (
    find_degeneracies,
    local_flows,
    partial_signatures,
    spectral_flow_direct,
    spectral_flow_via_signatures,
)

KINDS = ("sf", "signatures", "maslov-single", "maslov-pair", "yn", "approx")
_COMMAND_KIND = {
    "sf": "sf",
    "signatures": "signatures",
    "maslov": "maslov-single",
    "pair": "maslov-pair",
    "yn": "yn",
    "approx": "approx",
}


def _eig_trace(path, count=201, near_zero=None):
    """(s values, eigenvalue rows) of a path; optionally only branches near 0."""
    if isinstance(path, SampledPath):
        grid = path.grid
        rows = np.stack([np.linalg.eigvalsh(v) for v in path.values])
    else:
        pw = as_piecewise(path)
        grid = np.linspace(*pw.domain, count)
        rows = np.stack([np.linalg.eigvalsh(pw(s)) for s in grid])
    if near_zero is not None and rows.shape[1] > near_zero:
        keep = np.argsort(np.mean(np.abs(rows), axis=0))[:near_zero]
        rows = rows[:, np.sort(keep)]
    return grid, rows


def emit_plotdata(trace) -> str:
    """Gnuplot-ready whitespace table: columns s, lam_1 ... lam_k."""
    grid, rows = trace
    grid = np.asarray(grid, dtype=float)
    rows = np.asarray(rows, dtype=float)
    if grid.size == 0 or rows.size == 0:
        raise ContractViolation("empty eigenvalue trace")
    lines = ["# s " + " ".join(f"lam_{i + 1}" for i in range(rows.shape[1]))]
    for s, row in zip(grid, rows):
        lines.append(" ".join([f"{s:.12g}"] + [f"{x:.12g}" for x in row]))
    return "\n".join(lines) + "\n"


def _trace_csv(trace) -> str:
    grid, rows = trace
    lines = ["s," + ",".join(f"lam_{i + 1}" for i in range(rows.shape[1]))]
    for s, row in zip(grid, rows):
        lines.append(",".join([f"{s:.12g}"] + [f"{x:.12g}" for x in row]))
    return "\n".join(lines) + "\n"


def _run_sf(config, seed, tol):
    path = path_from_json(config["path"], "path")
    sf = spectral_flow_direct(path, tol=tol)
    report = {"kind": "sf", "spectral_flow": int(sf), "seed": seed, "tol": tol}
    if not isinstance(path, SampledPath):
        via = spectral_flow_via_signatures(path, tol=tol)
        scan = find_degeneracies(path, tol=tol)
        report["via_signatures"] = int(via)
        report["agree"] = bool(via == sf)
        report["degeneracies"] = [
            {"s0": p.s0, "kernel_dim": p.kernel_dim, "endpoint": p.is_endpoint, "knot": p.is_knot}
            for p in scan.points
        ]
        report["null_branch_dims"] = list(scan.null_branch_dims)
    mismatch = not report.get("agree", True)
    return report, _eig_trace(path), mismatch


def _run_signatures(config, seed, tol):
    path = path_from_json(config["path"], "path")
    if isinstance(path, PiecewiseAnalyticPath):
        if len(path.segments) != 1:
            raise ContractViolation("signature tables need a single analytic segment")
        path = path.segments[0]
    if not isinstance(path, MatrixPolyPath):
        raise ContractViolation("signature tables need an analytic (polynomial) path")
    if "s0" in config:
        points = [float(config["s0"])]
    else:
        scan = find_degeneracies(path, tol=tol)
        points = [p.s0 for p in scan.points]
    tables = []
    for s0 in points:
        table = partial_signatures(path, s0, tol=tol)
        flows = local_flows(table)
        tables.append(
            {
                "table": table.as_dict(),
                "local_flows": {"left": flows.left, "right": flows.right, "through": flows.through},
            }
        )
    report = {"kind": "signatures", "tables": tables, "seed": seed, "tol": tol}
    return report, _eig_trace(path), False


def _run_maslov_single(config, seed, tol):
    curve = curve_from_json(config["curve"], "curve")
    if "l0" in config:
        from .lagrangian import LagrangianFrame
        from .serialize import frame_from_json

        l0 = LagrangianFrame(curve.space, frame_from_json(config["l0"], "l0"))
    else:
        if not hasattr(curve, "l0"):
            raise ContractViolation("sampled curves need an explicit 'l0'")
        l0 = curve.l0
    idx = maslov_single(curve, l0, tol=tol, seed=seed)
    via, details = maslov_single_via_signatures(curve, l0, tol=tol, seed=seed, return_details=True)
    report = {
        "kind": "maslov-single",
        "index": int(idx),
        "via_signatures": int(via),
        "agree": bool(idx == via),
        "per_degeneracy": details.get("per_degeneracy", details.get("segments", [])),
        "endpoint_terms": details.get("endpoint_terms", {}),
        "flags": details.get("flags", []),
        "seed": seed,
        "tol": tol,
    }
    trace = None
    if hasattr(curve, "values"):
        trace = _eig_trace(curve.values)
    return report, trace, not report["agree"]


def _run_maslov_pair(config, seed, tol):
    c0 = curve_from_json(config["curve0"], "curve0")
    c1 = curve_from_json(config["curve1"], "curve1")
    idx = maslov_pair(c0, c1, tol=tol, seed=seed)
    via, details = maslov_pair_via_signatures(c0, c1, tol=tol, seed=seed, return_details=True)
    report = {
        "kind": "maslov-pair",
        "index": int(idx),
        "via_signatures": int(via),
        "agree": bool(idx == via),
        "per_degeneracy": details["per_degeneracy"],
        "endpoint_terms": details["endpoint_terms"],
        "flags": details["flags"],
        "seed": seed,
        "tol": tol,
    }
    return report, None, not report["agree"]


def _run_yn(config, seed, tol):
    family = family_from_json(config["family"], "family")
    n_grid = int(config.get("N", 33))
    s_grid = None
    if "s_samples" in config:
        s_grid = np.linspace(*family.s_domain, int(config["s_samples"]))
    result = yn_check(family, s_grid=s_grid, n_grid=n_grid, tol=tol, seed=seed)
    report = {"kind": "yn", "seed": seed, "tol": tol, **result}
    path = discretize(family, result["convergence"]["N"])
    trace = _eig_trace(path, near_zero=min(6, path.dim))
    return report, trace, not result["equal"]


def _run_approx(config, seed, tol):
    path = path_from_json(config["path"], "path")
    if not isinstance(path, SampledPath):
        raise ContractViolation("approx expects a sampled path")
    alpha = float(config["alpha"])
    epsilon = float(config["epsilon"])
    kwargs = {}
    if "max_degree" in config:
        kwargs["max_degree"] = int(config["max_degree"])
    result = mollify(path, alpha, epsilon, **kwargs)
    t = (path.grid - path.grid[0]) / (path.grid[-1] - path.grid[0])
    end_err = max(
        float(np.max(np.abs(result(0.0) - path.values[0]))),
        float(np.max(np.abs(result(1.0) - path.values[-1]))),
    )
    s_chk = np.linspace(0.0, 1.0, 801)
    lin = np.empty((s_chk.size,) + path.values.shape[1:], dtype=np.complex128)
    n = path.dim
    for e in range(n * n):
        lin[:, e // n, e % n] = np.interp(s_chk, t, path.values[:, e // n, e % n])
    sup = float(np.max(np.linalg.norm(np.stack([result(s) for s in s_chk]) - lin, ord=2, axis=(1, 2))))
    report = {
        "kind": "approx",
        "degree": result.degree,
        "alpha": alpha,
        "epsilon": epsilon,
        "endpoint_error": end_err,
        "sup_error": sup,
        "within_tolerance": bool(sup <= 2 * epsilon),
        "mollified": poly_path_to_json(result),
        "seed": seed,
        "tol": tol,
    }
    return report, _eig_trace(result), False


_RUNNERS = {
    "sf": _run_sf,
    "signatures": _run_signatures,
    "maslov-single": _run_maslov_single,
    "maslov-pair": _run_maslov_pair,
    "yn": _run_yn,
    "approx": _run_approx,
}


def run(config: dict, out_dir, seed=None, tol=None) -> int:
    """Execute one experiment config; writes artifacts, returns the exit code."""
    kind = config.get("kind")
    if kind not in _RUNNERS:
        raise ContractViolation(f"unknown or missing experiment kind: {kind!r}")
    seed = int(config.get("seed", 0)) if seed is None else int(seed)
    tol = float(config.get("tol", 1e-9)) if tol is None else float(tol)
    if tol <= 0:
        raise ContractViolation("tolerance must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report, trace, mismatch = _RUNNERS[kind](config, seed, tol)

    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if trace is not None:
        (out / "trace.csv").write_text(_trace_csv(trace))
        (out / "plot.dat").write_text(emit_plotdata(trace))
    meta = {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
        "kind": kind,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 2 if mismatch else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="indexflow",
        description="Spectral flow, partial signatures, Maslov indices and the "
        "flow = index check for 1D Dirac families.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in _COMMAND_KIND:
        p = sub.add_parser(cmd)
        p.add_argument("config", help="path to the JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default: <config dir>/out)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--tol", type=float, default=None, help="override the config tolerance")
    args = parser.parse_args(argv)

    try:
        cfg_path = Path(args.config)
        try:
            config = json.loads(cfg_path.read_text())
        except FileNotFoundError:
            print(f"error: config file not found: {cfg_path}", file=sys.stderr)
            return 1
        except json.JSONDecodeError as err:
            print(f"error: {cfg_path}:{err.lineno}:{err.colno}: {err.msg}", file=sys.stderr)
            return 1
        expected = _COMMAND_KIND[args.command]
        config.setdefault("kind", expected)
        if config["kind"] != expected:
            print(
                f"error: config kind {config['kind']!r} does not match command {args.command!r}",
                file=sys.stderr,
            )
            return 1
        out_dir = args.out if args.out is not None else config.get("out", cfg_path.parent / "out")
        return run(config, out_dir, seed=args.seed, tol=args.tol)
    except IndexflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
