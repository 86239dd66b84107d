"""JSON-compatible (de)serialization of matrices, paths, frames, curves and
Dirac family configurations.

Matrices are ``{"n": int, "re": [[...]], "im": [[...]]}``; polynomial paths
are ``{"domain": [a, b], "coeffs": [matrix, ...]}``.  Frames mirror the matrix
layout with rectangular shape.  All loaders validate shapes and raise
:class:`ContractViolation` with the offending key in the message.
"""
from __future__ import annotations

import numpy as np

from .core import Frame, MatrixPolyPath, PiecewiseAnalyticPath, SampledPath
from .dirac1d import CircleDiracFamily, CliffordData, DiracCell
from .errors import ContractViolation
from .lagrangian import ChartCurve, LagrangianFrame, SampledCurve, SymplecticSpace


def _require(cond, msg):
    if not cond:
        raise ContractViolation(msg)


def matrix_to_json(a) -> dict:
    a = np.asarray(a, dtype=np.complex128)
    return {"n": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(obj, key="matrix") -> np.ndarray:
    _require(isinstance(obj, dict) and "re" in obj, f"{key}: expected a matrix object with 're'")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    _require(re.shape == im.shape and re.ndim == 2, f"{key}: 're'/'im' must be matching 2-d arrays")
    if "n" in obj:
        _require(re.shape == (obj["n"], obj["n"]), f"{key}: shape does not match 'n'")
    return re + 1j * im


def frame_to_json(basis) -> dict:
    b = np.asarray(basis.basis if isinstance(basis, (Frame, LagrangianFrame)) else basis)
    if isinstance(basis, LagrangianFrame):
        b = basis.M
    b = np.asarray(b, dtype=np.complex128)
    return {"rows": int(b.shape[0]), "cols": int(b.shape[1]), "re": b.real.tolist(), "im": b.imag.tolist()}


def frame_from_json(obj, key="frame") -> np.ndarray:
    _require(isinstance(obj, dict) and "re" in obj, f"{key}: expected a frame object with 're'")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    _require(re.shape == im.shape and re.ndim == 2, f"{key}: 're'/'im' must be matching 2-d arrays")
    return re + 1j * im


def poly_path_to_json(path: MatrixPolyPath) -> dict:
    return {
        "domain": [path.domain[0], path.domain[1]],
        "coeffs": [matrix_to_json(c) for c in path.coeffs],
    }


def poly_path_from_json(obj, key="path") -> MatrixPolyPath:
    _require(isinstance(obj, dict) and "coeffs" in obj and "domain" in obj, f"{key}: need 'domain' and 'coeffs'")
    coeffs = np.stack([matrix_from_json(c, f"{key}.coeffs[{i}]") for i, c in enumerate(obj["coeffs"])])
    return MatrixPolyPath((float(obj["domain"][0]), float(obj["domain"][1])), coeffs)


def piecewise_to_json(path: PiecewiseAnalyticPath) -> dict:
    return {
        "knots": list(path.knots),
        "segments": [poly_path_to_json(s) for s in path.segments],
    }


def path_from_json(obj, key="path"):
    """Polynomial, piecewise or sampled path, detected by its keys."""
    _require(isinstance(obj, dict), f"{key}: expected an object")
    if "segments" in obj:
        segs = [poly_path_from_json(s, f"{key}.segments[{i}]") for i, s in enumerate(obj["segments"])]
        return PiecewiseAnalyticPath(tuple(float(x) for x in obj["knots"]), tuple(segs))
    if "coeffs" in obj:
        return poly_path_from_json(obj, key)
    if "grid" in obj and "values" in obj:
        vals = np.stack([matrix_from_json(v, f"{key}.values[{i}]") for i, v in enumerate(obj["values"])])
        return SampledPath(np.asarray(obj["grid"], dtype=float), vals)
    raise ContractViolation(f"{key}: unrecognized path object")


def sampled_path_to_json(path: SampledPath) -> dict:
    return {"grid": path.grid.tolist(), "values": [matrix_to_json(v) for v in path.values]}


def space_to_json(space: SymplecticSpace) -> dict:
    return {"J": matrix_to_json(space.J)}


def space_from_json(obj, key="space") -> SymplecticSpace:
    _require(isinstance(obj, dict) and "J" in obj, f"{key}: need 'J'")
    return SymplecticSpace(matrix_from_json(obj["J"], f"{key}.J"))


def curve_to_json(curve) -> dict:
    if isinstance(curve, ChartCurve):
        return {
            "type": "chart",
            "space": space_to_json(curve.space),
            "l0": frame_to_json(curve.l0),
            "l1": frame_to_json(curve.l1),
            "values": piecewise_to_json(curve.values),
        }
    if isinstance(curve, SampledCurve):
        return {
            "type": "sampled",
            "space": space_to_json(curve.space),
            "grid": curve.grid.tolist(),
            "frames": [frame_to_json(f) for f in curve.frames],
        }
    raise ContractViolation(f"not a curve: {type(curve).__name__}")


def curve_from_json(obj, key="curve"):
    _require(isinstance(obj, dict) and "type" in obj, f"{key}: need 'type'")
    space = space_from_json(obj.get("space"), f"{key}.space")
    if obj["type"] == "chart":
        l0 = LagrangianFrame(space, frame_from_json(obj["l0"], f"{key}.l0"))
        l1 = LagrangianFrame(space, frame_from_json(obj["l1"], f"{key}.l1"))
        values = path_from_json(obj["values"], f"{key}.values")
        if isinstance(values, MatrixPolyPath):
            values = PiecewiseAnalyticPath.from_single(values)
        _require(isinstance(values, PiecewiseAnalyticPath), f"{key}.values: chart curves need analytic values")
        return ChartCurve(l0, l1, values)
    if obj["type"] == "sampled":
        frames = tuple(
            LagrangianFrame(space, frame_from_json(f, f"{key}.frames[{i}]"))
            for i, f in enumerate(obj["frames"])
        )
        return SampledCurve(np.asarray(obj["grid"], dtype=float), frames)
    raise ContractViolation(f"{key}: unknown curve type {obj['type']!r}")


def family_to_json(family: CircleDiracFamily) -> dict:
    return {
        "fiber": family.fiber_dim,
        "cells": [
            {"arc": [c.t0, c.t1], "B_coeffs": c.coeffs.tolist()} for c in family.cells
        ],
        "cuts": [0.0, float(np.pi)],
        "collar": family.collar,
        "s_domain": [family.s_domain[0], family.s_domain[1]],
    }


def family_from_json(obj, key="family") -> CircleDiracFamily:
    _require(isinstance(obj, dict) and "cells" in obj, f"{key}: need 'cells'")
    fiber = int(obj.get("fiber", 2))
    if "clifford" in obj:
        cl_obj = obj["clifford"]
        clifford = CliffordData(
            matrix_from_json(cl_obj["G"], f"{key}.clifford.G"),
            tuple(matrix_from_json(s, f"{key}.clifford.sigmas[{i}]") for i, s in enumerate(cl_obj["sigmas"])),
        )
    else:
        _require(fiber == 2, f"{key}: fiber != 2 requires explicit 'clifford' data")
        clifford = CliffordData.default()
    if "cuts" in obj:
        cuts = [float(x) for x in obj["cuts"]]
        _require(
            len(cuts) == 2 and abs(cuts[0]) < 1e-12 and abs(cuts[1] - np.pi) < 1e-9,
            f"{key}: this model fixes the cuts at 0 and pi",
        )
    cells = []
    for i, c in enumerate(obj["cells"]):
        _require("arc" in c and "B_coeffs" in c, f"{key}.cells[{i}]: need 'arc' and 'B_coeffs'")
        cells.append(DiracCell(float(c["arc"][0]), float(c["arc"][1]), np.asarray(c["B_coeffs"], dtype=float)))
    kwargs = {}
    if "collar" in obj:
        kwargs["collar"] = float(obj["collar"])
    if "s_domain" in obj:
        kwargs["s_domain"] = (float(obj["s_domain"][0]), float(obj["s_domain"][1]))
    return CircleDiracFamily(clifford, tuple(cells), **kwargs)
