"""Maslov indices of Lagrangian curves and of Fredholm pairs of curves.

The direct route charts a curve piece by piece (choosing a complementary
Lagrangian per piece) and sums the spectral flows of the chart images; chart
independence makes the segmentation free.  The signature route locates every
intersection with the reference Lagrangian (or between the two curves of a
pair, via the doubled space with complex structure (J, -J) and the diagonal)
and assembles the same endpoint/interior contributions used for operator
paths.  Identically-degenerate directions contribute nothing and are flagged.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .core import (
    RANK_RTOL,
    MatrixPolyPath,
    PiecewiseAnalyticPath,
    SampledPath,
    as_piecewise,
    hermitize,
)
from .errors import (
    ChartDomainError,
    ContractViolation,
    RepresentationError,
    ResolutionError,
    SearchFailure,
)
from .lagrangian import (
    ChartCurve,
    LagrangianFrame,
    SampledCurve,
    SymplecticSpace,
    chart,
    find_complementary,
    gap_distance,
    lagrangian_from_columns,
)
from .sigflow import (
    SignatureTable,
    kernel_locus,
    local_flows,
    signature_table_from_taylor,
    spectral_flow_direct,
    spectral_flow_via_signatures,
)

CHART_NORM_CAP = 1e3
CHART_MARGIN = 1e-6
JET_ORDER_CAP = 28


@dataclass(frozen=True)
class DoubledSpace:
    """H + H with complex structure (J, -J); the diagonal is Lagrangian."""

    base: SymplecticSpace
    space: SymplecticSpace
    diagonal: LagrangianFrame

    @staticmethod
    def for_base(base: SymplecticSpace) -> "DoubledSpace":
        n = base.dim
        jhat = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        jhat[:n, :n] = base.J
        jhat[n:, n:] = -base.J
        space = SymplecticSpace(jhat)
        diag = np.vstack([np.eye(n), np.eye(n)]) / np.sqrt(2.0)
        return DoubledSpace(base, space, LagrangianFrame(space, diag))

    def double(self, f0: LagrangianFrame, f1: LagrangianFrame) -> LagrangianFrame:
        n = self.base.dim
        m = np.zeros((2 * n, n), dtype=np.complex128)
        m[:n, : n // 2] = f0.M
        m[n:, n // 2 :] = f1.M
        return LagrangianFrame(self.space, m)


def constant_curve(l: LagrangianFrame, domain) -> ChartCurve:
    """The constant curve at ``l``, charted over (l, J l)."""
    pole = lagrangian_from_columns(l.space, l.space.J @ l.M)
    zero = MatrixPolyPath(tuple(domain), np.zeros((1, l.rank, l.rank), dtype=np.complex128))
    return ChartCurve(l, pole, PiecewiseAnalyticPath.from_single(zero))


# ---------------------------------------------------------------------------
# direct route


def _chart_with_margin(l0, l1, frame, margin=CHART_MARGIN):
    """Chart value, or None when the frame is too close to the chart pole."""
    full = np.concatenate([l0.M, l1.M], axis=1)
    ab = np.linalg.solve(full, frame.M)
    a = ab[: l0.rank]
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] < margin * max(1.0, s[0]):
        return None
    t = (l0.M.conj().T @ l0.space.J @ l1.M) @ ab[l0.rank :] @ np.linalg.inv(a)
    if np.max(np.abs(t)) > CHART_NORM_CAP:
        return None
    return hermitize(t)


def _curve_to_sampled(curve, factor: int = 1) -> SampledCurve:
    if isinstance(curve, SampledCurve):
        return curve
    if isinstance(curve, ChartCurve):
        grids = []
        for seg in curve.values.segments:
            count = factor * max(64, 24 * (seg.degree + 1)) + 1
            pts = np.linspace(*seg.domain, count)
            grids.append(pts if not grids else pts[1:])
        return curve.sample(np.concatenate(grids))
    raise ContractViolation(f"not a Lagrangian curve: {type(curve).__name__}")


def _pole_margin(l1: LagrangianFrame, frame: LagrangianFrame) -> float:
    """Sine of the smallest principal angle between a frame and the chart pole."""
    resid = frame.M - l1.M @ (l1.M.conj().T @ frame.M)
    s = np.linalg.svd(resid, compute_uv=False)
    return float(s[-1])


def _sampled_maslov(curve: SampledCurve, l0: LagrangianFrame, tol: float, seed: int) -> int:
    frames = curve.frames
    grid = curve.grid
    if len(frames) < 2:
        return 0
    gap_steps = [gap_distance(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
    total = 0
    i0 = 0
    attempt = 0
    while i0 < len(frames) - 1:
        hi = min(len(frames), i0 + 17)
        window = list(frames[i0:hi])
        wanted = min(0.4, max(CHART_MARGIN, 2.0 * max(gap_steps[i0 : hi - 1])))
        try:
            l1 = find_complementary(
                [l0, *window], attempts=192, seed=seed + 101 * attempt, margin=wanted
            )
        except SearchFailure as err:
            l1 = err.best
        vals = []
        j = i0
        t = _chart_with_margin(l0, l1, frames[i0])
        if t is None:
            attempt += 1
            if attempt > 8:
                raise ResolutionError("chart covering failed; curve moves too fast for the grid")
            continue
        vals.append(t)
        while j + 1 < len(frames):
            # the pole clearance must dominate the per-step motion on both
            # sides, else the curve could cross the pole between samples and
            # an eigenvalue would slip through infinity uncounted
            clearance = max(CHART_MARGIN, 1.6 * gap_steps[j])
            if _pole_margin(l1, frames[j]) < clearance or _pole_margin(l1, frames[j + 1]) < clearance:
                break
            t_next = _chart_with_margin(l0, l1, frames[j + 1])
            if t_next is None:
                break
            vals.append(t_next)
            j += 1
        if j == i0:
            attempt += 1
            if attempt > 8:
                raise ResolutionError("chart covering failed; curve moves too fast for the grid")
            continue
        attempt = 0
        # prefer a junction where the chart value is far from singular, so the
        # zero-eigenvalue classification agrees between adjacent charts
        if j < len(frames) - 1:
            lo = max(i0 + 1, j - 6)
            margins = [
                float(np.min(np.abs(np.linalg.eigvalsh(vals[jj - i0])))) for jj in range(lo, j + 1)
            ]
            j = lo + int(np.argmax(margins))
            vals = vals[: j - i0 + 1]
        total += spectral_flow_direct(SampledPath(grid[i0 : j + 1], np.stack(vals)), tol)
        i0 = j
    return total


def maslov_single(curve, l0: LagrangianFrame, tol: float = RANK_RTOL, seed: int = 0) -> int:
    """Maslov index of a Lagrangian curve relative to l0 (direct definition).

    For a chart curve based at l0 this is the spectral flow of its chart
    values; otherwise the curve is covered by charts chosen on the fly.
    """
    if isinstance(curve, ChartCurve) and gap_distance(curve.l0, l0) <= 1e-9:
        return spectral_flow_direct(curve.values, tol)
    return _sampled_maslov(_curve_to_sampled(curve), l0, tol, seed)


def _common_sampling(gamma0, gamma1):
    if isinstance(gamma0, SampledCurve) and isinstance(gamma1, SampledCurve):
        if gamma0.grid.size != gamma1.grid.size or np.max(np.abs(gamma0.grid - gamma1.grid)) > 1e-12:
            raise ContractViolation("sampled pair curves must share their grid")
        return gamma0, gamma1
    if isinstance(gamma0, SampledCurve):
        return gamma0, gamma1.sample(gamma0.grid)
    if isinstance(gamma1, SampledCurve):
        return gamma0.sample(gamma1.grid), gamma1
    s0 = _curve_to_sampled(gamma0)
    s1 = _curve_to_sampled(gamma1)
    grid = np.unique(np.concatenate([s0.grid, s1.grid]))
    return gamma0.sample(grid), gamma1.sample(grid)


def maslov_pair(gamma0, gamma1, tol: float = RANK_RTOL, seed: int = 0) -> int:
    """Maslov index of a pair of curves: the index of gamma0 + gamma1 against
    the diagonal of the doubled space."""
    s0, s1 = _common_sampling(gamma0, gamma1)
    if not s0.space.compatible(s1.space):
        raise ContractViolation("pair curves live in different spaces")
    ds = DoubledSpace.for_base(s0.space)
    doubled = SampledCurve(s0.grid, tuple(ds.double(f0, f1) for f0, f1 in zip(s0.frames, s1.frames)))
    return _sampled_maslov(doubled, ds.diagonal, tol, seed)


# ---------------------------------------------------------------------------
# analytic frame families and chart jets


def _poly_shift(coeffs: np.ndarray, s0: float, order: int) -> np.ndarray:
    """Taylor coefficients around s0 of a polynomial family given in powers of s."""
    d = coeffs.shape[0] - 1
    out = np.zeros((order + 1,) + coeffs.shape[1:], dtype=np.complex128)
    for j in range(min(order, d) + 1):
        acc = np.zeros(coeffs.shape[1:], dtype=np.complex128)
        for k in range(j, d + 1):
            acc += comb(k, j) * (s0 ** (k - j)) * coeffs[k]
        out[j] = acc
    return out


def _poly_eval(coeffs: np.ndarray, s: float) -> np.ndarray:
    out = np.array(coeffs[-1])
    for c in coeffs[-2::-1]:
        out = out * s + c
    return out


@dataclass(frozen=True)
class FrameFamily:
    """Analytic (not orthonormalized) Lagrangian frame family on one interval.

    ``coeffs[k]`` is the coefficient of s^k; columns span the curve pointwise.
    """

    space: SymplecticSpace
    domain: tuple[float, float]
    coeffs: np.ndarray  # (d+1, N, m)

    def frame_at(self, s: float) -> LagrangianFrame:
        return lagrangian_from_columns(self.space, _poly_eval(self.coeffs, s))

    def jets_at(self, s0: float, order: int) -> np.ndarray:
        return _poly_shift(self.coeffs, s0, order)


def chart_curve_frame_families(curve: ChartCurve) -> list[FrameFamily]:
    """Polynomial frames F(s) = M0 + M1 K^{-1} T(s) per analytic segment."""
    k1 = curve.l0.M.conj().T @ curve.space.J @ curve.l1.M
    lift = curve.l1.M @ np.linalg.inv(k1)
    out = []
    for seg in curve.values.segments:
        d = seg.degree
        n, m = curve.space.dim, curve.l0.rank
        coeffs = np.zeros((d + 1, n, m), dtype=np.complex128)
        coeffs[0] = curve.l0.M + lift @ seg.coeffs[0]
        for k in range(1, d + 1):
            coeffs[k] = lift @ seg.coeffs[k]
        out.append(FrameFamily(curve.space, seg.domain, coeffs))
    return out


def double_frame_families(ds: DoubledSpace, fam0: FrameFamily, fam1: FrameFamily) -> FrameFamily:
    if fam0.domain != fam1.domain:
        raise ContractViolation("frame families must share their interval")
    d = max(fam0.coeffs.shape[0], fam1.coeffs.shape[0])
    n = ds.base.dim
    m0, m1 = fam0.coeffs.shape[2], fam1.coeffs.shape[2]
    coeffs = np.zeros((d, 2 * n, m0 + m1), dtype=np.complex128)
    coeffs[: fam0.coeffs.shape[0], :n, :m0] = fam0.coeffs
    coeffs[: fam1.coeffs.shape[0], n:, m0:] = fam1.coeffs
    return FrameFamily(ds.space, fam0.domain, coeffs)


def _chart_value_jets(frame_jets: np.ndarray, l0: LagrangianFrame, l1: LagrangianFrame) -> np.ndarray:
    """Taylor coefficients of the chart-value path from analytic frame jets.

    Solves the direct-sum decomposition order by order, inverts the L0-block
    as a power series and multiplies through; requires the order-zero frame to
    be complementary to the pole l1.
    """
    order = frame_jets.shape[0] - 1
    n, m = frame_jets.shape[1], l0.rank
    full = np.concatenate([l0.M, l1.M], axis=1)
    ab = np.linalg.solve(full, frame_jets.transpose(1, 0, 2).reshape(n, -1))
    ab = ab.reshape(n, order + 1, m).transpose(1, 0, 2)
    a_jets = ab[:, :m, :]
    b_jets = ab[:, m:, :]
    s0_sing = np.linalg.svd(a_jets[0], compute_uv=False)
    if s0_sing[-1] <= 1e-10 * max(1.0, s0_sing[0]):
        raise ChartDomainError("frame meets the chart pole at the expansion point")
    ainv = np.zeros_like(a_jets)
    ainv[0] = np.linalg.inv(a_jets[0])
    for r in range(1, order + 1):
        acc = np.zeros((m, m), dtype=np.complex128)
        for j in range(1, r + 1):
            acc += a_jets[j] @ ainv[r - j]
        ainv[r] = -ainv[0] @ acc
    k1 = l0.M.conj().T @ l0.space.J @ l1.M
    t_jets = np.zeros((order + 1, m, m), dtype=np.complex128)
    for r in range(order + 1):
        s_r = np.zeros((m, m), dtype=np.complex128)
        for j in range(r + 1):
            s_r += b_jets[j] @ ainv[r - j]
        t = k1 @ s_r
        defect = np.max(np.abs(t - t.conj().T))
        if defect > 1e-6 * max(1.0, np.max(np.abs(t))):
            raise ContractViolation(f"chart jet {r} not Hermitian (defect {defect:.2e})")
        t_jets[r] = hermitize(t)
    return t_jets


def _intersection_locus(fam: FrameFamily, l_ref: LagrangianFrame, tol: float):
    """Parameters where span F(s) meets l_ref beyond the generic dimension.

    Uses the positive-semidefinite Gram family of [F(s), M_ref], whose entries
    are polynomial in s, so the characteristic-coefficient scan applies.
    """
    m_ref = l_ref.M
    dim = fam.coeffs.shape[2] + m_ref.shape[1]
    deg = 2 * (fam.coeffs.shape[0] - 1)

    def gram(s):
        stacked = np.concatenate([_poly_eval(fam.coeffs, s), m_ref], axis=1)
        return stacked.conj().T @ stacked

    return kernel_locus(gram, dim, fam.domain, dim * max(deg, 1), tol=tol)


def _intersection_dim(fam: FrameFamily, l_ref: LagrangianFrame, s: float, tol: float) -> int:
    stacked = np.concatenate([_poly_eval(fam.coeffs, s) , l_ref.M], axis=1)
    sv = np.linalg.svd(stacked, compute_uv=False)
    return int(np.count_nonzero(sv <= tol * max(1.0, sv[0])))


def _frame_table(
    fam: FrameFamily,
    l_ref: LagrangianFrame,
    s0: float,
    null_dim: int,
    tol: float,
    seed: int,
    order: int | None = None,
) -> SignatureTable:
    """Signature table of the chart image of a frame family at s0 against l_ref."""
    frame0 = fam.frame_at(s0)
    probes = [s0]
    a, b = fam.domain
    h = 1e-3 * (b - a)
    probes += [min(b, s0 + h), max(a, s0 - h)]
    l1 = find_complementary([l_ref] + [fam.frame_at(s) for s in probes], seed=seed)
    order = JET_ORDER_CAP if order is None else order
    jets = fam.jets_at(s0, order)
    t_jets = _chart_value_jets(jets, l_ref, l1)
    return signature_table_from_taylor(t_jets, s0, tol=tol, null_dim=null_dim, kmax=order)


def _frame_assembly(families, l_ref: LagrangianFrame, tol: float, seed: int):
    """Index assembly over analytic frame-family segments against l_ref."""
    total = 0
    flags: list[str] = []
    per_degeneracy = []
    endpoint_terms = {}
    max_null = 0
    for idx, fam in enumerate(families):
        locus = _intersection_locus(fam, l_ref, tol)
        g = locus.null_order
        max_null = max(max_null, g)
        if g > 0:
            flags.append(f"segment {idx} lies in the Maslov cycle (generic intersection {g})")
        a, b = fam.domain
        zone = 1e-7 * (b - a)
        if g >= fam.coeffs.shape[2]:
            continue

        def record(s, role, contribution, table):
            per_degeneracy.append(
                {"s0": s, "role": role, "table": table.as_dict(), "contribution": contribution}
            )

        if _intersection_dim(fam, l_ref, a, tol) > g:
            tab = _frame_table(fam, l_ref, a, g, tol, seed)
            c = local_flows(tab).right
            total += c
            record(a, "left-endpoint", c, tab)
            if idx == 0:
                endpoint_terms["left"] = c
        for s0 in locus.points:
            if s0 - a <= zone or b - s0 <= zone:
                continue
            tab = _frame_table(fam, l_ref, s0, g, tol, seed)
            c = local_flows(tab).through
            total += c
            record(s0, "interior", c, tab)
        if _intersection_dim(fam, l_ref, b, tol) > g:
            tab = _frame_table(fam, l_ref, b, g, tol, seed)
            c = local_flows(tab).left
            total += c
            record(b, "right-endpoint", c, tab)
            if idx == len(families) - 1:
                endpoint_terms["right"] = c
    details = {
        "per_degeneracy": per_degeneracy,
        "endpoint_terms": endpoint_terms,
        "flags": flags,
        "inside_cycle": max_null > 0,
    }
    return total, details


# ---------------------------------------------------------------------------
# signature-based indices


def fit_chart_curve(
    curve: SampledCurve,
    l0: LagrangianFrame,
    tol: float = RANK_RTOL,
    seed: int = 0,
    max_degree: int = 24,
    fit_rtol: float = 1e-8,
) -> ChartCurve:
    """Least-squares polynomial chart representation of a sampled curve.

    The endpoint samples are reproduced exactly (affine correction), so
    endpoint degeneracies survive the fit.  Raises
    :class:`RepresentationError` when no single chart covers the samples or
    the residual stays above ``fit_rtol`` at the degree cap.
    """
    l1 = find_complementary([l0, *curve.frames], seed=seed)
    vals = []
    for i, fr in enumerate(curve.frames):
        step = gap_distance(curve.frames[max(0, i - 1)], fr)
        if _pole_margin(l1, fr) < max(1e-8, 1.6 * step):
            raise RepresentationError("no single chart covers the sampled curve; split it first")
        t = _chart_with_margin(l0, l1, fr, margin=1e-8)
        if t is None:
            raise RepresentationError("no single chart covers the sampled curve; split it first")
        vals.append(t)
    vals = np.stack(vals)
    a, b = float(curve.grid[0]), float(curve.grid[-1])
    x = 2.0 * (curve.grid - a) / (b - a) - 1.0
    m = vals.shape[1]
    scale = max(1.0, float(np.max(np.abs(vals))))
    degree = min(max_degree, max(2, curve.grid.size - 1))
    flat = vals.reshape(curve.grid.size, m * m)
    coef = np.polynomial.chebyshev.chebfit(x, flat, degree)
    resid = float(np.max(np.abs(np.polynomial.chebyshev.chebval(x, coef).T - flat)))
    if resid > fit_rtol * scale:
        raise RepresentationError(
            f"chart-value fit residual {resid:.2e} exceeds {fit_rtol * scale:.2e}; "
            "refine the sampling or mollify first"
        )
    poly = np.zeros((degree + 1, m, m), dtype=np.complex128)
    for e in range(m * m):
        ch = np.polynomial.Chebyshev(coef[:, e], domain=[a, b])
        pc = ch.convert(kind=np.polynomial.Polynomial).coef
        poly[: pc.size, e // m, e % m] = pc
    # pin both endpoint values exactly so endpoint degeneracies are preserved
    for _ in range(2):
        p_a = _poly_eval(poly, a)
        p_b = _poly_eval(poly, b)
        d_a = vals[0] - p_a
        d_b = vals[-1] - p_b
        alpha = (d_b - d_a) / (b - a)
        poly[0] += d_a - alpha * a
        poly[1] += alpha
    poly = np.array([hermitize(p) for p in poly])
    path = MatrixPolyPath((a, b), poly)
    return ChartCurve(l0, l1, PiecewiseAnalyticPath.from_single(path))


def _as_chart_curve(curve, l0, tol, seed) -> ChartCurve:
    if isinstance(curve, ChartCurve):
        return curve
    if isinstance(curve, SampledCurve):
        return fit_chart_curve(curve, l0, tol=tol, seed=seed)
    raise ContractViolation(f"not a Lagrangian curve: {type(curve).__name__}")


def lagrangian_signatures(
    curve, s0: float, l0: LagrangianFrame, tol: float = RANK_RTOL, seed: int = 0
) -> SignatureTable:
    """Signature table of a curve at an isolated intersection with l0.

    Computed through a chart around s0 and recomputed through an independently
    chosen second chart; the two integer tables must agree.
    """
    cc = _as_chart_curve(curve, l0, tol, seed)
    seg_idx = cc.values.segment_index(s0)
    fam = chart_curve_frame_families(cc)[seg_idx]
    locus = _intersection_locus(fam, l0, tol)
    g = locus.null_order
    if _intersection_dim(fam, l0, s0, tol) <= g:
        raise ContractViolation(f"s0={s0} is not a degeneracy against the reference Lagrangian")
    t1 = _frame_table(fam, l0, s0, g, tol, seed)
    t2 = _frame_table(fam, l0, s0, g, tol, seed + 7919)
    if not t1.same_signatures(t2):
        raise ContractViolation("signature table depends on the chart pole; numerics inconsistent")
    return t1


def maslov_single_via_signatures(
    curve, l0: LagrangianFrame, tol: float = RANK_RTOL, seed: int = 0, return_details: bool = False
):
    """Maslov index assembled from signature tables at every intersection with l0."""
    cc = _as_chart_curve(curve, l0, tol, seed)
    if gap_distance(cc.l0, l0) <= 1e-9:
        total, det = spectral_flow_via_signatures(cc.values, tol=tol, return_details=True)
        flags = det["flags"]
        details = {"flags": flags, "segments": det["segments"]}
        return (total, details) if return_details else total
    families = chart_curve_frame_families(cc)
    total, details = _frame_assembly(families, l0, tol, seed)
    return (total, details) if return_details else total


def _pair_families(gamma0, gamma1, tol, seed):
    c0 = gamma0 if isinstance(gamma0, ChartCurve) else fit_chart_curve(
        gamma0, gamma0.frames[0], tol=tol, seed=seed
    )
    c1 = gamma1 if isinstance(gamma1, ChartCurve) else fit_chart_curve(
        gamma1, gamma1.frames[0], tol=tol, seed=seed + 13
    )
    if not c0.space.compatible(c1.space):
        raise ContractViolation("pair curves live in different spaces")
    ds = DoubledSpace.for_base(c0.space)
    fams0 = chart_curve_frame_families(c0)
    fams1 = chart_curve_frame_families(c1)
    knots = np.unique(np.concatenate([np.asarray(c0.values.knots), np.asarray(c1.values.knots)]))
    if abs(knots[0] - c1.values.knots[0]) > 1e-12 or abs(knots[-1] - c1.values.knots[-1]) > 1e-12:
        raise ContractViolation("pair curves must share their parameter interval")

    def family_for(fams, a, b):
        for fam in fams:
            if fam.domain[0] - 1e-12 <= a and b <= fam.domain[1] + 1e-12:
                return FrameFamily(fam.space, (a, b), fam.coeffs)
        raise ContractViolation("no analytic piece covers the requested interval")

    doubled = []
    for a, b in zip(knots[:-1], knots[1:]):
        doubled.append(double_frame_families(ds, family_for(fams0, a, b), family_for(fams1, a, b)))
    return ds, doubled


def pair_signatures(gamma0, gamma1, s0: float, tol: float = RANK_RTOL, seed: int = 0) -> SignatureTable:
    """Signature table of a pair at an isolated mutual intersection."""
    ds, families = _pair_families(gamma0, gamma1, tol, seed)
    for fam in families:
        if fam.domain[0] - 1e-12 <= s0 <= fam.domain[1] + 1e-12:
            locus = _intersection_locus(fam, ds.diagonal, tol)
            g = locus.null_order
            if _intersection_dim(fam, ds.diagonal, s0, tol) <= g:
                return SignatureTable(s0, g, (), g).validate()
            return _frame_table(fam, ds.diagonal, s0, g, tol, seed)
    raise ContractViolation(f"s0={s0} outside the pair's interval")


def maslov_pair_via_signatures(
    gamma0, gamma1, tol: float = RANK_RTOL, seed: int = 0, return_details: bool = False
):
    """Pair Maslov index assembled from signature tables of the doubled curve."""
    ds, families = _pair_families(gamma0, gamma1, tol, seed)
    total, details = _frame_assembly(families, ds.diagonal, tol, seed)
    return (total, details) if return_details else total
