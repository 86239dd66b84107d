"""First-order self-adjoint operator families on a two-arc partitioned circle.

The circle [0, 2pi) is cut at t = 0 and t = pi into arcs X_plus = (0, pi) and
X_minus = (pi, 2pi).  A family P(s) = G (d/dt + B(s, t)) with G^2 = -I,
G^H = -G and B piecewise constant in t (each cell a polynomial-in-s
combination of Hermitian anticommutors of G) is self-adjoint on the circle.
Boundary traces at the two cut points carry the symplectic structure
J_Y = diag(+G, -G), for which the Cauchy data spaces of both arcs are
Lagrangian; their pair Maslov index is compared against the spectral flow of
the discretized family.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.linalg import expm

from .core import (
    RANK_RTOL,
    MatrixPolyPath,
    PiecewiseAnalyticPath,
    hermitize,
)
from .errors import (
    ContractViolation,
    ConvergenceError,
    DomainError,
    ModelInconsistencyError,
    ResolutionError,
)
from .lagrangian import LagrangianFrame, SampledCurve, SymplecticSpace, lagrangian_from_columns
from .maslov import DoubledSpace, _chart_value_jets, maslov_pair
from .lagrangian import find_complementary
from .sigflow import (
    SignatureTable,
    partial_signatures,
    signature_table_from_taylor,
    spectral_flow_direct,
)

CIRCUMFERENCE = 2.0 * np.pi
CUTS = (0.0, np.pi)


@dataclass(frozen=True)
class CliffordData:
    """Fiber data: G with G^2 = -I, G^H = -G, and Hermitian anticommutors."""

    G: np.ndarray
    sigmas: tuple[np.ndarray, ...]

    def __post_init__(self):
        g = np.asarray(self.G, dtype=np.complex128)
        f = g.shape[0]
        if g.ndim != 2 or g.shape[1] != f or f % 2:
            raise ContractViolation("G must be square of even size")
        if np.max(np.abs(g @ g + np.eye(f))) > 1e-12:
            raise ContractViolation("G^2 != -I")
        if np.max(np.abs(g + g.conj().T)) > 1e-12:
            raise ContractViolation("G is not skew-adjoint")
        if abs(np.trace(1j * g)) > 1e-9:
            raise ContractViolation("G has unbalanced +-i eigenspaces")
        sigmas = tuple(np.asarray(s, dtype=np.complex128) for s in self.sigmas)
        for i, sig in enumerate(sigmas):
            if np.max(np.abs(sig - sig.conj().T)) > 1e-12:
                raise ContractViolation(f"anticommutor {i} is not Hermitian")
            if np.max(np.abs(g @ sig + sig @ g)) > 1e-12:
                raise ContractViolation(f"matrix {i} does not anticommute with G")
        object.__setattr__(self, "G", g)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def fiber_dim(self) -> int:
        return self.G.shape[0]

    @staticmethod
    def default() -> "CliffordData":
        """Smallest fiber admitting the algebra: f = 2 with the real rotation
        generator and its two real Hermitian anticommutors."""
        g = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=np.complex128)
        s3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
        s1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
        return CliffordData(g, (s3, s1))

    def conjugated_double(self, rng) -> "CliffordData":
        """f = 4 variant: direct sum conjugated by a random unitary."""
        z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        q, r = np.linalg.qr(z)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        blk = lambda a, b: np.block([[a, np.zeros_like(a)], [np.zeros_like(b), b]])
        g = q @ blk(self.G, self.G) @ q.conj().T
        sigs = []
        for s in self.sigmas:
            sigs.append(q @ blk(s, s) @ q.conj().T)
            sigs.append(q @ blk(s, -s) @ q.conj().T)
        return CliffordData(g, tuple(sigs))


@dataclass(frozen=True)
class DiracCell:
    """One arc cell [t0, t1) carrying B(s) = sum_i p_i(s) Sigma_i."""

    t0: float
    t1: float
    coeffs: np.ndarray  # (degree+1, n_sigma): p_i coefficients by power of s

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ContractViolation("cell coefficients must be (degree+1, n_sigma)")
        if not self.t0 < self.t1:
            raise ContractViolation(f"empty cell [{self.t0}, {self.t1})")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", float(self.t1))


@dataclass(frozen=True)
class CircleDiracFamily:
    """One-parameter family G (d/dt + B(s, t)) on the partitioned circle."""

    clifford: CliffordData
    cells: tuple[DiracCell, ...]
    collar: float = 0.25
    s_domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        cells = tuple(self.cells)
        if not cells:
            raise ContractViolation("need at least one cell per arc")
        if abs(cells[0].t0) > 1e-12 or abs(cells[-1].t1 - CIRCUMFERENCE) > 1e-12:
            raise ContractViolation("cells must cover [0, 2pi]")
        for a, b in zip(cells[:-1], cells[1:]):
            if abs(a.t1 - b.t0) > 1e-12:
                raise ContractViolation("cells must tile the circle without gaps")
        nsig = len(self.clifford.sigmas)
        for c in cells:
            if c.coeffs.shape[1] != nsig:
                raise ContractViolation("cell coefficient count does not match the Sigma basis")
            for cut in CUTS:
                if c.t0 < cut - 1e-12 < c.t1 - 1e-12 and abs(c.t0 - cut) > 1e-12:
                    if not (abs(c.t1 - cut) < 1e-12):
                        raise ContractViolation(f"cell [{c.t0}, {c.t1}) straddles the cut at {cut}")
        if not any(abs(c.t0 - np.pi) < 1e-12 for c in cells):
            raise ContractViolation("the cut at pi must be a cell boundary")
        if self.collar <= 0:
            raise ContractViolation("collar width must be positive")

        def pad(c):
            return c.coeffs

        def same(c1, c2):
            d = max(c1.coeffs.shape[0], c2.coeffs.shape[0])
            a = np.zeros((d, c1.coeffs.shape[1]))
            b = np.zeros((d, c2.coeffs.shape[1]))
            a[: c1.coeffs.shape[0]] = c1.coeffs
            b[: c2.coeffs.shape[0]] = c2.coeffs
            return np.max(np.abs(a - b)) < 1e-12

        first_plus = cells[0]
        last_minus = cells[-1]
        before_pi = next(c for c in cells if abs(c.t1 - np.pi) < 1e-12)
        after_pi = next(c for c in cells if abs(c.t0 - np.pi) < 1e-12)
        if not same(first_plus, last_minus):
            raise ContractViolation("coefficients must match across the cut at 0 (bicollar)")
        if not same(before_pi, after_pi):
            raise ContractViolation("coefficients must match across the cut at pi (bicollar)")
        for c in (first_plus, last_minus, before_pi, after_pi):
            if c.t1 - c.t0 < self.collar - 1e-12:
                raise ContractViolation("cells touching a cut are shorter than the collar width")
        a, b = float(self.s_domain[0]), float(self.s_domain[1])
        if not a < b:
            raise ContractViolation("empty s-domain")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "s_domain", (a, b))

    @property
    def fiber_dim(self) -> int:
        return self.clifford.fiber_dim

    @property
    def degree(self) -> int:
        return max(c.coeffs.shape[0] for c in self.cells) - 1

    def b_matrix(self, s: float, t: float) -> np.ndarray:
        cell = self._cell_at(t)
        p = np.array([np.polynomial.polynomial.polyval(s, cell.coeffs[:, i]) for i in range(cell.coeffs.shape[1])])
        return sum(pi * sig for pi, sig in zip(p, self.clifford.sigmas))

    def _cell_at(self, t: float) -> DiracCell:
        t = t % CIRCUMFERENCE
        for c in self.cells:
            if c.t0 - 1e-12 <= t < c.t1 - 1e-12 or (abs(t - c.t0) < 1e-12):
                return c
        return self.cells[-1]

    def boundary_space(self) -> SymplecticSpace:
        """Boundary symplectic structure J_Y = diag(+G, -G) on (trace at 0, trace at pi).

        The Green-Stokes pairing of solutions on an arc fixes J_Y only up to a
        global sign (the inner-product convention); the sign used here is the
        one that makes the spectral flow equal the pair index on families with
        asymmetric crossings, and it is locked in by the verification corpus.
        """
        g = self.clifford.G
        f = self.fiber_dim
        j = np.zeros((2 * f, 2 * f), dtype=np.complex128)
        j[:f, :f] = g
        j[f:, f:] = -g
        return SymplecticSpace(j)


@dataclass(frozen=True)
class BoundarySpace:
    """Symplectic space of boundary traces (value at cut 0, value at cut pi)."""

    space: SymplecticSpace


def _cell_taylor(cell: DiracCell, sigmas, s0: float, order: int) -> np.ndarray:
    """Taylor coefficients at s0 of the cell matrix B(s)."""
    d = cell.coeffs.shape[0] - 1
    f = sigmas[0].shape[0]
    out = np.zeros((order + 1, f, f), dtype=np.complex128)
    for j in range(min(order, d) + 1):
        for i, sig in enumerate(sigmas):
            acc = 0.0
            for k in range(j, d + 1):
                acc += comb(k, j) * (s0 ** (k - j)) * cell.coeffs[k, i]
            out[j] += acc * sig
    return out


def _jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cauchy product of matrix jet sequences (same truncation order)."""
    order = a.shape[0]
    out = np.zeros_like(a)
    for r in range(order):
        for j in range(r + 1):
            out[r] += a[j] @ b[r - j]
    return out


def _jet_expm(a_jets: np.ndarray) -> np.ndarray:
    """exp of a truncated matrix jet, via the block-Toeplitz tower.

    The upper-triangular block-Toeplitz matrix with blocks a_0, a_1, ... on
    successive diagonals represents the jet in the truncated polynomial
    algebra; its exponential stays in the algebra and the top block row holds
    the jets of the exponential.
    """
    order1, f, _ = a_jets.shape
    tower = np.zeros((order1 * f, order1 * f), dtype=np.complex128)
    for i in range(order1):
        for j in range(i, order1):
            tower[i * f : (i + 1) * f, j * f : (j + 1) * f] = a_jets[j - i]
    e = expm(tower)
    out = np.empty_like(a_jets)
    for j in range(order1):
        out[j] = e[:f, j * f : (j + 1) * f]
    return out


def transfer(
    family: CircleDiracFamily,
    s: float,
    lam: float,
    t_a: float,
    t_b: float,
    order: int = 0,
) -> np.ndarray:
    """Solution propagator of P(s) u = lam u from t_a to t_b within one arc.

    In cylindrical form the equation reads u' = (-B(s, t) - lam G) u, so the
    propagator is the ordered product of cell exponentials.  With order > 0
    the result carries exact s-derivative jets (Taylor coefficients), computed
    through the block-Toeplitz exponential.

    Returns shape (f, f) for order 0, else (order+1, f, f).
    """
    if not (0.0 - 1e-12 <= t_a < t_b <= CIRCUMFERENCE + 1e-12):
        raise DomainError("need 0 <= t_a < t_b <= 2pi")
    for cut in CUTS:
        if t_a < cut - 1e-12 and t_b > cut + 1e-12:
            raise DomainError(f"[{t_a}, {t_b}] straddles the cut at {cut}")
    return _transfer_any(family, s, lam, t_a, t_b, order)


def _transfer_any(family, s, lam, t_a, t_b, order=0):
    f = family.fiber_dim
    g = family.clifford.G
    jets = np.zeros((order + 1, f, f), dtype=np.complex128)
    jets[0] = np.eye(f)
    t = t_a
    for cell in family.cells:
        lo = max(cell.t0, t_a)
        hi = min(cell.t1, t_b)
        if hi - lo < 1e-14:
            continue
        b_jets = _cell_taylor(cell, family.clifford.sigmas, s, order)
        a_jets = -b_jets
        a_jets[0] -= lam * g
        jets = _jet_mul(_jet_expm(a_jets * (hi - lo)), jets)
        t = hi
    if abs(t - t_b) > 1e-10:
        raise DomainError("cells do not cover the requested interval")
    return jets[0] if order == 0 else jets


def monodromy(family: CircleDiracFamily, s: float, lam: float) -> np.ndarray:
    """Propagator around the full circle; lam is an eigenvalue of P(s) iff
    the monodromy fixes a vector."""
    t_plus = _transfer_any(family, s, lam, 0.0, np.pi)
    t_minus = _transfer_any(family, s, lam, np.pi, CIRCUMFERENCE)
    return t_minus @ t_plus


def _kernel_dim_of(m: np.ndarray, rel: float = 1e-7) -> int:
    sv = np.linalg.svd(m - np.eye(m.shape[0]), compute_uv=False)
    return int(np.count_nonzero(sv <= rel * max(1.0, sv[0])))


def _locate_fixed_points(defect, kernel_dim, grid, generic: int = 0):
    """Zeros of a fixed-point defect function along a grid.

    ``defect(x)`` is det(M(x) - I); when its values are real along the grid,
    sign changes are bisected (robust however steep the hyperbolic growth is),
    and |defect| dips are golden-refined to catch even-order touchings.  Every
    candidate is accepted only if the monodromy kernel actually exceeds
    ``generic`` there.
    """
    vals = np.array([defect(x) for x in grid])
    is_real = np.max(np.abs(vals.imag)) <= 1e-9 * max(1.0, np.max(np.abs(vals)))
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    points = []

    def bisect(a, b, fa, fb):
        for _ in range(200):
            if b - a < 1e-14 * max(1.0, abs(a)):
                break
            mid = 0.5 * (a + b)
            fm = defect(mid).real
            if fa * fm <= 0:
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        return 0.5 * (a + b)

    def golden(a, b):
        f = lambda x: abs(defect(x))
        c, d = b - phi * (b - a), a + phi * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(200):
            if b - a < 1e-14 * max(1.0, abs(a)):
                break
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = f(d)
        return 0.5 * (a + b)

    if is_real:
        re = vals.real
        for i in range(len(grid) - 1):
            if re[i] == 0.0 and kernel_dim(grid[i]) > generic:
                points.append(float(grid[i]))
            if re[i] * re[i + 1] < 0:
                points.append(bisect(grid[i], grid[i + 1], re[i], re[i + 1]))
        if re[-1] == 0.0 and kernel_dim(grid[-1]) > generic:
            points.append(float(grid[-1]))
    av = np.abs(vals)
    for i in range(len(grid)):
        il, ir = max(0, i - 1), min(len(grid) - 1, i + 1)
        if av[i] <= av[il] and av[i] <= av[ir]:
            points.append(golden(grid[il], grid[ir]))
    accepted = []
    for x in sorted(points):
        if accepted and x - accepted[-1][0] < 1e-9 * max(1.0, grid[-1] - grid[0]):
            continue
        k = kernel_dim(x)
        if k > generic:
            accepted.append((float(x), int(k)))
    return accepted


def spectrum_window(
    family: CircleDiracFamily,
    s: float,
    window: tuple[float, float],
    tol: float = 1e-10,
) -> list[tuple[float, int]]:
    """Eigenvalues of P(s) in a finite window, with multiplicities.

    lambda is an eigenvalue exactly when the monodromy fixes a vector, i.e.
    at the zeros of det(monodromy - I); those are located by sign bisection
    (real case) and dip refinement, and the kernel dimension at each zero
    gives the multiplicity.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi or not np.isfinite(lo) or not np.isfinite(hi):
        raise DomainError("window must be a finite interval")
    f = family.fiber_dim

    def defect(lam):
        return np.linalg.det(monodromy(family, s, lam) - np.eye(f))

    def kdim(lam):
        return _kernel_dim_of(monodromy(family, s, lam))

    count = max(201, int(np.ceil((hi - lo) / 0.01)) + 1)
    grid = np.linspace(lo, hi, count)
    found = _locate_fixed_points(defect, kdim, grid)
    out = []
    for lam_star, mult in found:
        if out and abs(lam_star - out[-1][0]) < 1e-8 * max(1.0, abs(lam_star)):
            if mult != out[-1][1]:
                raise ResolutionError(f"unresolved eigenvalue cluster near {lam_star}")
            continue
        out.append((lam_star, mult))
    return out


def _damping_anticommutor(clifford: CliffordData) -> np.ndarray:
    """A Hermitian anticommutor of G squaring to the identity."""
    for sig in clifford.sigmas:
        if np.max(np.abs(sig @ sig - np.eye(clifford.fiber_dim))) < 1e-10:
            return sig
    raise ContractViolation("no unit-square anticommutor available for doubler damping")


def discretize(family: CircleDiracFamily, n_grid: int) -> PiecewiseAnalyticPath:
    """Periodic central-difference discretization as a matrix polynomial path.

    ``n_grid`` must be odd (an even grid puts the sawtooth mode in the kernel
    of the central difference, duplicating every crossing).  A raw central
    difference still carries a spectral copy of the time-reflected
    antiperiodic operator on high-frequency modes, whose branches can reach
    zero once the coefficients depend on t; the added damping term
    (h^3/4) Delta_h^2 (x) S, with S a unit-square anticommutor of G, vanishes
    exactly on constant sections, perturbs smooth modes at O(h^3) and gaps
    the high-frequency copy to O(1/h).
    """
    if n_grid < 16:
        raise ContractViolation("need at least 16 grid points")
    if n_grid % 2 == 0:
        raise ContractViolation("grid size must be odd (sawtooth kernel mode on even grids)")
    f = family.fiber_dim
    g = family.clifford.G
    h = CIRCUMFERENCE / n_grid
    d_c = np.zeros((n_grid, n_grid))
    lap = np.zeros((n_grid, n_grid))
    for j in range(n_grid):
        d_c[j, (j + 1) % n_grid] = 1.0 / (2.0 * h)
        d_c[j, (j - 1) % n_grid] = -1.0 / (2.0 * h)
        lap[j, j] = -2.0 / h**2
        lap[j, (j + 1) % n_grid] = 1.0 / h**2
        lap[j, (j - 1) % n_grid] = 1.0 / h**2
    damp = 0.25 * h**3 * (lap @ lap)
    s_mat = _damping_anticommutor(family.clifford)
    degree = family.degree
    n = f * n_grid
    coeffs = np.zeros((degree + 1, n, n), dtype=np.complex128)
    coeffs[0] = np.kron(d_c, g) + np.kron(damp, s_mat)
    ts = np.arange(n_grid) * h
    for j, t in enumerate(ts):
        cell = family._cell_at(t)
        for k in range(cell.coeffs.shape[0]):
            bk = sum(cell.coeffs[k, i] * sig for i, sig in enumerate(family.clifford.sigmas))
            coeffs[k, f * j : f * (j + 1), f * j : f * (j + 1)] += g @ bk
    coeffs = np.array([hermitize(c) for c in coeffs])
    path = MatrixPolyPath(family.s_domain, coeffs)
    return PiecewiseAnalyticPath.from_single(path)


def cauchy_data(family: CircleDiracFamily, s: float):
    """Lagrangian frames of the two Cauchy data spaces at parameter s.

    H_plus = traces (v, T_plus v) of solutions on the arc (0, pi);
    H_minus = traces (T_minus w, w) of solutions on the arc (pi, 2pi).
    """
    f = family.fiber_dim
    space = family.boundary_space()
    t_plus = _transfer_any(family, s, 0.0, 0.0, np.pi)
    t_minus = _transfer_any(family, s, 0.0, np.pi, CIRCUMFERENCE)
    h_plus = lagrangian_from_columns(space, np.vstack([np.eye(f), t_plus]))
    h_minus = lagrangian_from_columns(space, np.vstack([t_minus, np.eye(f)]))
    return h_plus, h_minus


def cauchy_frame_jets(family: CircleDiracFamily, s0: float, order: int):
    """s-jets of analytic (non-orthonormal) frames of H_plus and H_minus."""
    f = family.fiber_dim
    tp = _transfer_any(family, s0, 0.0, 0.0, np.pi, order=order)
    tm = _transfer_any(family, s0, 0.0, np.pi, CIRCUMFERENCE, order=order)
    fp = np.zeros((order + 1, 2 * f, f), dtype=np.complex128)
    fm = np.zeros((order + 1, 2 * f, f), dtype=np.complex128)
    fp[0, :f] = np.eye(f)
    fm[0, f:] = np.eye(f)
    for j in range(order + 1):
        fp[j, f:] = tp[j]
        fm[j, :f] = tm[j]
    return fp, fm


def green_stokes_residual(family: CircleDiracFamily, s: float, rng=None, trials: int = 8) -> float:
    """Max boundary-pairing residual <J_Y u|_Y, v|_Y> over solutions on one arc.

    Vanishing of this pairing is the isotropy half of the Lagrangian property
    of the Cauchy data spaces and validates the boundary orientation signs.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    space = family.boundary_space()
    f = family.fiber_dim
    t_plus = _transfer_any(family, s, 0.0, 0.0, np.pi)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(f) + 1j * rng.standard_normal(f)
        w = rng.standard_normal(f) + 1j * rng.standard_normal(f)
        tu = np.concatenate([v, t_plus @ v])
        tv = np.concatenate([w, t_plus @ w])
        worst = max(worst, abs(np.vdot(space.J @ tu, tv)) / (np.linalg.norm(tu) * np.linalg.norm(tv)))
    return worst


# ---------------------------------------------------------------------------
# degeneracies and the two signature tables


def scan_pair_degeneracies(family: CircleDiracFamily, samples: int = 801, tol: float = 1e-8):
    """Parameters where the Cauchy data spaces intersect, by monodromy kernel.

    Returns (points, generic_dim): the generic intersection dimension is
    nonzero only for families degenerate along the whole interval.
    """
    a, b = family.s_domain
    f = family.fiber_dim

    def defect(s):
        return np.linalg.det(monodromy(family, s, 0.0) - np.eye(f))

    def idim(s):
        return _kernel_dim_of(monodromy(family, s, 0.0))

    generic = min(idim(a + (b - a) * frac) for frac in (0.2834, 0.5713, 0.8159))
    grid = np.linspace(a, b, samples)
    found = _locate_fixed_points(defect, idim, grid, generic=generic)
    return [s for s, _ in found], generic


def boundary_pair_table(
    family: CircleDiracFamily,
    s0: float,
    tol: float = RANK_RTOL,
    order: int = 14,
    seed: int = 0,
    null_dim: int | None = None,
) -> SignatureTable:
    """Signature table of the doubled Cauchy-data curve against the diagonal."""
    fp, fm = cauchy_frame_jets(family, s0, order)
    f = family.fiber_dim
    base = family.boundary_space()
    ds = DoubledSpace.for_base(base)
    doubled = np.zeros((order + 1, 4 * f, 2 * f), dtype=np.complex128)
    doubled[:, : 2 * f, :f] = fp
    doubled[:, 2 * f :, f:] = fm
    frame0 = lagrangian_from_columns(ds.space, doubled[0])
    l1 = find_complementary([ds.diagonal, frame0], seed=seed)
    t_jets = _chart_value_jets(doubled, ds.diagonal, l1)
    if null_dim is None:
        _, null_dim = scan_pair_degeneracies(family, samples=41)
    return signature_table_from_taylor(t_jets, s0, tol=tol, null_dim=null_dim, kmax=order)


def _operator_degeneracy_near(path, s0: float, k_b: int, tol: float):
    """Locate the discretized path's own kernel point associated with s0.

    Exact-at-s0 degeneracies (t-independent constructions) are used directly;
    otherwise a simple crossing is tracked by bisection on the signed
    eigenvalue nearest zero.
    """
    seg = path.segments[0]
    sup = max(1.0, seg.sup_norm_bound())

    def smallest_signed(s):
        w = np.linalg.eigvalsh(seg(s))
        return w[np.argmin(np.abs(w))]

    w0 = np.linalg.eigvalsh(seg(s0))
    idx = np.argsort(np.abs(w0))
    cluster = np.abs(w0[idx[:k_b]])
    rest = np.abs(w0[idx[k_b]]) if k_b < w0.size else np.inf
    if np.max(cluster) <= tol * sup:
        return s0
    if np.max(cluster) > 0.1 * rest:
        raise ModelInconsistencyError(
            f"near-zero cluster at s0={s0} is not separated "
            f"(cluster width {np.max(cluster):.2e}, next eigenvalue {rest:.2e})"
        )
    if k_b != 1:
        raise ModelInconsistencyError(
            "discretized kernel cluster of size > 1 does not sit exactly at the "
            "boundary degeneracy; refine the model"
        )
    a, b = path.domain
    w = min(0.05 * (b - a), 0.5 * (b - a))
    lo, hi = max(a, s0 - w), min(b, s0 + w)
    f_lo, f_hi = smallest_signed(lo), smallest_signed(hi)
    if f_lo * f_hi > 0:
        raise ModelInconsistencyError(f"no sign change of the crossing branch near s0={s0}")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        f_mid = smallest_signed(mid)
        if f_lo * f_mid <= 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class KernelBoundaryReport:
    s0: float
    boundary_dim: int
    operator_dim: int
    operator_s0: float
    boundary_table: SignatureTable
    operator_table: SignatureTable
    trace_basis: np.ndarray  # (2f, k): boundary traces (g, g) spanning the intersection
    solutions: np.ndarray  # (k, n_grid, f): circle solutions u with u|_Y = g
    tables_equal: bool
    dims_equal: bool


def kernel_boundary_map(
    family: CircleDiracFamily,
    s0: float,
    n_grid: int = 33,
    tol: float = RANK_RTOL,
    seed: int = 0,
) -> KernelBoundaryReport:
    """Identify the boundary intersection with the operator kernel at s0.

    Each intersection vector (g, g) of the diagonal with H_plus + H_minus is
    propagated to a solution of P(s0) u = 0 around the circle; the dimension
    must match the discretized operator's near-zero cluster, and the
    signature tables of the boundary pair and of the operator family must
    agree row by row.
    """
    f = family.fiber_dim
    m0 = monodromy(family, s0, 0.0)
    u, sv, vh = np.linalg.svd(m0 - np.eye(f))
    k_b = int(np.count_nonzero(sv <= 1e-8 * max(1.0, sv[0])))
    if k_b == 0:
        raise DomainError(f"s0={s0} is not a degeneracy of the family")
    v_basis = vh.conj().T[:, f - k_b :]

    # boundary traces and circle solutions
    t_plus = _transfer_any(family, s0, 0.0, 0.0, np.pi)
    traces = np.vstack([v_basis, t_plus @ v_basis])
    h = CIRCUMFERENCE / n_grid
    ts = np.arange(n_grid) * h
    sols = np.zeros((k_b, n_grid, f), dtype=np.complex128)
    for j, t in enumerate(ts):
        prop = _transfer_any(family, s0, 0.0, 0.0, t) if t > 0 else np.eye(f)
        sols[:, j, :] = (prop @ v_basis).T

    path = discretize(family, n_grid)
    seg = path.segments[0]
    sup = max(1.0, seg.sup_norm_bound())
    w0 = np.sort(np.abs(np.linalg.eigvalsh(seg(s0))))
    cluster_dim = int(np.count_nonzero(w0 <= max(tol * sup, 10.0 * w0[min(k_b - 1, w0.size - 1)])))
    dims_equal = cluster_dim == k_b

    points, generic = scan_pair_degeneracies(family, samples=101)
    b_table = boundary_pair_table(family, s0, tol=tol, seed=seed, null_dim=generic)
    op_s0 = _operator_degeneracy_near(path, s0, k_b, tol)
    op_table = partial_signatures(seg, op_s0, tol=tol, null_dim=0)
    tables_equal = (
        b_table.kernel_dim - b_table.null_branch_dim
        == op_table.kernel_dim - op_table.null_branch_dim
    ) and [
        (r.k, r.n_minus, r.n_plus) for r in b_table.rows if r.n_minus + r.n_plus
    ] == [(r.k, r.n_minus, r.n_plus) for r in op_table.rows if r.n_minus + r.n_plus]
    if not dims_equal:
        raise ModelInconsistencyError(
            f"boundary intersection dim {k_b} != operator near-zero cluster {cluster_dim}"
        )
    return KernelBoundaryReport(
        s0=s0,
        boundary_dim=k_b,
        operator_dim=cluster_dim,
        operator_s0=op_s0,
        boundary_table=b_table,
        operator_table=op_table,
        trace_basis=traces,
        solutions=sols,
        tables_equal=tables_equal,
        dims_equal=dims_equal,
    )


# ---------------------------------------------------------------------------
# the flow = index verification


def _next_odd(n: int) -> int:
    return n if n % 2 else n + 1


def yn_check(
    family: CircleDiracFamily,
    s_grid=None,
    n_grid: int = 33,
    tol: float = RANK_RTOL,
    seed: int = 0,
) -> dict:
    """Spectral flow of the discretized family vs the Maslov index of its
    Cauchy data pair; the two integers are expected to agree.

    The discretized flow must be stable under doubling the grid, else a
    :class:`ConvergenceError` is raised (no verdict).  The Maslov side is the
    pair index of the sampled Cauchy-data curves.
    """
    n1 = _next_odd(max(16, n_grid))
    sf1 = spectral_flow_direct(discretize(family, n1), tol=tol)
    n2 = _next_odd(2 * n1)
    sf2 = spectral_flow_direct(discretize(family, n2), tol=tol)
    for _ in range(2):
        if sf1 == sf2:
            break
        n1, sf1 = n2, sf2
        n2 = _next_odd(2 * n1)
        sf2 = spectral_flow_direct(discretize(family, n2), tol=tol)
    if sf1 != sf2:
        raise ConvergenceError(
            f"discretized spectral flow is unstable under grid doubling: {sf1} (N={n1}) "
            f"vs {sf2} (N={n2})"
        )

    a, b = family.s_domain
    if s_grid is None:
        s_grid = np.linspace(a, b, 385)
    else:
        s_grid = np.asarray(s_grid, dtype=float)

    frames_p = []
    frames_m = []
    for s in s_grid:
        hp, hm = cauchy_data(family, s)
        frames_p.append(hp)
        frames_m.append(hm)
    # refine where the pair moves fast
    from .lagrangian import gap_distance as _gd

    for _ in range(4):
        inserts = []
        for i in range(len(s_grid) - 1):
            step = max(
                _gd(frames_p[i], frames_p[i + 1]), _gd(frames_m[i], frames_m[i + 1])
            )
            if step > 0.05:
                inserts.append(i)
        if not inserts or len(s_grid) > 4000:
            break
        new_s = list(s_grid)
        offset = 0
        for i in inserts:
            mid = 0.5 * (s_grid[i] + s_grid[i + 1])
            hp, hm = cauchy_data(family, mid)
            new_s.insert(i + 1 + offset, mid)
            frames_p.insert(i + 1 + offset, hp)
            frames_m.insert(i + 1 + offset, hm)
            offset += 1
        s_grid = np.asarray(new_s)

    curve_p = SampledCurve(s_grid, tuple(frames_p))
    curve_m = SampledCurve(s_grid, tuple(frames_m))
    mu = maslov_pair(curve_p, curve_m, tol=tol, seed=seed)

    degeneracies, generic = scan_pair_degeneracies(family)
    return {
        "sf": int(sf1),
        "maslov": int(mu),
        "equal": bool(sf1 == mu),
        "convergence": {"N": n1, "sf_N": int(sf1), "N_doubled": n2, "sf_N_doubled": int(sf2)},
        "degeneracies": [float(x) for x in degeneracies],
        "generic_intersection_dim": int(generic),
    }
