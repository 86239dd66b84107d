"""Dense complex linear algebra for Hermitian matrix paths.

Matrices are plain complex128 ndarrays.  Paths carry exact polynomial
coefficients so every derivative used downstream is exact; continuous data
enters as a :class:`SampledPath` and is made analytic with :func:`mollify`.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import numpy.polynomial.chebyshev as npcheb
from scipy.special import erf

from .errors import ApproximationError, ContractViolation, DomainError

# Default tolerances; every operation that makes a rank decision accepts an
# override.
HERM_RTOL = 1e-12
ORTHO_TOL = 1e-10
RANK_RTOL = 1e-9
CONTINUITY_RTOL = 1e-10


def as_complex_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ContractViolation(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def hermitian_defect(a) -> float:
    """Relative Frobenius distance of ``a`` from its adjoint."""
    a = np.asarray(a)
    return float(np.linalg.norm(a - a.conj().T) / max(1.0, np.linalg.norm(a)))


def check_hermitian(a, rtol: float = HERM_RTOL, what: str = "matrix") -> np.ndarray:
    a = as_complex_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ContractViolation(f"{what} is not square: shape {a.shape}")
    d = hermitian_defect(a)
    if d > rtol:
        raise ContractViolation(f"{what} is not Hermitian: relative defect {d:.3e} > {rtol:.1e}")
    return a


def hermitize(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of a subspace of C^N, stored as an N x k matrix.

    k = 0 (the trivial subspace) is allowed.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.complex128)
        if b.ndim != 2:
            raise ContractViolation(f"frame basis must be 2-d, got shape {b.shape}")
        object.__setattr__(self, "basis", b)
        if b.shape[1] > 0:
            g = b.conj().T @ b
            if np.max(np.abs(g - np.eye(b.shape[1]))) > ORTHO_TOL:
                raise ContractViolation("frame columns are not orthonormal")

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    @staticmethod
    def from_columns(cols, rank_rtol: float = RANK_RTOL) -> "Frame":
        """Orthonormalize ``cols`` (N x k), dropping numerically dependent columns."""
        c = np.asarray(cols, dtype=np.complex128)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[1] == 0:
            return Frame(np.zeros((c.shape[0], 0), dtype=np.complex128))
        u, s, _ = np.linalg.svd(c, full_matrices=False)
        keep = s > rank_rtol * max(1.0, s[0] if s.size else 0.0)
        return Frame(u[:, keep])


def frame_gap(a: np.ndarray | Frame, b: np.ndarray | Frame) -> float:
    """Aperture between subspaces: sup over unit u in span(a) of dist(u, span(b))."""
    ma = a.basis if isinstance(a, Frame) else np.asarray(a)
    mb = b.basis if isinstance(b, Frame) else np.asarray(b)
    if ma.shape[1] == 0:
        return 0.0
    resid = ma - mb @ (mb.conj().T @ ma)
    s = np.linalg.svd(resid, compute_uv=False)
    return float(min(1.0, s[0])) if s.size else 0.0


@dataclass(frozen=True)
class MatrixPolyPath:
    """Hermitian-valued matrix polynomial T(s) = sum_k coeffs[k] s^k on [a, b]."""

    domain: tuple[float, float]
    coeffs: np.ndarray  # shape (d+1, n, n)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 3 or c.shape[0] < 1 or c.shape[1] != c.shape[2]:
            raise ContractViolation(f"bad coefficient array shape {c.shape}")
        a, b = float(self.domain[0]), float(self.domain[1])
        if not a < b:
            raise ContractViolation(f"empty domain [{a}, {b}]")
        for k, ak in enumerate(c):
            check_hermitian(ak, what=f"coefficient {k}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "domain", (a, b))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, s: float) -> np.ndarray:
        out = np.array(self.coeffs[-1])
        for ak in self.coeffs[-2::-1]:
            out = out * s + ak
        return out

    def contains(self, s: float, slack: float = 1e-12) -> bool:
        a, b = self.domain
        w = (b - a) * slack
        return a - w <= s <= b + w

    def taylor(self, s0: float, order: int | None = None) -> np.ndarray:
        """Exact Taylor coefficients around s0: T(s0 + h) = sum_j t[j] h^j.

        Entries beyond the polynomial degree are zero matrices.
        """
        d = self.degree
        order = d if order is None else order
        n = self.dim
        t = np.zeros((order + 1, n, n), dtype=np.complex128)
        for j in range(min(order, d) + 1):
            acc = np.zeros((n, n), dtype=np.complex128)
            for k in range(j, d + 1):
                acc += comb(k, j) * (s0 ** (k - j)) * self.coeffs[k]
            t[j] = acc
        return t

    def derivative(self) -> "MatrixPolyPath":
        if self.degree == 0:
            return MatrixPolyPath(self.domain, np.zeros_like(self.coeffs[:1]))
        c = self.coeffs[1:] * np.arange(1, self.degree + 1)[:, None, None]
        return MatrixPolyPath(self.domain, c)

    def sup_norm_bound(self) -> float:
        """Rigorous bound for max_s ||T(s)||_2 over the domain."""
        r = max(abs(self.domain[0]), abs(self.domain[1]))
        return float(sum(np.linalg.norm(ak, 2) * r**k for k, ak in enumerate(self.coeffs)))

    def lipschitz_bound(self) -> float:
        """Rigorous bound for max_s ||T'(s)||_2 over the domain."""
        return self.derivative().sup_norm_bound()

    def restricted(self, a: float, b: float) -> "MatrixPolyPath":
        if not (self.contains(a) and self.contains(b) and a < b):
            raise DomainError(f"[{a}, {b}] not inside {self.domain}")
        return MatrixPolyPath((a, b), self.coeffs)


@dataclass(frozen=True)
class PiecewiseAnalyticPath:
    """Continuous path made of matrix-polynomial segments joined at knots."""

    knots: tuple[float, ...]
    segments: tuple[MatrixPolyPath, ...]

    def __post_init__(self):
        knots = tuple(float(x) for x in self.knots)
        segs = tuple(self.segments)
        if len(knots) != len(segs) + 1 or len(segs) == 0:
            raise ContractViolation("need n+1 knots for n segments")
        if any(knots[i] >= knots[i + 1] for i in range(len(segs))):
            raise ContractViolation("knots must be strictly increasing")
        n = segs[0].dim
        w = knots[-1] - knots[0]
        for j, seg in enumerate(segs):
            if seg.dim != n:
                raise ContractViolation("segments have mixed dimensions")
            if abs(seg.domain[0] - knots[j]) > 1e-9 * w or abs(seg.domain[1] - knots[j + 1]) > 1e-9 * w:
                raise ContractViolation(f"segment {j} domain {seg.domain} does not match its knots")
        for j in range(len(segs) - 1):
            left = segs[j](knots[j + 1])
            right = segs[j + 1](knots[j + 1])
            scale = max(1.0, np.linalg.norm(left))
            if np.linalg.norm(left - right) > CONTINUITY_RTOL * scale:
                raise ContractViolation(f"segments disagree at knot {knots[j + 1]}")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "segments", segs)

    @staticmethod
    def from_single(path: MatrixPolyPath) -> "PiecewiseAnalyticPath":
        return PiecewiseAnalyticPath(path.domain, (path,))

    @staticmethod
    def from_segments(segments) -> "PiecewiseAnalyticPath":
        segs = tuple(segments)
        knots = [segs[0].domain[0]] + [s.domain[1] for s in segs]
        return PiecewiseAnalyticPath(tuple(knots), segs)

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def domain(self) -> tuple[float, float]:
        return (self.knots[0], self.knots[-1])

    def segment_index(self, s: float) -> int:
        if not (self.knots[0] - 1e-12 <= s <= self.knots[-1] + 1e-12):
            raise DomainError(f"{s} outside {self.domain}")
        for j in range(len(self.segments)):
            if s <= self.knots[j + 1]:
                return j
        return len(self.segments) - 1

    def __call__(self, s: float) -> np.ndarray:
        return self.segments[self.segment_index(s)](s)


def as_piecewise(path) -> PiecewiseAnalyticPath:
    if isinstance(path, PiecewiseAnalyticPath):
        return path
    if isinstance(path, MatrixPolyPath):
        return PiecewiseAnalyticPath.from_single(path)
    raise ContractViolation(f"not an analytic path: {type(path).__name__}")


@dataclass(frozen=True)
class SampledPath:
    """Hermitian matrices on a strictly increasing parameter grid."""

    grid: np.ndarray
    values: np.ndarray  # shape (m, n, n)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=np.complex128)
        if g.ndim != 1 or g.size < 1:
            raise ContractViolation("grid must be a non-empty 1-d array")
        if np.any(np.diff(g) <= 0):
            raise ContractViolation("grid must be strictly increasing")
        if v.ndim != 3 or v.shape[0] != g.size or v.shape[1] != v.shape[2]:
            raise ContractViolation(f"values shape {v.shape} does not match grid of size {g.size}")
        for i in range(v.shape[0]):
            check_hermitian(v[i], what=f"sample {i}")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def domain(self) -> tuple[float, float]:
        return (float(self.grid[0]), float(self.grid[-1]))


# ---------------------------------------------------------------------------
# spectral helpers


def eval_jet(path: MatrixPolyPath, s0: float, k: int) -> list[np.ndarray]:
    """[T(s0), T'(s0), ..., T^(k)(s0)], exact; zero matrices beyond the degree."""
    if k < 0:
        raise ContractViolation("jet order must be >= 0")
    if not path.contains(s0):
        raise DomainError(f"{s0} outside path domain {path.domain}")
    t = path.taylor(s0, order=k)
    fact = 1.0
    out = []
    for j in range(k + 1):
        if j > 0:
            fact *= j
        out.append(t[j] * fact)
    return out


def eig_herm(a, rtol: float = HERM_RTOL):
    """Eigenvalues (ascending) and an orthonormal eigenvector frame of a Hermitian matrix."""
    a = check_hermitian(a, rtol=rtol)
    w, v = np.linalg.eigh(a)
    return w, Frame(v)


def kernel(a, tol: float = RANK_RTOL) -> Frame:
    """Frame spanning the eigenspaces with |lambda| <= tol * max(1, spectral radius)."""
    if tol <= 0:
        raise ContractViolation("kernel tolerance must be positive")
    w, v = np.linalg.eigh(check_hermitian(a))
    radius = float(np.max(np.abs(w))) if w.size else 0.0
    cut = tol * max(1.0, radius)
    keep = np.abs(w) <= cut
    return Frame(v.basis[:, keep] if isinstance(v, Frame) else v[:, keep])


# ---------------------------------------------------------------------------
# analytic approximation of sampled paths


def _bump(x):
    """C^infty cutoff, 1 on [-1/4, 5/4], supported on [-1/2, 3/2].

    Keeping the taper a fixed distance away from [0, 1] makes the normalized
    smoothing exact on affine inputs up to the Gaussian tail mass.
    """
    x = np.asarray(x, dtype=float)

    def h(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    def step(t):
        a = h(t)
        return a / (a + h(1.0 - t))

    return step((x + 0.5) / 0.25) * step((1.5 - x) / 0.25)


def _gauss_smooth(samples_t, samples_v, alpha, s_eval):
    """Evaluate the Gaussian-kernel smoothing of the piecewise-linear interpolant.

    The interpolant is extended by its endpoint values and multiplied by the
    cutoff before integrating against sqrt(alpha/pi) exp(-alpha (s-t)^2); the
    result is divided by the integrated kernel mass, so constant inputs are
    reproduced exactly.  Pieces where the cutoff is 1 integrate in closed form
    via erf; the two cutoff tails use fixed Gauss-Legendre rules.
    """
    t = np.asarray(samples_t, dtype=float)
    v = np.asarray(samples_v, dtype=np.complex128)
    s = np.asarray(s_eval, dtype=float)
    n = v.shape[1]
    sqa = np.sqrt(alpha)
    out = np.zeros((s.size, n, n), dtype=np.complex128)

    # linear extension of the sampled interpolant beyond [0, 1]
    slope_lo = (v[1] - v[0]) / (t[1] - t[0]) if t.size > 1 else np.zeros_like(v[0])
    slope_hi = (v[-1] - v[-2]) / (t[-1] - t[-2]) if t.size > 1 else np.zeros_like(v[0])

    # pieces with cutoff == 1: phi(t) = a + b t closed-form against the kernel
    t0s = np.concatenate([[-0.25], t[:-1], [1.0]])
    t1s = np.concatenate([[0.0], t[1:], [1.25]])
    bs = np.concatenate([slope_lo[None], (v[1:] - v[:-1]) / (t[1:] - t[:-1])[:, None, None], slope_hi[None]])
    anchors = np.concatenate([[0.0], t[:-1], [1.0]])
    a_s = np.concatenate([v[0][None], v[:-1], v[-1][None]]) - bs * anchors[:, None, None]
    e0 = erf(sqa * (t0s[None, :] - s[:, None]))  # (ns, np)
    e1 = erf(sqa * (t1s[None, :] - s[:, None]))
    i0 = 0.5 * np.sqrt(np.pi / alpha) * (e1 - e0)
    g0 = np.exp(-alpha * (s[:, None] - t0s[None, :]) ** 2)
    g1 = np.exp(-alpha * (s[:, None] - t1s[None, :]) ** 2)
    i1 = s[:, None] * i0 + (g0 - g1) / (2.0 * alpha)
    out += np.einsum("sp,pij->sij", i0, a_s) + np.einsum("sp,pij->sij", i1, bs)
    mass = np.sum(i0, axis=1)

    # cutoff taper pieces, phi extended linearly
    nodes, weights = np.polynomial.legendre.leggauss(64)
    for lo, hi, val, slope, anchor in (
        (-0.5, -0.25, v[0], slope_lo, 0.0),
        (1.25, 1.5, v[-1], slope_hi, 1.0),
    ):
        x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * weights * _bump(x)
        ker = np.exp(-alpha * (s[:, None] - x[None, :]) ** 2)  # (ns, nq)
        out += np.einsum("sq,q,qij->sij", ker, w, val[None] + (x - anchor)[:, None, None] * slope[None])
        mass += ker @ w

    return out / mass[:, None, None]


def mollify(
    path: SampledPath,
    alpha: float,
    epsilon: float,
    max_degree: int = 40,
    check_points: int = 1601,
) -> MatrixPolyPath:
    """Analytic (polynomial) approximation of a sampled path on [0, 1].

    The sample grid is rescaled to [0, 1]; the result reproduces the endpoint
    samples to machine precision (affine correction term) and is required to
    stay within 2 * epsilon of the piecewise-linear interpolant in operator
    norm, else :class:`ApproximationError` reports the achieved error.
    """
    if alpha <= 0:
        raise ContractViolation("alpha must be positive")
    if epsilon <= 0:
        raise ContractViolation("epsilon must be positive")
    v = path.values
    n = path.dim
    if v.shape[0] == 1:
        return MatrixPolyPath((0.0, 1.0), v[:1].copy())
    g = path.grid
    t = (g - g[0]) / (g[-1] - g[0])

    scale = max(1.0, float(np.max([np.linalg.norm(m) for m in v])))

    def eval_mono(mono, s):
        out = np.array(mono[-1])
        for c in mono[-2::-1]:
            out = out * s + c
        return out

    def candidate(degree):
        npts = degree + 17
        x = npcheb.chebpts1(npts)
        vals = _gauss_smooth(t, v, alpha, 0.5 * (x + 1.0))
        coef = np.polynomial.chebyshev.chebfit(x, vals.reshape(npts, n * n), degree)
        fitted = npcheb.chebval(x, coef).T.reshape(npts, n, n)
        resid = float(np.max(np.abs(fitted - vals)))
        mono = np.zeros((degree + 1, n, n), dtype=np.complex128)
        for e in range(n * n):
            ch = np.polynomial.Chebyshev(coef[:, e], domain=[0.0, 1.0])
            pc = ch.convert(kind=np.polynomial.Polynomial).coef
            mono[: pc.size, e // n, e % n] = pc
        # conditioning probe: the monomial form must still match the fit
        probe = np.linspace(0.07, 0.93, 11)
        pv = np.stack([eval_mono(mono, s) for s in probe])
        cv = npcheb.chebval(2 * probe - 1.0, coef).T.reshape(probe.size, n, n)
        conv_err = float(np.max(np.abs(pv - cv)))
        # affine endpoint correction, iterated against evaluation rounding
        for _ in range(3):
            d0 = v[0] - eval_mono(mono, 0.0)
            d1 = v[-1] - eval_mono(mono, 1.0)
            mono[0] += d0
            mono[1] += d1 - d0
        end_err = max(
            float(np.max(np.abs(eval_mono(mono, 0.0) - v[0]))),
            float(np.max(np.abs(eval_mono(mono, 1.0) - v[-1]))),
        )
        return mono, resid, conv_err, end_err

    best = None
    end_cap = 1e-13 * max(1.0, scale)
    for degree in range(12, max_degree + 1, 8):
        mono, resid, conv_err, end_err = candidate(degree)
        quality = resid + conv_err
        if conv_err <= 3e-8 * scale and end_err <= end_cap and (best is None or quality < best[1]):
            best = (mono, quality, degree)
        if best is not None and best[1] <= 1e-11 * scale:
            break
    if best is None:
        raise ApproximationError(
            "no polynomial degree meets the conversion and endpoint accuracy caps; "
            "lower alpha or raise max_degree",
            achieved=None,
        )
    poly, _, degree = best
    poly = np.array([hermitize(pk) for pk in poly])
    # hermitization averages conjugate pairs and cannot move the endpoint
    # values beyond their own Hermitian defect, which the samples bound
    result = MatrixPolyPath((0.0, 1.0), poly)

    # sup-norm check against the piecewise-linear interpolant
    s_chk = np.linspace(0.0, 1.0, check_points)
    lin = np.empty((check_points, n, n), dtype=np.complex128)
    for e in range(n * n):
        lin[:, e // n, e % n] = np.interp(s_chk, t, v[:, e // n, e % n])
    res_vals = np.stack([result(s) for s in s_chk]) - lin
    achieved = float(np.max(np.linalg.norm(res_vals, ord=2, axis=(1, 2))))
    if achieved > 2.0 * epsilon:
        raise ApproximationError(
            f"mollified path deviates {achieved:.3e} > 2*epsilon = {2 * epsilon:.3e}; "
            "increase alpha resolution budget or epsilon",
            achieved=achieved,
        )
    return result
