"""Shared corpus builders for the test suite.

Planted paths are constant-unitary conjugations of diagonal branch models, so
every eigenvalue branch, its vanishing order and its leading sign are known
exactly and independently of the code under test.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from indexflow.core import MatrixPolyPath, PiecewiseAnalyticPath
from indexflow.lagrangian import ChartCurve, LagrangianFrame, SymplecticSpace, random_lagrangian
from indexflow.lagrangian import find_complementary


def random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@dataclass
class Branch:
    """Scalar eigenvalue branch c * (s - s0)^k, or an affine non-vanishing one."""

    poly: np.ndarray  # monomial coefficients, ascending
    s0: float | None = None
    order: int = 0
    sign: int = 0

    def value(self, s):
        return np.polynomial.polynomial.polyval(s, self.poly)


@dataclass
class PlantedPath:
    path: MatrixPolyPath
    branches: list[Branch]
    unitary: np.ndarray
    degeneracies: dict = field(default_factory=dict)  # s0 -> list of (order, sign)

    def expected_sf(self):
        """Net flow from exact branch endpoint values (zero counts as +)."""
        a, b = self.path.domain
        total = 0
        for br in self.branches:
            va, vb = br.value(a), br.value(b)
            total += int(vb >= -1e-14) - int(va >= -1e-14)
        return total


def planted_path(
    rng,
    n,
    degree,
    domain=(-1.0, 1.0),
    max_order=None,
    allow_endpoint=False,
    n_degenerate=None,
):
    """Hermitian polynomial path with planted degeneracies of known structure."""
    a, b = domain
    max_order = min(degree, 4) if max_order is None else max_order
    # well-separated candidate degeneracy locations (interior lattice)
    slots = list(a + (b - a) * np.linspace(0.18, 0.82, 5))
    rng.shuffle(slots)
    if allow_endpoint:
        slots = [a, b] + slots
    n_deg = rng.integers(1, min(3, n) + 1) if n_degenerate is None else n_degenerate
    points = slots[: max(1, min(2, n_deg))]

    branches = []
    degeneracies: dict = {}
    for i in range(n_deg):
        s0 = points[rng.integers(0, len(points))]
        k = int(rng.integers(1, max_order + 1))
        sign = int(rng.choice([-1, 1]))
        c = sign * rng.uniform(0.5, 1.5)
        poly = c * np.polynomial.polynomial.polyfromroots([s0] * k)
        branches.append(Branch(poly, s0=s0, order=k, sign=sign))
        degeneracies.setdefault(round(s0, 12), []).append((k, sign))
    for _ in range(n - n_deg):
        c0 = rng.choice([-1, 1]) * rng.uniform(0.4, 2.0)
        c1 = rng.uniform(-0.15, 0.15) * abs(c0)
        branches.append(Branch(np.array([c0, c1])))

    u = random_unitary(rng, n)
    coeffs = np.zeros((degree + 1, n, n), dtype=np.complex128)
    for j, br in enumerate(branches):
        for k, ck in enumerate(br.poly):
            if k <= degree and ck != 0:
                coeffs[k] += ck * np.outer(u[:, j], u[:, j].conj())
    path = MatrixPolyPath(domain, coeffs)
    return PlantedPath(path, branches, u, degeneracies)


def scalar_path(coeffs, domain):
    c = np.asarray(coeffs, dtype=complex).reshape(-1, 1, 1)
    return MatrixPolyPath(tuple(domain), c)


def diag_path(columns, domain):
    """Path diag(p_1(s), ..., p_n(s)) from per-branch coefficient lists."""
    degree = max(len(c) for c in columns) - 1
    n = len(columns)
    coeffs = np.zeros((degree + 1, n, n), dtype=complex)
    for j, c in enumerate(columns):
        for k, ck in enumerate(c):
            coeffs[k, j, j] = ck
    return MatrixPolyPath(tuple(domain), coeffs)


def planted_chart_curve(rng, space_dim, degree, domain=(-1.0, 1.0), seed_frames=0, **kw):
    """Chart curve over a random (L0, L1) with planted Hermitian chart values."""
    sp = SymplecticSpace.standard(space_dim)
    l0 = random_lagrangian(sp, rng)
    l1 = find_complementary([l0], seed=seed_frames)
    planted = planted_path(rng, space_dim // 2, degree, domain=domain, **kw)
    curve = ChartCurve(l0, l1, PiecewiseAnalyticPath.from_single(planted.path))
    return curve, planted
