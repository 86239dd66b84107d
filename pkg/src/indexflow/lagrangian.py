"""Finite-dimensional complex symplectic linear algebra.

The ambient space is C^N with Hermitian inner product <x, y> = x^H y, a
complex structure J (J^2 = -I, J^H = -J, balanced +-i eigenspaces) and the
symplectic form omega(x, y) = <J x, y>.  Lagrangian subspaces have complex
dimension N/2 and are handled through orthonormal frames; subspace identity is
always judged by the gap, never by frame equality.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    RANK_RTOL,
    Frame,
    MatrixPolyPath,
    PiecewiseAnalyticPath,
    as_piecewise,
    check_hermitian,
    frame_gap,
    hermitize,
)
from .errors import (
    ChartDomainError,
    ContractViolation,
    IllConditionedPairError,
    ResolutionError,
    SearchFailure,
)

ISOTROPY_TOL = 1e-9
SYMPLECTIC_TOL = 1e-9


@dataclass(frozen=True)
class SymplecticSpace:
    """C^N with a complex structure J defining omega(x, y) = <J x, y>."""

    J: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.J, dtype=np.complex128)
        n = j.shape[0]
        if j.ndim != 2 or j.shape[1] != n or n % 2:
            raise ContractViolation(f"J must be square of even size, got {j.shape}")
        if np.max(np.abs(j @ j + np.eye(n))) > 1e-12:
            raise ContractViolation("J^2 != -I")
        if np.max(np.abs(j + j.conj().T)) > 1e-12:
            raise ContractViolation("J is not skew-adjoint")
        if abs(np.trace(1j * j)) > 1e-9 * n:
            raise ContractViolation("J has unbalanced +-i eigenspaces; no Lagrangians exist")
        object.__setattr__(self, "J", j)
        # unitary bases of the +-i eigenspaces of J (eigenspaces of the
        # Hermitian matrix iJ for eigenvalues -1 and +1 respectively)
        w, v = np.linalg.eigh(1j * j)
        m = n // 2
        if np.max(np.abs(w[:m] + 1.0)) > 1e-10 or np.max(np.abs(w[m:] - 1.0)) > 1e-10:
            raise ContractViolation("iJ eigenvalues are not +-1")
        object.__setattr__(self, "_plus", v[:, :m])
        object.__setattr__(self, "_minus", v[:, m:])

    @property
    def dim(self) -> int:
        return self.J.shape[0]

    @property
    def lag_dim(self) -> int:
        return self.dim // 2

    @staticmethod
    def standard(n: int) -> "SymplecticSpace":
        if n % 2:
            raise ContractViolation("dimension must be even")
        m = n // 2
        return SymplecticSpace(np.diag([1j] * m + [-1j] * m))

    def compatible(self, other: "SymplecticSpace") -> bool:
        return self.dim == other.dim and np.max(np.abs(self.J - other.J)) < 1e-12

    def omega(self, x, y):
        return np.vdot(self.J @ np.asarray(x), np.asarray(y))


@dataclass(frozen=True)
class LagrangianFrame:
    """Orthonormal frame (N x N/2) of a Lagrangian subspace."""

    space: SymplecticSpace
    M: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.M, dtype=np.complex128)
        n = self.space.dim
        if m.shape != (n, n // 2):
            raise ContractViolation(f"frame shape {m.shape}, expected {(n, n // 2)}")
        gram = m.conj().T @ m
        if np.max(np.abs(gram - np.eye(n // 2))) > 1e-10:
            raise ContractViolation("Lagrangian frame is not orthonormal")
        iso = np.max(np.abs(m.conj().T @ self.space.J @ m)) if n else 0.0
        if iso > ISOTROPY_TOL:
            raise ContractViolation(f"frame is not isotropic: ||M^H J M|| = {iso:.2e}")
        object.__setattr__(self, "M", m)

    @property
    def rank(self) -> int:
        return self.M.shape[1]


def lagrangian_from_columns(space: SymplecticSpace, cols) -> LagrangianFrame:
    """Orthonormalize a spanning set and validate the Lagrangian invariants."""
    c = np.asarray(cols, dtype=np.complex128)
    u, s, _ = np.linalg.svd(c, full_matrices=False)
    if s.size == 0 or s[-1] <= 1e-12 * s[0] or c.shape[1] != space.lag_dim:
        raise ContractViolation("columns do not span a half-dimensional subspace")
    return LagrangianFrame(space, u)


def gap_distance(l0: LagrangianFrame, l1: LagrangianFrame) -> float:
    """Aperture sup_{u in L, |u|=1} dist(u, L'), in [0, 1]."""
    if not l0.space.compatible(l1.space):
        raise ContractViolation("frames live in different spaces")
    return frame_gap(l0.M, l1.M)


def _souriau_unitary(frame: LagrangianFrame) -> np.ndarray:
    """Unitary matrix parameterizing a Lagrangian, via the +-i eigenbases of J.

    Writing M = Phi_+ A + Phi_- B, isotropy and orthonormality force
    sqrt(2) A and sqrt(2) B unitary; the class of (A, B) modulo the frame
    freedom is captured by U = 2 B A^H.
    """
    sp = frame.space
    a = sp._plus.conj().T @ frame.M
    b = sp._minus.conj().T @ frame.M
    u = 2.0 * b @ a.conj().T
    return u


def _lagrangian_from_unitaries(space: SymplecticSpace, v: np.ndarray, w: np.ndarray) -> LagrangianFrame:
    m = (space._plus @ v + space._minus @ w) / np.sqrt(2.0)
    return LagrangianFrame(space, m)


def random_lagrangian(space: SymplecticSpace, rng) -> LagrangianFrame:
    m = space.lag_dim

    def haar(k):
        z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        q, r = np.linalg.qr(z)
        return q * (np.diag(r) / np.abs(np.diag(r)))

    return _lagrangian_from_unitaries(space, haar(m), haar(m))


# ---------------------------------------------------------------------------
# charts


def _decompose(basis0: np.ndarray, basis1: np.ndarray, target: np.ndarray):
    """Coordinates (A, B) with target = basis0 A + basis1 B on a direct sum."""
    n = basis0.shape[0]
    full = np.concatenate([basis0, basis1], axis=1)
    if full.shape[1] != n:
        raise ContractViolation("decomposition basis does not fill the space")
    cond = np.linalg.cond(full)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditionedPairError(f"direct-sum decomposition has condition {cond:.2e}")
    ab = np.linalg.solve(full, target)
    m0 = basis0.shape[1]
    return ab[:m0], ab[m0:]


def chart(l0: LagrangianFrame, l1: LagrangianFrame, lag: LagrangianFrame) -> np.ndarray:
    """Hermitian chart matrix of ``lag`` in the chart centered at l0 with pole l1.

    ``lag`` is the graph of S : L0 -> L1; the chart value is the matrix of
    P_{L0} J S in the frame basis of l0.  Its kernel dimension equals
    dim(lag intersect L0).
    """
    a, b = _decompose(l0.M, l1.M, lag.M)
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[-1] <= 1e-9 * max(1.0, s[0]):
        deficiency = int(np.count_nonzero(s <= 1e-9 * max(1.0, s[0] if s.size else 1.0)))
        raise ChartDomainError(
            "subspace meets the chart pole; chart undefined",
            intersection_dim=deficiency,
        )
    s_frames = b @ np.linalg.inv(a)
    k1 = l0.M.conj().T @ l0.space.J @ l1.M
    t = k1 @ s_frames
    defect = np.max(np.abs(t - t.conj().T))
    if defect > 1e-8 * max(1.0, np.max(np.abs(t))):
        raise ContractViolation(f"chart value not Hermitian (defect {defect:.2e}); input not Lagrangian?")
    return hermitize(t)


def chart_inverse(l0: LagrangianFrame, l1: LagrangianFrame, t) -> LagrangianFrame:
    """Lagrangian with the given Hermitian chart value: the graph of S = K^{-1} T."""
    t = check_hermitian(t, rtol=1e-8, what="chart value")
    k1 = l0.M.conj().T @ l0.space.J @ l1.M
    cond = np.linalg.cond(k1)
    if not np.isfinite(cond) or cond > 1e10:
        raise IllConditionedPairError(f"chart pair nearly degenerate (cond {cond:.2e})")
    s_frames = np.linalg.solve(k1, t)
    cols = l0.M + l1.M @ s_frames
    return lagrangian_from_columns(l0.space, cols)


def chart_transition(
    l0: LagrangianFrame, l1: LagrangianFrame, l1p: LagrangianFrame, t
) -> np.ndarray:
    """Chart value after changing the pole from l1 to l1p: T (I + X T)^{-1}.

    X combines the oblique projection of L1 onto L0 along L1' with the inverse
    of P_{L0} J restricted to L1.
    """
    t = check_hermitian(t, rtol=1e-8, what="chart value")
    j = l0.space.J
    k1 = l0.M.conj().T @ j @ l1.M
    q, _ = _decompose(l0.M, l1p.M, l1.M)  # L0-component of L1 along L1'
    x = q @ np.linalg.solve(k1, np.eye(k1.shape[0]))
    core = np.eye(t.shape[0]) + x @ t
    cond = np.linalg.cond(core)
    if not np.isfinite(cond) or cond > 1e12:
        raise ChartDomainError("transition leaves the chart domain")
    out = t @ np.linalg.inv(core)
    defect = np.max(np.abs(out - out.conj().T))
    if defect > 1e-7 * max(1.0, np.max(np.abs(out))):
        raise ContractViolation(f"transition value not Hermitian (defect {defect:.2e})")
    return hermitize(out)


def find_complementary(
    targets, attempts: int = 64, seed: int = 0, margin: float = 1e-6
) -> LagrangianFrame:
    """Seeded search for a Lagrangian complementary to every target.

    Complementarity is certified by the smallest principal angle (measured via
    its sine) being at least ``margin``.  J L is complementary to a Lagrangian
    L, so that is tried first.
    """
    targets = list(targets)
    if not targets:
        raise ContractViolation("need at least one target")
    space = targets[0].space
    rng = np.random.default_rng(seed)

    def min_margin(cand: LagrangianFrame) -> float:
        worst = 1.0
        for tgt in targets:
            resid = cand.M - tgt.M @ (tgt.M.conj().T @ cand.M)
            s = np.linalg.svd(resid, compute_uv=False)
            worst = min(worst, float(s[-1]))
        return worst

    best, best_margin = None, -1.0
    for attempt in range(max(1, attempts)):
        if attempt == 0:
            cand = lagrangian_from_columns(space, space.J @ targets[0].M)
        else:
            cand = random_lagrangian(space, rng)
        m = min_margin(cand)
        if m > best_margin:
            best, best_margin = cand, m
        if m >= margin:
            return cand
    raise SearchFailure(
        f"no complementary Lagrangian found in {attempts} attempts (best margin {best_margin:.2e})",
        best=best,
        margin=best_margin,
    )


# ---------------------------------------------------------------------------
# symplectic maps


@dataclass(frozen=True)
class SymplecticMap:
    """Invertible map preserving omega; unitary_flag marks J-commuting unitaries."""

    space: SymplecticSpace
    T: np.ndarray
    unitary_flag: bool = False

    def __post_init__(self):
        t = np.asarray(self.T, dtype=np.complex128)
        j = self.space.J
        if np.max(np.abs(t.conj().T @ j @ t - j)) > SYMPLECTIC_TOL:
            raise ContractViolation("map does not preserve the symplectic form")
        if self.unitary_flag:
            if np.max(np.abs(t @ j - j @ t)) > SYMPLECTIC_TOL:
                raise ContractViolation("unitary-flagged map does not commute with J")
            if np.max(np.abs(t.conj().T @ t - np.eye(t.shape[0]))) > SYMPLECTIC_TOL:
                raise ContractViolation("unitary-flagged map is not unitary")
        object.__setattr__(self, "T", t)

    def apply(self, frame: LagrangianFrame) -> LagrangianFrame:
        return lagrangian_from_columns(self.space, self.T @ frame.M)

    def inverse(self) -> "SymplecticMap":
        return SymplecticMap(self.space, np.linalg.inv(self.T), self.unitary_flag)

    def compose(self, other: "SymplecticMap") -> "SymplecticMap":
        return SymplecticMap(self.space, self.T @ other.T, self.unitary_flag and other.unitary_flag)


def stabilizer_element(l0: LagrangianFrame, a, s) -> SymplecticMap:
    """Symplectic map fixing L0, from block data on L0 + L0-perp.

    With respect to H = L0 + L0^perp the map is
    [[A, A J S], [0, -J (A^{-1})^H J]] where A acts on L0 (matrix in the frame
    basis) and S is a Hermitian matrix on L0^perp (in the frame basis J M0).
    """
    a = np.asarray(a, dtype=np.complex128)
    s = check_hermitian(s, rtol=1e-10, what="stabilizer S block")
    m = l0.rank
    if a.shape != (m, m):
        raise ContractViolation(f"A block must be {m} x {m}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e12:
        raise ContractViolation("A block is singular")
    space = l0.space
    m0 = l0.M
    m0p = space.J @ m0  # orthonormal frame of L0^perp
    # operators in these frames: J|_{L0perp -> L0} = -I, J|_{L0 -> L0perp} = +I
    a_inv_h = np.linalg.inv(a).conj().T
    top_right = a @ (-np.eye(m)) @ s
    bottom_right = a_inv_h  # -J (A^{-1})^H J in the chosen frames
    t = (
        m0 @ a @ m0.conj().T
        + m0 @ top_right @ m0p.conj().T
        + m0p @ bottom_right @ m0p.conj().T
    )
    out = SymplecticMap(space, t, unitary_flag=False)
    if frame_gap(out.T @ m0, m0) > 1e-9:
        raise ContractViolation("stabilizer element moved L0")
    return out


def stabilizer_blocks(l0: LagrangianFrame, mp: SymplecticMap):
    """Recover the (A, S) block data of a map fixing L0."""
    m0 = l0.M
    m0p = l0.space.J @ m0
    a = m0.conj().T @ mp.T @ m0
    top_right = m0.conj().T @ mp.T @ m0p
    s = -np.linalg.solve(a, top_right)
    return a, hermitize(s)


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class ChartCurve:
    """Analytic Lagrangian curve given by chart values in a fixed chart."""

    l0: LagrangianFrame
    l1: LagrangianFrame
    values: PiecewiseAnalyticPath

    def __post_init__(self):
        if not self.l0.space.compatible(self.l1.space):
            raise ContractViolation("chart frames live in different spaces")
        vals = as_piecewise(self.values)
        if vals.dim != self.l0.rank:
            raise ContractViolation("chart values have wrong dimension")
        object.__setattr__(self, "values", vals)
        for s in np.linspace(*vals.domain, 5):
            chart_inverse(self.l0, self.l1, vals(s))  # validates

    @property
    def space(self) -> SymplecticSpace:
        return self.l0.space

    @property
    def domain(self):
        return self.values.domain

    def frame_at(self, s: float) -> LagrangianFrame:
        return chart_inverse(self.l0, self.l1, self.values(s))

    def sample(self, grid) -> "SampledCurve":
        return SampledCurve(np.asarray(grid, float), tuple(self.frame_at(s) for s in grid))


@dataclass(frozen=True)
class SampledCurve:
    """Lagrangian frames on a parameter grid with a gap continuity certificate."""

    grid: np.ndarray
    frames: tuple[LagrangianFrame, ...]

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size != len(self.frames) or g.size < 1:
            raise ContractViolation("grid and frames disagree")
        if np.any(np.diff(g) <= 0):
            raise ContractViolation("grid must be strictly increasing")
        for i in range(len(self.frames) - 1):
            if gap_distance(self.frames[i], self.frames[i + 1]) >= 0.5:
                raise ResolutionError(
                    f"consecutive frames jump by gap >= 0.5 near s={g[i]}; sample finer"
                )
        object.__setattr__(self, "grid", g)

    @property
    def space(self) -> SymplecticSpace:
        return self.frames[0].space

    @property
    def domain(self):
        return (float(self.grid[0]), float(self.grid[-1]))

    def transform(self, maps) -> "SampledCurve":
        """Apply one SymplecticMap, or one per sample, to every frame."""
        if isinstance(maps, SymplecticMap):
            maps = [maps] * len(self.frames)
        frames = tuple(mp.apply(fr) for mp, fr in zip(maps, self.frames))
        return SampledCurve(self.grid, frames)


def unitary_lift(curve: SampledCurve, l0: LagrangianFrame) -> list[SymplecticMap]:
    """Unitary-symplectic maps eta_i with eta_i(L0) = curve frame i, varying continuously.

    Works in the +-i eigenbasis of J, where J-commuting unitaries split into a
    pair (P, Q) of unitaries and Lagrangians correspond to single unitaries; a
    minimal-rotation alignment keeps consecutive lifts within a small multiple
    of the curve's gap steps.
    """
    space = curve.space
    if not space.compatible(l0.space):
        raise ContractViolation("curve and base point live in different spaces")
    u_l0 = _souriau_unitary(l0)
    maps = []
    phi_p, phi_m = space._plus, space._minus
    for frame in curve.frames:
        q = _souriau_unitary(frame) @ u_l0.conj().T
        # project to the unitary group (polar factor); inputs are unitary to
        # rounding already
        uu, _, vh = np.linalg.svd(q)
        q = uu @ vh
        t = phi_p @ phi_p.conj().T + phi_m @ q @ phi_m.conj().T
        maps.append(SymplecticMap(space, t, unitary_flag=True))
    # continuity and correctness checks
    for i, (mp, frame) in enumerate(zip(maps, curve.frames)):
        g = frame_gap(mp.T @ l0.M, frame.M)
        if g > 1e-8:
            raise ContractViolation(f"lift misses the curve at sample {i} (gap {g:.2e})")
    for i in range(len(maps) - 1):
        step = np.linalg.norm(maps[i + 1].T - maps[i].T, 2)
        gap_step = gap_distance(curve.frames[i], curve.frames[i + 1])
        if step > 10.0 * gap_step + 1e-7:
            raise ResolutionError(f"lift jumps at sample {i}: {step:.2e} vs gap {gap_step:.2e}")
    return maps
