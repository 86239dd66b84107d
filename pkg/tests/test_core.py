import numpy as np
import pytest

from indexflow.core import (
    Frame,
    MatrixPolyPath,
    PiecewiseAnalyticPath,
    SampledPath,
    eig_herm,
    eval_jet,
    frame_gap,
    kernel,
    mollify,
)
from indexflow.errors import ApproximationError, ContractViolation, DomainError

from support import random_unitary


def rand_herm(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


class TestEvalJet:
    def test_constant_path(self):
        a = np.diag([1.0, -2.0, 0.5]).astype(complex)
        path = MatrixPolyPath((-1, 1), a[None])
        jets = eval_jet(path, 0.3, 2)
        assert np.allclose(jets[0], a)
        assert np.allclose(jets[1], 0) and np.allclose(jets[2], 0)

    def test_linear_path(self):
        rng = np.random.default_rng(0)
        a0, a1 = rand_herm(rng, 3), rand_herm(rng, 3)
        path = MatrixPolyPath((0, 1), np.stack([a0, a1]))
        jets = eval_jet(path, 0.5, 1)
        assert np.allclose(jets[0], a0 + 0.5 * a1)
        assert np.allclose(jets[1], a1)

    def test_degree4_against_finite_differences(self):
        rng = np.random.default_rng(1)
        coeffs = np.stack([rand_herm(rng, 4) for _ in range(5)])
        path = MatrixPolyPath((-1, 1), coeffs)
        s0, h = 0.21, 0.05
        jets = eval_jet(path, s0, 3)
        # 4th-order central stencils: truncation terms involve the 5th and
        # 6th derivatives, which vanish for a degree-4 polynomial, so these
        # are independent oracles exact up to rounding
        f = {k: path(s0 + k * h) for k in (-2, -1, 0, 1, 2)}
        d1 = (-f[2] + 8 * f[1] - 8 * f[-1] + f[-2]) / (12 * h)
        d2 = (-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * h**2)
        d3 = (f[2] - 2 * f[1] + 2 * f[-1] - f[-2]) / (2 * h**3)
        for exact, approx in [(jets[1], d1), (jets[2], d2), (jets[3], d3)]:
            rel = np.max(np.abs(exact - approx)) / max(1.0, np.max(np.abs(exact)))
            assert rel < 1e-6

    def test_jet_order_zero_is_eval(self):
        rng = np.random.default_rng(2)
        path = MatrixPolyPath((-2, 2), np.stack([rand_herm(rng, 3) for _ in range(3)]))
        for s in (-2.0, -0.7, 0.0, 1.9):
            assert np.allclose(eval_jet(path, s, 0)[0], path(s))

    def test_outside_domain_raises(self):
        path = MatrixPolyPath((0, 1), np.zeros((1, 2, 2)))
        with pytest.raises(DomainError):
            eval_jet(path, 1.5, 1)


class TestEigHerm:
    def test_identity(self):
        w, v = eig_herm(np.eye(3))
        assert np.allclose(w, 1.0)
        assert v.rank == 3

    def test_diagonal_sorted(self):
        w, _ = eig_herm(np.diag([-2.0, 0.0, 5.0]))
        assert np.allclose(w, [-2.0, 0.0, 5.0])

    def test_reconstruction(self):
        rng = np.random.default_rng(3)
        a = rand_herm(rng, 7)
        w, v = eig_herm(a)
        recon = v.basis @ np.diag(w) @ v.basis.conj().T
        assert np.linalg.norm(recon - a) <= 1e-9 * np.linalg.norm(a)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ContractViolation):
            eig_herm(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_unitary_conjugation_invariance(self):
        rng = np.random.default_rng(4)
        a = rand_herm(rng, 6)
        w0, _ = eig_herm(a)
        for _ in range(5):
            u = random_unitary(rng, 6)
            w1, _ = eig_herm(u @ a @ u.conj().T)
            assert np.max(np.abs(w0 - w1)) < 1e-8


class TestKernel:
    def test_two_dim_kernel(self):
        fr = kernel(np.diag([0.0, 0.0, 3.0]), tol=1e-9)
        assert fr.rank == 2
        assert frame_gap(fr, np.eye(3)[:, :2]) < 1e-12

    def test_no_kernel(self):
        assert kernel(np.eye(4)).rank == 0

    def test_planted_direction(self):
        rng = np.random.default_rng(5)
        q = random_unitary(rng, 5)
        a = q @ np.diag([0.0, 0.7, 1.3, -2.0, 0.9]) @ q.conj().T
        fr = kernel(0.5 * (a + a.conj().T))
        assert fr.rank == 1
        angle = np.arccos(min(1.0, abs(np.vdot(fr.basis[:, 0], q[:, 0]))))
        assert angle < 1e-7

    def test_bad_tolerance(self):
        with pytest.raises(ContractViolation):
            kernel(np.eye(2), tol=0.0)


class TestPathTypes:
    def test_coefficients_must_be_hermitian(self):
        with pytest.raises(ContractViolation):
            MatrixPolyPath((0, 1), np.array([[[0.0, 1.0], [0.0, 0.0]]]))

    def test_eval_is_hermitian(self):
        rng = np.random.default_rng(6)
        path = MatrixPolyPath((-1, 1), np.stack([rand_herm(rng, 4) for _ in range(4)]))
        for s in np.linspace(-1, 1, 7):
            v = path(s)
            assert np.linalg.norm(v - v.conj().T) <= 1e-12 * max(1, np.linalg.norm(v))

    def test_piecewise_continuity_enforced(self):
        seg1 = MatrixPolyPath((0, 1), np.zeros((1, 2, 2)))
        seg2 = MatrixPolyPath((1, 2), np.eye(2)[None] + 0j)
        with pytest.raises(ContractViolation):
            PiecewiseAnalyticPath((0, 1, 2), (seg1, seg2))

    def test_sampled_grid_monotone(self):
        vals = np.zeros((3, 2, 2))
        with pytest.raises(ContractViolation):
            SampledPath(np.array([0.0, 0.5, 0.5]), vals)

    def test_frame_orthonormality(self):
        with pytest.raises(ContractViolation):
            Frame(np.array([[1.0], [1.0]]))
        Frame(np.zeros((3, 0)))  # trivial subspace allowed


def smooth_sampled(rng, n, m_samples=61, amp=0.6):
    a = np.stack([0.5 * (x + x.conj().T) for x in
                  (rng.standard_normal((3, n, n)) + 1j * rng.standard_normal((3, n, n)))])
    grid = np.linspace(0.0, 1.0, m_samples)
    vals = np.stack([
        a[0] + amp * np.sin(2.1 * s + 0.3) * a[1] + amp * np.cos(1.3 * s) * a[2]
        for s in grid
    ])
    return SampledPath(grid, vals)


class TestMollify:
    def test_constant_path(self):
        a = np.diag([1.0, -1.0]).astype(complex)
        path = SampledPath(np.linspace(0, 1, 11), np.stack([a] * 11))
        out = mollify(path, alpha=150.0, epsilon=0.05)
        for s in (0.0, 0.33, 1.0):
            assert np.max(np.abs(out(s) - a)) < 1e-8

    def test_single_sample_returns_constant(self):
        a = np.diag([2.0]).astype(complex)
        out = mollify(SampledPath(np.array([0.3]), a[None]), alpha=10.0, epsilon=0.1)
        assert out.degree == 0 and np.allclose(out(0.5), a)

    def test_linear_recovery(self):
        rng = np.random.default_rng(7)
        a0, a1 = rand_herm(rng, 3), rand_herm(rng, 3)
        grid = np.linspace(0, 1, 41)
        path = SampledPath(grid, np.stack([a0 + s * a1 for s in grid]))
        out = mollify(path, alpha=400.0, epsilon=0.2)
        err = max(np.max(np.abs(out(s) - (a0 + s * a1))) for s in np.linspace(0, 1, 101))
        assert err < 1e-8
        assert np.max(np.abs(out(0.0) - a0)) < 1e-13
        assert np.max(np.abs(out(1.0) - (a0 + a1))) < 1e-13

    def test_endpoint_exactness(self):
        rng = np.random.default_rng(8)
        path = smooth_sampled(rng, 3)
        out = mollify(path, alpha=150.0, epsilon=0.06)
        assert np.max(np.abs(out(0.0) - path.values[0])) <= 1e-13
        assert np.max(np.abs(out(1.0) - path.values[-1])) <= 1e-13

    def test_sup_norm_contract(self):
        rng = np.random.default_rng(9)
        path = smooth_sampled(rng, 4)
        eps = 0.06
        out = mollify(path, alpha=150.0, epsilon=eps)
        grid = np.linspace(0, 1, 501)
        t = path.grid
        worst = 0.0
        for s in grid:
            lin = np.zeros_like(path.values[0])
            for e in range(path.dim * path.dim):
                i, j = divmod(e, path.dim)
                lin[i, j] = np.interp(s, t, path.values[:, i, j])
            worst = max(worst, np.linalg.norm(out(s) - lin, 2))
        assert worst <= 2 * eps

    def test_unreachable_epsilon_reports_achieved(self):
        rng = np.random.default_rng(10)
        path = smooth_sampled(rng, 3, amp=1.0)
        with pytest.raises(ApproximationError) as exc:
            mollify(path, alpha=8.0, epsilon=1e-4)
        assert exc.value.achieved is not None and exc.value.achieved > 2e-4
