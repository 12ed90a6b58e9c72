import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cogniot import synthetic
from cogniot.lowrank import (
    Decomposition,
    SolverConfig,
    mask_from_indices,
    nuclear_norm,
    project_omega,
    robust_completion,
    robust_pca,
    soft_threshold,
    stable_pca,
    svt,
)

matrices = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-100, 100))


def numerical_rank(m):
    s = np.linalg.svd(m, compute_uv=False)
    return int((s > 1e-6 * s[0]).sum()) if s[0] > 0 else 0


def support(m):
    return np.abs(m) > 1e-6 * np.abs(m).max()


class TestSoftThreshold:
    def test_zero_threshold(self):
        m = np.random.default_rng(0).normal(size=(4, 3))
        np.testing.assert_array_equal(soft_threshold(m, 0.0), m)

    def test_definition(self):
        np.testing.assert_array_equal(soft_threshold([[3.0, -1.0]], 1.0), [[2.0, 0.0]])

    def test_full_shrinkage(self):
        m = np.random.default_rng(1).normal(size=(5, 5))
        assert not soft_threshold(m, np.abs(m).max()).any()

    @given(matrices, st.floats(0, 50))
    def test_never_grows(self, m, tau):
        assert (np.abs(soft_threshold(m, tau)) <= np.abs(m)).all()

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            soft_threshold([[1.0]], -0.1)


class TestSvt:
    def test_diagonal(self):
        np.testing.assert_allclose(svt(np.diag([5.0, 2.0]), 3.0), np.diag([2.0, 0.0]), atol=1e-12)

    def test_zero_threshold(self):
        m = np.random.default_rng(2).normal(size=(6, 4))
        assert np.linalg.norm(svt(m, 0.0) - m) <= 1e-10 * np.linalg.norm(m)

    def test_rank_one_shrink(self):
        rng = np.random.default_rng(3)
        u = rng.normal(size=7)
        v = rng.normal(size=5)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        np.testing.assert_allclose(svt(np.outer(u, v), 0.5), 0.5 * np.outer(u, v), atol=1e-12)

    @settings(max_examples=60)
    @given(matrices, st.floats(0, 50))
    def test_singular_values_never_grow(self, m, tau):
        before = np.linalg.svd(m, compute_uv=False)
        after = np.linalg.svd(svt(m, tau), compute_uv=False)
        assert (after <= before + 1e-9 * max(before[0], 1.0)).all()
        assert nuclear_norm(svt(m, tau)) <= nuclear_norm(m) + 1e-9 * max(before[0], 1.0)


class TestProjection:
    M = np.array([[1.0, 2.0], [3.0, 4.0]])

    def test_full(self):
        np.testing.assert_array_equal(project_omega(self.M, np.ones((2, 2), bool)), self.M)

    def test_empty(self):
        assert not project_omega(self.M, []).any()

    def test_definition(self):
        np.testing.assert_array_equal(project_omega(self.M, [(0, 0), (1, 1)]), [[1, 0], [0, 4]])

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="range"):
            project_omega(self.M, [(2, 0)])

    def test_duplicates(self):
        with pytest.raises(ValueError, match="duplicate"):
            mask_from_indices((2, 2), [(0, 1), (0, 1)])

    @pytest.mark.parametrize("seed", range(10))
    def test_idempotent_and_linear(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(2, 8, 9))
        mask = rng.random((8, 9)) < 0.4
        pa = project_omega(a, mask)
        np.testing.assert_array_equal(project_omega(pa, mask), pa)
        np.testing.assert_allclose(project_omega(a + b, mask), pa + project_omega(b, mask), atol=1e-15)


class TestConfig:
    @pytest.mark.parametrize(
        "kw,field",
        [(dict(lam=0), "lambda"), (dict(epsilon=-1), "epsilon"), (dict(mu_init=0), "mu_init"),
         (dict(mu_growth=1.0), "mu_growth"), (dict(max_iters=0), "max_iters"), (dict(rel_tol=0), "rel_tol")],
    )
    def test_bounds(self, kw, field):
        with pytest.raises(ValueError, match=field):
            SolverConfig(**kw)


class TestStablePca:
    def test_large_epsilon_gives_zero(self):
        y = np.random.default_rng(0).normal(size=(5, 5))
        d = stable_pca(y, SolverConfig(epsilon=np.linalg.norm(y)))
        assert not d.X.any() and d.converged

    def test_zero_epsilon_reproduces(self):
        y = np.random.default_rng(1).normal(size=(6, 4))
        np.testing.assert_allclose(stable_pca(y, SolverConfig(epsilon=0.0)).X, y, atol=1e-8)

    @pytest.mark.parametrize("seed", range(5))
    def test_recovers_rank_one(self, seed):
        rng = np.random.default_rng(seed)
        x0 = np.outer(rng.normal(size=30), rng.normal(size=30))
        noise = 1e-3 * rng.normal(size=(30, 30))
        eps = np.linalg.norm(noise)
        d = stable_pca(x0 + noise, SolverConfig(epsilon=eps))
        assert d.converged
        assert np.linalg.norm(x0 + noise - d.X) <= eps * (1 + 1e-7)
        s = np.linalg.svd(d.X, compute_uv=False)
        assert int((s > 1e-6).sum()) == 1
        assert not d.A.any()


class TestRobustPca:
    def test_zero(self):
        d = robust_pca(np.zeros((4, 4)))
        assert not d.X.any() and not d.A.any() and d.converged

    @pytest.mark.parametrize("seed", range(5))
    def test_synthetic_recovery(self, seed):
        y, x0, a0 = synthetic.rpca_instance(50, 50, 2, 0.05, 10.0, seed=seed)
        d = robust_pca(y, SolverConfig(lam=1 / np.sqrt(50)))
        assert d.converged
        assert np.linalg.norm(d.X - x0) / np.linalg.norm(x0) <= 1e-3
        missing = support(a0) & ~support(d.A)
        assert missing.sum() <= 0.01 * support(a0).sum()
        assert np.linalg.norm(y - d.X - d.A) <= 1e-7 * np.linalg.norm(y)

    def test_single_spike(self):
        y = np.zeros((20, 20))
        y[3, 7] = 100.0
        d = robust_pca(y, SolverConfig(lam=1 / np.sqrt(20)))
        assert np.abs(d.X).max() <= 1e-4
        assert d.A[3, 7] == pytest.approx(100.0, rel=1e-5)

    def test_non_convergence_flagged(self):
        y, _, _ = synthetic.rpca_instance(20, 20, seed=1)
        d = robust_pca(y, SolverConfig(max_iters=2))
        assert not d.converged and d.iterations == 2

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            robust_pca([[1.0, np.nan]])

    @staticmethod
    def _monotone(trace, slack=1.05):
        tail = trace[5:]
        return all(b <= slack * a for a, b in zip(tail, tail[1:]))

    def test_stable_pca_residual_monotone(self):
        for seed in range(4):
            rng = np.random.default_rng(seed)
            x0 = np.outer(rng.normal(size=30), rng.normal(size=30))
            noise = 1e-3 * rng.normal(size=(30, 30))
            d = stable_pca(x0 + noise, SolverConfig(epsilon=np.linalg.norm(noise)))
            assert self._monotone(d.residual_trace)

    @pytest.mark.parametrize("seed", range(10))
    def test_residual_decays(self, seed):
        # what the inexact ALM does guarantee: fast overall decay to tolerance
        y, _, _ = synthetic.rpca_instance(50, 50, 2, 0.05, 10.0, seed=seed)
        trace = robust_pca(y, SolverConfig(lam=1 / np.sqrt(50))).residual_trace
        assert trace[-1] <= 1e-7 * np.linalg.norm(y)
        assert max(trace[10:], default=0.0) <= 1e-2 * trace[0]

    @pytest.mark.xfail(strict=True, reason="inexact ALM residual has late blips above the 1.05 slack")
    def test_rpca_residual_monotone(self):
        for seed in range(10):
            y, _, _ = synthetic.rpca_instance(50, 50, 2, 0.05, 10.0, seed=seed)
            assert self._monotone(robust_pca(y, SolverConfig(lam=1 / np.sqrt(50))).residual_trace)

    @pytest.mark.xfail(strict=True, reason="slow mu growth needed for accurate completion makes the masked residual ripple")
    def test_completion_residual_monotone(self):
        x0, mask = synthetic.completion_instance(100, 100, 2, 0.3, seed=0)
        assert self._monotone(robust_completion(np.where(mask, x0, 0.0), mask).residual_trace)

    @pytest.mark.parametrize("seed", range(3))
    def test_local_optimality(self, seed):
        rng = np.random.default_rng(seed)
        y = synthetic.low_rank(10, 10, 1, rng)
        y[rng.random((10, 10)) < 0.1] += 5.0
        d = robust_pca(y)
        best = d.objective()
        for _ in range(50):
            delta = 1e-3 * rng.normal(size=(10, 10))
            # feasible: X + A stays equal to Y
            trial = Decomposition(d.X + delta, d.A - delta, 0, 0.0, True, lam=d.lam)
            assert best <= trial.objective() + 1e-6


class TestRobustCompletion:
    def test_full_mask_matches_rpca(self):
        y, _, _ = synthetic.low_rank(30, 20, 2, np.random.default_rng(0)), None, None
        a = robust_pca(y)
        b = robust_completion(y, np.ones(y.shape, bool))
        np.testing.assert_allclose(b.X, a.X, atol=1e-8)
        np.testing.assert_allclose(b.A, a.A, atol=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_recovers_thirty_percent(self, seed):
        x0, mask = synthetic.completion_instance(100, 100, 2, 0.3, seed=seed)
        d = robust_completion(np.where(mask, x0, 0.0), mask)
        assert np.linalg.norm(d.X - x0) / np.linalg.norm(x0) <= 1e-2
        assert not d.A[~mask].any()

    def test_observed_zero(self):
        mask = np.random.default_rng(0).random((8, 8)) < 0.5
        d = robust_completion(np.zeros((8, 8)), mask)
        assert not d.X.any() and not d.A.any()

    def test_single_entry_not_an_error(self):
        mask = np.zeros((5, 5), bool)
        mask[1, 2] = True
        d = robust_completion(np.full((5, 5), 3.0), mask)
        assert d.converged and np.isfinite(d.X).all()

    def test_off_mask_values_ignored(self):
        x0, mask = synthetic.completion_instance(30, 30, 1, 0.5, seed=4)
        a = robust_completion(np.where(mask, x0, 0.0), mask)
        b = robust_completion(np.where(mask, x0, 1e6), mask)
        np.testing.assert_array_equal(a.X, b.X)
