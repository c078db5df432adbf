"""Cross approximation: maxvol pivots, adaptive ranks, sample budgets."""

import numpy as np
import pytest

from ttergodic import ConvergenceError, maxvol, tt_cross, tt_round, tt_to_dense
from ttergodic.basis import BasisConfig, lambda_weights


def lam_oracle(dim):
    expo = -(dim + 1) / 2.0

    def f(idx):
        freq = idx.astype(np.float64) - 1.0
        return (1.0 + np.sum(freq**2, axis=1)) ** expo

    return f


class TestMaxvol:
    def test_identity_block(self):
        a = np.vstack([np.eye(3), 0.1 * np.ones((5, 3))])
        piv = maxvol(a)
        assert sorted(piv) == [0, 1, 2]

    def test_square_input(self):
        a = np.random.default_rng(0).standard_normal((4, 4))
        assert sorted(maxvol(a)) == [0, 1, 2, 3]

    def test_dominant_submatrix(self, rng):
        # |det| of the selected block is near-maximal: no single swap with
        # another row improves it beyond the tolerance factor
        a = rng.standard_normal((60, 5))
        piv = maxvol(a)
        b = a @ np.linalg.inv(a[piv])
        assert np.max(np.abs(b)) <= 1.0 + 1e-2 + 1e-9

    def test_wide_matrix_rejected(self, rng):
        with pytest.raises(ValueError):
            maxvol(rng.standard_normal((3, 5)))


class TestCross:
    def test_separable_rank1(self, rng):
        a, b, c = rng.uniform(1, 2, 6), rng.uniform(1, 2, 5), rng.uniform(1, 2, 4)

        def f(idx):
            return a[idx[:, 0] - 1] * b[idx[:, 1] - 1] * c[idx[:, 2] - 1]

        t, info = tt_cross(f, (6, 5, 4), 1e-10, seed=1, full_output=True)
        assert t.interior_ranks == (1, 1)
        assert info.converged
        grid = np.stack(np.meshgrid(a, b, c, indexing="ij"))
        exact = grid[0] * grid[1] * grid[2]
        assert np.max(np.abs(tt_to_dense(t).values - exact)) <= 1e-10 * np.max(np.abs(exact))

    def test_full_rank_small(self, rng):
        x = rng.standard_normal((4, 4, 4))

        def f(idx):
            return x[idx[:, 0] - 1, idx[:, 1] - 1, idx[:, 2] - 1]

        t = tt_cross(f, (4, 4, 4), 1e-8, seed=3)
        err = np.linalg.norm(tt_to_dense(t).values - x) / np.linalg.norm(x)
        assert err <= 1e-6

    def test_frequency_weights_rank2(self):
        # weight tensor compresses to rank 2 with small absolute error
        d = 5
        t, info = tt_cross(lam_oracle(d), (10,) * d, 1e-4, seed=2, full_output=True)
        assert info.converged
        t2 = tt_round(t, max_rank=2)
        grid = np.indices((10,) * d).reshape(d, -1).T + 1
        dense = lam_oracle(d)(grid).reshape((10,) * d)
        err = np.linalg.norm(tt_to_dense(t2).values - dense)
        assert err < 1e-2  # absolute Frobenius error
        assert max(t2.interior_ranks) == 2

    def test_sample_budget(self, rng):
        d, k = 5, 8
        a = [rng.uniform(1, 2, k) for _ in range(d)]

        def f(idx):
            out = np.ones(idx.shape[0])
            for i in range(d):
                out *= a[i][idx[:, i] - 1]
            return out

        t, info = tt_cross(f, (k,) * d, 1e-9, seed=4, full_output=True)
        assert info.converged
        r = max(t.interior_ranks)
        budget = 8 * sum((k,) * d) * (r + 1) ** 2 * max(info.n_sweeps, 1)
        assert info.n_evals <= budget
        assert info.n_holdout_evals == 1000

    def test_nonconvergence_raises(self, rng):
        x = rng.standard_normal((5, 5, 5))  # full-rank noise

        def f(idx):
            return x[idx[:, 0] - 1, idx[:, 1] - 1, idx[:, 2] - 1]

        with pytest.raises(ConvergenceError) as err:
            tt_cross(f, (5, 5, 5), 1e-12, seed=5, max_sweeps=1, rank_cap=1)
        assert err.value.residual > 0

    def test_one_dimensional(self):
        def f(idx):
            return np.sin(idx[:, 0].astype(float))

        t = tt_cross(f, (7,), 1e-12, seed=0)
        np.testing.assert_allclose(
            tt_to_dense(t).values, np.sin(np.arange(1.0, 8.0)), atol=1e-14
        )

    def test_bad_arguments(self):
        def f(idx):
            return np.ones(idx.shape[0])

        with pytest.raises(ValueError):
            tt_cross(f, (4, 4), 0.0)
        with pytest.raises(ValueError):
            tt_cross(f, (), 1e-2)

    def test_deterministic_under_seed(self):
        d = 3

        def f(idx):
            s = np.sum(idx.astype(float) ** 2, axis=1)
            return np.exp(-0.1 * s)

        t1 = tt_cross(f, (6,) * d, 1e-6, seed=9)
        t2 = tt_cross(f, (6,) * d, 1e-6, seed=9)
        for c1, c2 in zip(t1.cores, t2.cores):
            np.testing.assert_array_equal(c1, c2)


def test_lambda_weights_match_formula():
    cfg = BasisConfig(2, 5, 1.0, 10)
    lam = lambda_weights(cfg, eps=1e-10, rank_cap=None)
    dense = tt_to_dense(lam).values
    k = np.indices((5, 5)).reshape(2, -1).T  # frequencies are index - 1
    expected = ((1.0 + np.sum(k.astype(float) ** 2, axis=1)) ** -1.5).reshape(5, 5)
    np.testing.assert_allclose(dense, expected, atol=1e-8)
    assert dense[0, 0] == pytest.approx(1.0, abs=1e-8)


def test_lambda_weights_param_counts():
    # rank-2 weight tensors at K=10: 160 / 200 / 240 scalars for d=5/6/7
    from ttergodic import num_params

    for d, expected in ((5, 160), (6, 200), (7, 240)):
        lam = lambda_weights(BasisConfig(d, 10, 1.0, 10))
        assert max(lam.interior_ranks) <= 2
        assert num_params(lam) <= expected


def test_lambda_symmetry():
    # invariant under permutations of the index tuple
    from ttergodic import tt_gather

    d = 4
    lam = lambda_weights(BasisConfig(d, 6, 1.0, 10), eps=1e-6, rank_cap=None)
    rng = np.random.default_rng(7)
    idx = np.column_stack([rng.integers(1, 7, size=100) for _ in range(d)])
    perm = rng.permutation(d)
    v1 = tt_gather(lam, idx)
    v2 = tt_gather(lam, idx[:, perm])
    np.testing.assert_allclose(v1, v2, atol=1e-6)
