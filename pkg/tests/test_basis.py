"""Cosine basis, quadrature, and the coefficient pipeline."""

import numpy as np
import pytest

from ttergodic import tt_gather, tt_inner, tt_rank1, tt_to_dense
from ttergodic.basis import (
    BasisConfig,
    CoefficientSet,
    basis_eval,
    basis_grad,
    build_coefficients,
    coefficient_oracle,
    coefficient_tensor,
    discretize_density,
    grad_phi_rank1,
    grid_mass,
    lambda_weights,
    load_coefficients,
    phi_rank1,
    quadrature_rule,
    save_coefficients,
)
from ttergodic.distributions import Gmm, IsotropicGaussian, Uniform


class TestQuadrature:
    def test_one_point_is_midpoint(self):
        rule = quadrature_rule(1, 1.0)
        assert rule.nodes[0] == pytest.approx(0.5)
        assert rule.weights[0] == pytest.approx(1.0)

    def test_weights_sum_to_length(self):
        for n, length in ((10, 1.0), (7, 2.5)):
            rule = quadrature_rule(n, length)
            assert np.sum(rule.weights) == pytest.approx(length, abs=1e-14)
            assert np.all(np.diff(rule.nodes) > 0)
            assert rule.nodes[0] > 0 and rule.nodes[-1] < length

    def test_cubic_exact_with_two_points(self):
        rule = quadrature_rule(2, 1.0)
        assert np.sum(rule.weights * rule.nodes**3) == pytest.approx(0.25, abs=1e-14)

    def test_polynomial_exactness_degree(self):
        # degree 2n-1 exact, degree 2n not
        n = 4
        rule = quadrature_rule(n, 1.0)
        for p in range(2 * n):
            exact = 1.0 / (p + 1)
            assert np.sum(rule.weights * rule.nodes**p) == pytest.approx(
                exact, abs=1e-13
            )
        p = 2 * n
        assert abs(np.sum(rule.weights * rule.nodes**p) - 1 / (p + 1)) > 1e-9


class TestBasis:
    def test_values_at_zero(self):
        cfg = BasisConfig(1, 3, 1.0, 10)
        np.testing.assert_allclose(
            basis_eval(0.0, cfg), [1.0, np.sqrt(2), np.sqrt(2)]
        )

    def test_value_at_midpoint(self):
        cfg = BasisConfig(1, 3, 1.0, 10)
        assert basis_eval(0.5, cfg)[1] == pytest.approx(-np.sqrt(2))

    def test_gradient_vanishes_at_walls(self):
        cfg = BasisConfig(1, 5, 1.0, 10)
        np.testing.assert_allclose(basis_grad(0.0, cfg), 0.0, atol=1e-13)
        np.testing.assert_allclose(basis_grad(1.0, cfg), 0.0, atol=1e-13)

    def test_gradient_matches_finite_differences(self):
        cfg = BasisConfig(1, 5, 1.0, 10)
        h = 1e-6
        fd = (basis_eval(0.3 + h, cfg) - basis_eval(0.3 - h, cfg)) / (2 * h)
        np.testing.assert_allclose(basis_grad(0.3, cfg), fd, atol=1e-6)

    def test_domain_errors(self):
        cfg = BasisConfig(1, 3, 1.0, 10)
        with pytest.raises(ValueError):
            basis_eval(-0.1, cfg)
        with pytest.raises(ValueError):
            basis_grad(1.1, cfg)

    def test_orthonormality_under_quadrature(self):
        # the Gram matrix converges to the identity as the quadrature
        # degree grows; machine precision needs roughly N >= 5K
        cfg = BasisConfig(1, 5, 1.0, 10)
        for n, tol in ((15, 0.1), (27, 1e-10)):
            rule = quadrature_rule(n, cfg.length)
            from ttergodic.basis import basis_table

            table = basis_table(rule.nodes, cfg.n_basis, cfg.length)
            gram = (table * rule.weights[:, None]).T @ table
            assert np.max(np.abs(gram - np.eye(cfg.n_basis))) < tol


class TestRank1Tensors:
    def test_phi_rank1_elements(self, rng):
        cfg = BasisConfig(2, 4, 1.0, 10)
        x = rng.uniform(0, 1, 2)
        t = phi_rank1(x, cfg)
        va, vb = basis_eval(x[0], cfg), basis_eval(x[1], cfg)
        np.testing.assert_allclose(tt_to_dense(t).values, np.outer(va, vb), atol=1e-13)

    def test_grad_phi_rank1(self, rng):
        cfg = BasisConfig(3, 4, 1.0, 10)
        x = rng.uniform(0, 1, 3)
        t = grad_phi_rank1(x, 1, cfg)
        rows = [basis_eval(x[0], cfg), basis_grad(x[1], cfg), basis_eval(x[2], cfg)]
        expected = np.einsum("a,b,c->abc", *rows)
        np.testing.assert_allclose(tt_to_dense(t).values, expected, atol=1e-13)
        from ttergodic import num_params

        assert num_params(t) == 3 * 4

    def test_grad_phi_param_count_table(self):
        from ttergodic import num_params

        for d, expected in ((5, 50), (6, 60), (7, 70)):
            cfg = BasisConfig(d, 10, 1.0, 10)
            t = grad_phi_rank1(np.full(d, 0.3), 0, cfg)
            assert num_params(t) == expected

    def test_grad_phi_matches_finite_difference_of_phi(self, rng):
        cfg = BasisConfig(2, 5, 1.0, 10)
        x = rng.uniform(0.1, 0.9, 2)
        h = 1e-6
        for axis in range(2):
            xp, xm = x.copy(), x.copy()
            xp[axis] += h
            xm[axis] -= h
            fd = (tt_to_dense(phi_rank1(xp, cfg)).values
                  - tt_to_dense(phi_rank1(xm, cfg)).values) / (2 * h)
            grad = tt_to_dense(grad_phi_rank1(x, axis, cfg)).values
            np.testing.assert_allclose(grad, fd, atol=1e-5)

    def test_grad_phi_axis_range(self):
        cfg = BasisConfig(2, 3, 1.0, 10)
        with pytest.raises(ValueError):
            grad_phi_rank1(np.array([0.5, 0.5]), 2, cfg)


class TestDiscretization:
    def test_uniform_is_rank1(self):
        cfg = BasisConfig(3, 4, 1.0, 8)
        p = discretize_density(Uniform(3), cfg, eps=1e-12)
        assert p.interior_ranks == (1, 1)
        rule = quadrature_rule(8, 1.0)
        assert grid_mass(p, rule) == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_mass(self):
        cfg = BasisConfig(4, 5, 1.0, 10)
        g = IsotropicGaussian(np.full(4, 0.5), 0.015)
        p = discretize_density(g, cfg, eps=1e-2)
        rule = quadrature_rule(10, 1.0)
        assert abs(grid_mass(p, rule) - 1.0) < 1e-2

    def test_gaussian_moderate_ranks(self):
        cfg = BasisConfig(5, 10, 1.0, 10)
        g = IsotropicGaussian(np.full(5, 0.5), 0.015)
        p = discretize_density(g, cfg, eps=1e-2)
        assert max(p.interior_ranks) <= 5


class TestCoefficients:
    def test_uniform_coefficients_are_delta(self):
        # at adequate quadrature degree only the constant mode survives
        cfg = BasisConfig(2, 5, 1.0, 30)
        p = discretize_density(Uniform(2), cfg, eps=1e-12)
        w = coefficient_tensor(p, quadrature_rule(30, 1.0), cfg)
        dense = tt_to_dense(w).values
        expected = np.zeros((5, 5))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(dense, expected, atol=1e-12)

    def test_rank_inheritance(self, rng):
        cfg = BasisConfig(3, 4, 1.0, 10)
        g = Gmm(
            [0.5, 0.5],
            [[0.3, 0.3, 0.4], [0.7, 0.6, 0.6]],
            np.tile(0.02 * np.eye(3), (2, 1, 1)),
        )
        p = discretize_density(g, cfg, eps=1e-4)
        w = coefficient_tensor(p, quadrature_rule(10, 1.0), cfg)
        assert w.ranks == p.ranks

    def test_matches_oracle_same_degree(self):
        # identical quadrature on both paths: agreement is limited only
        # by the cross approximation error
        for d in (1, 2, 3):
            cfg = BasisConfig(d, 5, 1.0, 10)
            g = IsotropicGaussian(np.full(d, 0.5), 0.015)
            p = discretize_density(g, cfg, eps=1e-6)
            w = coefficient_tensor(p, quadrature_rule(10, 1.0), cfg)
            oracle = coefficient_oracle(g, cfg)
            assert np.max(np.abs(tt_to_dense(w).values - oracle.values)) < 1e-3

    def test_oracle_dimension_guard(self):
        cfg = BasisConfig(4, 3, 1.0, 5)
        with pytest.raises(ValueError):
            coefficient_oracle(Uniform(4), cfg)

    def test_oracle_quadrature_convergence(self):
        # doubling the degree stops changing the answer once resolved
        cfg = BasisConfig(2, 5, 1.0, 10)
        g = IsotropicGaussian(np.array([0.5, 0.5]), 0.015)
        w20 = coefficient_oracle(g, cfg, n_quad=20)
        w40 = coefficient_oracle(g, cfg, n_quad=40)
        assert np.max(np.abs(w20.values - w40.values)) < 1e-6

    def test_shape_mismatch(self):
        cfg = BasisConfig(2, 5, 1.0, 10)
        p = discretize_density(Uniform(2), BasisConfig(2, 5, 1.0, 8), eps=1e-10)
        with pytest.raises(ValueError):
            coefficient_tensor(p, quadrature_rule(10, 1.0), cfg)


class TestCoefficientSet:
    def test_build_and_cache_roundtrip(self, tmp_path):
        cfg = BasisConfig(2, 6, 1.0, 12)
        g = IsotropicGaussian(np.array([0.5, 0.5]), 0.015)
        cs = build_coefficients(g, cfg, seed=3)
        path = tmp_path / "coeffs.bin"
        save_coefficients(cs, path)
        back = load_coefficients(path)
        assert back.config == cfg
        np.testing.assert_array_equal(
            tt_to_dense(back.w_hat).values, tt_to_dense(cs.w_hat).values
        )
        np.testing.assert_array_equal(
            tt_to_dense(back.lam).values, tt_to_dense(cs.lam).values
        )

    def test_config_consistency_check(self):
        cfg = BasisConfig(2, 6, 1.0, 12)
        g = IsotropicGaussian(np.array([0.5, 0.5]), 0.015)
        cs = build_coefficients(g, cfg, seed=3)
        with pytest.raises(ValueError):
            CoefficientSet(cs.w_hat, cs.lam, BasisConfig(2, 7, 1.0, 12))

    def test_uniform_w_param_counts(self):
        from ttergodic import num_params

        for d, expected in ((5, 50), (6, 60), (7, 70)):
            cfg = BasisConfig(d, 10, 1.0, 10)
            cs = build_coefficients(Uniform(d), cfg)
            assert num_params(cs.w_hat) == expected
