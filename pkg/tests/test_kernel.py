"""Kernel module: closed form vs enumeration oracle, binomial identities."""

import math

import numpy as np
import pytest

from photonloop.kernel import (
    KernelCache,
    SystemParams,
    binomial_pmf,
    enumerate_kernel,
    rho,
    transition_kernel,
)

EPS_GRID = [0.0, 0.01, 0.1, 0.5, 1.0]
GAMMA_GRID = [0.5, 0.9, 1.0]
ETA_GRID = [0.9, 0.99, 1.0]
NU_GRID = [0.0, 1e-6, 0.01]


def pascal_binomial(k, n, p):
    """Independent oracle: Pascal-triangle recurrence."""
    if k < 0 or k > n:
        return 0.0
    if n == 0:
        return 1.0
    return p * pascal_binomial(k - 1, n - 1, p) + (1 - p) * pascal_binomial(k, n - 1, p)


class TestBinomialPmf:
    def test_empty_product_convention(self):
        assert binomial_pmf(0, 0, 0.3) == 1.0

    def test_fair_coin(self):
        assert binomial_pmf(1, 2, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_against_pascal_recurrence(self):
        # (2, 4, 0.3) -> 0.2646 and a spread of other cases
        assert pascal_binomial(2, 4, 0.3) == pytest.approx(0.2646, abs=1e-12)
        for n in range(9):
            for k in range(n + 1):
                for p in [0.0, 0.3, 0.5, 0.9, 1.0]:
                    assert binomial_pmf(k, n, p) == pytest.approx(
                        pascal_binomial(k, n, p), abs=1e-12
                    )

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            binomial_pmf(3, 2, 0.5)
        with pytest.raises(ValueError):
            binomial_pmf(1, 2, 1.5)
        with pytest.raises(ValueError):
            binomial_pmf(1, 2, -0.1)

    def test_degenerate_p(self):
        assert binomial_pmf(0, 5, 0.0) == 1.0
        assert binomial_pmf(5, 5, 1.0) == 1.0
        assert binomial_pmf(3, 5, 0.0) == 0.0


class TestBinomialIdentities:
    """The three identities behind the closed-form no-click probability."""

    @pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.75, 1.0])
    @pytest.mark.parametrize("q", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_convolution(self, p, q):
        for n in range(9):
            for m in range(n + 1):
                total = math.fsum(
                    binomial_pmf(k, n, p) * binomial_pmf(m, k, q) for k in range(m, n + 1)
                )
                assert total == pytest.approx(binomial_pmf(m, n, p * q), abs=1e-12)

    @pytest.mark.parametrize("p", [0.1, 0.25, 0.5, 0.75, 0.9])
    @pytest.mark.parametrize("q", [0.1, 0.25, 0.5, 0.75, 0.9])
    def test_tilt(self, p, q):
        for n in range(9):
            for m in range(n + 1):
                lhs = q**m * binomial_pmf(m, n, p)
                rhs = ((1 - p) / (1 - p * q)) ** (n - m) * binomial_pmf(m, n, p * q)
                assert lhs == pytest.approx(rhs, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_reflection(self, p):
        for n in range(9):
            for m in range(n + 1):
                assert binomial_pmf(m, n, p) == pytest.approx(
                    binomial_pmf(n - m, n, 1 - p), abs=1e-12
                )


class TestRho:
    def test_empty_loop(self):
        params = SystemParams(eta=0.95, gamma=0.8, nu=0.01, n_max=5)
        for eps in EPS_GRID:
            assert rho(0, 0, params, eps) == pytest.approx(1 - 0.01, abs=1e-15)

    def test_no_outcoupling_collapses_to_survival_binomial(self):
        params = SystemParams(eta=0.9, gamma=0.7, nu=0.02, n_max=6)
        for n in range(7):
            for n_k in range(n + 1):
                expected = (1 - 0.02) * binomial_pmf(n_k, n, 0.9)
                assert rho(n_k, n, params, 0.0) == pytest.approx(expected, abs=1e-14)

    def test_two_photon_case_against_per_photon_fates(self):
        # Per photon: stays eta(1-eps)=0.891, detected eta*eps*gamma=0.0891,
        # lost otherwise (0.0199).  One stays, one lost: 2 * 0.891 * 0.0199.
        params = SystemParams(eta=0.99, gamma=0.9, nu=0.0, n_max=6)
        expected = 2 * 0.891 * 0.0199
        assert rho(1, 2, params, 0.1) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.0354618, abs=1e-7)

    def test_rejects_increasing_photon_number(self):
        params = SystemParams(eta=0.9, gamma=0.9, nu=0.0, n_max=5)
        with pytest.raises(ValueError):
            rho(3, 2, params, 0.1)


class TestTransitionKernel:
    def test_no_outcoupling_no_dark_counts_never_clicks(self):
        params = SystemParams(eta=0.95, gamma=0.9, nu=0.0, n_max=8)
        kernel = transition_kernel(params, 0.0)
        assert np.all(kernel.r1 == 0.0)

    def test_empty_column_is_dark_count_only(self):
        params = SystemParams(eta=0.9, gamma=0.8, nu=0.003, n_max=6)
        kernel = transition_kernel(params, 0.2)
        assert kernel.r1[0, 0] == pytest.approx(0.003, abs=1e-15)
        assert kernel.r0[0, 0] == pytest.approx(0.997, abs=1e-15)

    def test_matches_enumeration_on_reference_config(self):
        params = SystemParams(eta=0.99, gamma=0.9, nu=1e-6, n_max=6)
        kernel = transition_kernel(params, 0.1)
        oracle = enumerate_kernel(params, 0.1, 6)
        np.testing.assert_allclose(kernel.r0, oracle.r0, atol=1e-12, rtol=0)
        np.testing.assert_allclose(kernel.r1, oracle.r1, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("eta", ETA_GRID)
    @pytest.mark.parametrize("gamma", GAMMA_GRID)
    @pytest.mark.parametrize("nu", NU_GRID)
    def test_matches_enumeration_across_grid(self, eta, gamma, nu):
        params = SystemParams(eta=eta, gamma=gamma, nu=nu, n_max=6)
        for eps in EPS_GRID:
            kernel = transition_kernel(params, eps)
            oracle = enumerate_kernel(params, eps, 6)
            np.testing.assert_allclose(kernel.r0, oracle.r0, atol=1e-12, rtol=0)
            np.testing.assert_allclose(kernel.r1, oracle.r1, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("eta", ETA_GRID)
    @pytest.mark.parametrize("gamma", GAMMA_GRID)
    def test_columns_normalized_nonnegative_triangular(self, eta, gamma):
        params = SystemParams(eta=eta, gamma=gamma, nu=0.01, n_max=12)
        for eps in EPS_GRID:
            kernel = transition_kernel(params, eps)
            col_sums = (kernel.r0 + kernel.r1).sum(axis=0)
            np.testing.assert_allclose(col_sums, 1.0, atol=1e-12, rtol=0)
            assert kernel.r0.min() >= 0.0 and kernel.r1.min() >= 0.0
            m, n = np.tril_indices(13, k=-1)
            # strictly-below-diagonal entries in (m, n) index order m > n
            assert np.all(kernel.r0[m, n] == 0.0)
            assert np.all(kernel.r1[m, n] == 0.0)

    def test_singular_point_full_outcoupling(self):
        # eta = eps = gamma = 1: every photon outcoupled and detected.
        params = SystemParams(eta=1.0, gamma=1.0, nu=0.0, n_max=6)
        kernel = transition_kernel(params, 1.0)
        oracle = enumerate_kernel(params, 1.0, 6)
        np.testing.assert_allclose(kernel.r0, oracle.r0, atol=1e-12, rtol=0)
        np.testing.assert_allclose(kernel.r1, oracle.r1, atol=1e-12, rtol=0)
        assert oracle.r1[0, 3] == pytest.approx(1.0, abs=1e-15)
        col3 = np.concatenate([oracle.r0[:, 3], np.delete(oracle.r1[:, 3], 0)])
        assert np.all(np.abs(col3) < 1e-15)


class TestEnumerateKernel:
    def test_rejects_large_caps(self):
        params = SystemParams(eta=0.9, gamma=0.9, nu=0.0, n_max=20)
        with pytest.raises(ValueError):
            enumerate_kernel(params, 0.1, 20)

    def test_column_sums(self):
        params = SystemParams(eta=0.97, gamma=0.85, nu=0.005, n_max=8)
        kernel = enumerate_kernel(params, 0.3, 8)
        np.testing.assert_allclose(
            (kernel.r0 + kernel.r1).sum(axis=0), 1.0, atol=1e-12, rtol=0
        )


class TestKernelCache:
    def test_reuses_quantized_epsilon(self):
        params = SystemParams(eta=0.99, gamma=0.9, nu=1e-6, n_max=5)
        cache = KernelCache(params)
        k1 = cache.get(0.1)
        k2 = cache.get(0.1 + 1e-15)
        assert k1 is k2
        assert len(cache) == 1

    def test_distinct_epsilons(self):
        params = SystemParams(eta=0.99, gamma=0.9, nu=1e-6, n_max=5)
        cache = KernelCache(params)
        cache.get(0.1)
        cache.get(0.2)
        assert len(cache) == 2


class TestSystemParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"eta": -0.1, "gamma": 0.9, "nu": 0.0, "n_max": 5},
            {"eta": 0.9, "gamma": 1.1, "nu": 0.0, "n_max": 5},
            {"eta": 0.9, "gamma": 0.9, "nu": 1.0, "n_max": 5},
            {"eta": 0.9, "gamma": 0.9, "nu": 0.0, "n_max": 0},
        ],
    )
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(ValueError):
            SystemParams(**kwargs)
