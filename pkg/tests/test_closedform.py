"""Analytic divergences, power means, and the Gaussian-pair form."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pdgloss.closedform import (
    GaussianSpec,
    alpha_to_confidences,
    complete_square,
    confidences_to_alpha,
    gaussian_pair_inconsistency,
    geometric_mean_distribution,
    pdg_divergence,
    power_mean,
    renyi_divergence,
    two_gaussian_inconsistency,
)
from pdgloss.losses import MSE_COEFF_AUTHORITATIVE, MSE_COEFF_REJECTED

P = np.array([0.5, 0.5])
Q = np.array([0.25, 0.75])

# frozen oracle values (direct evaluation / dense scans; see oracles.py)
TWO_BELIEF_UNIT = 0.06933646419507408     # -2 ln(sqrt(.125)+sqrt(.375))
KL_P_Q = 0.14384103622589042              # .5 ln 2 + .5 ln(2/3)
KL_Q_P = 0.13081202550534072              # .25 ln .5 + .75 ln 1.5
RENYI_2 = 0.28768207245178085             # ln(4/3)


class TestPdgDivergence:
    def test_identical_beliefs(self, rng):
        for n in (2, 3, 5):
            p = rng.dirichlet(np.ones(n))
            assert pdg_divergence(p, p, 1.3, 0.4) == pytest.approx(
                0.0, abs=1e-12)

    def test_unit_confidences(self):
        assert pdg_divergence(P, Q, 1, 1) == pytest.approx(
            TWO_BELIEF_UNIT, abs=1e-14)

    def test_kl_endpoints_via_extreme_confidence(self):
        # overwhelming confidence in p pins the optimum at p
        assert pdg_divergence(P, Q, 1e6, 1) == pytest.approx(
            KL_P_Q, abs=1e-4)
        assert pdg_divergence(P, Q, 1, 1e6) == pytest.approx(
            KL_Q_P, abs=1e-4)

    def test_disjoint_supports(self):
        assert pdg_divergence([1, 0], [0, 1], 1, 1) == math.inf

    def test_zero_confidence_side_ignored(self):
        assert pdg_divergence([1, 0], [0, 1], 0, 2) == pytest.approx(
            0.0, abs=1e-12)

    def test_vanishing_confidence_limit_is_support_surprisal(self):
        # as the confidence in p vanishes (but stays positive), the
        # divergence tends to -log q(support of p), discontinuously
        # from the exact-zero case above
        p = np.array([0.7, 0.3, 0.0])
        q = np.array([0.2, 0.3, 0.5])
        assert pdg_divergence(p, q, 1e-9, 1) == pytest.approx(
            -math.log(0.5), abs=1e-6)

    def test_minimizer_is_weighted_geometric_mean(self):
        gm = geometric_mean_distribution(P, Q, 1, 1)
        expected = np.sqrt(P * Q)
        np.testing.assert_allclose(gm, expected / expected.sum(),
                                   atol=1e-14)


class TestRenyi:
    def test_order_half(self):
        assert renyi_divergence(P, Q, 0.5) == pytest.approx(
            TWO_BELIEF_UNIT, abs=1e-14)

    def test_identical(self):
        assert renyi_divergence(Q, Q, 0.7) == pytest.approx(0.0,
                                                            abs=1e-12)

    def test_order_two_against_float32_recomputation(self):
        val = renyi_divergence(P, Q, 2.0)
        assert val == pytest.approx(RENYI_2, abs=1e-14)
        p32 = P.astype(np.float32)
        q32 = Q.astype(np.float32)
        val32 = float(np.log((p32**2 / q32).sum(dtype=np.float32)))
        assert val == pytest.approx(val32, abs=1e-6)

    def test_order_one_dispatches_to_kl(self):
        assert renyi_divergence(P, Q, 1.0) == pytest.approx(KL_P_Q,
                                                            abs=1e-14)

    def test_absolute_continuity_failure_above_one(self):
        assert renyi_divergence([0.5, 0.5], [1.0, 0.0], 2.0) == math.inf

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_monotone_in_order(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        orders = np.sort(rng.uniform(0.05, 4.0, size=4))
        orders = orders[np.abs(orders - 1.0) > 1e-3]
        vals = [renyi_divergence(p, q, a) for a in orders]
        for lo, hi in zip(vals, vals[1:]):
            assert lo <= hi + 1e-10


class TestConfidenceOrderMap:
    def test_unit_pair(self):
        assert confidences_to_alpha(1, 1) == (0.5, 1)

    def test_two_one(self):
        alpha, scale = confidences_to_alpha(2, 1)
        assert alpha == pytest.approx(2 / 3)
        assert scale == 1

    def test_inverse(self):
        assert alpha_to_confidences(0.5) == (1.0, 1.0)

    def test_alpha_one_has_no_preimage(self):
        with pytest.raises(ValueError):
            alpha_to_confidences(1.0)

    def test_orders_above_one_rejected(self):
        # they would need a negative confidence
        with pytest.raises(ValueError):
            alpha_to_confidences(2.0)

    @settings(max_examples=120, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_corollary_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        r, s = rng.uniform(1e-3, 4.0, size=2)
        alpha, scale = confidences_to_alpha(r, s)
        lhs = pdg_divergence(p, q, r, s)
        rhs = scale * renyi_divergence(p, q, alpha)
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestPowerMean:
    def test_constant_input(self):
        assert power_mean([2, 2], [0.3, 0.7], 5) == pytest.approx(2.0)
        assert power_mean([2, 2], [0.3, 0.7], 0) == pytest.approx(2.0)

    def test_quadratic(self):
        assert power_mean([1, 3], [0.5, 0.5], 2) == pytest.approx(
            math.sqrt(5), abs=1e-12)

    def test_geometric(self):
        assert power_mean([1, 3], [0.5, 0.5], 0) == pytest.approx(
            math.sqrt(3), abs=1e-12)

    def test_qm_dominates_gm(self, rng):
        for _ in range(30):
            v = rng.uniform(0.2, 3.0, size=2)
            w = rng.dirichlet(np.ones(2))
            assert power_mean(v, w, 2) >= power_mean(v, w, 0) - 1e-12

    def test_monotone_in_p(self, rng):
        v = [1.0, 3.0]
        w = [0.5, 0.5]
        ps = [-1, 0, 1, 2]
        vals = [power_mean(v, w, p) for p in ps]
        assert vals == sorted(vals)

    def test_rejects_nonconvex_weights(self):
        with pytest.raises(ValueError):
            power_mean([1, 2], [0.5, 0.6], 2)


class TestGaussianPair:
    def test_identical_branches(self):
        g = GaussianSpec(1.0, 2.0, 1.5)
        assert gaussian_pair_inconsistency(g, g) == pytest.approx(
            0.0, abs=1e-12)

    def test_unit_gap_two(self):
        val = two_gaussian_inconsistency(
            [GaussianSpec(0, 1, 1)], [GaussianSpec(2, 1, 1)], [1.0])
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_pure_sigma_spread(self):
        val = two_gaussian_inconsistency(
            [GaussianSpec(0, 1, 1)], [GaussianSpec(0, 2, 1)], [1.0])
        assert val == pytest.approx(math.log(1.25), abs=1e-12)

    def test_matches_discretized_minimization(self, rng):
        for _ in range(4):
            m1, m2 = rng.normal(0, 1.5, size=2)
            s1, s2 = rng.uniform(0.6, 1.8, size=2)
            b1, b2 = rng.uniform(0.5, 2.5, size=2)
            closed = two_gaussian_inconsistency(
                [GaussianSpec(m1, s1, b1)], [GaussianSpec(m2, s2, b2)],
                [1.0])
            grid = oracles.discretized_gaussian_pair_min(
                m1, s1, b1, m2, s2, b2, step=0.002)
            assert closed == pytest.approx(grid, abs=1e-3)

    def test_averages_over_inputs(self):
        specs1 = [GaussianSpec(0, 1, 1), GaussianSpec(0, 1, 1)]
        specs2 = [GaussianSpec(1, 1, 1), GaussianSpec(3, 1, 1)]
        val = two_gaussian_inconsistency(specs1, specs2, [0.5, 0.5])
        assert val == pytest.approx(0.5 * 0.25 * 1 + 0.5 * 0.25 * 9,
                                    abs=1e-12)


class TestSquaredErrorConstant:
    """The 1/4-vs-1/2 question, settled by the discretized oracle."""

    def test_oracle_confirms_quarter(self):
        # unit parameters, means 0 and 2: E|f-h|^2 = 4
        grid = oracles.discretized_gaussian_pair_min(0, 1, 1, 2, 1, 1)
        assert grid == pytest.approx(MSE_COEFF_AUTHORITATIVE * 4.0,
                                     abs=1e-3)

    def test_oracle_rejects_half(self):
        grid = oracles.discretized_gaussian_pair_min(0, 1, 1, 2, 1, 1)
        assert abs(grid - MSE_COEFF_REJECTED * 4.0) > 0.9


class TestCompleteSquare:
    def test_equal_centers(self):
        g, sig, res = complete_square(1.0, 1.0, 2.5, 1.0, 1.0, 2.5)
        assert g == pytest.approx(2.5)
        assert res * (2.5 - 2.5) ** 2 == 0.0

    def test_symmetric_example(self):
        g, sig, res = complete_square(1, 1, 0.0, 1, 1, 2.0)
        assert g == pytest.approx(1.0)
        assert sig == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert res == pytest.approx(0.5)
        for y in (-1.0, 0.0, 1.0, 3.0):
            lhs = (y - 0.0) ** 2 + (y - 2.0) ** 2
            rhs = ((y - g) / sig) ** 2 + res * 4.0
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_asymmetric_example(self):
        g, sig, res = complete_square(2, 1, 0.0, 1, 1, 3.0)
        assert g == pytest.approx(1.0)
        assert res == pytest.approx(2 / 3)
        for y in (-1.0, 0.5, 2.0):
            lhs = 2 * (y - 0.0) ** 2 + (y - 3.0) ** 2
            rhs = ((y - g) / sig) ** 2 + res * 9.0
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_identity_on_grid(self, rng):
        for _ in range(20):
            b1, b2 = rng.uniform(0.3, 3.0, size=2)
            s1, s2 = rng.uniform(0.4, 2.5, size=2)
            f, h = rng.normal(0, 2, size=2)
            g, sig, res = complete_square(b1, s1, f, b2, s2, h)
            ys = np.linspace(-6, 6, 41)
            lhs = b1 / s1**2 * (ys - f) ** 2 + b2 / s2**2 * (ys - h) ** 2
            rhs = ((ys - g) / sig) ** 2 + res * (f - h) ** 2
            np.testing.assert_allclose(lhs, rhs, atol=1e-9)
