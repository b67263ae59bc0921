import cmath
import math

import numpy as np
import pytest

from mathieu_hill import asymptotics, floquet
from mathieu_hill.model import TWO_PI, PotentialCoeffs, SolverConfig

CFG = SolverConfig(truncation_half_width=16)


def ladder_norm(n):
    return (TWO_PI ** (2 * n - 1) * math.factorial(2 * n - 1)) ** 2


class TestGapPredictors:
    def test_unit_product_values(self):
        gp = asymptotics.gap_predictors(1, PotentialCoeffs(1, 1))
        assert gp.gap_periodic == pytest.approx(2 / TWO_PI ** 2, rel=1e-12)
        assert gp.gap_periodic == pytest.approx(5.06606e-2, rel=1e-5)
        gp2 = asymptotics.gap_predictors(2, PotentialCoeffs(1, 1))
        assert gp2.gap_periodic == pytest.approx(2 / (TWO_PI ** 3 * 6) ** 2, rel=1e-12)
        assert gp2.gap_periodic == pytest.approx(9.03e-7, rel=1e-3)

    def test_antiperiodic_value(self):
        gp = asymptotics.gap_predictors(1, PotentialCoeffs(1, 1))
        assert gp.gap_antiperiodic == pytest.approx(2 / (TWO_PI ** 2 * 2) ** 2, rel=1e-12)
        assert gp.gap_antiperiodic == pytest.approx(3.21e-4, rel=1e-2)

    def test_zero_coefficient_markers(self):
        gp = asymptotics.gap_predictors(3, PotentialCoeffs(0, 2))
        assert gp.log_coupling_a is None
        assert gp.coupling_a == 0
        assert gp.gap_periodic == 0.0
        assert gp.gap_antiperiodic == 0.0

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_coupling_closed_form(self, n):
        b = 1.3 - 0.4j
        gp = asymptotics.gap_predictors(n, PotentialCoeffs(0.7j, b))
        direct = b ** (2 * n) / ladder_norm(n)
        assert cmath.exp(gp.log_coupling_b) == pytest.approx(direct, rel=1e-12)

    def test_log_gap_identity(self):
        n = 3
        pot = PotentialCoeffs(1.5, 2j)
        gp = asymptotics.gap_predictors(n, pot)
        expected = (math.log(2) + n * math.log(abs(pot.product_ab()))
                    - 2 * ((2 * n - 1) * math.log(TWO_PI)
                           + math.log(math.factorial(2 * n - 1))))
        assert gp.log_gap_periodic == pytest.approx(expected, rel=1e-14)

    def test_rejects_bad_index(self):
        with pytest.raises(ValueError):
            asymptotics.gap_predictors(0, PotentialCoeffs(1, 1))


class TestPredictGaps:
    def test_values(self):
        gap0, gap_pi = asymptotics.predict_gaps(1, PotentialCoeffs(2, 2))
        assert gap0 == pytest.approx(2 * 4 / TWO_PI ** 2, rel=1e-12)
        assert gap0 == pytest.approx(0.2026, rel=1e-3)
        assert gap_pi == pytest.approx(2 * 4 ** 1.5 / (TWO_PI ** 2 * 2) ** 2, rel=1e-12)

    def test_zero_product(self):
        assert asymptotics.predict_gaps(2, PotentialCoeffs(1, 0)) == (0.0, 0.0)

    @pytest.mark.parametrize("c", [3.0, 1j, 0.25 - 1j])
    def test_gauge_invariance(self, c):
        base = asymptotics.predict_gaps(2, PotentialCoeffs(1, 4))
        gauged = asymptotics.predict_gaps(2, PotentialCoeffs(c, 4 / c))
        assert gauged[0] == pytest.approx(base[0], rel=1e-12)
        assert gauged[1] == pytest.approx(base[1], rel=1e-12)


class TestLeadingCouplings:
    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_center_equals_closed_form(self, n):
        # two independent code paths: resolvent ladder product at the band
        # center vs the factorial closed form
        pot = PotentialCoeffs(1.1, 0.8 - 0.3j)
        gp = asymptotics.gap_predictors(n, pot)
        cb, ca = asymptotics.leading_coupling_terms(n, pot, (TWO_PI * n) ** 2, 0.0)
        assert cb == pytest.approx(cmath.exp(gp.log_coupling_b), rel=1e-10)
        assert ca == pytest.approx(cmath.exp(gp.log_coupling_a), rel=1e-10)

    def test_swap_symmetry(self):
        n, lam, t = 3, (TWO_PI * 3) ** 2 + 0.01, 1e-4
        cb, ca = asymptotics.leading_coupling_terms(n, PotentialCoeffs(1, 2j), lam, t)
        cb2, ca2 = asymptotics.leading_coupling_terms(n, PotentialCoeffs(2j, 1), lam, t)
        # swapping a and b swaps the two ladder terms up to the t-reflection
        # of the resolvent product; at t=0 they swap exactly
        cb0, ca0 = asymptotics.leading_coupling_terms(n, PotentialCoeffs(1, 2j),
                                                      (TWO_PI * n) ** 2 + 0.01, 0.0)
        cb0s, ca0s = asymptotics.leading_coupling_terms(n, PotentialCoeffs(2j, 1),
                                                        (TWO_PI * n) ** 2 + 0.01, 0.0)
        assert cb0s == pytest.approx(ca0, rel=1e-12)
        assert ca0s == pytest.approx(cb0, rel=1e-12)
        assert cb2 * ca2 == pytest.approx(cb * ca, rel=1e-10)

    def test_direct_product_oracle(self):
        n, t = 2, 1e-5
        lam = (2 * TWO_PI) ** 2 + 0.001
        pot = PotentialCoeffs(1.2, 0.9j)
        cb, ca = asymptotics.leading_coupling_terms(n, pot, lam, t)
        prod_b = pot.b ** (2 * n)
        prod_a = pot.a ** (2 * n)
        for s in range(1, 2 * n):
            prod_b /= lam - (TWO_PI * (n - s) + t) ** 2
            prod_a /= lam - (TWO_PI * (n - s) - t) ** 2
        assert cb == pytest.approx(prod_b, rel=1e-10)
        assert ca == pytest.approx(prod_a, rel=1e-10)

    def test_pole_proximity_error(self):
        n = 2
        pole = (TWO_PI * 1) ** 2  # s=1 resolvent pole at t=0
        with pytest.raises(asymptotics.PoleProximityError):
            asymptotics.leading_coupling_terms(n, PotentialCoeffs(1, 1),
                                               pole + 1e-12, 0.0)


class TestDiagonalCorrections:
    def test_first_order_hand_formula(self):
        n, t = 3, 0.01
        lam = (TWO_PI * n) ** 2 + 0.2
        pot = PotentialCoeffs(1.5, 0.7j)
        ab = pot.product_ab()
        sp, sm, half = asymptotics.diagonal_corrections(n, pot, lam, t, n_terms=1)
        expected_plus = (ab / (lam - (TWO_PI * (n - 1) + t) ** 2)
                         + ab / (lam - (TWO_PI * (n + 1) + t) ** 2))
        expected_minus = (ab / (lam - (TWO_PI * (n + 1) - t) ** 2)
                          + ab / (lam - (TWO_PI * (n - 1) - t) ** 2))
        assert sp == pytest.approx(expected_plus, rel=1e-12)
        assert sm == pytest.approx(expected_minus, rel=1e-12)
        assert half == pytest.approx((sp - sm) / 2, rel=1e-12)

    def test_first_order_magnitude(self):
        # at the band center the first-order shift is O(n^-2)
        for n in (4, 8):
            sp, _, _ = asymptotics.diagonal_corrections(
                n, PotentialCoeffs(1, 1), (TWO_PI * n) ** 2, 1e-3 / n ** 2, n_terms=1)
            assert abs(sp) < 4.0 / n ** 2
            assert abs(sp) > 0.01 / n ** 2

    def test_zero_product_vanishes(self):
        sp, sm, half = asymptotics.diagonal_corrections(
            2, PotentialCoeffs(0, 5), (2 * TWO_PI) ** 2 + 0.1, 0.0)
        assert sp == 0 and sm == 0 and half == 0

    def test_truncation_tail_small(self):
        n, t = 3, 1e-4
        lam = (TWO_PI * n) ** 2 + 0.1
        pot = PotentialCoeffs(1, 1)
        a3 = asymptotics.diagonal_corrections(n, pot, lam, t, n_terms=3)[0]
        a4 = asymptotics.diagonal_corrections(n, pot, lam, t, n_terms=4)[0]
        # the order-7 walk term is several orders below the leading shift
        assert abs(a4 - a3) < 1e-6 * abs(a3)

    def test_symmetric_at_t0(self):
        # walk reversal makes the two shifts equal at t=0
        sp, sm, half = asymptotics.diagonal_corrections(
            4, PotentialCoeffs(1.3, 2j), (4 * TWO_PI) ** 2 + 0.05, 0.0, n_terms=3)
        assert sp == pytest.approx(sm, rel=1e-12)
        assert half == pytest.approx(0, abs=1e-18 * abs(sp))


class TestSplittingDiscriminant:
    def test_zero_potential(self):
        n, t = 3, 0.002
        d = asymptotics.splitting_discriminant(n, PotentialCoeffs(0, 0),
                                               (TWO_PI * n + t) ** 2, t)
        assert d == pytest.approx((2 * TWO_PI * n * t) ** 2, rel=1e-12)

    def test_center_value_is_coupling_product(self):
        n = 3
        pot = PotentialCoeffs(1, 1)
        ps = asymptotics.series_terms(n, pot, (TWO_PI * n) ** 2, 0.0)
        assert ps.half_difference == pytest.approx(0, abs=1e-20)
        expected = ps.coupling_b * ps.coupling_a
        assert ps.discriminant == pytest.approx(expected, rel=1e-10)
        gp = asymptotics.gap_predictors(n, pot)
        assert abs(ps.discriminant) == pytest.approx(
            abs(cmath.exp(gp.log_coupling_a + gp.log_coupling_b)), rel=0.05)

    def test_collision_quasimomentum(self):
        # a=1, b=i: the pair discriminant of band 1 vanishes at real t where
        # the detuning squared balances the (negative real) coupling product
        tstar = asymptotics.collision_quasimomentum(1, PotentialCoeffs(1, 1j))
        assert tstar == pytest.approx(1.0 / (16 * math.pi ** 3), rel=1e-9)
        assert tstar == pytest.approx(2.0e-3, rel=0.02)
        d = asymptotics.splitting_discriminant(
            1, PotentialCoeffs(1, 1j), (TWO_PI + tstar) ** 2, tstar)
        # at the predicted collision the discriminant loses its leading terms
        assert abs(d) < 0.05 * (2 * TWO_PI * tstar) ** 2

    def test_zero_product_collision_is_none(self):
        assert asymptotics.collision_quasimomentum(2, PotentialCoeffs(0, 1)) is None


class TestPredictPair:
    def test_free_exact(self):
        cfg = CFG
        for t in (0.004, 0.01):
            pp = asymptotics.predict_pair(3, PotentialCoeffs(0, 0), t, cfg)
            assert pp.first == pytest.approx((TWO_PI * 3 - t) ** 2, rel=1e-14)
            assert pp.second == pytest.approx((TWO_PI * 3 + t) ** 2, rel=1e-14)
            assert pp.labels == (-3, 3)

    def test_free_exact_antiperiodic(self):
        t = math.pi - 0.004
        pp = asymptotics.predict_pair(3, PotentialCoeffs(0, 0), t, CFG)
        assert pp.regime == "antiperiodic"
        assert pp.first == pytest.approx((TWO_PI * 3 + t) ** 2, rel=1e-13)
        assert pp.second == pytest.approx((TWO_PI * 4 - t) ** 2, rel=1e-13)
        assert pp.labels == (3, -4)

    def test_splitting_matches_closed_form(self):
        pot = PotentialCoeffs(1, 1)
        pp = asymptotics.predict_pair(2, pot, 0.0, CFG)
        gp = asymptotics.gap_predictors(2, pot)
        split = abs(pp.second - pp.first)
        assert split == pytest.approx(gp.gap_periodic, rel=0.10)

    def test_matches_floquet_near_zero(self):
        pot = PotentialCoeffs(1, 1)
        pp = asymptotics.predict_pair(3, pot, 1e-4, CFG)
        pairs = floquet.labeled_eigenpairs(pot, 1e-4, CFG)
        ref = sorted([pairs[-3].lam, pairs[3].lam], key=lambda z: z.real)
        got = sorted([pp.first, pp.second], key=lambda z: z.real)
        for g, r in zip(got, ref):
            assert abs(g - r) < 1e-6 * (1 + abs(r))

    def test_matches_floquet_near_pi(self):
        pot = PotentialCoeffs(1, 1)
        t = math.pi - 1e-4
        pp = asymptotics.predict_pair(3, pot, t, CFG)
        pairs = floquet.labeled_eigenpairs(pot, t, CFG)
        ref = sorted([pairs[3].lam, pairs[-4].lam], key=lambda z: z.real)
        got = sorted([pp.first, pp.second], key=lambda z: z.real)
        for g, r in zip(got, ref):
            assert abs(g - r) < 1e-6 * (1 + abs(r))

    def test_mid_regime_leading_terms(self):
        pp = asymptotics.predict_pair(5, PotentialCoeffs(1, 2), 1.0, CFG)
        assert pp.regime == "mid"
        assert pp.first == pytest.approx((TWO_PI * 5 - 1.0) ** 2)
        assert pp.second == pytest.approx((TWO_PI * 5 + 1.0) ** 2)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            asymptotics.predict_pair(3, PotentialCoeffs(1, 1), -0.5, CFG)
        with pytest.raises(ValueError):
            asymptotics.predict_pair(0, PotentialCoeffs(1, 1), 0.1, CFG)
