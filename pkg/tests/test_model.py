import math

import pytest
from hypothesis import given, strategies as st

from mathieu_hill.model import (
    BandIndex,
    PotentialCoeffs,
    QuasiMomentum,
    SolverConfig,
    fourier_coefficients,
    normalize_quasimomentum,
)


class TestPotentialCoeffs:
    def test_finite_validation(self):
        with pytest.raises(ValueError):
            PotentialCoeffs(float("nan"), 1.0)
        with pytest.raises(ValueError):
            PotentialCoeffs(1.0, complex(0, float("inf")))

    def test_product(self):
        pot = PotentialCoeffs(1 + 2j, 3)
        assert pot.product_ab() == (1 + 2j) * 3
        assert pot.product_ab() == pot.product_ab()

    def test_self_adjoint_flag(self):
        assert PotentialCoeffs(1 + 1j, 1 - 1j).is_self_adjoint
        assert not PotentialCoeffs(1, 2).is_self_adjoint

    def test_potential_evaluation(self):
        pot = PotentialCoeffs(2, 3)
        # at x=0 the exponentials are 1
        assert pot.q(0.0) == pytest.approx(5.0)


class TestFourierCoefficients:
    def test_zero_potential_empty(self):
        assert fourier_coefficients(PotentialCoeffs(0, 0)) == {}

    def test_two_mode_support(self):
        m = fourier_coefficients(PotentialCoeffs(1 + 2j, 3))
        assert m == {-1: 1 + 2j, 1: 3}

    def test_symmetric(self):
        assert fourier_coefficients(PotentialCoeffs(5, 5)) == {-1: 5, 1: 5}

    @given(st.complex_numbers(max_magnitude=1e6, allow_nan=False,
                              allow_infinity=False).filter(lambda z: z != 0),
           st.complex_numbers(max_magnitude=1e6, allow_nan=False,
                              allow_infinity=False).filter(lambda z: z != 0))
    def test_support_exactly_pm1(self, a, b):
        m = fourier_coefficients(PotentialCoeffs(a, b))
        assert set(m) == {-1, 1}


class TestQuasiMomentum:
    def test_examples(self):
        assert normalize_quasimomentum(0.0).t == 0.0
        assert normalize_quasimomentum(3 * math.pi).t == pytest.approx(math.pi)
        assert normalize_quasimomentum(-math.pi).t == pytest.approx(math.pi)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            normalize_quasimomentum(float("nan"))
        with pytest.raises(ValueError):
            normalize_quasimomentum(float("inf"))

    @given(st.floats(min_value=-1e6, max_value=1e6))
    def test_idempotent_and_in_range(self, t):
        q = normalize_quasimomentum(t)
        assert -math.pi < q.t <= math.pi
        assert normalize_quasimomentum(q.t).t == pytest.approx(q.t, abs=1e-12)

    @given(st.floats(min_value=-50, max_value=50))
    def test_congruent_mod_2pi(self, t):
        q = normalize_quasimomentum(t)
        k = (t - q.t) / (2 * math.pi)
        assert abs(k - round(k)) < 1e-9


class TestBandIndex:
    def test_subband_mapping(self):
        assert BandIndex(-4).j == 1
        assert BandIndex(4).j == 2
        assert BandIndex.from_subband(4, 1) == BandIndex(-4)
        assert BandIndex.from_subband(4, 2) == BandIndex(4)

    def test_roundtrip(self):
        for n in (-7, -1, 1, 7):
            bi = BandIndex(n)
            assert BandIndex.from_subband(bi.magnitude, bi.j) == bi

    def test_invalid_subband(self):
        with pytest.raises(ValueError):
            BandIndex.from_subband(3, 0)


class TestSolverConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(truncation_half_width=0)
        with pytest.raises(ValueError):
            SolverConfig(ode_tolerance=0.0)
        with pytest.raises(ValueError):
            SolverConfig(max_newton_iters=0)

    def test_band_margin(self):
        cfg = SolverConfig(truncation_half_width=20)
        assert cfg.reliable_band_limit() == 12
        widened = cfg.for_band(15)
        assert widened.truncation_half_width == 23
        assert cfg.for_band(3) is cfg
