import math

import numpy as np
import pytest

from mathieu_hill import asymptotics, floquet, spectrum
from mathieu_hill.model import TWO_PI, PotentialCoeffs, SolverConfig

CFG = SolverConfig(truncation_half_width=12)
GRID33 = np.linspace(0.0, math.pi, 33)


class TestTraceArc:
    def test_free_dispersion(self):
        arc = spectrum.trace_arc(2, PotentialCoeffs(0, 0), GRID33, CFG)
        expected = (TWO_PI * 2 + arc.ts) ** 2
        assert np.all(np.abs(arc.lams - expected) < 1e-10 * (1 + expected))

    def test_residual_invariant(self):
        arc = spectrum.trace_arc(3, PotentialCoeffs(1, 2j), GRID33, CFG)
        assert arc.max_char_residual < 1e-9
        assert np.all(np.diff(arc.ts) > 0)

    def test_real_endpoints_symmetric_potential(self):
        pot = PotentialCoeffs(1, 1)
        a1 = spectrum.trace_arc(1, pot, GRID33, CFG)
        am1 = spectrum.trace_arc(-1, pot, GRID33, CFG)
        assert abs(a1.endpoint_0.imag) < 1e-9
        assert abs(am1.endpoint_0.imag) < 1e-9
        measured = spectrum.measure_endpoint_gap(pot, 1, at_pi=False, cfg=CFG)
        predicted = asymptotics.predict_gaps(1, pot)[0]
        assert measured / predicted == pytest.approx(1.0, abs=0.1)

    def test_endpoints_match_floquet(self):
        pot = PotentialCoeffs(1, 2j)
        arc = spectrum.trace_arc(2, pot, GRID33, CFG)
        pairs0 = floquet.labeled_eigenpairs(pot, 0.0, CFG)
        candidates = [pairs0[2].lam, pairs0[-2].lam]
        assert min(abs(arc.endpoint_0 - c) for c in candidates) < 1e-8 * (
            1 + abs(arc.endpoint_0))
        pairs_pi = floquet.labeled_eigenpairs(pot, math.pi, CFG)
        candidates = [pairs_pi[2].lam, pairs_pi[-3].lam]
        assert min(abs(arc.endpoint_pi - c) for c in candidates) < 1e-8 * (
            1 + abs(arc.endpoint_pi))

    def test_grid_refinement_shrinks_steps(self):
        pot = PotentialCoeffs(1, 2)
        coarse = spectrum.trace_arc(2, pot, np.linspace(0, math.pi, 17), CFG)
        fine = spectrum.trace_arc(2, pot, np.linspace(0, math.pi, 33), CFG)
        assert fine.max_step < coarse.max_step
        assert fine.max_step < 4 * coarse.max_step / 2

    def test_restricted_span(self):
        arc = spectrum.trace_arc(1, PotentialCoeffs(1, 1j),
                                 np.linspace(0.0, 0.01, 21), CFG)
        assert arc.t_span == (0.0, 0.01)
        sub = arc.restrict(0.0, 0.005)
        assert sub.ts[-1] <= 0.005

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            spectrum.trace_arc(1, PotentialCoeffs(1, 1), [0.3, 0.2, 0.4], CFG)
        with pytest.raises(ValueError):
            spectrum.trace_arc(1, PotentialCoeffs(1, 1), [0.0, 4.0], CFG)


class TestAssembleSpectrum:
    def test_free_bands(self):
        arcs = spectrum.assemble_spectrum(PotentialCoeffs(0, 0), 2,
                                          np.linspace(0, math.pi, 9), CFG)
        labels = sorted(a.n for a in arcs)
        assert labels == [-2, -1, 0, 1, 2]
        for arc in arcs:
            expected = (TWO_PI * arc.n + arc.ts) ** 2
            assert np.allclose(arc.lams, expected, atol=1e-9)

    def test_low_band_flagging(self):
        arcs = spectrum.assemble_spectrum(PotentialCoeffs(1, 1), 4,
                                          np.linspace(0, math.pi, 9), CFG)
        by_n = {a.n: a for a in arcs}
        assert not by_n[1].asymptotic_guarantee
        assert by_n[4].asymptotic_guarantee

    def test_self_adjoint_arcs_real(self):
        arcs = spectrum.assemble_spectrum(PotentialCoeffs(1 + 1j, 1 - 1j), 3,
                                          np.linspace(0, math.pi, 17), CFG)
        for arc in arcs:
            assert np.all(np.abs(arc.lams.imag) < 1e-8 * (1 + np.abs(arc.lams)))

    def test_spectrum_depends_on_product_only(self):
        grid = np.linspace(0, math.pi, 9)
        arcs1 = spectrum.assemble_spectrum(PotentialCoeffs(1, 2), 2, grid, CFG)
        arcs2 = spectrum.assemble_spectrum(PotentialCoeffs(2, 1), 2, grid, CFG)
        set1 = sorted((a.endpoint_0 for a in arcs1), key=lambda z: (z.real, z.imag))
        set2 = sorted((a.endpoint_0 for a in arcs2), key=lambda z: (z.real, z.imag))
        for z1, z2 in zip(set1, set2):
            assert abs(z1 - z2) < 1e-9 * (1 + abs(z1))


class TestSeparationReport:
    def test_gap_table_quality(self):
        pot = PotentialCoeffs(2, 2)
        grid = np.linspace(0, math.pi, 9)
        arcs = spectrum.assemble_spectrum(pot, 3, grid, CFG)
        rep = spectrum.separation_report(arcs, pot, CFG)
        rows = {r.n: r for r in rep.rows}
        assert rows[1].marker_0 == "ok"
        assert 0.5 < rows[1].ratio_0 < 2.0
        assert 0.8 < rows[2].ratio_0 < 1.25
        assert abs(rows[2].ratio_0 - 1) < abs(rows[1].ratio_0 - 1)
        assert rows[1].marker_pi == "ok"
        assert 0.8 < rows[1].ratio_pi < 1.25

    def test_unresolvable_markers(self):
        pot = PotentialCoeffs(1, 1)
        grid = np.linspace(0, math.pi, 9)
        arcs = spectrum.assemble_spectrum(pot, 5, grid, CFG)
        rep = spectrum.separation_report(arcs, pot, CFG)
        rows = {r.n: r for r in rep.rows}
        for n in (4, 5):
            assert rows[n].marker_0 == "unresolvable"
            assert rows[n].ratio_0 is None
        assert rows[1].marker_0 == "ok"

    def test_simplicity_and_distance(self):
        pot = PotentialCoeffs(1, 2)
        arcs = spectrum.assemble_spectrum(pot, 4, np.linspace(0, math.pi, 9), CFG)
        rep = spectrum.separation_report(arcs, pot, CFG)
        assert set(rep.simplicity) == {a.n for a in arcs}
        # open low bands are certified simple; the high-band endpoint pairs
        # close below the resolution floor, so those stay uncertified
        assert rep.simplicity[1] and rep.simplicity[-1]
        assert not rep.simplicity[4]
        assert rep.min_arc_distance is not None
        assert rep.min_arc_distance > 0

    def test_requires_two_arcs(self):
        arc = spectrum.trace_arc(1, PotentialCoeffs(1, 1), GRID33, CFG)
        with pytest.raises(ValueError):
            spectrum.separation_report([arc], PotentialCoeffs(1, 1), CFG)


class TestEndpointGapHp:
    def test_matches_prediction_deep_below_noise(self):
        pot = PotentialCoeffs(1, 1)
        for n, rel in ((2, 1e-3), (3, 1e-4)):
            measured = spectrum.endpoint_gap_hp(n, pot, at_pi=False, cfg=CFG)
            predicted = asymptotics.predict_gaps(n, pot)[0]
            assert measured == pytest.approx(predicted, rel=10 * rel)

    def test_antiperiodic_side(self):
        pot = PotentialCoeffs(2, 2)
        measured = spectrum.endpoint_gap_hp(2, pot, at_pi=True, cfg=CFG)
        assert measured == pytest.approx(4.5742357e-08, rel=1e-4)

    def test_zero_product_rejected(self):
        with pytest.raises(ValueError):
            spectrum.endpoint_gap_hp(2, PotentialCoeffs(0, 1), False, CFG)
