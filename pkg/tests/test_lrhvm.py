import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellsim.bell import MeasurementDirection, chsh_qm_prediction, chsh_spec
from bellsim.channels import RelaxationParams
from bellsim.densmat import PureState, ValidationError
from bellsim.lrhvm import (
    EnsembleRun,
    bulk_chsh_curve,
    bulk_correlation,
    bulk_inequality,
    crossing_threshold,
    detected_state,
    lrhvm_applicable,
    polarization_sweep,
    prepare_bulk,
    pure_chsh_curve,
    separability_bound,
)
from bellsim.pps import named_state
from oracles import apply_kraus, projector_correlation, random_pure, relaxation_kraus_two

GRID = np.radians(np.linspace(0, 90, 181))
COARSE = np.radians(np.linspace(0, 90, 19))
T1T2_RELAXATION = [RelaxationParams(5, 0.2, 0.015), RelaxationParams(15, 0.3, 0.015)]


def product_curve(t):
    return math.cos(2 * t) * (1 + math.cos(4 * t)) + math.cos(4 * t) * math.cos(6 * t) - math.cos(6 * t)


class TestSeparability:
    def test_bound_values(self):
        assert separability_bound(1) == 0.5
        assert separability_bound(2) == 1 / 3
        assert separability_bound(12) == 1 / 2049

    def test_bound_needs_qubits(self):
        with pytest.raises(ValidationError):
            separability_bound(0)

    def test_applicability(self):
        a = lrhvm_applicable(1e-6, 2)
        assert a.applicable and a.margin == pytest.approx(0.333332333, abs=1e-9)
        assert lrhvm_applicable(1 / 3, 2).applicable
        b = lrhvm_applicable(0.916, 2)
        assert not b.applicable and b.margin < 0

    def test_applicability_rejects_bad_epsilon(self):
        with pytest.raises(ValidationError):
            lrhvm_applicable(0.0, 2)

    @given(st.floats(1e-9, 1.0), st.integers(1, 12))
    def test_gate_matches_bound(self, eps, n):
        a = lrhvm_applicable(eps, n)
        assert a.applicable == (eps <= separability_bound(n))
        assert a.margin == pytest.approx(separability_bound(n) - eps)


class TestEnsembleRun:
    @pytest.mark.parametrize("grid", [[], [-0.1], [2.0]])
    def test_bad_grid(self, grid):
        with pytest.raises(ValidationError):
            EnsembleRun(named_state("cat"), 1e-6, grid)

    def test_bad_relaxation_length(self):
        with pytest.raises(ValidationError):
            EnsembleRun(named_state("cat"), 1e-6, [0.1], relaxation=T1T2_RELAXATION[:1])


class TestBulkCurve:
    @pytest.mark.parametrize("eps", [1e-6, 1.0])
    def test_cat_matches_closed_form(self, eps):
        result = bulk_chsh_curve(EnsembleRun(named_state("cat"), eps, GRID))
        for rec in result.records:
            assert abs(rec.value_normalized - chsh_qm_prediction(rec.theta)) < 1e-9
            assert rec.violated_normalized == (abs(rec.value_normalized) > 2 + 1e-9)

    def test_zero_state_product_curve(self):
        for eps in (1e-6, 0.2, 1.0):
            result = bulk_chsh_curve(EnsembleRun(named_state("zero"), eps, COARSE))
            for rec in result.records:
                assert abs(rec.value_normalized - product_curve(rec.theta)) < 1e-9
                assert abs(rec.value_normalized) <= 2 + 1e-9

    def test_singlet(self):
        result = bulk_chsh_curve(EnsembleRun(named_state("singlet"), 1e-6, GRID))
        for rec in result.records:
            assert abs(rec.value_normalized + chsh_qm_prediction(rec.theta)) < 1e-9

    def test_raw_is_epsilon_times_pure(self):
        eps = 1e-3
        result = bulk_chsh_curve(EnsembleRun(named_state("cat"), eps, COARSE))
        for rec in result.records:
            assert abs(rec.value_raw - eps * chsh_qm_prediction(rec.theta)) < 1e-9
            assert not rec.violated_raw

    def test_direct_and_equilibrium_routes_agree(self):
        a = bulk_chsh_curve(EnsembleRun(named_state("cat"), 1e-4, COARSE, from_equilibrium=True))
        b = bulk_chsh_curve(EnsembleRun(named_state("cat"), 1e-4, COARSE, from_equilibrium=False))
        np.testing.assert_allclose(a.column("value_normalized"), b.column("value_normalized"), atol=1e-9)

    def test_workers_do_not_change_results(self):
        run = EnsembleRun(named_state("cat"), 1e-6, COARSE)
        serial = bulk_chsh_curve(run).column("value_normalized")
        threaded = bulk_chsh_curve(run, workers=4).column("value_normalized")
        np.testing.assert_array_equal(serial, threaded)

    def test_records_echo_inputs(self):
        run = EnsembleRun(named_state("cat"), 1e-6, COARSE[:3], relaxation=T1T2_RELAXATION, label="cat")
        rec = bulk_chsh_curve(run).records[1]
        assert rec.state == "cat" and rec.epsilon == 1e-6 and rec.theta == COARSE[1]
        assert rec.relaxation == tuple(T1T2_RELAXATION)
        assert len(rec.correlations) == 4

    @given(st.integers(0, 2**32 - 1), st.sampled_from([1e-6, 1e-2, 0.3]))
    @settings(max_examples=15, deadline=None)
    def test_coincidence_random_targets(self, seed, eps):
        psi = PureState(random_pure(4, np.random.default_rng(seed)))
        thetas = COARSE[::3]
        bulk = bulk_chsh_curve(EnsembleRun(psi, eps, thetas)).column("value_normalized")
        np.testing.assert_allclose(bulk, pure_chsh_curve(psi, thetas), atol=1e-9)

    def test_three_qubit_mismatch(self):
        sample = prepare_bulk(named_state("cat", 3), 1e-6)
        with pytest.raises(ValidationError):
            bulk_inequality(chsh_spec(0.3), sample)


class TestRelaxedCurve:
    def test_terms_match_brute_force(self):
        """Each relaxed CHSH term against the 16-element Kraus product oracle."""
        theta = math.radians(22.5)
        run = EnsembleRun(named_state("cat"), 1e-6, [theta], relaxation=T1T2_RELAXATION)
        rec = bulk_chsh_curve(run).records[0]
        cat = np.outer(named_state("cat").amplitudes, named_state("cat").amplitudes)
        relaxed = apply_kraus(cat, relaxation_kraus_two([(5, 0.2, 0.015), (15, 0.3, 0.015)]))
        spec = chsh_spec(theta)
        keys = [k for k, c in spec.coefficients.items() if c]
        for key, e in zip(keys, rec.correlations):
            dirs = [(d.theta, d.phi) for d in spec.term_directions(key)]
            assert e == pytest.approx(projector_correlation(relaxed, dirs), abs=1e-9)

    def test_zz_free_terms_attenuate_by_t2_product(self):
        # at 22.5 deg observer 1 setting 2 lies along x, so its two terms carry no ZZ part:
        # E = exp(-t/T2a) exp(-t/T2b) sin(b) for observer 2 at polar angle b
        theta = math.radians(22.5)
        factor = math.exp(-0.015 / 0.2) * math.exp(-0.015 / 0.3)
        sample = prepare_bulk(named_state("cat"), 1e-6, T1T2_RELAXATION)
        spec = chsh_spec(theta)
        for key in ((2, 1), (2, 2)):
            dirs = spec.term_directions(key)
            assert dirs[0].theta == pytest.approx(math.pi / 2)
            e, _ = bulk_correlation(sample, dirs)
            assert e == pytest.approx(factor * math.sin(dirs[1].theta), abs=1e-6)

    def test_xx_attenuation(self):
        sample = prepare_bulk(named_state("cat"), 1e-6, T1T2_RELAXATION)
        x = MeasurementDirection(math.pi / 2)
        e, raw = bulk_correlation(sample, [x, x])
        assert e == pytest.approx(math.exp(-0.125), abs=1e-6)
        assert raw == pytest.approx(1e-6 * math.exp(-0.125), abs=1e-12)

    def test_attenuated_curve_within_band(self):
        relaxed = bulk_chsh_curve(
            EnsembleRun(named_state("cat"), 1e-6, COARSE, relaxation=T1T2_RELAXATION)
        ).column("value_normalized")
        ideal = np.array([chsh_qm_prediction(t) for t in COARSE])
        assert np.all(np.abs(relaxed) <= np.abs(ideal) + 1e-9)

    def test_detected_state(self):
        cat = named_state("cat")
        np.testing.assert_allclose(
            detected_state(cat).matrix, np.outer(cat.amplitudes, cat.amplitudes), atol=1e-15
        )
        relaxed = detected_state(cat, T1T2_RELAXATION).matrix
        assert relaxed[0, 3].real == pytest.approx(0.5 * math.exp(-0.125), abs=1e-12)


class TestPolarizationSweep:
    GRID = [0.05 * k for k in range(1, 21)]

    def test_threshold(self):
        sweep = polarization_sweep(named_state("cat"), self.GRID, math.radians(22.5))
        assert sweep.threshold_epsilon == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_values(self):
        sweep = polarization_sweep(named_state("cat"), [1 / 3, 0.916, 1.0], math.radians(22.5))
        third, strong, full = sweep.records
        assert third.value_raw == pytest.approx(2 * math.sqrt(2) / 3, abs=1e-9) and not third.violated_raw
        assert strong.value_raw == pytest.approx(2.591, abs=1e-3) and strong.violated_raw
        assert full.value_raw == pytest.approx(2 * math.sqrt(2), abs=1e-9) and full.violated_raw

    def test_linear_in_epsilon(self):
        sweep = polarization_sweep(named_state("cat"), self.GRID, math.radians(30))
        eps, raw = sweep.column("epsilon"), sweep.column("value_raw")
        fit = np.polyfit(eps, raw, 1)
        assert np.max(np.abs(np.polyval(fit, eps) - raw)) < 1e-9
        assert abs(fit[1]) < 1e-9

    def test_normalized_constant(self):
        sweep = polarization_sweep(named_state("cat"), self.GRID, math.radians(22.5))
        np.testing.assert_allclose(sweep.column("value_normalized"), 2 * math.sqrt(2), atol=1e-9)

    def test_no_crossing(self):
        sweep = polarization_sweep(named_state("zero"), self.GRID, math.radians(22.5))
        assert sweep.threshold_epsilon is None
        assert not any(sweep.column("violated_raw"))

    @pytest.mark.parametrize("grid", [[], [0.0], [1.5]])
    def test_bad_grid(self, grid):
        with pytest.raises(ValidationError):
            polarization_sweep(named_state("cat"), grid, 0.3)

    def test_crossing_interpolation(self):
        assert crossing_threshold([0.0, 1.0], [0.0, 4.0], 2.0) == pytest.approx(0.5)
        assert crossing_threshold([0.5, 0.1], [-3.0, -0.6], 2.0) == pytest.approx(0.1 + 1.4 / 2.4 * 0.4)
        assert crossing_threshold([0.1, 0.2], [0.5, 1.0], 2.0) is None
