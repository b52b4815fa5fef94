import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellsim.channels import RelaxationParams
from bellsim.densmat import PureState, ValidationError, validate
from bellsim.pps import (
    ThermalConfig,
    equilibrium_for,
    fidelity_delta,
    make_pps,
    named_state,
    prep_sequence_cat,
    prepare,
    preparation_unitary,
    relax_polarized,
    spatial_average,
    thermal_state,
)
from oracles import apply_kraus, random_pure, relaxation_kraus_two

CAT = np.array([1, 0, 0, 1]) / math.sqrt(2)


def eq3(psi, eps):
    d = psi.size
    return (1 - eps) / d * np.eye(d) + eps * np.outer(psi, psi.conj())


class TestNamedStates:
    def test_labels(self):
        np.testing.assert_allclose(named_state("zero").amplitudes, [1, 0, 0, 0])
        np.testing.assert_allclose(named_state("uniform").amplitudes, [0.5] * 4)
        np.testing.assert_allclose(named_state("cat").amplitudes, CAT)
        np.testing.assert_allclose(named_state("singlet").amplitudes, [0, 1 / math.sqrt(2), -1 / math.sqrt(2), 0])

    def test_three_qubit_cat(self):
        amps = named_state("cat", 3).amplitudes
        assert amps[0] == amps[7] == pytest.approx(1 / math.sqrt(2))

    def test_custom_normalizes(self):
        np.testing.assert_allclose(named_state("custom", amplitudes=[3, 4j]).amplitudes, [0.6, 0.8j])

    @pytest.mark.parametrize("label,kw", [("bogus", {}), ("custom", {}), ("singlet", {"n": 3})])
    def test_errors(self, label, kw):
        with pytest.raises(ValidationError):
            named_state(label, **kw)


class TestMakePps:
    def test_pure_limit(self):
        rho = make_pps(PureState.basis("00"), 1.0).rho.matrix
        np.testing.assert_array_equal(rho, np.diag([1.0, 0, 0, 0]))

    def test_small_epsilon_cat(self):
        rho = make_pps(named_state("cat"), 1e-6).rho.matrix
        assert rho[0, 3].real == pytest.approx(5e-7, abs=1e-18)
        assert rho[0, 0].real == pytest.approx(0.25 + 2.5e-7, abs=1e-16)
        assert rho[1, 1].real == pytest.approx(0.25 - 2.5e-7, abs=1e-16)

    def test_one_third(self):
        rho = make_pps(PureState.basis("00"), 1 / 3).rho.matrix
        np.testing.assert_allclose(np.diag(rho).real, [0.5, 1 / 6, 1 / 6, 1 / 6], atol=1e-15)

    @pytest.mark.parametrize("eps", [0.0, -0.1, 1.0001, math.nan])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValidationError):
            make_pps(named_state("cat"), eps)

    @given(st.integers(0, 2**32 - 1), st.floats(1e-9, 1.0), st.integers(1, 3))
    @settings(max_examples=50)
    def test_matches_definition_and_affine(self, seed, eps, n):
        psi = random_pure(2**n, np.random.default_rng(seed))
        d = 2**n
        rho = make_pps(PureState(psi), eps).rho.matrix
        assert np.max(np.abs(rho - eq3(psi, eps))) < 1e-12
        dev = rho - np.eye(d) / d
        assert np.max(np.abs(dev - eps * (np.outer(psi, psi.conj()) - np.eye(d) / d))) < 1e-12
        assert validate(rho).passed


class TestThermal:
    def test_infinite_temperature(self):
        np.testing.assert_allclose(thermal_state(ThermalConfig((0.0, 0.0, 0.0))).matrix, np.eye(8) / 8)

    def test_single_spin(self):
        # |0> is the lower level and carries the excess population
        np.testing.assert_allclose(np.diag(thermal_state(ThermalConfig((0.05,))).matrix).real, [0.525, 0.475])

    def test_two_spins_equal(self):
        w = 0.05
        diag = np.diag(thermal_state(ThermalConfig((w, w))).matrix).real
        np.testing.assert_allclose(diag, [(1 + 2 * w) / 4, 0.25, 0.25, (1 - 2 * w) / 4])

    @pytest.mark.parametrize("w", [0.1, -0.2, 1.0])
    def test_expansion_limit(self, w):
        with pytest.raises(ValidationError):
            ThermalConfig((w, 0.01))

    @given(st.lists(st.floats(-0.099, 0.099), min_size=1, max_size=5))
    def test_diagonal_and_normalized(self, ws):
        m = thermal_state(ThermalConfig(tuple(ws))).matrix
        assert np.count_nonzero(m - np.diag(np.diag(m))) == 0
        assert abs(np.trace(m) - 1) < 1e-12


class TestPreparation:
    @pytest.mark.parametrize("eps", [1e-6, 0.01, 0.5, 1.0])
    def test_cat_sequence_matches_direct(self, eps):
        out = prep_sequence_cat(eps).rho.matrix
        assert np.max(np.abs(out - eq3(CAT, eps))) < 1e-10

    def test_cat_sequence_corners(self):
        assert prep_sequence_cat(1e-6).rho.matrix[0, 3].real == pytest.approx(5e-7, abs=1e-16)

    def test_cat_sequence_half(self):
        expected = 0.125 * np.eye(4) + 0.5 * np.outer(CAT, CAT)
        np.testing.assert_allclose(prep_sequence_cat(0.5).rho.matrix, expected, atol=1e-12)

    @pytest.mark.parametrize("eps", [1e-6, 1e-3, 0.04])
    def test_spatial_average_gives_00_pps(self, eps):
        rho, got = spatial_average(thermal_state(equilibrium_for(eps)))
        assert got == pytest.approx(eps, rel=1e-12)
        assert np.max(np.abs(rho.matrix - eq3(np.array([1, 0, 0, 0]), eps))) < 1e-12

    def test_spatial_average_unequal_polarizations(self):
        rho, eps = spatial_average(thermal_state(ThermalConfig((0.02, 0.05))))
        assert eps == pytest.approx(0.01)
        assert np.max(np.abs(rho.matrix - eq3(np.array([1, 0, 0, 0]), 0.01))) < 1e-12

    def test_spatial_average_rejects_unpolarized(self):
        with pytest.raises(ValidationError):
            spatial_average(np.eye(4) / 4)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_preparation_unitary(self, seed):
        psi = random_pure(4, np.random.default_rng(seed))
        u = preparation_unitary(PureState(psi))
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-12
        assert abs(abs(np.vdot(psi, u[:, 0])) - 1) < 1e-12

    @pytest.mark.parametrize("label", ["zero", "uniform", "cat", "singlet"])
    @pytest.mark.parametrize("eps", [1e-6, 0.01, 0.5, 1.0])
    def test_prepare_matches_eq3(self, label, eps):
        psi = named_state(label)
        out = prepare(psi, eps).rho.matrix
        assert np.max(np.abs(out - eq3(psi.amplitudes, eps))) < 1e-12


class TestFidelityDelta:
    def test_identical(self):
        rho = make_pps(named_state("cat"), 0.3).rho
        assert fidelity_delta(rho, rho) == 0.0

    def test_scaled_deviation(self):
        ideal = np.diag([1.0, 0, 0, 0])
        dev = ideal - np.eye(4) / 4
        assert fidelity_delta(np.eye(4) / 4 + 1.1 * dev, ideal) == pytest.approx(0.1, abs=1e-12)

    def test_scale_invariance(self, rng):
        a = make_pps(PureState(random_pure(4, rng)), 0.2).rho.matrix
        b = make_pps(PureState(random_pure(4, rng)), 0.2).rho.matrix
        assert fidelity_delta(3.7 * a, 3.7 * b) == pytest.approx(fidelity_delta(a, b), rel=1e-12)

    def test_epsilon_independent(self):
        # deviation matrices make delta independent of the polarization
        ideal = named_state("cat")
        other = named_state("uniform")
        d1 = fidelity_delta(make_pps(other, 1e-6).rho, make_pps(ideal, 1e-6).rho)
        d2 = fidelity_delta(make_pps(other, 1.0).rho, make_pps(ideal, 1.0).rho)
        assert d1 == pytest.approx(d2, rel=1e-6)

    def test_zero_reference(self):
        with pytest.raises(ValidationError):
            fidelity_delta(np.eye(4) / 4, np.eye(4) / 4)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            fidelity_delta(np.eye(2) / 2, np.eye(4) / 4)


class TestRelaxedPrep:
    PARAMS = [RelaxationParams(5, 0.2, 0.015), RelaxationParams(15, 0.3, 0.015)]

    def test_pure_limit_equals_channel(self):
        rho = eq3(CAT, 1.0)
        out = relax_polarized(rho, 1.0, self.PARAMS).matrix
        oracle = apply_kraus(rho, relaxation_kraus_two([(5, 0.2, 0.015), (15, 0.3, 0.015)]))
        np.testing.assert_allclose(out, oracle, atol=1e-15)

    def test_polarized_fraction_scales(self):
        full = relax_polarized(eq3(CAT, 1.0), 1.0, self.PARAMS).matrix
        small = relax_polarized(eq3(CAT, 1e-6), 1e-6, self.PARAMS).matrix
        expected = (1 - 1e-6) / 4 * np.eye(4) + 1e-6 * full
        np.testing.assert_allclose(small, expected, atol=1e-18)

    @pytest.mark.parametrize("eps", [1e-6, 1.0])
    def test_noisy_prep_delta_below_ten_percent(self, eps):
        noisy = relax_polarized(prepare(named_state("cat"), eps).rho, eps, self.PARAMS)
        delta = fidelity_delta(noisy, make_pps(named_state("cat"), eps).rho)
        assert 0 < delta < 0.10
