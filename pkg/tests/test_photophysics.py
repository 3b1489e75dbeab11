import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import trapezoid

from qepol.errors import ValidationError
from qepol.photophysics import (
    EmitterModel,
    HuangRhysSpectrum,
    detection_probability,
    emission_state_at,
    excitation_probability,
    huang_rhys_lineshape,
    huang_rhys_weights,
    mean_detection_probability,
    replica_wavelengths,
    sample_decay_delays,
)


def make_model(**kw):
    base = dict(lifetime_ns=3.96, exc_axis_deg=43.52, exc_visibility=0.9667,
                exc_prob_max=0.5, em_axis_deg=62.42, em_visibility=0.9801)
    base.update(kw)
    return EmitterModel(**base)


# ---------------------------------------------------------------------------
# model validation


@pytest.mark.parametrize("kw", [
    dict(lifetime_ns=0.0),
    dict(lifetime_ns=-1.0),
    dict(relax_ns=0.0),
    dict(exc_prob_max=1.5),
    dict(exc_prob_max=-0.1),
    dict(exc_visibility=1.01),
    dict(em_visibility=-0.01),
    # early-time visibility 0.9801 - (-0.1) would exceed 1
    dict(em_visibility_delta=-0.1),
])
def test_emitter_model_rejects_bad_values(kw):
    with pytest.raises(ValidationError):
        make_model(**kw)


def test_emitter_model_wraps_axes():
    m = make_model(exc_axis_deg=223.52, em_axis_deg=-117.58)
    assert m.exc_axis_deg == pytest.approx(43.52)
    assert m.em_axis_deg == pytest.approx(62.42)


# ---------------------------------------------------------------------------
# excitation and detection


def test_excitation_probability_peaks_on_axis():
    m = make_model()
    on = excitation_probability(m, 43.52)
    assert on == pytest.approx(0.5 * (1 + 0.9667) / 2)
    off = excitation_probability(m, 43.52 + 90.0)
    assert off == pytest.approx(0.5 * (1 - 0.9667) / 2)
    assert excitation_probability(m, 3.52) < on


def test_excitation_probability_scales_with_power_and_clips():
    m = make_model(exc_visibility=1.0, exc_prob_max=0.5)
    assert excitation_probability(m, 43.52, power_scale=0.5) == pytest.approx(0.25)
    assert excitation_probability(m, 43.52, power_scale=10.0) == 1.0
    with pytest.raises(ValidationError):
        excitation_probability(m, 0.0, power_scale=-1.0)


def test_detection_probability_limits():
    state = emission_state_at(make_model(em_visibility=1.0), 1e9)
    assert detection_probability(state, 62.42) == pytest.approx(1.0)
    assert detection_probability(state, 62.42 + 90) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(min_value=0, max_value=180), st.floats(min_value=0, max_value=1))
def test_detection_probability_averages_to_half(axis, vis):
    m = make_model(em_axis_deg=axis, em_visibility=vis, em_visibility_delta=0.0)
    state = emission_state_at(m, 0.0)
    th = np.arange(0.0, 180.0, 1.0)
    assert np.mean(detection_probability(state, th)) == pytest.approx(0.5, abs=1e-12)


# ---------------------------------------------------------------------------
# time-dependent emission state


def test_emission_state_relaxes_toward_steady_state():
    m = make_model(em_axis_deg=65.0, em_axis_delta_deg=-5.0,
                   em_visibility=0.9, em_visibility_delta=0.3, relax_ns=1.5)
    early = emission_state_at(m, 0.0)
    late = emission_state_at(m, 1e6)
    assert early.axis_deg == pytest.approx(60.0)
    assert early.visibility == pytest.approx(0.6)
    assert late.axis_deg == pytest.approx(65.0)
    assert late.visibility == pytest.approx(0.9)


def test_emission_state_monotonic_when_visibility_rises():
    m = make_model(em_visibility=0.9, em_visibility_delta=0.3,
                   em_axis_deg=65.0, em_axis_delta_deg=-5.0, relax_ns=1.5)
    t = np.linspace(0.0, 20.0, 200)
    state = emission_state_at(m, t)
    assert np.all(np.diff(state.visibility) >= 0)
    assert np.all((state.visibility >= 0) & (state.visibility <= 1))
    offset = np.abs(state.axis_deg - 65.0)
    assert np.all(np.diff(offset) <= 1e-12)


def test_emission_state_rejects_negative_delay():
    with pytest.raises(ValidationError):
        emission_state_at(make_model(), -0.1)


def test_mean_detection_probability_matches_quadrature_oracle():
    m = make_model(em_axis_deg=65.0, em_axis_delta_deg=-5.0,
                   em_visibility=0.9, em_visibility_delta=0.3, relax_ns=1.5)
    # dense trapezoid over 40 lifetimes as an independent check
    t = np.linspace(0.0, 40.0 * m.lifetime_ns, 400_001)
    state = emission_state_at(m, t)
    for pol in (0.0, 62.42, 100.0):
        w = np.exp(-t / m.lifetime_ns) / m.lifetime_ns
        oracle = trapezoid(w * detection_probability(state, pol), t)
        assert mean_detection_probability(m, pol) == pytest.approx(oracle, abs=1e-7)


def test_mean_detection_probability_static_dipole_closed_form():
    m = make_model()
    for pol in (0.0, 30.0, 62.42):
        delta = math.radians(pol - 62.42)
        expected = 0.5 * (1 + 0.9801 * math.cos(2 * delta))
        assert mean_detection_probability(m, pol) == pytest.approx(expected, abs=1e-9)


def test_sample_decay_delays_reproducible_and_exponential():
    m = make_model()
    a = sample_decay_delays(m, np.random.default_rng(7), size=100_000)
    b = sample_decay_delays(m, np.random.default_rng(7), size=100_000)
    np.testing.assert_array_equal(a, b)
    assert np.mean(a) == pytest.approx(3.96, abs=3 * 3.96 / math.sqrt(a.size))
    assert stats.kstest(a, "expon", args=(0, 3.96)).pvalue > 1e-4


# ---------------------------------------------------------------------------
# phonon-replica spectrum


@pytest.mark.parametrize("s", [0.0, 0.3, 1.0, 4.5])
def test_huang_rhys_weights_match_poisson(s):
    w = huang_rhys_weights(s, 20)
    expected = stats.poisson.pmf(np.arange(21), s) if s > 0 else np.eye(1, 21, 0)[0]
    np.testing.assert_allclose(w, expected, atol=1e-12)


def test_huang_rhys_weights_sum_approaches_one():
    assert huang_rhys_weights(2.0, 60).sum() == pytest.approx(1.0, abs=1e-12)
    partial = huang_rhys_weights(2.0, 2).sum()
    assert partial < 1.0


def test_huang_rhys_weight_validation():
    with pytest.raises(ValidationError):
        huang_rhys_weights(-0.5, 5)
    with pytest.raises(ValidationError):
        huang_rhys_weights(1.0, -1)


def test_spectrum_debye_waller_is_zero_phonon_weight():
    sp = HuangRhysSpectrum(zpl_nm=573.0, s=1.2, phonon_mev=160.0)
    assert sp.debye_waller == pytest.approx(math.exp(-1.2))
    assert sp.weights[0] == pytest.approx(sp.debye_waller)


def test_replica_wavelengths_start_at_zpl_and_redden():
    sp = HuangRhysSpectrum(zpl_nm=573.0, s=1.0, phonon_mev=160.0, n_max=4)
    wl = replica_wavelengths(sp)
    assert wl[0] == pytest.approx(573.0)
    assert np.all(np.diff(wl) > 0)
    # replica spacing is uniform in energy, not in wavelength
    hc = 1239.8419843320026
    energies = hc / wl
    np.testing.assert_allclose(np.diff(energies), -0.160, rtol=1e-6)


def test_lineshape_normalized_and_peaked_at_zpl():
    sp = HuangRhysSpectrum(zpl_nm=573.0, s=0.8, phonon_mev=160.0, n_max=6)
    wl = np.linspace(500.0, 900.0, 4001)
    y = huang_rhys_lineshape(sp, wl, fwhm_nm=5.0)
    assert np.all(y >= 0)
    assert trapezoid(y, wl) == pytest.approx(1.0, abs=1e-9)
    assert abs(wl[np.argmax(y)] - 573.0) < 1.0


def test_lineshape_validation():
    sp = HuangRhysSpectrum(zpl_nm=573.0, s=0.8, phonon_mev=160.0)
    with pytest.raises(ValidationError):
        huang_rhys_lineshape(sp, np.array([600.0]))
    with pytest.raises(ValidationError):
        huang_rhys_lineshape(sp, np.linspace(500, 900, 100), fwhm_nm=0.0)
