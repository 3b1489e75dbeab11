import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qepol.photophysics import EmitterModel
from qepol.simulate import InstrumentConfig, simulate_timetags

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def reference_emitter():
    return EmitterModel(
        lifetime_ns=3.96,
        exc_axis_deg=43.52,
        exc_visibility=0.9667,
        exc_prob_max=0.5,
        em_axis_deg=62.42,
        em_visibility=0.9801,
    )


@pytest.fixture(scope="session")
def counting_instrument():
    return InstrumentConfig(
        rep_rate_mhz=20.0,
        irf_fwhm_ps=70.0,
        dark_rate_cps=500.0,
        dead_time_ns=0.0,
    )


@pytest.fixture(scope="session")
def small_stream(reference_emitter, counting_instrument):
    """A modest acquisition shared by analysis and format tests."""
    return simulate_timetags(
        reference_emitter, counting_instrument, 43.52, n_pulses=500_000, seed=101
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
