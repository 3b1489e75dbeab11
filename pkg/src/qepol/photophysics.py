"""Emitter-level physics: excitation, time-dependent emission state, decay.

The emitter is a two-level system pumped by a pulsed, linearly polarized
laser.  Its emission dipole is allowed to relax after excitation: both the
emission axis and the emission visibility move exponentially from an early
value toward a steady-state value with a common relaxation time.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants, integrate

from .errors import ValidationError
from .geometry import wrap_axis

__all__ = [
    "EmitterModel",
    "EmissionState",
    "HuangRhysSpectrum",
    "excitation_probability",
    "emission_state_at",
    "detection_probability",
    "mean_detection_probability",
    "sample_decay_delays",
    "huang_rhys_weights",
    "replica_wavelengths",
    "huang_rhys_lineshape",
]

# hc in eV*nm, for photon energy <-> wavelength conversion
_HC_EV_NM = constants.h * constants.c / constants.e * 1e9


@dataclass(frozen=True)
class EmitterModel:
    """Static description of a single emitter.

    Axis convention: all axes are polarization axes in the lab frame, in
    degrees on [0, 180).  The emission axis at delay t after excitation is
    em_axis_deg + em_axis_delta_deg * exp(-t / relax_ns), and the emission
    visibility is em_visibility - em_visibility_delta * exp(-t / relax_ns),
    so the *_delta fields describe how far the freshly excited emitter sits
    from its steady state.
    """

    lifetime_ns: float
    exc_axis_deg: float = 0.0
    exc_visibility: float = 1.0
    exc_prob_max: float = 0.1
    em_axis_deg: float = 0.0
    em_axis_delta_deg: float = 0.0
    em_visibility: float = 1.0
    em_visibility_delta: float = 0.0
    relax_ns: float = 1.0

    def __post_init__(self):
        if self.lifetime_ns <= 0:
            raise ValidationError(f"lifetime must be > 0, got {self.lifetime_ns}")
        if self.relax_ns <= 0:
            raise ValidationError(f"relaxation time must be > 0, got {self.relax_ns}")
        if not (0.0 <= self.exc_prob_max <= 1.0):
            raise ValidationError("excitation probability must be in [0, 1]")
        if not (0.0 <= self.exc_visibility <= 1.0):
            raise ValidationError("excitation visibility must be in [0, 1]")
        if not (0.0 <= self.em_visibility <= 1.0):
            raise ValidationError("emission visibility must be in [0, 1]")
        early = self.em_visibility - self.em_visibility_delta
        if not (0.0 <= early <= 1.0):
            raise ValidationError(
                f"early-time emission visibility {early:g} falls outside [0, 1]"
            )
        object.__setattr__(self, "exc_axis_deg", float(wrap_axis(self.exc_axis_deg)))
        object.__setattr__(self, "em_axis_deg", float(wrap_axis(self.em_axis_deg)))


@dataclass(frozen=True)
class EmissionState:
    """Instantaneous emission dipole: axis (degrees) and visibility.

    Fields may be scalars or aligned arrays (one entry per delay).
    """

    axis_deg: object
    visibility: object


def excitation_probability(model, laser_axis_deg, power_scale=1.0):
    """Per-pulse excitation probability for a given pump polarization.

    Follows the same cosine-squared law as detection:
    p = exc_prob_max * power_scale * (1 + V cos 2(pump - axis)) / 2, so a
    pump aligned with the axis of a unit-visibility emitter reaches
    exc_prob_max * power_scale.  The result is clipped to [0, 1].
    """
    if power_scale < 0:
        raise ValidationError(f"power_scale must be >= 0, got {power_scale}")
    delta = np.deg2rad(np.asarray(laser_axis_deg, dtype=float) - model.exc_axis_deg)
    p = model.exc_prob_max * power_scale * 0.5 * (
        1.0 + model.exc_visibility * np.cos(2.0 * delta)
    )
    out = np.clip(p, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def emission_state_at(model, t_ns):
    """Emission axis and visibility at delay t_ns after excitation."""
    t = np.asarray(t_ns, dtype=float)
    if np.any(t < 0):
        raise ValidationError("delay must be >= 0")
    decay = np.exp(-t / model.relax_ns)
    axis = model.em_axis_deg + model.em_axis_delta_deg * decay
    vis = model.em_visibility - model.em_visibility_delta * decay
    if t.ndim == 0:
        return EmissionState(float(wrap_axis(axis)), float(vis))
    return EmissionState(wrap_axis(axis), vis)


def detection_probability(state, polarizer_deg):
    """Transmission of the emission dipole through an analyzer.

    Normalized so a perfectly aligned analyzer on a visibility-1 dipole
    transmits 1 and the crossed analyzer transmits 0.
    """
    delta = np.deg2rad(
        np.asarray(polarizer_deg, dtype=float) - np.asarray(state.axis_deg, dtype=float)
    )
    out = 0.5 * (1.0 + np.asarray(state.visibility, dtype=float) * np.cos(2.0 * delta))
    if out.ndim == 0:
        return float(out)
    return out


def mean_detection_probability(model, polarizer_deg):
    """Decay-weighted average analyzer transmission for one excitation.

    Averages detection_probability over the exponential distribution of
    emission delays; this is what a slow (time-integrating) measurement of
    the emitter sees behind the analyzer.
    """

    def integrand(u):
        state = emission_state_at(model, u * model.lifetime_ns)
        return math.exp(-u) * detection_probability(state, polarizer_deg)

    val, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    return float(val)


def sample_decay_delays(model, rng, size=None):
    """Draw emission delays in ns from the exponential lifetime law."""
    return rng.exponential(model.lifetime_ns, size=size)


def huang_rhys_weights(s, n_max):
    """Poisson phonon-replica weights w_n = exp(-s) s^n / n! for n = 0..n_max."""
    if s < 0:
        raise ValidationError(f"coupling strength must be >= 0, got {s}")
    if n_max < 0:
        raise ValidationError("n_max must be >= 0")
    n = np.arange(n_max + 1)
    # stable in log space for large s
    from scipy.special import gammaln

    return np.exp(-s + n * np.log(s) - gammaln(n + 1)) if s > 0 else np.where(n == 0, 1.0, 0.0)


@dataclass(frozen=True)
class HuangRhysSpectrum:
    """Phonon-coupled emission spectrum built from a zero-phonon line.

    The n-th replica sits one phonon energy per step below the zero-phonon
    line and carries Poisson weight s^n exp(-s) / n!.
    """

    zpl_nm: float
    s: float
    phonon_mev: float
    n_max: int = 8

    def __post_init__(self):
        if self.zpl_nm <= 0:
            raise ValidationError("zero-phonon wavelength must be > 0")
        if self.phonon_mev <= 0:
            raise ValidationError("phonon energy must be > 0")
        if self.s < 0:
            raise ValidationError("coupling strength must be >= 0")
        if self.n_max < 0:
            raise ValidationError("n_max must be >= 0")

    @property
    def weights(self):
        return huang_rhys_weights(self.s, self.n_max)

    @property
    def debye_waller(self):
        """Weight carried by the zero-phonon line itself."""
        return math.exp(-self.s)


def replica_wavelengths(spectrum):
    """Center wavelengths in nm of replicas n = 0..n_max.

    Replicas are spaced by the phonon energy on the energy axis, so the
    wavelength spacing grows toward the red.
    """
    e0 = _HC_EV_NM / spectrum.zpl_nm
    n = np.arange(spectrum.n_max + 1)
    energies = e0 - n * spectrum.phonon_mev * 1e-3
    if np.any(energies <= 0):
        raise ValidationError("replica energy fell to zero; reduce n_max")
    return _HC_EV_NM / energies


def huang_rhys_lineshape(spectrum, wavelengths_nm, fwhm_nm=5.0):
    """Evaluate the model spectrum on a wavelength grid.

    Each replica is a Lorentzian of the given width.  The curve is
    normalized to unit area on the supplied grid (trapezoid rule), so the
    grid should comfortably cover all replicas.
    """
    wl = np.asarray(wavelengths_nm, dtype=float)
    if wl.ndim != 1 or wl.size < 2:
        raise ValidationError("wavelength grid must be 1-d with >= 2 points")
    if fwhm_nm <= 0:
        raise ValidationError("linewidth must be > 0")
    gamma = fwhm_nm / 2.0
    centers = replica_wavelengths(spectrum)
    out = np.zeros_like(wl)
    for w, c in zip(spectrum.weights, centers):
        out += w * gamma / (np.pi * ((wl - c) ** 2 + gamma**2))
    area = integrate.trapezoid(out, wl)
    if area <= 0:
        raise ValidationError("lineshape has zero area on this grid")
    return out / area
