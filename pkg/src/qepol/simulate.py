"""Monte Carlo instrument simulator.

Produces the raw data products the analysis chain consumes: time-tag
streams from a two-detector intensity interferometer behind a 50:50
splitter, polarization sweeps, delay-angle decay maps and confocal scan
maps.

Determinism contract: results depend only on (seed, configuration), never
on scheduling.  Pulse trains are simulated in fixed blocks of PULSE_BLOCK
pulses; block b uses the child stream spawn_key=(b,) of the root seed, and
the merged event list is sorted by (timestamp, channel) with a stable sort,
so a run is bit-identical whether blocks execute serially or on any number
of workers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.random import SeedSequence, default_rng

from .analysis import DecayMap, PolarSweep
from .errors import ValidationError
from .photophysics import (
    detection_probability,
    emission_state_at,
    excitation_probability,
    mean_detection_probability,
)

__all__ = [
    "PULSE_BLOCK",
    "InstrumentConfig",
    "TimeTagStream",
    "PLMap",
    "simulate_timetags",
    "simulate_polarization_sweep",
    "simulate_decay_map",
    "simulate_shg_sweep",
    "simulate_pl_map",
    "dark_rate_for_g2",
    "expected_g2_zero",
]

# pulses per rng block; part of the reproducibility contract, do not change
PULSE_BLOCK = 1 << 20

_FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class InstrumentConfig:
    """Detection-side parameters of the photon-counting setup.

    dark_rate_cps is per detector.  polarizer_in_path declares whether the
    analyzer element is mounted; the simulator applies an analyzer whenever
    an angle is passed, and unpolarized dark counts lose half their rate
    behind it.
    """

    rep_rate_mhz: float = 20.0
    irf_fwhm_ps: float = 70.0
    dark_rate_cps: float = 0.0
    dead_time_ns: float = 77.0
    splitter_ratio: float = 0.5
    detection_efficiency: float = 0.35
    polarizer_in_path: bool = False

    def __post_init__(self):
        if self.rep_rate_mhz <= 0:
            raise ValidationError("repetition rate must be > 0")
        if self.irf_fwhm_ps < 0:
            raise ValidationError("IRF width must be >= 0")
        if self.dark_rate_cps < 0:
            raise ValidationError("dark rate must be >= 0")
        if self.dead_time_ns < 0:
            raise ValidationError("dead time must be >= 0")
        if not (0.0 <= self.splitter_ratio <= 1.0):
            raise ValidationError("splitter ratio must be in [0, 1]")
        if not (0.0 < self.detection_efficiency <= 1.0):
            raise ValidationError("detection efficiency must be in (0, 1]")

    @property
    def sync_period_ps(self):
        """Pulse period in integer picoseconds."""
        return int(round(1e6 / self.rep_rate_mhz))


@dataclass
class TimeTagStream:
    """Detector events: parallel channel / timestamp arrays.

    Timestamps are integer picoseconds from the start of the acquisition,
    non-decreasing; ties are ordered by channel.
    """

    channels: np.ndarray
    timestamps_ps: np.ndarray
    sync_period_ps: int
    duration_ps: int
    flags: np.ndarray = None

    def __post_init__(self):
        self.channels = np.ascontiguousarray(self.channels, dtype=np.uint16)
        self.timestamps_ps = np.ascontiguousarray(self.timestamps_ps, dtype=np.int64)
        if self.channels.shape != self.timestamps_ps.shape:
            raise ValidationError("channels and timestamps must have equal length")
        if self.timestamps_ps.size and np.any(np.diff(self.timestamps_ps) < 0):
            raise ValidationError("timestamps must be non-decreasing")
        if self.sync_period_ps <= 0:
            raise ValidationError("sync period must be > 0")
        if self.duration_ps < 0:
            raise ValidationError("duration must be >= 0")
        if self.flags is None:
            self.flags = np.zeros(self.channels.size, dtype=np.uint16)
        else:
            self.flags = np.ascontiguousarray(self.flags, dtype=np.uint16)
            if self.flags.shape != self.channels.shape:
                raise ValidationError("flags length must match channels")

    @property
    def n_records(self):
        return int(self.channels.size)

    def channel_timestamps(self, channel):
        return self.timestamps_ps[self.channels == channel]


@dataclass
class PLMap:
    """Confocal scan: count map with pixel geometry."""

    values: np.ndarray
    pixel_size_nm: float
    dwell_ms: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValidationError("map values must be 2-d")
        if self.pixel_size_nm <= 0:
            raise ValidationError("pixel size must be > 0")
        if self.dwell_ms <= 0:
            raise ValidationError("dwell time must be > 0")


def _child_rng(root, block_index):
    """RNG for one pulse block, keyed by the root seed and block index.

    The derivation is positional (spawn_key extension), not sequential, so
    any subset of blocks can be generated in any order with the same
    result.
    """
    key = tuple(root.spawn_key) + (block_index,)
    return default_rng(SeedSequence(entropy=root.entropy, spawn_key=key))


def _simulate_block(model, inst, laser_axis_deg, det_polarizer_deg, power_scale,
                    root, block_index, start_pulse, n_pulses):
    """One block of the pulse train; returns unsorted (channels, timestamps)."""
    rng = _child_rng(root, block_index)
    period = inst.sync_period_ps
    p_exc = excitation_probability(model, laser_axis_deg, power_scale)

    pulse = np.nonzero(rng.random(n_pulses) < p_exc)[0]
    delays_ns = rng.exponential(model.lifetime_ns, pulse.size)
    if det_polarizer_deg is not None:
        state = emission_state_at(model, delays_ns)
        keep = rng.random(pulse.size) < detection_probability(state, det_polarizer_deg)
        pulse, delays_ns = pulse[keep], delays_ns[keep]
    keep = rng.random(pulse.size) < inst.detection_efficiency
    pulse, delays_ns = pulse[keep], delays_ns[keep]
    ch = np.where(rng.random(pulse.size) < inst.splitter_ratio, 0, 1).astype(np.uint16)

    t = (start_pulse + pulse) * period + delays_ns * 1000.0
    if inst.irf_fwhm_ps > 0:
        t = t + rng.normal(0.0, inst.irf_fwhm_ps / _FWHM_TO_SIGMA, pulse.size)
    ts = np.maximum(np.rint(t).astype(np.int64), 0)

    # unpolarized dark counts, uniform over the block span, per channel
    dark_rate = inst.dark_rate_cps * (0.5 if det_polarizer_deg is not None else 1.0)
    if dark_rate > 0:
        span = n_pulses * period
        start_ps = start_pulse * period
        chans, stamps = [ch], [ts]
        for dch in (0, 1):
            nd = rng.poisson(dark_rate * span * 1e-12)
            chans.append(np.full(nd, dch, dtype=np.uint16))
            stamps.append(start_ps + rng.integers(0, span, nd, dtype=np.int64))
        ch = np.concatenate(chans)
        ts = np.concatenate(stamps)
    return ch, ts


def simulate_timetags(model, inst, laser_axis_deg, det_polarizer_deg=None, *,
                      n_pulses, seed=0, power_scale=1.0, n_jobs=1):
    """Simulate a pulsed acquisition and return the merged TimeTagStream.

    Each laser pulse excites the emitter with the Malus-law probability for
    the pump orientation; an excited emitter emits exactly one photon at an
    exponential delay.  The photon passes the analyzer (when an angle is
    given) with the time-dependent Malus probability, survives detection
    with detection_efficiency and lands on detector 0 or 1 via the
    splitter.  Timestamps get Gaussian jitter of the IRF width, dark counts
    are added as per-channel Poisson processes, and each channel finally
    drops tags inside its dead time.
    """
    if n_pulses < 1:
        raise ValidationError("need at least one pulse")
    root = seed if isinstance(seed, SeedSequence) else SeedSequence(int(seed))
    n_blocks = -(-int(n_pulses) // PULSE_BLOCK)
    args = [
        (model, inst, laser_axis_deg, det_polarizer_deg, power_scale, root,
         b, b * PULSE_BLOCK, min(PULSE_BLOCK, int(n_pulses) - b * PULSE_BLOCK))
        for b in range(n_blocks)
    ]
    if n_jobs > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda a: _simulate_block(*a), args))
    else:
        parts = [_simulate_block(*a) for a in args]

    ch = np.concatenate([p[0] for p in parts])
    ts = np.concatenate([p[1] for p in parts])
    order = np.lexsort((ch, ts))
    ch, ts = ch[order], ts[order]

    dead_ps = int(round(inst.dead_time_ns * 1000.0))
    if dead_ps > 0 and ts.size:
        from ._kernels import dead_time_filter

        keep = np.zeros(ts.size, dtype=bool)
        for c in np.unique(ch):
            idx = np.nonzero(ch == c)[0]
            keep[idx] = dead_time_filter(ts[idx], dead_ps)
        ch, ts = ch[keep], ts[keep]

    return TimeTagStream(
        channels=ch,
        timestamps_ps=ts,
        sync_period_ps=inst.sync_period_ps,
        duration_ps=int(n_pulses) * inst.sync_period_ps,
    )


def simulate_polarization_sweep(model, inst, mode, angles_deg, acquisition_s,
                                seed=0, power_scale=1.0, poisson_noise=True):
    """Integrated counts versus angle for a polarization sweep.

    mode "emission": the pump stays on the excitation axis and the analyzer
    steps through angles_deg.  mode "excitation": the pump polarization
    steps through angles_deg and detection is unpolarized.  Counts sum both
    detectors; expected values come from the decay-averaged analyzer
    transmission, and poisson_noise=False returns them without shot noise
    (useful as a noise-free reference).
    """
    if mode not in ("emission", "excitation"):
        raise ValidationError(f"unknown sweep mode {mode!r}")
    angles = np.asarray(angles_deg, dtype=float)
    if angles.ndim != 1 or np.unique(np.mod(angles, 180.0)).size < 8:
        raise ValidationError("need at least 8 distinct angles (mod 180)")
    if acquisition_s <= 0:
        raise ValidationError("acquisition time must be > 0")
    n_pulses = acquisition_s * inst.rep_rate_mhz * 1e6
    expected = np.empty(angles.size)
    for i, a in enumerate(angles):
        if mode == "emission":
            p = excitation_probability(model, model.exc_axis_deg, power_scale)
            p_det = mean_detection_probability(model, a)
            dark = 2.0 * inst.dark_rate_cps * acquisition_s * 0.5
        else:
            p = excitation_probability(model, a, power_scale)
            p_det = 1.0
            dark = 2.0 * inst.dark_rate_cps * acquisition_s
        expected[i] = n_pulses * p * inst.detection_efficiency * p_det + dark
    if poisson_noise:
        rng = default_rng(SeedSequence(int(seed)))
        counts = rng.poisson(expected).astype(float)
    else:
        counts = expected
    return PolarSweep(
        angles_deg=angles,
        intensities=counts,
        errors=np.sqrt(np.maximum(counts, 1.0)),
        acquisition_s=float(acquisition_s),
    )


def simulate_decay_map(model, inst, angles_deg, n_pulses_per_angle, time_bin_ps=50,
                       seed=0, power_scale=1.0):
    """Delay-angle count map: one time-tag run per analyzer angle.

    The pump sits on the excitation axis.  Each angle gets an independent
    child seed, so maps are reproducible per (seed, angle index).  The bin
    width must divide the pulse period so all rows are uniform.
    """
    angles = np.asarray(angles_deg, dtype=float)
    if angles.ndim != 1 or np.unique(np.mod(angles, 180.0)).size < 8:
        raise ValidationError("need at least 8 distinct angles (mod 180)")
    period = inst.sync_period_ps
    time_bin_ps = int(time_bin_ps)
    if time_bin_ps < 1 or time_bin_ps > period:
        raise ValidationError("time bin must be in [1, pulse period]")
    if period % time_bin_ps:
        raise ValidationError("time bin must divide the pulse period")
    nbins = period // time_bin_ps
    counts = np.zeros((nbins, angles.size), dtype=np.int64)
    root = SeedSequence(int(seed))
    for j, a in enumerate(angles):
        stream = simulate_timetags(
            model, inst, model.exc_axis_deg, det_polarizer_deg=float(a),
            n_pulses=n_pulses_per_angle,
            seed=SeedSequence(entropy=root.entropy, spawn_key=(1000 + j,)),
            power_scale=power_scale,
        )
        folded = np.mod(stream.timestamps_ps, period) // time_bin_ps
        counts[:, j] = np.bincount(folded.astype(np.intp), minlength=nbins)
    edges = np.arange(nbins + 1, dtype=float) * time_bin_ps
    return DecayMap(time_edges_ps=edges, angles_deg=angles, counts=counts)


def simulate_shg_sweep(crystal_axis_deg, angles_deg, amplitude, background=0.0,
                       pump_power=1.0, configuration="parallel", seed=0,
                       poisson_noise=True):
    """Frequency-doubled intensity versus pump angle for a crystal.

    The response has the six-lobed pattern of a threefold in-plane lattice,
    peaks on the crystal axes and scales with the square of the pump power.
    configuration "parallel" analyzes along the pump, "crossed" rotates the
    lobes by half a period.
    """
    if configuration not in ("parallel", "crossed"):
        raise ValidationError(f"unknown configuration {configuration!r}")
    if amplitude < 0 or background < 0 or pump_power <= 0:
        raise ValidationError("amplitude, background >= 0 and pump power > 0")
    angles = np.asarray(angles_deg, dtype=float)
    if angles.ndim != 1 or np.unique(np.mod(angles, 60.0)).size < 4:
        raise ValidationError("need at least 4 distinct angles (mod 60)")
    axis = crystal_axis_deg + (30.0 if configuration == "crossed" else 0.0)
    delta = np.deg2rad(angles - axis)
    expected = background + amplitude * pump_power**2 * np.cos(3.0 * delta) ** 2
    if poisson_noise:
        rng = default_rng(SeedSequence(int(seed)))
        counts = rng.poisson(expected).astype(float)
    else:
        counts = expected
    return PolarSweep(
        angles_deg=angles,
        intensities=counts,
        errors=np.sqrt(np.maximum(counts, 1.0)),
    )


def simulate_pl_map(emitters, shape_px, pixel_size_nm, dwell_ms, psf_fwhm_nm=400.0,
                    background_cps=0.0, drift_nm_per_frame=(0.0, 0.0), n_frames=1,
                    seed=0, poisson_noise=True):
    """Confocal scan maps of point emitters; returns a list of PLMap frames.

    emitters is a sequence of (x_nm, y_nm, peak_cps) with positions from the
    map origin (pixel centers at (i + 0.5) * pixel_size).  peak_cps is the
    detected peak rate.  Consecutive frames shift every emitter by
    drift_nm_per_frame, emulating slow stage drift.
    """
    ny, nx = shape_px
    if ny < 1 or nx < 1:
        raise ValidationError("map must have at least one pixel")
    if psf_fwhm_nm <= 0:
        raise ValidationError("spot size must be > 0")
    if dwell_ms <= 0:
        raise ValidationError("dwell time must be > 0")
    if n_frames < 1:
        raise ValidationError("need at least one frame")
    emitters = [(float(x), float(y), float(p)) for x, y, p in emitters]
    if any(p < 0 for _, _, p in emitters):
        raise ValidationError("peak rates must be >= 0")
    sigma = psf_fwhm_nm / _FWHM_TO_SIGMA
    dwell_s = dwell_ms / 1000.0
    xc = (np.arange(nx) + 0.5) * pixel_size_nm
    yc = (np.arange(ny) + 0.5) * pixel_size_nm
    xx, yy = np.meshgrid(xc, yc)
    rng = default_rng(SeedSequence(int(seed)))
    dx, dy = drift_nm_per_frame
    frames = []
    for f in range(n_frames):
        expected = np.full((ny, nx), background_cps * dwell_s)
        for ex, ey, peak in emitters:
            px, py = ex + f * dx, ey + f * dy
            expected += peak * dwell_s * np.exp(
                -((xx - px) ** 2 + (yy - py) ** 2) / (2.0 * sigma**2)
            )
        values = rng.poisson(expected).astype(float) if poisson_noise else expected
        frames.append(PLMap(values=values, pixel_size_nm=float(pixel_size_nm),
                            dwell_ms=float(dwell_ms)))
    return frames


# ---------------------------------------------------------------------------
# closed-form relations between configuration and g2(0)


def signal_prob_per_channel(model, inst, laser_axis_deg=None, power_scale=1.0):
    """Per-pulse detected signal probability on one detector (no analyzer)."""
    axis = model.exc_axis_deg if laser_axis_deg is None else laser_axis_deg
    p = excitation_probability(model, axis, power_scale)
    return p * inst.detection_efficiency * inst.splitter_ratio


def expected_g2_zero(model, inst, laser_axis_deg=None, power_scale=1.0):
    """Same-pulse correlation implied by signal and dark rates.

    With per-channel signal probability s and uncorrelated background
    probability b per pulse, the center-to-side peak ratio approaches
    1 - (s / (s + b))^2.
    """
    s = signal_prob_per_channel(model, inst, laser_axis_deg, power_scale)
    b = inst.dark_rate_cps * inst.sync_period_ps * 1e-12
    rho = s / (s + b) if s + b > 0 else 0.0
    return 1.0 - rho * rho


def dark_rate_for_g2(target_g2, model, inst, laser_axis_deg=None, power_scale=1.0):
    """Dark rate (cps per detector) that yields a target same-pulse g2."""
    if not (0.0 <= target_g2 < 1.0):
        raise ValidationError("target g2 must be in [0, 1)")
    s = signal_prob_per_channel(model, inst, laser_axis_deg, power_scale)
    rho = math.sqrt(1.0 - target_g2)
    b = s * (1.0 / rho - 1.0)
    return b / (inst.sync_period_ps * 1e-12)
