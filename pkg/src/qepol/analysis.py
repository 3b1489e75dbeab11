"""Analysis chain: from raw time-tag streams and detector maps to
physical quantities (g2(0), lifetime, polarization visibility and axis,
relaxation dynamics, spot fluxes, cohort angle statistics).

All estimators here are deterministic functions of their inputs; every
randomized step in the package lives in the simulator.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import fitting
from ._kernels import pair_delay_histogram
from .errors import FitError, ValidationError
from .geometry import (
    AxialAngle,
    axis_distance,
    axis_signed_difference,
    nearest_crystal_axis,
    wrap_axis,
)

__all__ = [
    "PolarSweep",
    "DecayMap",
    "CorrelationResult",
    "G2Estimate",
    "LifetimeFit",
    "SweepAnalysis",
    "PolarizationDynamics",
    "RelaxationFit",
    "ShgAnalysis",
    "SpotFlux",
    "Clustering",
    "DipoleRecord",
    "AngleStats",
    "correlate_g2",
    "estimate_g2_zero",
    "measure_g2",
    "decay_histogram",
    "fit_lifetime",
    "analyze_polarization_sweep",
    "extract_polarization_dynamics",
    "fit_relaxation",
    "analyze_shg_sweep",
    "power_law_exponent",
    "integrate_spot",
    "two_means_split",
    "orthogonal_regression",
    "synthetic_dipole_cohort",
    "angle_statistics",
]

_FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


# ---------------------------------------------------------------------------
# shared data products


@dataclass
class PolarSweep:
    """Intensity versus analyzer (or pump) angle.

    intensities are integrated counts per angle over acquisition_s seconds;
    errors are 1-sigma count uncertainties.
    """

    angles_deg: np.ndarray
    intensities: np.ndarray
    errors: np.ndarray
    acquisition_s: float = 1.0

    def __post_init__(self):
        self.angles_deg = np.asarray(self.angles_deg, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.angles_deg.ndim != 1 or self.angles_deg.size == 0:
            raise ValidationError("sweep must contain at least one angle")
        if self.intensities.shape != self.angles_deg.shape:
            raise ValidationError("intensities shape does not match angles")
        if self.errors.shape != self.angles_deg.shape:
            raise ValidationError("errors shape does not match angles")
        if np.any(self.errors <= 0):
            raise ValidationError("errors must be > 0")
        if self.acquisition_s <= 0:
            raise ValidationError("acquisition time must be > 0")


@dataclass
class DecayMap:
    """2-d histogram: counts per (delay bin, analyzer angle).

    time_edges_ps must be uniform and ascending; counts has shape
    (n_time_bins, n_angles).
    """

    time_edges_ps: np.ndarray
    angles_deg: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.time_edges_ps = np.asarray(self.time_edges_ps, dtype=float)
        self.angles_deg = np.asarray(self.angles_deg, dtype=float)
        self.counts = np.asarray(self.counts)
        if self.time_edges_ps.ndim != 1 or self.time_edges_ps.size < 2:
            raise ValidationError("need at least one time bin")
        widths = np.diff(self.time_edges_ps)
        if np.any(widths <= 0):
            raise ValidationError("time edges must be strictly ascending")
        if not np.allclose(widths, widths[0], rtol=1e-9, atol=1e-6):
            raise ValidationError("time bins must be uniform")
        if self.counts.shape != (self.time_edges_ps.size - 1, self.angles_deg.size):
            raise ValidationError(
                f"counts shape {self.counts.shape} does not match "
                f"({self.time_edges_ps.size - 1}, {self.angles_deg.size})"
            )
        if np.any(self.counts < 0):
            raise ValidationError("counts must be >= 0")

    @property
    def bin_width_ps(self):
        return float(self.time_edges_ps[1] - self.time_edges_ps[0])

    @property
    def time_centers_ps(self):
        return 0.5 * (self.time_edges_ps[:-1] + self.time_edges_ps[1:])


# ---------------------------------------------------------------------------
# correlation / g2


@dataclass
class CorrelationResult:
    """Cross-correlation histogram between two detector channels."""

    delays_ps: np.ndarray
    counts: np.ndarray
    bin_ps: int
    n_start: int
    n_stop: int

    @property
    def delays_ns(self):
        return self.delays_ps / 1000.0


def correlate_g2(stream, max_delay_ns, bin_ps, channels=(0, 1)):
    """Histogram all pair delays (stop - start) within +/- max_delay_ns.

    Every pair inside the window is counted (multi-stop), not just nearest
    neighbours, so side peaks are unbiased at any rate.  Zero delay falls in
    the exact center bin.
    """
    bin_ps = int(bin_ps)
    if bin_ps <= 0:
        raise ValidationError("bin width must be > 0")
    max_delay_ps = int(round(max_delay_ns * 1000.0))
    if max_delay_ps < bin_ps:
        raise ValidationError("delay window must cover at least one bin")
    ch = np.asarray(stream.channels)
    ts = np.asarray(stream.timestamps_ps)
    t_start = ts[ch == channels[0]]
    t_stop = ts[ch == channels[1]]
    if t_start.size == 0 or t_stop.size == 0:
        raise ValidationError(f"no events on channel pair {channels}")
    counts = pair_delay_histogram(t_start, t_stop, max_delay_ps, bin_ps)
    nbins = counts.size
    centers = (np.arange(nbins) - nbins // 2) * float(bin_ps) + (bin_ps % 2) * 0.5
    return CorrelationResult(
        delays_ps=centers,
        counts=counts,
        bin_ps=bin_ps,
        n_start=int(t_start.size),
        n_stop=int(t_stop.size),
    )


@dataclass
class G2Estimate:
    """Ratio estimate of the same-pulse correlation from a pulsed histogram."""

    value: float
    error: float
    n_center: int
    n_side_total: int
    n_side_peaks: int
    period_ps: float
    window_fraction: float


def estimate_g2_zero(corr, period_ps, window_fraction=1.0):
    """Normalized center-peak area of a pulsed correlation histogram.

    Bins are assigned to their nearest comb peak k * period; a peak's counts
    are summed over the central window_fraction of the period around it.
    The estimate is N_center / mean(N_side) over all complete side peaks,
    with a Poisson error propagated from both numerator and denominator.
    """
    if not (0.0 < window_fraction <= 1.0):
        raise ValidationError("window_fraction must be in (0, 1]")
    if period_ps <= 0:
        raise ValidationError("period must be > 0")
    c = np.asarray(corr.delays_ps, dtype=float)
    y = np.asarray(corr.counts)
    half_w = window_fraction * period_ps / 2.0
    peak_idx = np.floor(c / period_ps + 0.5).astype(int)
    in_window = np.abs(c - peak_idx * period_ps) <= half_w + 1e-9
    # a side peak only counts when its full window fits inside the histogram
    lo_edge, hi_edge = c[0] - corr.bin_ps / 2.0, c[-1] + corr.bin_ps / 2.0
    k_lo = int(math.ceil((lo_edge + half_w) / period_ps))
    k_hi = int(math.floor((hi_edge - half_w) / period_ps))
    side_ks = [k for k in range(k_lo, k_hi + 1) if k != 0]
    if not side_ks or k_lo > 0 or k_hi < 0:
        raise ValidationError("delay window covers no complete side peak")
    n_center = int(np.sum(y[(peak_idx == 0) & in_window]))
    side_counts = np.array(
        [int(np.sum(y[(peak_idx == k) & in_window])) for k in side_ks], dtype=float
    )
    n_side_total = int(side_counts.sum())
    if n_side_total == 0:
        raise ValidationError("side peaks contain no counts; cannot normalize")
    side_mean = n_side_total / len(side_ks)
    value = n_center / side_mean
    error = value * math.sqrt(1.0 / max(n_center, 1) + 1.0 / n_side_total) if n_center else (
        math.sqrt(1.0) / side_mean
    )
    return G2Estimate(
        value=float(value),
        error=float(error),
        n_center=n_center,
        n_side_total=n_side_total,
        n_side_peaks=len(side_ks),
        period_ps=float(period_ps),
        window_fraction=float(window_fraction),
    )


def measure_g2(stream, n_periods=10, bin_ps=100, window_fraction=1.0):
    """Convenience driver: correlate a stream and estimate g2(0).

    Returns (CorrelationResult, G2Estimate).  The delay window spans
    n_periods pulse periods on each side, ending between peaks so the
    outermost side peaks stay complete.
    """
    period_ps = stream.sync_period_ps
    max_delay_ns = (n_periods + 0.5) * period_ps / 1000.0
    corr = correlate_g2(stream, max_delay_ns, bin_ps)
    est = estimate_g2_zero(corr, period_ps, window_fraction)
    return corr, est


# ---------------------------------------------------------------------------
# lifetime


def decay_histogram(stream, bin_ps=50, channel=None, origin_ps=0):
    """Fold timestamps onto the pulse period; returns (centers_ns, counts).

    origin_ps shifts the fold origin (a negative value moves the rising
    edge of the decay away from the wrap point, where jitter would split
    it across both ends).  Tags beyond the last full bin (when the bin
    width does not divide the period) are dropped.
    """
    bin_ps = int(bin_ps)
    if bin_ps <= 0:
        raise ValidationError("bin width must be > 0")
    period = int(stream.sync_period_ps)
    if bin_ps > period:
        raise ValidationError("bin width exceeds the pulse period")
    ts = np.asarray(stream.timestamps_ps)
    if channel is not None:
        ts = ts[np.asarray(stream.channels) == channel]
    if ts.size == 0:
        raise ValidationError("no events to histogram")
    nbins = period // bin_ps
    folded = np.mod(ts - int(origin_ps), period) // bin_ps
    counts = np.bincount(folded[folded < nbins].astype(np.intp), minlength=nbins)
    centers_ns = (np.arange(nbins) + 0.5) * bin_ps / 1000.0
    return centers_ns, counts


@dataclass
class LifetimeFit:
    """Result of fitting a folded decay histogram."""

    tau_ns: float
    tau_err_ns: float
    t0_ns: float
    irf_sigma_ns: float
    amplitude: float
    background: float
    fit: fitting.FitResult
    centers_ns: np.ndarray
    counts: np.ndarray


def fit_lifetime(stream, bin_ps=50, channel=None, origin_ps=-2000):
    """Measure the excited-state lifetime from a time-tag stream.

    Builds the folded decay histogram (with the fold origin shifted so the
    rising edge sits clear of the wrap point) and fits the
    Gaussian-convolved exponential; the instrument response width is a
    free parameter.
    """
    centers_ns, counts = decay_histogram(stream, bin_ps, channel, origin_ps)
    fr = fitting.fit_decay_histogram(centers_ns, counts)
    if not fr.converged:
        raise FitError(f"lifetime fit did not converge: {fr.message}")
    amp, tau, t0, sig, bg = fr.params
    return LifetimeFit(
        tau_ns=float(tau),
        tau_err_ns=float(fr.errors[1]),
        t0_ns=float(t0),
        irf_sigma_ns=float(sig),
        amplitude=float(amp),
        background=float(bg),
        fit=fr,
        centers_ns=centers_ns,
        counts=counts,
    )


# ---------------------------------------------------------------------------
# polarization sweeps


@dataclass
class SweepAnalysis:
    """Cosine-squared fit of one polarization sweep."""

    amplitude: float
    visibility: float
    axis_deg: AxialAngle
    amplitude_err: float
    visibility_err: float
    axis_err_deg: float
    background: float
    axis_undefined: bool
    fit: fitting.FitResult


def analyze_polarization_sweep(sweep, background=0.0):
    """Fit visibility and axis of a polarization sweep.

    The background (e.g. independently measured dark counts per angle step)
    is subtracted inside the model rather than fitted: on this curve a free
    offset is fully degenerate with the amplitude/visibility pair.
    When the modulation is consistent with zero the axis is flagged
    undefined and its error is set to 90 degrees.
    """
    if np.unique(np.mod(sweep.angles_deg, 180.0)).size < 8:
        raise ValidationError("need at least 8 distinct angles (mod 180)")
    fr = fitting.fit_cosine_squared(
        sweep.angles_deg, sweep.intensities, sweep.errors, background
    )
    amp, vis, axis = fr.params
    amp_e, vis_e, ax_e = fr.errors
    undefined = bool(vis <= 2.0 * vis_e) or not np.isfinite(ax_e) or ax_e > 45.0
    if undefined:
        ax_e = 90.0
    return SweepAnalysis(
        amplitude=float(amp),
        visibility=float(vis),
        axis_deg=AxialAngle(axis),
        amplitude_err=float(amp_e),
        visibility_err=float(vis_e),
        axis_err_deg=float(ax_e),
        background=float(background),
        axis_undefined=undefined,
        fit=fr,
    )


# ---------------------------------------------------------------------------
# time-resolved polarization dynamics


@dataclass
class PolarizationDynamics:
    """Per-time-bin polarization state extracted from a DecayMap."""

    t_ns: np.ndarray
    visibility: np.ndarray
    visibility_err: np.ndarray
    axis_deg: np.ndarray
    axis_err_deg: np.ndarray
    counts: np.ndarray
    axis_undefined: np.ndarray
    t_cut_ps: float
    min_counts_per_bin: int

    @property
    def n_bins(self):
        return self.t_ns.size


def extract_polarization_dynamics(dmap, min_counts_per_bin=2000, t_cut_ps=120.0):
    """Time-resolved visibility and axis from a delay-angle count map.

    Rows whose bin centers lie within t_cut_ps of either end of the delay
    window are discarded: the pump response contaminates the first rows,
    and because the delay axis folds at the pulse period, detector jitter
    wraps the pulse onset into the last rows.  Remaining rows are merged greedily
    in time order until each merged bin holds at least min_counts_per_bin
    counts; a trailing remainder below the threshold joins the last bin,
    and a threshold above the total count collapses everything into a
    single bin (the fully integrated sweep).  Each merged bin is then
    fitted like an ordinary polarization sweep, with the bin time taken as
    the count-weighted mean of its row centers.
    """
    if min_counts_per_bin < 1:
        raise ValidationError("min_counts_per_bin must be >= 1")
    centers = dmap.time_centers_ps
    span_end = float(dmap.time_edges_ps[-1])
    keep = (centers >= t_cut_ps) & (centers <= span_end - t_cut_ps)
    if not np.any(keep):
        raise ValidationError("time cut removes every bin")
    rows = dmap.counts[keep].astype(float)
    centers = centers[keep]
    row_totals = rows.sum(axis=1)
    if row_totals.sum() <= 0:
        raise ValidationError("no counts remain after the time cut")
    groups = []
    start = 0
    acc = 0.0
    for i in range(rows.shape[0]):
        acc += row_totals[i]
        if acc >= min_counts_per_bin:
            groups.append((start, i + 1))
            start, acc = i + 1, 0.0
    if start < rows.shape[0]:
        if groups:
            groups[-1] = (groups[-1][0], rows.shape[0])
        else:
            groups.append((0, rows.shape[0]))

    t_ns, vis, vis_e, ax, ax_e, totals, undef = [], [], [], [], [], [], []
    for lo, hi in groups:
        block = rows[lo:hi]
        y = block.sum(axis=0)
        w = row_totals[lo:hi]
        t_c = float(np.average(centers[lo:hi], weights=w)) if w.sum() > 0 else float(
            np.mean(centers[lo:hi])
        )
        sweep = PolarSweep(dmap.angles_deg, y, np.sqrt(np.maximum(y, 1.0)))
        sa = analyze_polarization_sweep(sweep)
        t_ns.append(t_c / 1000.0)
        vis.append(sa.visibility)
        vis_e.append(sa.visibility_err)
        ax.append(float(sa.axis_deg))
        ax_e.append(sa.axis_err_deg)
        totals.append(float(y.sum()))
        undef.append(sa.axis_undefined)
    return PolarizationDynamics(
        t_ns=np.asarray(t_ns),
        visibility=np.asarray(vis),
        visibility_err=np.asarray(vis_e),
        axis_deg=np.asarray(ax),
        axis_err_deg=np.asarray(ax_e),
        counts=np.asarray(totals),
        axis_undefined=np.asarray(undef, dtype=bool),
        t_cut_ps=float(t_cut_ps),
        min_counts_per_bin=int(min_counts_per_bin),
    )


@dataclass
class RelaxationFit:
    """Exponential relaxation of visibility and axis toward steady state."""

    visibility_ss: float
    visibility_ss_err: float
    visibility_delta: float
    relax_ns: float
    relax_err_ns: float
    axis_ss_deg: AxialAngle
    axis_ss_err_deg: float
    axis_delta_deg: float
    visibility_fit: fitting.FitResult


def fit_relaxation(dyn):
    """Fit V(t) = V_ss - dV exp(-t/tau_r) and the matching axis drift.

    The relaxation time is determined from the visibility curve; the axis
    curve is then fitted linearly with that time constant held fixed
    (axis(t) = axis_ss + d_axis * exp(-t/tau_r)), after unwrapping the
    axis samples around their median.
    """
    if dyn.n_bins < 4:
        raise FitError("need at least 4 time bins to fit relaxation")
    t = dyn.t_ns
    span = float(t[-1] - t[0]) if t.size > 1 else 1.0

    def model(tt, vss, dv, tau):
        return vss - dv * np.exp(-tt / tau)

    p0 = [float(dyn.visibility[-1]), float(dyn.visibility[-1] - dyn.visibility[0]),
          max(span / 3.0, 1e-3)]
    fr = fitting.fit_curve(
        model, t, dyn.visibility, dyn.visibility_err, p0,
        bounds=([0.0, -2.0, 1e-4], [1.5, 2.0, np.inf]),
    )
    vss, dv, tau = fr.params
    # axis relaxation shares tau: linear in (axis_ss, d_axis)
    med = float(np.median(dyn.axis_deg))
    ax = med + axis_signed_difference(dyn.axis_deg, med)
    basis = np.stack([np.ones_like(t), np.exp(-t / tau)], axis=-1)
    w = 1.0 / np.maximum(dyn.axis_err_deg, 1e-6)
    coef, *_ = np.linalg.lstsq(basis * w[:, None], ax * w, rcond=None)
    try:
        cov_ax = np.linalg.inv((basis * w[:, None]).T @ (basis * w[:, None]))
    except np.linalg.LinAlgError:
        cov_ax = np.full((2, 2), np.nan)
    return RelaxationFit(
        visibility_ss=float(vss),
        visibility_ss_err=float(fr.errors[0]),
        visibility_delta=float(dv),
        relax_ns=float(tau),
        relax_err_ns=float(fr.errors[2]),
        axis_ss_deg=AxialAngle(coef[0]),
        axis_ss_err_deg=float(math.sqrt(max(cov_ax[0, 0], 0.0))),
        axis_delta_deg=float(coef[1]),
        visibility_fit=fr,
    )


# ---------------------------------------------------------------------------
# frequency-doubled crystal-orientation sweeps


@dataclass
class ShgAnalysis:
    """Six-lobed angular fit of a frequency-doubled intensity sweep."""

    axis_deg: float
    axis_err_deg: float
    amplitude: float
    background: float
    fit: fitting.FitResult


def analyze_shg_sweep(sweep):
    """Fit the six-lobed angular response; axis is reported modulo 60."""
    if np.unique(np.mod(sweep.angles_deg, 60.0)).size < 4:
        raise ValidationError("need at least 4 distinct angles (mod 60)")
    fr = fitting.fit_sixfold(sweep.angles_deg, sweep.intensities, sweep.errors)
    amp, axis, bg = fr.params
    return ShgAnalysis(
        axis_deg=float(axis % 60.0),
        axis_err_deg=float(fr.errors[1]),
        amplitude=float(amp),
        background=float(bg),
        fit=fr,
    )


def power_law_exponent(powers, amplitudes, amplitude_errs=None):
    """Log-log slope of amplitude versus pump power; returns (slope, err).

    A quadratic response gives slope 2.
    """
    p = np.asarray(powers, dtype=float)
    a = np.asarray(amplitudes, dtype=float)
    if p.size < 2:
        raise ValidationError("need at least two power points")
    if np.any(p <= 0) or np.any(a <= 0):
        raise ValidationError("powers and amplitudes must be > 0")
    x, y = np.log(p), np.log(a)
    if amplitude_errs is None:
        w = np.ones_like(y)
    else:
        w = a / np.asarray(amplitude_errs, dtype=float)
    basis = np.stack([x, np.ones_like(x)], axis=-1)
    coef, *_ = np.linalg.lstsq(basis * w[:, None], y * w, rcond=None)
    try:
        cov = np.linalg.inv((basis * w[:, None]).T @ (basis * w[:, None]))
        err = math.sqrt(max(cov[0, 0], 0.0))
    except np.linalg.LinAlgError:
        err = math.nan
    return float(coef[0]), float(err)


# ---------------------------------------------------------------------------
# confocal map spot integration


@dataclass
class SpotFlux:
    """Integrated flux of one emission spot on a scan map."""

    flux: float
    flux_err: float
    center_px: tuple
    sigma_px: float
    background: float
    method: str
    fit: object = None


def _gauss2d(xy, amp, x0, y0, sigma, bg):
    x, y = xy
    return bg + amp * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2.0 * sigma**2))


def integrate_spot(plmap, approx_center_px, roi_half_px=6):
    """Integrate one diffraction-limited spot on a scan map.

    approx_center_px is (x, y) in pixel units (x = column index).  A
    symmetric 2-d Gaussian with flat offset is fitted inside the square ROI
    and the flux is its analytic volume 2*pi*amp*sigma^2.  If the fit fails
    the ROI sum above the median background is returned instead
    (method == "sum").
    """
    values = np.asarray(getattr(plmap, "values", plmap), dtype=float)
    if values.ndim != 2:
        raise ValidationError("map must be 2-d")
    cx, cy = (int(round(approx_center_px[0])), int(round(approx_center_px[1])))
    x_lo, x_hi = max(cx - roi_half_px, 0), min(cx + roi_half_px + 1, values.shape[1])
    y_lo, y_hi = max(cy - roi_half_px, 0), min(cy + roi_half_px + 1, values.shape[0])
    if x_hi - x_lo < 3 or y_hi - y_lo < 3:
        raise ValidationError("region of interest is too small or off the map")
    roi = values[y_lo:y_hi, x_lo:x_hi]
    yy, xx = np.mgrid[y_lo:y_hi, x_lo:x_hi]
    xf, yf, zf = xx.ravel().astype(float), yy.ravel().astype(float), roi.ravel()
    bg0 = float(np.median(roi))
    amp0 = max(float(roi.max()) - bg0, 1e-9)
    sig = np.sqrt(np.maximum(zf, 1.0))

    def model(i, amp, x0, y0, s, bg):
        return _gauss2d((xf, yf), amp, x0, y0, s, bg)

    fr = fitting.fit_curve(
        model, np.arange(zf.size, dtype=float), zf, sig,
        [amp0, float(cx), float(cy), 1.5, bg0],
        bounds=([0.0, x_lo - 1.0, y_lo - 1.0, 0.3, 0.0],
                [np.inf, x_hi + 0.0, y_hi + 0.0, float(roi_half_px) * 2.0, np.inf]),
    )
    amp, x0, y0, s, bg = fr.params
    # reject rail-pinned or non-converged fits
    ok = fr.converged and 0.3 < s < roi_half_px * 1.9 and amp > 0
    if ok:
        flux = 2.0 * math.pi * amp * s * s
        grad = np.array([2 * math.pi * s * s, 0.0, 0.0, 4 * math.pi * amp * s, 0.0])
        var = float(grad @ fr.covariance @ grad)
        return SpotFlux(
            flux=float(flux),
            flux_err=math.sqrt(max(var, 0.0)),
            center_px=(float(x0), float(y0)),
            sigma_px=float(s),
            background=float(bg),
            method="gaussian",
            fit=fr,
        )
    net = float(np.sum(roi - bg0))
    return SpotFlux(
        flux=net,
        flux_err=math.sqrt(max(float(np.sum(roi)), 1.0)),
        center_px=(float(cx), float(cy)),
        sigma_px=math.nan,
        background=bg0,
        method="sum",
        fit=fr,
    )


# ---------------------------------------------------------------------------
# cohort statistics


@dataclass
class Clustering:
    """Two-group 1-d clustering result (labels follow init order)."""

    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iterations: int
    converged: bool


def two_means_split(values, init_centers=(-15.0, 15.0), max_iter=200):
    """Deterministic 1-d two-means clustering.

    Centers start at init_centers; points equidistant from both centers go
    to the first cluster.  A cluster that empties keeps its center.  The
    labels refer to init order (0 = first init center).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValidationError("need at least two values to cluster")
    c = np.asarray(init_centers, dtype=float).copy()
    if c.shape != (2,) or c[0] == c[1]:
        raise ValidationError("init_centers must be two distinct values")
    labels = np.zeros(v.size, dtype=int)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = np.where(np.abs(v - c[0]) <= np.abs(v - c[1]), 0, 1)
        for k in (0, 1):
            if np.any(new == k):
                c[k] = float(np.mean(v[new == k]))
        if np.array_equal(new, labels) and it > 1:
            converged = True
            break
        labels = new
    inertia = float(np.sum((v - c[labels]) ** 2))
    return Clustering(labels=labels, centers=c, inertia=inertia,
                      n_iterations=it, converged=converged)


def orthogonal_regression(x, y):
    """Total-least-squares line through (x, y): returns (slope, intercept).

    The line is the major principal axis of the point cloud, treating both
    coordinates symmetrically.  Raises FitError for a vertical line.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValidationError("need matching arrays with at least two points")
    mx, my = float(np.mean(x)), float(np.mean(y))
    cov = np.cov(x, y)
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, int(np.argmax(vals))]
    if abs(v[0]) < 1e-12:
        raise FitError("principal axis is vertical; slope undefined")
    slope = float(v[1] / v[0])
    return slope, my - slope * mx


@dataclass
class DipoleRecord:
    """Measured dipole orientation summary for one emitter."""

    emitter_id: int
    exc_axis_deg: float
    em_axis_deg: float
    exc_axis_err_deg: float = 0.0
    em_axis_err_deg: float = 0.0
    exc_visibility: float = math.nan
    em_visibility: float = math.nan
    g2_zero: float = math.nan
    lifetime_ns: float = math.nan

    def __post_init__(self):
        self.exc_axis_deg = float(wrap_axis(self.exc_axis_deg))
        self.em_axis_deg = float(wrap_axis(self.em_axis_deg))


def synthetic_dipole_cohort(
    n,
    crystal,
    seed=0,
    exc_offset_mean_deg=6.0,
    exc_offset_fwhm_deg=8.0,
    misalignment_mean_deg=18.9,
    em_offset_fwhm_deg=4.0,
):
    """Generate a cohort of emitters with crystal-locked dipole axes.

    Each emitter picks one symmetry-equivalent crystal axis and a random
    rotation sense.  Its excitation axis sits exc_offset (Gaussian, given
    mean and width) to that side of the crystal axis; its emission axis
    sits on the same side at exc_offset_mean - misalignment_mean on
    average, with its own width, so emission offsets form two mirror
    clusters and the emission-excitation misalignment averages
    misalignment_mean_deg.
    """
    if n < 1:
        raise ValidationError("need at least one emitter")
    rng = np.random.default_rng(seed)
    axes = crystal.axes
    pick = rng.integers(0, len(axes), size=n)
    side = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    exc_off = side * rng.normal(exc_offset_mean_deg, exc_offset_fwhm_deg / _FWHM_TO_SIGMA, n)
    em_off = side * rng.normal(
        exc_offset_mean_deg - misalignment_mean_deg, em_offset_fwhm_deg / _FWHM_TO_SIGMA, n
    )
    lifetimes = rng.normal(4.0, 0.2, n)
    g2s = np.clip(rng.normal(0.03, 0.01, n), 0.001, None)
    exc_vis = np.clip(rng.normal(0.95, 0.02, n), 0.0, 1.0)
    em_vis = np.clip(rng.normal(0.95, 0.02, n), 0.0, 1.0)
    records = []
    for i in range(n):
        base = axes[int(pick[i])]
        records.append(
            DipoleRecord(
                emitter_id=i,
                exc_axis_deg=base + exc_off[i],
                em_axis_deg=base + em_off[i],
                exc_axis_err_deg=0.5,
                em_axis_err_deg=0.5,
                exc_visibility=float(exc_vis[i]),
                em_visibility=float(em_vis[i]),
                g2_zero=float(g2s[i]),
                lifetime_ns=float(lifetimes[i]),
            )
        )
    return records


@dataclass
class AngleStats:
    """Cohort-level statistics of dipole axes relative to crystal axes."""

    n: int
    exc_offsets_deg: np.ndarray
    em_offsets_deg: np.ndarray
    misalignment_deg: np.ndarray
    misalignment_signed_deg: np.ndarray
    exc_offset_mean_deg: float
    exc_offset_std_deg: float
    em_offset_mean_deg: float
    em_offset_std_deg: float
    misalignment_mean_deg: float
    misalignment_std_deg: float
    clusters: Clustering
    cluster_means_deg: tuple
    slope: float
    intercept_deg: float

    def to_dict(self):
        return {
            "n": self.n,
            "exc_offset_mean_deg": self.exc_offset_mean_deg,
            "exc_offset_std_deg": self.exc_offset_std_deg,
            "em_offset_mean_deg": self.em_offset_mean_deg,
            "em_offset_std_deg": self.em_offset_std_deg,
            "misalignment_mean_deg": self.misalignment_mean_deg,
            "misalignment_std_deg": self.misalignment_std_deg,
            "cluster_means_deg": list(self.cluster_means_deg),
            "cluster_sizes": [
                int(np.sum(self.clusters.labels == 0)),
                int(np.sum(self.clusters.labels == 1)),
            ],
            "slope": self.slope,
            "intercept_deg": self.intercept_deg,
        }


def angle_statistics(records, crystal):
    """Summarize a cohort of DipoleRecords against a crystal-axis family.

    Offsets are signed distances to the nearest symmetry-equivalent axis;
    misalignment is the (unsigned) axial distance between each emitter's
    emission and excitation axes, with a signed version alongside.
    Emission offsets are clustered into the two mirror groups, and an
    orthogonal-regression line relates emission to excitation offsets.
    """
    if not records:
        raise ValidationError("cohort is empty")
    exc = np.array([r.exc_axis_deg for r in records])
    em = np.array([r.em_axis_deg for r in records])
    exc_off = np.array([nearest_crystal_axis(a, crystal)[1] for a in exc])
    em_off = np.array([nearest_crystal_axis(a, crystal)[1] for a in em])
    mis_signed = axis_signed_difference(em, exc)
    mis_abs = axis_distance(em, exc)
    clusters = two_means_split(em_off)
    means = tuple(
        float(np.mean(em_off[clusters.labels == k])) if np.any(clusters.labels == k)
        else math.nan
        for k in (0, 1)
    )
    try:
        slope, intercept = orthogonal_regression(exc_off, em_off)
    except FitError:
        slope, intercept = math.nan, math.nan
    return AngleStats(
        n=len(records),
        exc_offsets_deg=exc_off,
        em_offsets_deg=em_off,
        misalignment_deg=np.asarray(mis_abs),
        misalignment_signed_deg=np.asarray(mis_signed),
        exc_offset_mean_deg=float(np.mean(exc_off)),
        exc_offset_std_deg=float(np.std(exc_off, ddof=1)) if len(records) > 1 else 0.0,
        em_offset_mean_deg=float(np.mean(em_off)),
        em_offset_std_deg=float(np.std(em_off, ddof=1)) if len(records) > 1 else 0.0,
        misalignment_mean_deg=float(np.mean(mis_abs)),
        misalignment_std_deg=float(np.std(mis_abs, ddof=1)) if len(records) > 1 else 0.0,
        clusters=clusters,
        cluster_means_deg=means,
        slope=slope,
        intercept_deg=intercept,
    )
