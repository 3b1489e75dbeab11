"""Weighted least-squares fitting: a Levenberg-Marquardt core plus the
closed-form models used throughout the analysis chain.

The solver is self-contained on purpose: every quantitative result in this
package flows through it, so its stepping rules, stopping rules and
covariance conventions are pinned down here rather than delegated.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, erfcx

from .errors import FitError, ValidationError

__all__ = [
    "FitResult",
    "levenberg_marquardt",
    "finite_difference_jacobian",
    "cosine_squared_model",
    "cosine_squared_jacobian",
    "decay_histogram_model",
    "sixfold_model",
    "sixfold_jacobian",
    "pulsed_g2_model",
    "fit_curve",
    "fit_cosine_squared",
    "fit_decay_histogram",
    "fit_sixfold",
    "fit_pulsed_g2",
]


@dataclass
class FitResult:
    """Outcome of a least-squares minimization.

    covariance is the linearized estimate inv(J^T J) at the solution, with
    J the jacobian of the *weighted* residual vector; for residuals scaled
    by 1/sigma this is the standard parameter covariance.
    """

    params: np.ndarray
    covariance: np.ndarray
    cost: float
    reduced_chi2: float
    n_iterations: int
    converged: bool
    message: str = ""
    n_points: int = 0

    @property
    def errors(self):
        """1-sigma parameter uncertainties (sqrt of covariance diagonal)."""
        d = np.diag(self.covariance)
        return np.sqrt(np.where(d > 0, d, 0.0))


def finite_difference_jacobian(residuals, x, r0=None, bounds=None):
    """Central-difference jacobian of a residual vector at x.

    Steps are scaled to the parameter magnitude.  When one side of the
    stencil would leave the feasible box the difference degrades to
    one-sided.
    """
    x = np.asarray(x, dtype=float)
    if r0 is None:
        r0 = np.asarray(residuals(x), dtype=float)
    lo, hi = _unpack_bounds(bounds, x.size)
    jac = np.empty((r0.size, x.size))
    h_scale = float(np.finfo(float).eps) ** (1.0 / 3.0)
    for j in range(x.size):
        h = h_scale * max(abs(x[j]), 1.0)
        up = min(x[j] + h, hi[j])
        dn = max(x[j] - h, lo[j])
        if up == dn:
            jac[:, j] = 0.0
            continue
        xp = x.copy()
        xp[j] = up
        r_up = np.asarray(residuals(xp), dtype=float) if up != x[j] else r0
        xp[j] = dn
        r_dn = np.asarray(residuals(xp), dtype=float) if dn != x[j] else r0
        jac[:, j] = (r_up - r_dn) / (up - dn)
    return jac


def _unpack_bounds(bounds, n):
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo = np.asarray([-np.inf if b is None else b for b in bounds[0]], dtype=float)
    hi = np.asarray([np.inf if b is None else b for b in bounds[1]], dtype=float)
    if lo.size != n or hi.size != n:
        raise ValidationError("bounds length does not match parameter count")
    if np.any(lo > hi):
        raise ValidationError("lower bound exceeds upper bound")
    return lo, hi


def levenberg_marquardt(
    residuals,
    x0,
    jacobian=None,
    bounds=None,
    tol_g=1e-8,
    tol_x=1e-10,
    tol_f=1e-10,
    max_iter=200,
):
    """Minimize sum(residuals(x)**2) with damped Gauss-Newton steps.

    Damping follows the standard gain-ratio update: accepted steps shrink
    the damping by max(1/3, 1 - (2*rho - 1)^3), rejected steps grow it by a
    doubling factor.  The normal matrix is regularized with its own
    diagonal (Marquardt scaling), which keeps steps sane for badly scaled
    parameters.  Bounds are enforced by clipping trial points to the box.

    Convergence: tol_g bounds the largest cosine between the residual
    vector and any jacobian column (scale invariant; gradient components
    blocked by an active bound are ignored), tol_x bounds the relative
    step length, and tol_f the relative cost decrease (a step whose actual
    and predicted reductions are both below tol_f * cost ends the fit).

    residuals maps x -> 1-d array; jacobian (optional) maps x -> (m, n)
    array of d residual_i / d x_j.  Without it a forward-difference
    approximation is used.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1 or x.size == 0:
        raise ValidationError("x0 must be a non-empty 1-d array")
    lo, hi = _unpack_bounds(bounds, x.size)
    x = np.clip(x, lo, hi)

    def jac_at(xv, rv):
        if jacobian is not None:
            j = np.asarray(jacobian(xv), dtype=float)
            if j.shape != (rv.size, xv.size):
                raise ValidationError(f"jacobian shape {j.shape} != {(rv.size, xv.size)}")
            return j
        return finite_difference_jacobian(residuals, xv, rv, (lo, hi))

    def grad_measure(xv, jv, gv, cost_v):
        # largest |cos| between r and a jacobian column, with components
        # blocked by an active bound projected out
        gp = gv.copy()
        gp[(xv <= lo) & (gp > 0)] = 0.0
        gp[(xv >= hi) & (gp < 0)] = 0.0
        denom = np.sqrt((jv * jv).sum(axis=0)) * max(math.sqrt(cost_v), 1e-300)
        return float(np.max(np.abs(gp) / np.maximum(denom, 1e-300)))

    r = np.asarray(residuals(x), dtype=float)
    if r.ndim != 1:
        raise ValidationError("residuals must return a 1-d array")
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the starting point")
    cost = float(r @ r)
    jac = jac_at(x, r)
    a = jac.T @ jac
    g = jac.T @ r
    mu = 1e-3 * max(np.max(np.diag(a)), 1e-30)
    nu = 2.0
    converged = False
    message = "max iterations reached"
    it = 0

    for it in range(1, max_iter + 1):
        if cost == 0.0 or grad_measure(x, jac, g, cost) <= tol_g:
            converged, message = True, "gradient below tolerance"
            break
        d = np.maximum(np.diag(a), 1e-12 * max(np.max(np.diag(a)), 1.0))
        try:
            step = np.linalg.solve(a + mu * np.diag(d), -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(a + mu * np.diag(d), -g, rcond=None)[0]
        if np.linalg.norm(step) <= tol_x * (np.linalg.norm(x) + tol_x):
            converged, message = True, "step below tolerance"
            break
        x_new = np.clip(x + step, lo, hi)
        actual_step = x_new - x
        r_new = np.asarray(residuals(x_new), dtype=float)
        if np.all(np.isfinite(r_new)):
            cost_new = float(r_new @ r_new)
            # model reduction evaluated at the clipped step; the usual
            # p^T(mu*D*p - g) shortcut only holds for the unclipped solution
            predicted = -float(2.0 * (actual_step @ g) + actual_step @ (a @ actual_step))
        else:
            cost_new, predicted = np.inf, 1.0
        rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
        if rho > 0 and cost_new < cost:
            small = tol_f * max(cost, 1e-300)
            stop = (cost - cost_new) <= small and predicted <= small
            x, r, cost = x_new, r_new, cost_new
            jac = jac_at(x, r)
            a = jac.T @ jac
            g = jac.T @ r
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if stop:
                converged, message = True, "cost decrease below tolerance"
                break
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e32:
                message = "damping overflow (singular problem?)"
                break

    try:
        cov = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(a)
    cov = 0.5 * (cov + cov.T)
    dof = r.size - x.size
    red = cost / dof if dof > 0 else math.nan
    return FitResult(
        params=x,
        covariance=cov,
        cost=cost,
        reduced_chi2=red,
        n_iterations=it,
        converged=converged,
        message=message,
        n_points=r.size,
    )


# ---------------------------------------------------------------------------
# model functions


def cosine_squared_model(theta_deg, amplitude, visibility, axis_deg, background=0.0):
    """Analyzer-sweep intensity: B + A/2 (1 + V cos 2(theta - axis))."""
    delta = np.deg2rad(np.asarray(theta_deg, dtype=float) - axis_deg)
    return background + 0.5 * amplitude * (1.0 + visibility * np.cos(2.0 * delta))


def cosine_squared_jacobian(theta_deg, amplitude, visibility, axis_deg):
    """Analytic derivatives of cosine_squared_model w.r.t. (A, V, axis).

    The axis column is per degree of axis rotation.
    """
    delta = np.deg2rad(np.asarray(theta_deg, dtype=float) - axis_deg)
    c, s = np.cos(2.0 * delta), np.sin(2.0 * delta)
    d_amp = 0.5 * (1.0 + visibility * c)
    d_vis = 0.5 * amplitude * c
    d_axis = amplitude * visibility * s * (np.pi / 180.0)
    return np.stack([d_amp, d_vis, d_axis], axis=-1)


def decay_histogram_model(t_ns, amplitude, tau_ns, t0_ns, sigma_ns, background):
    """Exponential decay convolved with a Gaussian instrument response.

    Evaluated through the scaled complementary error function so that it
    stays finite far into the tail (the naive exp * erfc product overflows
    there).  sigma_ns == 0 degenerates to a sharp-onset exponential.
    An `amplitude` of A means unit-bin-area A for the decay component.
    """
    t = np.asarray(t_ns, dtype=float)
    if tau_ns <= 0:
        return np.full_like(t, np.inf)
    if sigma_ns < 0:
        return np.full_like(t, np.inf)
    if sigma_ns == 0.0:
        out = np.where(t >= t0_ns, np.exp(-np.clip((t - t0_ns) / tau_ns, 0, 700)), 0.0)
        return background + amplitude / tau_ns * out
    z = (t - t0_ns) / sigma_ns
    e = sigma_ns / tau_ns
    b = (e - z) / math.sqrt(2.0)
    # two algebraically equal branches, each finite where it is selected:
    # erfcx explodes for very negative arguments, the erfc form for large z
    out = np.empty_like(z)
    pos = b >= 0
    out[pos] = erfcx(b[pos]) * np.exp(-0.5 * z[pos] ** 2)
    neg = ~pos
    out[neg] = erfc(b[neg]) * np.exp(np.clip(0.5 * e * e - z[neg] * e, -700.0, 700.0))
    return background + amplitude / (2.0 * tau_ns) * out


def sixfold_model(theta_deg, amplitude, axis_deg, background):
    """Six-lobed angular response: B + A cos^2(3 (theta - axis))."""
    delta = np.deg2rad(np.asarray(theta_deg, dtype=float) - axis_deg)
    return background + amplitude * np.cos(3.0 * delta) ** 2


def sixfold_jacobian(theta_deg, amplitude, axis_deg):
    """Analytic derivatives of sixfold_model w.r.t. (A, axis, B)."""
    delta = np.deg2rad(np.asarray(theta_deg, dtype=float) - axis_deg)
    d_amp = np.cos(3.0 * delta) ** 2
    d_axis = 3.0 * amplitude * np.sin(6.0 * delta) * (np.pi / 180.0)
    d_bg = np.ones_like(d_amp)
    return np.stack([d_amp, d_axis, d_bg], axis=-1)


def pulsed_g2_model(delay_ns, peak_area, center_ratio, period_ns, tau_ns, background, n_side):
    """Coincidence histogram of a pulsed start-stop correlation.

    A comb of two-sided exponential peaks at integer multiples of the pulse
    period; the center peak carries area peak_area * center_ratio, the side
    peaks carry peak_area each.  Heights are per unit delay; multiply by the
    bin width for counts.
    """
    d = np.asarray(delay_ns, dtype=float)
    if tau_ns <= 0:
        return np.full_like(d, np.inf)
    out = np.full_like(d, float(background))
    for k in range(-n_side, n_side + 1):
        area = peak_area * center_ratio if k == 0 else peak_area
        out += area / (2.0 * tau_ns) * np.exp(-np.abs(d - k * period_ns) / tau_ns)
    return out


# ---------------------------------------------------------------------------
# fit drivers


def _weighted(model_fn, x, y, sigma):
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValidationError("uncertainties must be > 0")

    def residuals(p):
        return (model_fn(x, *p) - y) / sigma

    return residuals


def fit_curve(model_fn, x, y, sigma, p0, jacobian_fn=None, bounds=None, max_iter=200):
    """Weighted fit of y(x) to model_fn(x, *params); returns a FitResult."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be matching 1-d arrays")
    if len(p0) > x.size:
        raise FitError(f"{len(p0)} parameters but only {x.size} points")
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    res = _weighted(model_fn, x, y, sigma)
    jac = None
    if jacobian_fn is not None:
        def jac(p, _s=sigma):
            return jacobian_fn(x, *p) / _s[:, None]
    return levenberg_marquardt(
        res, np.asarray(p0, dtype=float), jacobian=jac, bounds=bounds, max_iter=max_iter
    )


def fit_cosine_squared(theta_deg, intensity, sigma=None, background=0.0):
    """Fit (amplitude, visibility, axis) of an analyzer sweep.

    The background is held fixed (a free background is degenerate with the
    amplitude/visibility pair on this model).  Multi-start over four axis
    seeds avoids the local minimum at the crossed orientation.  The fitted
    axis comes back wrapped to [0, 180).
    """
    theta = np.asarray(theta_deg, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if theta.ndim != 1 or theta.shape != y.shape:
        raise ValidationError("angles and intensities must be matching 1-d arrays")
    if np.unique(np.mod(theta, 180.0)).size < 4:
        raise FitError("need at least 4 distinct analyzer angles (mod 180)")
    if sigma is None:
        sigma = np.sqrt(np.maximum(y, 1.0))
    net = y - background
    top, bot = float(np.max(net)), float(np.min(net))
    amp0 = max(top + bot, 1e-12)
    v0 = min(max((top - bot) / amp0 if amp0 > 0 else 0.5, 0.05), 1.0)

    def model(th, a, v, ax):
        return cosine_squared_model(th, a, v, ax, background)

    def jac(th, a, v, ax):
        return cosine_squared_jacobian(th, a, v, ax)

    best = None
    for ax0 in (0.0, 45.0, 90.0, 135.0):
        try:
            fr = fit_curve(
                model, theta, y, sigma, [amp0, v0, ax0],
                jacobian_fn=jac,
                bounds=([0.0, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
            )
        except FitError:
            raise
        if best is None or fr.cost < best.cost:
            best = fr
    best.params[2] %= 180.0
    return best


_GL3_NODES = (-math.sqrt(0.6), 0.0, math.sqrt(0.6))
_GL3_WEIGHTS = (5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0)


def fit_decay_histogram(t_ns, counts, sigma=None, p0=None):
    """Fit a lifetime histogram to the Gaussian-convolved exponential.

    Parameters are (amplitude, tau_ns, t0_ns, sigma_ns, background).  Seeds
    are derived from the data when p0 is not given.

    The model is averaged over each bin (3-point Gauss-Legendre), which
    matters when the bin width is comparable to the instrument response:
    point evaluation at the bin center misshapes the rising edge and drags
    the other parameters with it.  When no per-bin uncertainties are given
    the fit runs twice, the second pass weighted by the first-pass model
    instead of the observed counts; sqrt(counts) weights on sparse tail
    bins otherwise bias the decay constant low.
    """
    t = np.asarray(t_ns, dtype=float)
    y = np.asarray(counts, dtype=float)
    dt = float(np.median(np.diff(t))) if t.size > 1 else 1.0
    if p0 is None:
        bg0 = max(float(np.percentile(y, 5)), 0.0)
        i_pk = int(np.argmax(y))
        t00 = float(t[i_pk])
        net = np.clip(y - bg0, 0.0, None)
        tail = net[i_pk:]
        # crude tau from the tail mean; good enough to seed
        tau0 = max(float(np.sum(tail * (t[i_pk:] - t00))) / max(float(np.sum(tail)), 1e-12), dt)
        amp0 = max(float(np.sum(net)) * dt, 1e-12)
        p0 = [amp0, tau0, t00, dt, bg0]

    def model(tv, *params):
        out = np.zeros_like(tv)
        for xi, w in zip(_GL3_NODES, _GL3_WEIGHTS):
            out += w * decay_histogram_model(tv + xi * (0.5 * dt), *params)
        return out

    bounds = ([0.0, 1e-6, -np.inf, 0.0, 0.0], [np.inf] * 5)
    if sigma is not None:
        return fit_curve(model, t, y, sigma, p0, bounds=bounds, max_iter=500)
    first = fit_curve(model, t, y, np.sqrt(np.maximum(y, 1.0)), p0, bounds=bounds, max_iter=500)
    sigma2 = np.sqrt(np.maximum(model(t, *first.params), 1.0))
    return fit_curve(model, t, y, sigma2, first.params, bounds=bounds, max_iter=500)


def fit_sixfold(theta_deg, intensity, sigma=None):
    """Fit (amplitude, axis, background) of a six-lobed angular sweep.

    Multi-start over axis seeds spanning one 60-degree period; the fitted
    axis comes back folded into [0, 60).
    """
    theta = np.asarray(theta_deg, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if theta.ndim != 1 or theta.shape != y.shape:
        raise ValidationError("angles and intensities must be matching 1-d arrays")
    if sigma is None:
        sigma = np.sqrt(np.maximum(y, 1.0))
    bg0 = max(float(np.min(y)), 0.0)
    amp0 = max(float(np.max(y)) - bg0, 1e-12)

    def model(th, a, ax, b):
        return sixfold_model(th, a, ax, b)

    def jac(th, a, ax, b):
        return sixfold_jacobian(th, a, ax)

    best = None
    for ax0 in (0.0, 10.0, 20.0, 30.0, 40.0, 50.0):
        fr = fit_curve(
            model, theta, y, sigma, [amp0, ax0, bg0],
            jacobian_fn=jac, bounds=([0.0, -np.inf, 0.0], [np.inf, np.inf, np.inf]),
        )
        if best is None or fr.cost < best.cost:
            best = fr
    best.params[1] %= 60.0
    return best


def fit_pulsed_g2(delay_ns, counts, period_ns, tau0_ns=4.0, sigma=None):
    """Fit a pulsed coincidence histogram to the exponential peak comb.

    Parameters are (peak_area, center_ratio, tau_ns, background) with the
    pulse period held fixed; center_ratio is the normalized center-peak
    area, i.e. the same-pulse correlation value.  The number of side peaks
    is taken from the delay span.
    """
    d = np.asarray(delay_ns, dtype=float)
    y = np.asarray(counts, dtype=float)
    if period_ns <= 0:
        raise ValidationError("period must be > 0")
    n_side = int(np.floor(np.max(np.abs(d)) / period_ns))
    if n_side < 1:
        raise FitError("delay span covers no side peaks; cannot normalize")
    bw = float(np.median(np.diff(d)))
    # area seed: counts within half a period of the first side peak
    side = np.abs(np.abs(d) - period_ns) < period_ns / 2
    area0 = max(float(np.sum(y[side]) * bw / 2.0), 1e-12)
    bg0 = max(float(np.percentile(y, 10)), 0.0)

    def model(x, area, ratio, tau, bg):
        # area and bg are in counts; the comb model is a per-ns density
        return bw * pulsed_g2_model(x, area, ratio, period_ns, tau, bg / bw, n_side)

    p0 = [area0, 0.05, tau0_ns, bg0]
    bounds = ([0.0, 0.0, 1e-3, 0.0], [np.inf, 10.0, np.inf, np.inf])
    if sigma is not None:
        return fit_curve(model, d, y, sigma, p0, bounds=bounds)
    # reweight by the model: sqrt(counts) weights bias the sparse floor low
    first = fit_curve(model, d, y, np.sqrt(np.maximum(y, 1.0)), p0, bounds=bounds)
    sigma2 = np.sqrt(np.maximum(model(d, *first.params), 1.0))
    return fit_curve(model, d, y, sigma2, first.params, bounds=bounds)
