"""Axial-angle arithmetic and the cosine-squared intensity model.

Polarization axes are headless directions: an axis at 10 degrees and one at
190 degrees are the same physical object.  Everything here therefore works on
the half-turn range [0, 180) and all distances are computed modulo 180.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "AxialAngle",
    "CrystalAxes",
    "MalusParams",
    "wrap_axis",
    "axis_distance",
    "axis_signed_difference",
    "axial_mean",
    "axial_std",
    "nearest_crystal_axis",
    "malus_intensity",
]


class AxialAngle(float):
    """An axis orientation in degrees, canonically wrapped to [0, 180).

    Behaves like a plain float in arithmetic; construction wraps the value
    and rejects non-finite input.
    """

    def __new__(cls, degrees):
        d = float(degrees)
        if not math.isfinite(d):
            raise ValidationError(f"axis angle must be finite, got {degrees!r}")
        w = d % 180.0
        # tiny negatives round up to exactly 180.0; keep the range half-open
        return super().__new__(cls, 0.0 if w == 180.0 else w)

    def __repr__(self):
        return f"AxialAngle({float(self):g})"


def wrap_axis(angle):
    """Wrap angle(s) in degrees onto the axial range [0, 180).

    Scalars come back as AxialAngle, arrays as float ndarrays.
    """
    a = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValidationError("axis angles must be finite")
    wrapped = np.where(np.mod(a, 180.0) == 180.0, 0.0, np.mod(a, 180.0))
    if a.ndim == 0:
        return AxialAngle(float(wrapped))
    return wrapped


def axis_distance(a, b):
    """Smallest separation between two axes in degrees, in [0, 90].

    Accepts scalars or broadcastable arrays.
    """
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 180.0)
    out = np.minimum(d, 180.0 - d)
    if out.ndim == 0:
        return float(out)
    return out


def axis_signed_difference(a, b):
    """Signed axial difference a - b in degrees, folded into (-90, 90].

    The sign says which way axis ``a`` is rotated from axis ``b``; exact
    half-turn ties resolve to +90.
    """
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 180.0)
    out = np.where(d <= 90.0, d, d - 180.0)
    if out.ndim == 0:
        return float(out)
    return out


def axial_mean(angles_deg, weights=None):
    """Mean orientation of a set of axes via the double-angle embedding.

    Each axis is mapped to a unit vector at twice its angle; the mean vector
    is mapped back.  This is the standard construction for headless data and
    agrees with the arithmetic mean for tightly clustered samples.
    """
    a = np.asarray(angles_deg, dtype=float)
    if a.size == 0:
        raise ValidationError("axial_mean of empty set")
    phase = np.deg2rad(2.0 * a)
    if weights is None:
        c, s = np.mean(np.cos(phase)), np.mean(np.sin(phase))
    else:
        w = np.asarray(weights, dtype=float)
        c = np.average(np.cos(phase), weights=w)
        s = np.average(np.sin(phase), weights=w)
    if math.hypot(c, s) < 1e-12:
        raise ValidationError("axial mean is undefined: directions cancel")
    return AxialAngle(0.5 * math.degrees(math.atan2(s, c)))


def axial_std(angles_deg):
    """Circular standard deviation of axes in degrees (double-angle based)."""
    a = np.asarray(angles_deg, dtype=float)
    if a.size == 0:
        raise ValidationError("axial_std of empty set")
    phase = np.deg2rad(2.0 * a)
    r = math.hypot(np.mean(np.cos(phase)), np.mean(np.sin(phase)))
    r = min(max(r, 1e-300), 1.0)
    return 0.5 * math.degrees(math.sqrt(-2.0 * math.log(r)))


@dataclass(frozen=True)
class CrystalAxes:
    """Family of symmetry-equivalent in-plane crystal directions.

    theta0_deg is one representative axis; the family is theta0 + k*period
    for integer k, all taken modulo 180.  The default period of 60 degrees
    describes a threefold in-plane symmetry.
    """

    theta0_deg: float
    period_deg: float = 60.0

    def __post_init__(self):
        if not (0.0 < self.period_deg <= 180.0):
            raise ValidationError(f"period must be in (0, 180], got {self.period_deg}")
        if 180.0 % self.period_deg != 0.0:
            raise ValidationError("period must divide 180 degrees")
        object.__setattr__(self, "theta0_deg", float(wrap_axis(self.theta0_deg)))

    @property
    def axes(self):
        """All distinct family members in [0, 180), sorted ascending."""
        n = int(round(180.0 / self.period_deg))
        vals = sorted(float(wrap_axis(self.theta0_deg + k * self.period_deg)) for k in range(n))
        return tuple(vals)


def nearest_crystal_axis(angle_deg, crystal):
    """Snap an axis to the nearest member of a crystal-axis family.

    Returns (nearest_axis, signed_offset_deg) with the offset folded into
    (-period/2, period/2]; angle == nearest_axis + signed_offset (mod 180).
    Exact midpoints resolve to the positive half-width.
    """
    half = crystal.period_deg / 2.0
    a = float(wrap_axis(angle_deg))
    d = (a - crystal.theta0_deg) % crystal.period_deg
    offset = d if d <= half else d - crystal.period_deg
    return wrap_axis(a - offset), offset


@dataclass(frozen=True)
class MalusParams:
    """Parameters of the cosine-squared intensity curve.

    amplitude is the full modulated flux: at visibility 1 the curve swings
    between background and background + amplitude.
    """

    amplitude: float
    visibility: float
    axis_deg: float
    background: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValidationError(f"amplitude must be >= 0, got {self.amplitude}")
        if not (0.0 <= self.visibility <= 1.0):
            raise ValidationError(f"visibility must be in [0, 1], got {self.visibility}")
        if self.background < 0:
            raise ValidationError(f"background must be >= 0, got {self.background}")
        object.__setattr__(self, "axis_deg", float(wrap_axis(self.axis_deg)))


def malus_intensity(params, polarizer_deg):
    """Transmitted intensity behind an analyzer at polarizer_deg degrees.

    I = background + amplitude/2 * (1 + visibility * cos 2(polarizer - axis)).
    Accepts a scalar or array of analyzer angles.
    """
    delta = np.deg2rad(np.asarray(polarizer_deg, dtype=float) - params.axis_deg)
    out = params.background + 0.5 * params.amplitude * (
        1.0 + params.visibility * np.cos(2.0 * delta)
    )
    if out.ndim == 0:
        return float(out)
    return out
