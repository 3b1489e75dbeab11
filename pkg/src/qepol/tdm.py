"""Transition dipole moments from gridded wavefunctions.

The dipole between eigenstates of energies E_i, E_f is obtained from the
momentum matrix element via mu = i <f| p |i> / (E_f - E_i) (atomic units,
unit mass).  Derivatives use fourth-order central differences; since the
states vanish at the box boundary, the wrap-around closure of the stencil
is harmless.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import AxialAngle
from .wfgrid import rescale_state, rotate_state

__all__ = [
    "TransitionAnalysis",
    "Perturbation",
    "gradient4",
    "momentum_matrix_element",
    "position_matrix_element",
    "transition_dipole",
    "analyze_transition",
    "strain_perturbation",
    "field_perturbation",
    "apply_perturbation",
    "perturbation_response",
]


def _check_pair(final, initial):
    if final.shape != initial.shape:
        raise ValidationError(f"grid shapes differ: {final.shape} vs {initial.shape}")
    if not np.allclose(final.spacing, initial.spacing, rtol=1e-12, atol=0.0):
        raise ValidationError("grid spacings differ")


def gradient4(values, spacing, axis):
    """Fourth-order central difference along one axis.

    Uses the periodic closure of np.roll at the edges; callers must ensure
    the sampled field decays to zero there.
    """
    f1 = np.roll(values, -1, axis=axis)
    f2 = np.roll(values, -2, axis=axis)
    b1 = np.roll(values, 1, axis=axis)
    b2 = np.roll(values, 2, axis=axis)
    return (-f2 + 8.0 * f1 - 8.0 * b1 + b2) / (12.0 * spacing)


def momentum_matrix_element(final, initial):
    """<final| -i grad |initial> as a complex 3-vector (atomic units)."""
    _check_pair(final, initial)
    dv = initial.volume_element
    conj_f = np.conj(final.values)
    out = np.empty(3, dtype=complex)
    for ax in range(3):
        grad = gradient4(initial.values, initial.spacing[ax], ax)
        out[ax] = -1j * np.sum(conj_f * grad) * dv
    return out


def position_matrix_element(final, initial):
    """<final| r |initial> as a complex 3-vector (direct quadrature)."""
    _check_pair(final, initial)
    dv = initial.volume_element
    conj_f = np.conj(final.values)
    out = np.empty(3, dtype=complex)
    for ax in range(3):
        shape = [1, 1, 1]
        shape[ax] = -1
        coord = initial.axis_coords(ax).reshape(shape)
        out[ax] = np.sum(conj_f * coord * initial.values) * dv
    return out


def transition_dipole(final, initial):
    """Transition dipole mu = i <f|p|i> / (E_f - E_i), a complex 3-vector.

    For exact eigenstates this equals the position matrix element; on a
    grid the momentum form is preferred because it needs no absolutely
    convergent r-weighted quadrature.
    """
    gap = final.energy_ha - initial.energy_ha
    if abs(gap) < 1e-12:
        raise ValidationError("states are degenerate; dipole is undefined")
    return 1j * momentum_matrix_element(final, initial) / gap


@dataclass(frozen=True)
class TransitionAnalysis:
    """Polarization-relevant summary of one transition."""

    mu: np.ndarray
    energy_gap_ha: float
    strength: float
    axis_deg: AxialAngle
    in_plane_fraction: float
    visibility: float


def analyze_transition(final, initial):
    """Dipole vector plus the polarization observables it implies.

    axis_deg is the analyzer angle of maximum transmission for the
    in-plane components (x toward 0 degrees, y toward 90).  visibility is
    the modulation depth of an analyzer sweep when the out-of-plane
    component contributes an unmodulated background:
    (Imax - Imin) / (Imax + Imin) with I(theta) =
    |mu_x cos + mu_y sin|^2 + |mu_z|^2 / 2.
    """
    mu = transition_dipole(final, initial)
    px, py, pz = (abs(c) ** 2 for c in mu)
    p_in = px + py
    total = p_in + pz
    if total <= 0:
        raise ValidationError("vanishing dipole; nothing to analyze")
    cross = 2.0 * (mu[0] * np.conj(mu[1])).real
    modulation = 0.5 * math.hypot(px - py, cross)
    axis = AxialAngle(0.5 * math.degrees(math.atan2(cross, px - py)))
    visibility = 2.0 * modulation / total
    return TransitionAnalysis(
        mu=mu,
        energy_gap_ha=float(final.energy_ha - initial.energy_ha),
        strength=float(total),
        axis_deg=axis,
        in_plane_fraction=float(p_in / total),
        visibility=float(visibility),
    )


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class Perturbation:
    """Lattice perturbation acting on both states of a transition.

    kind "strain": uniaxial in-plane stretch by (1 + magnitude) along x,
    plus an in-plane rotation of mixing_deg_per_unit * magnitude degrees
    (how strongly strain steers the dipole is a property of the defect
    species, captured by the coefficient).

    kind "field": rigid rotation of both orbitals by
    mixing_deg_per_unit * magnitude degrees about an axis tilted
    tilt_deg from z in the y-z plane; this tips dipole weight out of the
    plane and turns the in-plane axis at the same time.
    """

    kind: str
    magnitude: float
    mixing_deg_per_unit: float
    tilt_deg: float = 60.0

    def __post_init__(self):
        if self.kind not in ("strain", "field"):
            raise ValidationError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "strain" and self.magnitude <= -1.0:
            raise ValidationError("strain magnitude must be > -1")


# how strongly in-plane strain steers the dipole axis, per unit strain
STRAIN_MIXING_DEG = {"vacancy_like": 600.0, "carbon_like": 30.0}


def strain_perturbation(magnitude, species="vacancy_like"):
    """Uniaxial strain of the given fractional magnitude for a species."""
    if species not in STRAIN_MIXING_DEG:
        raise ValidationError(f"unknown species {species!r}; "
                              f"have {sorted(STRAIN_MIXING_DEG)}")
    return Perturbation(kind="strain", magnitude=float(magnitude),
                        mixing_deg_per_unit=STRAIN_MIXING_DEG[species])


def field_perturbation(magnitude, mixing_deg_per_unit=45.8, tilt_deg=60.0):
    """Static field of the given strength (orbital-tilt model)."""
    return Perturbation(kind="field", magnitude=float(magnitude),
                        mixing_deg_per_unit=float(mixing_deg_per_unit),
                        tilt_deg=float(tilt_deg))


def apply_perturbation(final, initial, pert):
    """Return the perturbed (final, initial) pair."""
    angle = pert.mixing_deg_per_unit * pert.magnitude
    if pert.kind == "strain":
        sx = 1.0 + pert.magnitude
        out = []
        for g in (final, initial):
            g2 = rescale_state(g, stretch_x=sx)
            out.append(rotate_state(g2, angle) if angle else g2)
        return tuple(out)
    t = math.radians(pert.tilt_deg)
    axis = (0.0, math.sin(t), math.cos(t))
    return (rotate_state(final, angle, axis=axis),
            rotate_state(initial, angle, axis=axis))


def perturbation_response(final, initial, perturbations):
    """Sweep a list of perturbations; returns per-point response arrays.

    The result dict has arrays "magnitude", "axis_shift_deg" (signed
    in-plane rotation relative to the unperturbed transition),
    "visibility" and "in_plane_fraction".
    """
    from .geometry import axis_signed_difference

    base = analyze_transition(final, initial)
    mags, shifts, vis, in_plane = [], [], [], []
    for p in perturbations:
        f2, i2 = apply_perturbation(final, initial, p)
        a = analyze_transition(f2, i2)
        mags.append(p.magnitude)
        shifts.append(axis_signed_difference(a.axis_deg, base.axis_deg))
        vis.append(a.visibility)
        in_plane.append(a.in_plane_fraction)
    return {
        "magnitude": np.asarray(mags),
        "axis_shift_deg": np.asarray(shifts),
        "visibility": np.asarray(vis),
        "in_plane_fraction": np.asarray(in_plane),
        "base_axis_deg": float(base.axis_deg),
        "base_visibility": base.visibility,
    }
