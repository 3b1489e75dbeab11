"""Wavefunctions sampled on uniform cartesian grids, plus their on-disk
container format.

Conventions: atomic units throughout (lengths in Bohr, energies in
Hartree).  Grids are cell-centered around the geometric center, axis order
is (x, y, z) with z fastest in memory, and states are assumed to decay to
zero well inside the box.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from ._io import atomic_write_bytes
from .errors import FormatError, ValidationError

__all__ = [
    "WavefunctionGrid",
    "gaussian_state",
    "hydrogen_state",
    "rotate_state",
    "rescale_state",
    "write_wavefunction",
    "read_wavefunction",
]

_MAGIC = b"WFG1"
_VERSION = 1
# magic, version, reserved, nx, ny, nz, dx, dy, dz, energy
_HEADER = struct.Struct("<4sHHIIIdddd")


@dataclass(frozen=True)
class WavefunctionGrid:
    """One electronic state on a uniform grid.

    values has shape (nx, ny, nz); spacing is (dx, dy, dz) in Bohr;
    energy_ha is the state energy in Hartree.
    """

    values: np.ndarray
    spacing: tuple
    energy_ha: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 3 or min(v.shape) < 8:
            raise ValidationError("grid must be 3-d with at least 8 points per axis")
        sp = tuple(float(s) for s in self.spacing)
        if len(sp) != 3 or any(s <= 0 for s in sp):
            raise ValidationError("spacing must be three positive lengths")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "spacing", sp)

    @property
    def shape(self):
        return self.values.shape

    @property
    def volume_element(self):
        dx, dy, dz = self.spacing
        return dx * dy * dz

    def axis_coords(self, axis):
        """Cell-centered coordinates along one axis, origin at the center."""
        n = self.shape[axis]
        return (np.arange(n) - (n - 1) / 2.0) * self.spacing[axis]

    def norm(self):
        return float(np.sum(np.abs(self.values) ** 2).real * self.volume_element)

    def normalized(self):
        n = self.norm()
        if n <= 0:
            raise ValidationError("cannot normalize a zero state")
        return replace(self, values=self.values / np.sqrt(n))


def _radial_grids(n, h):
    c = (np.arange(n) - (n - 1) / 2.0) * h
    x, y, z = np.meshgrid(c, c, c, indexing="ij")
    return x, y, z


def gaussian_state(n, h, kind="s", alpha=1.0, energy_ha=0.0):
    """Gaussian model orbital on an n^3 grid with spacing h.

    kind "s" is exp(-alpha r^2 / 2); "px"/"py"/"pz" multiply by the
    matching coordinate.  States are numerically normalized.
    """
    if alpha <= 0:
        raise ValidationError("alpha must be > 0")
    x, y, z = _radial_grids(n, h)
    body = np.exp(-0.5 * alpha * (x * x + y * y + z * z))
    factors = {"s": 1.0, "px": x, "py": y, "pz": z}
    if kind not in factors:
        raise ValidationError(f"unknown orbital kind {kind!r}")
    g = WavefunctionGrid(values=body * factors[kind], spacing=(h, h, h),
                         energy_ha=float(energy_ha))
    return g.normalized()


def hydrogen_state(n, h, orbital="1s"):
    """Hydrogenic eigenstate sampled on an n^3 grid with spacing h (Bohr).

    Supports "1s" (energy -1/2) and "2pz" (energy -1/8); both are
    numerically normalized on the grid.
    """
    x, y, z = _radial_grids(n, h)
    r = np.sqrt(x * x + y * y + z * z)
    if orbital == "1s":
        vals, e = np.exp(-r), -0.5
    elif orbital == "2pz":
        vals, e = z * np.exp(-0.5 * r), -0.125
    else:
        raise ValidationError(f"unknown orbital {orbital!r}")
    return WavefunctionGrid(values=vals, spacing=(h, h, h), energy_ha=e).normalized()


def _rotation_matrix(axis, angle_deg):
    a = np.asarray(axis, dtype=float)
    na = np.linalg.norm(a)
    if na == 0:
        raise ValidationError("rotation axis must be non-zero")
    a = a / na
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) * c + s * k + (1 - c) * np.outer(a, a)


def _resample(grid, matrix, order):
    """Resample grid values at matrix^-1-mapped coordinates about the center."""
    shape = grid.shape
    center = (np.asarray(shape) - 1) / 2.0
    sp = np.asarray(grid.spacing)
    idx = np.indices(shape, dtype=float)
    pos = (idx - center.reshape(3, 1, 1, 1)) * sp.reshape(3, 1, 1, 1)
    inv = np.linalg.inv(matrix)
    src = np.einsum("ij,j...->i...", inv, pos) / sp.reshape(3, 1, 1, 1) + center.reshape(
        3, 1, 1, 1
    )
    re = ndimage.map_coordinates(grid.values.real, src, order=order, mode="constant", cval=0.0)
    im = ndimage.map_coordinates(grid.values.imag, src, order=order, mode="constant", cval=0.0)
    return re + 1j * im


def _quarter_turns_about_z(grid, angle_deg, axis):
    """Number of exact 90-degree turns about +z, or None if not applicable."""
    a = np.asarray(axis, dtype=float)
    na = np.linalg.norm(a)
    if na == 0 or abs(abs(a[2]) / na - 1.0) > 1e-12:
        return None
    if angle_deg % 90.0 != 0.0:
        return None
    nx, ny, _ = grid.shape
    if nx != ny or grid.spacing[0] != grid.spacing[1]:
        return None
    sign = 1 if a[2] > 0 else -1
    return (sign * int(round(angle_deg / 90.0))) % 4


def rotate_state(grid, angle_deg, axis=(0.0, 0.0, 1.0), order=3):
    """Rotate a state rigidly about an axis through the grid center.

    Implemented by cubic resampling (values are pulled from the inversely
    rotated positions); the result is renormalized to the input norm, which
    removes the interpolation's slight smoothing of the amplitude.  Exact
    multiples of 90 degrees about the z axis on a square grid reduce to an
    index permutation and are exact.
    """
    k = _quarter_turns_about_z(grid, angle_deg, axis)
    if k is not None:
        return replace(grid, values=np.rot90(grid.values, k=k, axes=(0, 1)).copy())
    mat = _rotation_matrix(axis, angle_deg)
    vals = _resample(grid, mat, order)
    out = replace(grid, values=vals)
    n_in, n_out = grid.norm(), out.norm()
    if n_out <= 0:
        raise ValidationError("rotation produced a zero state")
    return replace(out, values=out.values * np.sqrt(n_in / n_out))


def rescale_state(grid, stretch_x=1.0, stretch_y=1.0, order=3):
    """Stretch a state's in-plane coordinates (uniaxial lattice distortion).

    The value at position (x, y, z) becomes the old value at
    (x / stretch_x, y / stretch_y, z); the result is renormalized to the
    input norm.
    """
    if stretch_x <= 0 or stretch_y <= 0:
        raise ValidationError("stretch factors must be > 0")
    mat = np.diag([stretch_x, stretch_y, 1.0])
    vals = _resample(grid, mat, order)
    out = replace(grid, values=vals)
    n_in, n_out = grid.norm(), out.norm()
    if n_out <= 0:
        raise ValidationError("rescale produced a zero state")
    return replace(out, values=out.values * np.sqrt(n_in / n_out))


# ---------------------------------------------------------------------------
# on-disk container


def write_wavefunction(grid, path):
    """Write a state to the binary grid container (atomically).

    Layout (little-endian): 52-byte header "WFG1", u16 version, u16
    reserved, u32 nx, ny, nz, f64 dx, dy, dz, f64 energy; then
    nx*ny*nz complex64 values in C order (z fastest).
    """
    nx, ny, nz = grid.shape
    header = _HEADER.pack(_MAGIC, _VERSION, 0, nx, ny, nz,
                          grid.spacing[0], grid.spacing[1], grid.spacing[2],
                          grid.energy_ha)
    payload = np.ascontiguousarray(grid.values.astype(np.complex64)).tobytes()
    atomic_write_bytes(path, header + payload)


def read_wavefunction(path):
    """Read a state written by write_wavefunction."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} of {_HEADER.size} bytes)")
    magic, version, _, nx, ny, nz, dx, dy, dz, energy = _HEADER.unpack(
        raw[: _HEADER.size]
    )
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0, want {_MAGIC!r}")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    expected = nx * ny * nz * 8
    got = len(raw) - _HEADER.size
    if got != expected:
        raise FormatError(
            f"{path}: payload is {got} bytes at offset {_HEADER.size}, "
            f"want {expected} for {nx}x{ny}x{nz} complex64 values"
        )
    vals = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size).reshape(nx, ny, nz)
    return WavefunctionGrid(values=vals.astype(np.complex128),
                            spacing=(dx, dy, dz), energy_ha=float(energy))
