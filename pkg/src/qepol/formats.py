"""On-disk formats: the binary time-tag container and the CSV tables.

All writers are atomic (temp file + rename).  Numeric CSV cells use
shortest round-trip formatting, so write -> read -> write is idempotent.
"""

import struct

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text
from .analysis import DecayMap, DipoleRecord, PolarSweep
from .errors import FormatError, ValidationError
from .simulate import PLMap, TimeTagStream

__all__ = [
    "write_timetags",
    "read_timetags",
    "write_sweep_csv",
    "read_sweep_csv",
    "write_decay_map_csv",
    "read_decay_map_csv",
    "write_records_csv",
    "read_records_csv",
    "write_dynamics_csv",
    "read_dynamics_csv",
    "write_pl_map_csv",
    "read_pl_map_csv",
]

_TTAG_MAGIC = b"TTAG"
_TTAG_VERSION = 1
# magic, version, reserved, rep rate (mHz), duration (ps), record count, pad
_TTAG_HEADER = struct.Struct("<4sHHQQQ8s")
_TTAG_RECORD = np.dtype(
    [("channel", "<u2"), ("flags", "<u2"), ("reserved", "<u4"), ("timestamp", "<u8")]
)


def write_timetags(stream, path):
    """Write a TimeTagStream to the binary container.

    Layout (little-endian): 40-byte header: magic "TTAG", u16 version,
    u16 reserved, u64 repetition rate in millihertz, u64 duration in ps,
    u64 record count, 8 reserved bytes.  Then one 16-byte record per tag:
    u16 channel, u16 flags, u32 reserved, u64 timestamp in ps, in
    timestamp order.
    """
    if stream.timestamps_ps.size and stream.timestamps_ps[0] < 0:
        raise ValidationError("timestamps must be >= 0")
    rate_mhz = int(round(1e15 / stream.sync_period_ps))
    header = _TTAG_HEADER.pack(
        _TTAG_MAGIC, _TTAG_VERSION, 0, rate_mhz,
        int(stream.duration_ps), stream.n_records, b"\x00" * 8,
    )
    rec = np.zeros(stream.n_records, dtype=_TTAG_RECORD)
    rec["channel"] = stream.channels
    rec["flags"] = stream.flags
    rec["timestamp"] = stream.timestamps_ps.astype(np.uint64)
    atomic_write_bytes(path, header + rec.tobytes())


def read_timetags(path):
    """Read a file written by write_timetags; validates structure fully."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _TTAG_HEADER.size:
        raise FormatError(
            f"{path}: truncated header ({len(raw)} of {_TTAG_HEADER.size} bytes)"
        )
    magic, version, _, rate_mhz, duration, n_records, _ = _TTAG_HEADER.unpack(
        raw[: _TTAG_HEADER.size]
    )
    if magic != _TTAG_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0, want {_TTAG_MAGIC!r}")
    if version != _TTAG_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    if rate_mhz == 0:
        raise FormatError(f"{path}: zero repetition rate at offset 8")
    body = len(raw) - _TTAG_HEADER.size
    if body != n_records * _TTAG_RECORD.itemsize:
        raise FormatError(
            f"{path}: body is {body} bytes at offset {_TTAG_HEADER.size}, want "
            f"{n_records * _TTAG_RECORD.itemsize} for {n_records} records"
        )
    rec = np.frombuffer(raw, dtype=_TTAG_RECORD, offset=_TTAG_HEADER.size)
    ts = rec["timestamp"].astype(np.int64)
    if ts.size and np.any(np.diff(ts) < 0):
        bad = int(np.argmax(np.diff(ts) < 0)) + 1
        raise FormatError(
            f"{path}: timestamps go backwards at record {bad} "
            f"(offset {_TTAG_HEADER.size + bad * _TTAG_RECORD.itemsize})"
        )
    return TimeTagStream(
        channels=rec["channel"].copy(),
        timestamps_ps=ts,
        sync_period_ps=int(round(1e15 / rate_mhz)),
        duration_ps=int(duration),
        flags=rec["flags"].copy(),
    )


# ---------------------------------------------------------------------------
# CSV tables


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _read_table(path, expected_header=None):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if expected_header is not None and header != expected_header:
        raise FormatError(
            f"{path}: header {header!r} does not match expected {expected_header!r}"
        )
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != len(header):
            raise FormatError(f"{path}: line {i} has {len(cells)} cells, want {len(header)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise FormatError(f"{path}: line {i}: {exc}") from None
    return header, np.asarray(rows, dtype=float)


_SWEEP_HEADER = ["angle_deg", "intensity", "error"]


def write_sweep_csv(sweep, path):
    lines = [",".join(_SWEEP_HEADER)]
    for a, y, e in zip(sweep.angles_deg, sweep.intensities, sweep.errors):
        lines.append(f"{_fmt(a)},{_fmt(y)},{_fmt(e)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_sweep_csv(path, acquisition_s=1.0):
    _, rows = _read_table(path, _SWEEP_HEADER)
    if rows.size == 0:
        raise FormatError(f"{path}: no data rows")
    return PolarSweep(
        angles_deg=rows[:, 0], intensities=rows[:, 1], errors=rows[:, 2],
        acquisition_s=acquisition_s,
    )


def write_decay_map_csv(dmap, path):
    """Rows are delay bins (lower edge in ps), columns analyzer angles."""
    header = ["time_lo_ps"] + [_fmt(a) for a in dmap.angles_deg]
    lines = [",".join(header)]
    for i in range(dmap.counts.shape[0]):
        cells = [_fmt(dmap.time_edges_ps[i])] + [str(int(c)) for c in dmap.counts[i]]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_decay_map_csv(path):
    header, rows = _read_table(path)
    if header[0] != "time_lo_ps":
        raise FormatError(f"{path}: first column must be time_lo_ps, got {header[0]!r}")
    if rows.shape[0] < 1 or len(header) < 2:
        raise FormatError(f"{path}: need at least one bin and one angle")
    angles = np.asarray([float(h) for h in header[1:]])
    lo = rows[:, 0]
    if rows.shape[0] > 1:
        width = lo[1] - lo[0]
    else:
        width = 1.0
    edges = np.append(lo, lo[-1] + width)
    return DecayMap(time_edges_ps=edges, angles_deg=angles,
                    counts=rows[:, 1:].astype(np.int64))


_RECORDS_HEADER = [
    "emitter_id", "exc_axis_deg", "em_axis_deg", "exc_axis_err_deg",
    "em_axis_err_deg", "exc_visibility", "em_visibility", "g2_zero", "lifetime_ns",
]


def write_records_csv(records, path):
    lines = [",".join(_RECORDS_HEADER)]
    for r in records:
        lines.append(",".join([
            str(int(r.emitter_id)), _fmt(r.exc_axis_deg), _fmt(r.em_axis_deg),
            _fmt(r.exc_axis_err_deg), _fmt(r.em_axis_err_deg),
            _fmt(r.exc_visibility), _fmt(r.em_visibility),
            _fmt(r.g2_zero), _fmt(r.lifetime_ns),
        ]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_records_csv(path):
    _, rows = _read_table(path, _RECORDS_HEADER)
    if rows.size == 0:
        raise FormatError(f"{path}: no data rows")
    return [
        DipoleRecord(
            emitter_id=int(r[0]), exc_axis_deg=r[1], em_axis_deg=r[2],
            exc_axis_err_deg=r[3], em_axis_err_deg=r[4], exc_visibility=r[5],
            em_visibility=r[6], g2_zero=r[7], lifetime_ns=r[8],
        )
        for r in rows
    ]


_DYNAMICS_HEADER = ["t_ns", "visibility", "visibility_err", "axis_deg",
                    "axis_err_deg", "counts"]


def write_dynamics_csv(dyn, path):
    lines = [",".join(_DYNAMICS_HEADER)]
    for i in range(dyn.n_bins):
        lines.append(",".join(_fmt(v) for v in (
            dyn.t_ns[i], dyn.visibility[i], dyn.visibility_err[i],
            dyn.axis_deg[i], dyn.axis_err_deg[i], dyn.counts[i],
        )))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_dynamics_csv(path):
    """Returns a dict of column arrays (the export is one-way)."""
    _, rows = _read_table(path, _DYNAMICS_HEADER)
    return {name: rows[:, i] for i, name in enumerate(_DYNAMICS_HEADER)}


def write_pl_map_csv(plmap, path):
    """Two-part table: one metadata row, then the pixel grid by rows."""
    ny, nx = plmap.values.shape
    lines = ["pixel_size_nm,dwell_ms,ny,nx",
             f"{_fmt(plmap.pixel_size_nm)},{_fmt(plmap.dwell_ms)},{ny},{nx}",
             ",".join(["y_px"] + [str(i) for i in range(nx)])]
    for j in range(ny):
        lines.append(",".join([str(j)] + [_fmt(v) for v in plmap.values[j]]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_pl_map_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(lines) < 4 or lines[0] != "pixel_size_nm,dwell_ms,ny,nx":
        raise FormatError(f"{path}: missing metadata header")
    try:
        px, dwell, ny, nx = (float(c) for c in lines[1].split(","))
        ny, nx = int(ny), int(nx)
    except ValueError as exc:
        raise FormatError(f"{path}: bad metadata row: {exc}") from None
    if len(lines) != 3 + ny:
        raise FormatError(f"{path}: expected {ny} pixel rows, found {len(lines) - 3}")
    values = np.empty((ny, nx))
    for j in range(ny):
        cells = lines[3 + j].split(",")
        if len(cells) != nx + 1:
            raise FormatError(f"{path}: row {j} has {len(cells) - 1} pixels, want {nx}")
        values[j] = [float(c) for c in cells[1:]]
    return PLMap(values=values, pixel_size_nm=px, dwell_ms=dwell)
