import numpy as np
import pytest

from qepol.analysis import DecayMap, DipoleRecord, PolarSweep
from qepol.errors import FormatError, ValidationError
from qepol.formats import (
    read_decay_map_csv,
    read_dynamics_csv,
    read_pl_map_csv,
    read_records_csv,
    read_sweep_csv,
    read_timetags,
    write_decay_map_csv,
    write_dynamics_csv,
    write_pl_map_csv,
    write_records_csv,
    write_sweep_csv,
    write_timetags,
)
from qepol.simulate import PLMap, TimeTagStream, simulate_timetags

HEADER_SIZE = 40
RECORD_SIZE = 16


def sample_stream():
    return TimeTagStream(
        channels=np.array([0, 1, 1, 0], dtype=np.uint16),
        timestamps_ps=np.array([100, 2500, 2500, 70_000], dtype=np.int64),
        sync_period_ps=50_000,
        duration_ps=100_000,
        flags=np.array([0, 3, 0, 1], dtype=np.uint16),
    )


# ---------------------------------------------------------------------------
# binary time tags


def test_timetag_file_layout(tmp_path):
    path = tmp_path / "run.ttag"
    stream = sample_stream()
    write_timetags(stream, path)
    raw = path.read_bytes()
    assert len(raw) == HEADER_SIZE + 4 * RECORD_SIZE
    assert raw[:4] == b"TTAG"
    assert int.from_bytes(raw[4:6], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 20_000_000_000  # 20 MHz in mHz
    assert int.from_bytes(raw[16:24], "little") == 100_000
    assert int.from_bytes(raw[24:32], "little") == 4
    # first record: u16 channel, u16 flags, u32 reserved, u64 timestamp
    assert int.from_bytes(raw[40:42], "little") == 0
    assert int.from_bytes(raw[42:44], "little") == 0
    assert int.from_bytes(raw[48:56], "little") == 100
    assert int.from_bytes(raw[56 + 2:56 + 4], "little") == 3


def test_timetag_round_trip_is_bit_exact(tmp_path, small_stream):
    p1, p2 = tmp_path / "a.ttag", tmp_path / "b.ttag"
    write_timetags(small_stream, p1)
    back = read_timetags(p1)
    np.testing.assert_array_equal(back.channels, small_stream.channels)
    np.testing.assert_array_equal(back.timestamps_ps, small_stream.timestamps_ps)
    np.testing.assert_array_equal(back.flags, small_stream.flags)
    assert back.sync_period_ps == small_stream.sync_period_ps
    assert back.duration_ps == small_stream.duration_ps
    write_timetags(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_timetag_flags_survive_the_round_trip(tmp_path):
    path = tmp_path / "flags.ttag"
    write_timetags(sample_stream(), path)
    back = read_timetags(path)
    np.testing.assert_array_equal(back.flags, [0, 3, 0, 1])


def test_empty_timetag_file(tmp_path):
    path = tmp_path / "empty.ttag"
    empty = TimeTagStream(np.array([], dtype=np.uint16),
                          np.array([], dtype=np.int64), 50_000, 0)
    write_timetags(empty, path)
    assert path.stat().st_size == HEADER_SIZE
    back = read_timetags(path)
    assert back.n_records == 0
    assert back.sync_period_ps == 50_000


def test_timetag_negative_timestamps_rejected_on_write(tmp_path):
    bad = TimeTagStream(np.array([0]), np.array([-5]), 50_000, 100)
    with pytest.raises(ValidationError):
        write_timetags(bad, tmp_path / "neg.ttag")


def test_timetag_corruption_reports_the_offset(tmp_path):
    path = tmp_path / "ok.ttag"
    write_timetags(sample_stream(), path)
    raw = bytearray(path.read_bytes())

    short = tmp_path / "short.ttag"
    short.write_bytes(bytes(raw[:20]))
    with pytest.raises(FormatError, match="truncated header"):
        read_timetags(short)

    magic = tmp_path / "magic.ttag"
    magic.write_bytes(b"GATT" + bytes(raw[4:]))
    with pytest.raises(FormatError, match="offset 0"):
        read_timetags(magic)

    version = tmp_path / "version.ttag"
    v = bytearray(raw)
    v[4:6] = (7).to_bytes(2, "little")
    version.write_bytes(bytes(v))
    with pytest.raises(FormatError, match="version 7"):
        read_timetags(version)

    trunc = tmp_path / "trunc.ttag"
    trunc.write_bytes(bytes(raw[:-8]))
    with pytest.raises(FormatError, match="records"):
        read_timetags(trunc)

    zero_rate = tmp_path / "rate.ttag"
    z = bytearray(raw)
    z[8:16] = bytes(8)
    zero_rate.write_bytes(bytes(z))
    with pytest.raises(FormatError, match="offset 8"):
        read_timetags(zero_rate)


def test_timetag_backwards_timestamps_rejected_on_read(tmp_path):
    path = tmp_path / "ok.ttag"
    write_timetags(sample_stream(), path)
    raw = bytearray(path.read_bytes())
    # overwrite the last record's timestamp with an earlier value
    off = HEADER_SIZE + 3 * RECORD_SIZE + 8
    raw[off:off + 8] = (42).to_bytes(8, "little")
    bad = tmp_path / "order.ttag"
    bad.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="record 3"):
        read_timetags(bad)


def test_timetag_simulated_stream_round_trip(tmp_path, reference_emitter,
                                             counting_instrument):
    stream = simulate_timetags(reference_emitter, counting_instrument, 43.52,
                               n_pulses=50_000, seed=29)
    path = tmp_path / "sim.ttag"
    write_timetags(stream, path)
    back = read_timetags(path)
    np.testing.assert_array_equal(back.timestamps_ps, stream.timestamps_ps)
    np.testing.assert_array_equal(back.channels, stream.channels)


# ---------------------------------------------------------------------------
# CSV tables


def test_sweep_csv_round_trip(tmp_path):
    sweep = PolarSweep(np.arange(0.0, 180.0, 15.0),
                       np.linspace(100.7, 900.3, 12),
                       np.sqrt(np.linspace(100.7, 900.3, 12)),
                       acquisition_s=0.05)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(sweep, path)
    back = read_sweep_csv(path, acquisition_s=0.05)
    np.testing.assert_array_equal(back.angles_deg, sweep.angles_deg)
    np.testing.assert_array_equal(back.intensities, sweep.intensities)
    np.testing.assert_array_equal(back.errors, sweep.errors)
    assert back.acquisition_s == 0.05
    # shortest round-trip floats make a second write byte-identical
    p2 = tmp_path / "sweep2.csv"
    write_sweep_csv(back, p2)
    assert path.read_bytes() == p2.read_bytes()


def test_sweep_csv_rejects_malformed_tables(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("angle_deg,intensity\n0.0,1.0\n")
    with pytest.raises(FormatError, match="header"):
        read_sweep_csv(path)
    path.write_text("angle_deg,intensity,error\n0.0,1.0\n")
    with pytest.raises(FormatError, match="line 2"):
        read_sweep_csv(path)
    path.write_text("angle_deg,intensity,error\n0.0,one,1.0\n")
    with pytest.raises(FormatError, match="line 2"):
        read_sweep_csv(path)
    path.write_text("angle_deg,intensity,error\n")
    with pytest.raises(FormatError, match="no data"):
        read_sweep_csv(path)
    path.write_text("")
    with pytest.raises(FormatError, match="empty"):
        read_sweep_csv(path)


def test_decay_map_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    dmap = DecayMap(
        time_edges_ps=np.arange(0.0, 5001.0, 500.0),
        angles_deg=np.arange(0.0, 180.0, 15.0),
        counts=rng.integers(0, 1000, (10, 12)),
    )
    path = tmp_path / "map.csv"
    write_decay_map_csv(dmap, path)
    back = read_decay_map_csv(path)
    np.testing.assert_array_equal(back.counts, dmap.counts)
    np.testing.assert_array_equal(back.angles_deg, dmap.angles_deg)
    np.testing.assert_allclose(back.time_edges_ps, dmap.time_edges_ps)


def test_decay_map_csv_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wrong,0.0\n0.0,5\n")
    with pytest.raises(FormatError, match="time_lo_ps"):
        read_decay_map_csv(path)


def test_records_csv_round_trip(tmp_path):
    records = [
        DipoleRecord(emitter_id=i, exc_axis_deg=40.0 + i, em_axis_deg=25.0 + i,
                     exc_axis_err_deg=0.3, em_axis_err_deg=0.4,
                     exc_visibility=0.95, em_visibility=0.97,
                     g2_zero=0.02 + 0.001 * i, lifetime_ns=3.9 + 0.01 * i)
        for i in range(5)
    ]
    path = tmp_path / "records.csv"
    write_records_csv(records, path)
    back = read_records_csv(path)
    assert len(back) == 5
    for r, b in zip(records, back):
        assert b.emitter_id == r.emitter_id
        assert b.exc_axis_deg == r.exc_axis_deg
        assert b.em_axis_deg == r.em_axis_deg
        assert b.g2_zero == r.g2_zero
        assert b.lifetime_ns == r.lifetime_ns


def test_dynamics_csv_is_a_faithful_one_way_export(tmp_path):
    from qepol.analysis import PolarizationDynamics

    n = 6
    dyn = PolarizationDynamics(
        t_ns=np.linspace(0.2, 3.0, n),
        visibility=np.linspace(0.6, 0.9, n),
        visibility_err=np.full(n, 0.01),
        axis_deg=np.linspace(65.0, 60.0, n),
        axis_err_deg=np.full(n, 0.5),
        counts=np.full(n, 2500.0),
        axis_undefined=np.zeros(n, dtype=bool),
        t_cut_ps=120.0,
        min_counts_per_bin=2000,
    )
    path = tmp_path / "dyn.csv"
    write_dynamics_csv(dyn, path)
    cols = read_dynamics_csv(path)
    np.testing.assert_array_equal(cols["t_ns"], dyn.t_ns)
    np.testing.assert_array_equal(cols["visibility"], dyn.visibility)
    np.testing.assert_array_equal(cols["axis_deg"], dyn.axis_deg)
    np.testing.assert_array_equal(cols["counts"], dyn.counts)


def test_pl_map_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    plmap = PLMap(values=rng.poisson(40.0, (7, 9)).astype(float),
                  pixel_size_nm=100.0, dwell_ms=5.0)
    path = tmp_path / "map.csv"
    write_pl_map_csv(plmap, path)
    back = read_pl_map_csv(path)
    np.testing.assert_array_equal(back.values, plmap.values)
    assert back.pixel_size_nm == 100.0
    assert back.dwell_ms == 5.0


def test_pl_map_csv_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not,a,map\n")
    with pytest.raises(FormatError, match="metadata"):
        read_pl_map_csv(path)
    path.write_text("pixel_size_nm,dwell_ms,ny,nx\n100.0,5.0,3,4\ny_px,0,1,2,3\n"
                    "0,1,2,3,4\n1,1,2,3,4\n")
    with pytest.raises(FormatError, match="pixel rows"):
        read_pl_map_csv(path)
