import json

import numpy as np
import pytest

from qepol.analysis import DecayMap, PolarSweep
from qepol.config import (
    EXPERIMENT_KINDS,
    RunConfig,
    load_config,
    run_experiment,
    save_config,
)
from qepol.errors import ConfigError
from qepol.simulate import PLMap, TimeTagStream, simulate_timetags

BASE = {
    "emitter": {
        "lifetime_ns": 3.96,
        "exc_axis_deg": 43.52,
        "exc_visibility": 0.9667,
        "exc_prob_max": 0.5,
        "em_axis_deg": 62.42,
        "em_visibility": 0.9801,
    },
    "instrument": {"rep_rate_mhz": 20.0, "dark_rate_cps": 100.0,
                   "dead_time_ns": 0.0},
    "experiment": {"kind": "timetags", "n_pulses": 1000},
}


def doc(**experiment):
    d = {k: dict(v) for k, v in BASE.items()}
    d["experiment"] = experiment
    return d


def test_from_dict_fills_every_default():
    cfg = RunConfig.from_dict(BASE)
    assert cfg.emitter.lifetime_ns == 3.96
    assert cfg.instrument.dark_rate_cps == 100.0
    exp = cfg.experiment
    assert exp["kind"] == "timetags"
    assert exp["n_pulses"] == 1000
    assert exp["seed"] == 0
    assert exp["laser_axis_deg"] is None
    assert exp["n_jobs"] == 1
    assert set(exp) == set(EXPERIMENT_KINDS["timetags"]) | {"kind"}


def test_instrument_section_is_optional():
    d = {"emitter": dict(BASE["emitter"]),
         "experiment": dict(BASE["experiment"])}
    cfg = RunConfig.from_dict(d)
    assert cfg.instrument.rep_rate_mhz == 20.0


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d.update(extra={}), "top-level"),
    (lambda d: d.pop("emitter"), "missing required"),
    (lambda d: d.pop("experiment"), "missing required"),
    (lambda d: d["emitter"].update(color="red"), "unknown emitter keys"),
    (lambda d: d["instrument"].update(gain=2.0), "unknown instrument keys"),
    (lambda d: d["experiment"].update(kind="spectrum"), "experiment.kind"),
    (lambda d: d["experiment"].pop("kind"), "experiment.kind"),
    (lambda d: d["experiment"].update(warmup=5), "unknown experiment keys"),
    (lambda d: d["experiment"].pop("n_pulses"), "is required"),
    (lambda d: d["emitter"].update(lifetime_ns=-1.0), "emitter"),
])
def test_from_dict_rejects_malformed_documents(mutate, message):
    d = {k: dict(v) for k, v in BASE.items()}
    mutate(d)
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_dict(d)


def test_from_dict_rejects_non_objects():
    with pytest.raises(ConfigError):
        RunConfig.from_dict([1, 2, 3])


def test_save_load_round_trip(tmp_path):
    cfg = RunConfig.from_dict(BASE)
    path = tmp_path / "run.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back.to_dict() == cfg.to_dict()
    # the saved document is explicit: every default is spelled out
    on_disk = json.loads(path.read_text())
    assert on_disk["instrument"]["detection_efficiency"] == 0.35
    assert on_disk["experiment"]["power_scale"] == 1.0


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(path)


def test_with_seed_replaces_only_the_seed():
    cfg = RunConfig.from_dict(BASE)
    reseeded = cfg.with_seed(99)
    assert reseeded.experiment["seed"] == 99
    assert reseeded.experiment["n_pulses"] == 1000
    assert cfg.experiment["seed"] == 0
    assert reseeded.emitter is cfg.emitter


# ---------------------------------------------------------------------------
# dispatch


def test_run_experiment_timetags_matches_direct_call():
    cfg = RunConfig.from_dict(doc(kind="timetags", n_pulses=20_000, seed=4))
    out = run_experiment(cfg)
    assert isinstance(out, TimeTagStream)
    direct = simulate_timetags(cfg.emitter, cfg.instrument,
                               cfg.emitter.exc_axis_deg,
                               n_pulses=20_000, seed=4)
    np.testing.assert_array_equal(out.timestamps_ps, direct.timestamps_ps)


def test_run_experiment_sweep():
    cfg = RunConfig.from_dict(doc(kind="sweep", mode="emission",
                                  acquisition_s=0.01, seed=1))
    out = run_experiment(cfg)
    assert isinstance(out, PolarSweep)
    assert out.angles_deg.size == 36


def test_run_experiment_decay_map():
    cfg = RunConfig.from_dict(doc(kind="decay_map", n_pulses_per_angle=2000,
                                  time_bin_ps=1000))
    out = run_experiment(cfg)
    assert isinstance(out, DecayMap)
    assert out.counts.shape == (50, 12)


def test_run_experiment_shg():
    cfg = RunConfig.from_dict(doc(kind="shg", crystal_axis_deg=43.52,
                                  amplitude=500.0, poisson_noise=False))
    out = run_experiment(cfg)
    assert isinstance(out, PolarSweep)
    assert out.intensities.max() <= 500.0 + 1e-9


def test_run_experiment_pl_map():
    cfg = RunConfig.from_dict(doc(kind="pl_map",
                                  emitters=[[500.0, 500.0, 1000.0]],
                                  shape_px=[16, 16], pixel_size_nm=100.0,
                                  dwell_ms=2.0, n_frames=2))
    out = run_experiment(cfg)
    assert isinstance(out, list) and len(out) == 2
    assert all(isinstance(f, PLMap) for f in out)
