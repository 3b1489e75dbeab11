"""Run configuration documents.

A run is described by a JSON object with three sections: "emitter",
"instrument" and "experiment".  Section keys map 1:1 onto the EmitterModel
and InstrumentConfig fields; the experiment section selects one simulated
acquisition kind plus its parameters.  Parsing is strict (unknown keys are
errors) and serialization echoes every default, so a saved config fully
pins down the run.
"""

import dataclasses
import json
from dataclasses import dataclass

from ._io import atomic_write_text
from .errors import ConfigError
from .photophysics import EmitterModel
from .simulate import (
    InstrumentConfig,
    simulate_decay_map,
    simulate_pl_map,
    simulate_polarization_sweep,
    simulate_shg_sweep,
    simulate_timetags,
)

__all__ = ["RunConfig", "load_config", "save_config", "run_experiment",
           "EXPERIMENT_KINDS"]

# experiment kind -> {key: default}; _REQUIRED marks keys with no default
_REQUIRED = object()

EXPERIMENT_KINDS = {
    "timetags": {
        "n_pulses": _REQUIRED,
        "seed": 0,
        "laser_axis_deg": None,
        "det_polarizer_deg": None,
        "power_scale": 1.0,
        "n_jobs": 1,
    },
    "sweep": {
        "mode": _REQUIRED,
        "angles_deg": [float(a) for a in range(0, 360, 10)],
        "acquisition_s": 1.0,
        "seed": 0,
        "power_scale": 1.0,
        "poisson_noise": True,
    },
    "decay_map": {
        "n_pulses_per_angle": _REQUIRED,
        "angles_deg": [float(a) for a in range(0, 180, 15)],
        "time_bin_ps": 50,
        "seed": 0,
        "power_scale": 1.0,
    },
    "shg": {
        "crystal_axis_deg": _REQUIRED,
        "angles_deg": [float(a) for a in range(0, 360, 5)],
        "amplitude": 1000.0,
        "background": 0.0,
        "pump_power": 1.0,
        "configuration": "parallel",
        "seed": 0,
        "poisson_noise": True,
    },
    "pl_map": {
        "emitters": _REQUIRED,
        "shape_px": [64, 64],
        "pixel_size_nm": 50.0,
        "dwell_ms": 10.0,
        "psf_fwhm_nm": 400.0,
        "background_cps": 0.0,
        "drift_nm_per_frame": [0.0, 0.0],
        "n_frames": 1,
        "seed": 0,
        "poisson_noise": True,
    },
}


def _build_section(cls, data, section):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}; valid: {sorted(fields)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from None
    except Exception as exc:
        raise ConfigError(f"{section}: {exc}") from None


@dataclass
class RunConfig:
    """Validated run description: emitter, instrument, experiment."""

    emitter: EmitterModel
    instrument: InstrumentConfig
    experiment: dict

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config document must be an object")
        unknown = set(doc) - {"emitter", "instrument", "experiment"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        for key in ("emitter", "experiment"):
            if key not in doc:
                raise ConfigError(f"missing required section {key!r}")
        emitter = _build_section(EmitterModel, dict(doc["emitter"]), "emitter")
        instrument = _build_section(
            InstrumentConfig, dict(doc.get("instrument", {})), "instrument"
        )
        exp_in = dict(doc["experiment"])
        kind = exp_in.pop("kind", None)
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"experiment.kind must be one of {sorted(EXPERIMENT_KINDS)}, got {kind!r}"
            )
        schema = EXPERIMENT_KINDS[kind]
        unknown = set(exp_in) - set(schema)
        if unknown:
            raise ConfigError(
                f"unknown experiment keys for kind {kind!r}: {sorted(unknown)}; "
                f"valid: {sorted(schema)}"
            )
        experiment = {"kind": kind}
        for key, default in schema.items():
            if key in exp_in:
                experiment[key] = exp_in[key]
            elif default is _REQUIRED:
                raise ConfigError(f"experiment.{key} is required for kind {kind!r}")
            else:
                experiment[key] = default
        return cls(emitter=emitter, instrument=instrument, experiment=experiment)

    def to_dict(self):
        return {
            "emitter": dataclasses.asdict(self.emitter),
            "instrument": dataclasses.asdict(self.instrument),
            "experiment": dict(self.experiment),
        }

    def with_seed(self, seed):
        exp = dict(self.experiment)
        exp["seed"] = int(seed)
        return RunConfig(emitter=self.emitter, instrument=self.instrument, experiment=exp)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    return RunConfig.from_dict(doc)


def save_config(cfg, path):
    atomic_write_text(path, json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def run_experiment(cfg):
    """Execute the configured acquisition; returns the native data product."""
    exp = cfg.experiment
    kind = exp["kind"]
    if kind == "timetags":
        laser = exp["laser_axis_deg"]
        if laser is None:
            laser = cfg.emitter.exc_axis_deg
        return simulate_timetags(
            cfg.emitter, cfg.instrument, laser,
            det_polarizer_deg=exp["det_polarizer_deg"],
            n_pulses=int(exp["n_pulses"]), seed=exp["seed"],
            power_scale=exp["power_scale"], n_jobs=int(exp["n_jobs"]),
        )
    if kind == "sweep":
        return simulate_polarization_sweep(
            cfg.emitter, cfg.instrument, exp["mode"], exp["angles_deg"],
            exp["acquisition_s"], seed=exp["seed"],
            power_scale=exp["power_scale"], poisson_noise=exp["poisson_noise"],
        )
    if kind == "decay_map":
        return simulate_decay_map(
            cfg.emitter, cfg.instrument, exp["angles_deg"],
            int(exp["n_pulses_per_angle"]), time_bin_ps=int(exp["time_bin_ps"]),
            seed=exp["seed"], power_scale=exp["power_scale"],
        )
    if kind == "shg":
        return simulate_shg_sweep(
            exp["crystal_axis_deg"], exp["angles_deg"], exp["amplitude"],
            background=exp["background"], pump_power=exp["pump_power"],
            configuration=exp["configuration"], seed=exp["seed"],
            poisson_noise=exp["poisson_noise"],
        )
    if kind == "pl_map":
        return simulate_pl_map(
            [tuple(e) for e in exp["emitters"]], tuple(exp["shape_px"]),
            exp["pixel_size_nm"], exp["dwell_ms"], psf_fwhm_nm=exp["psf_fwhm_nm"],
            background_cps=exp["background_cps"],
            drift_nm_per_frame=tuple(exp["drift_nm_per_frame"]),
            n_frames=int(exp["n_frames"]), seed=exp["seed"],
            poisson_noise=exp["poisson_noise"],
        )
    raise ConfigError(f"unhandled experiment kind {kind!r}")
