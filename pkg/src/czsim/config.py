"""Run configuration: JSON schema, validation, and construction of the
domain objects the commands operate on."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from . import __version__
from .benchmarking import NoiseSpec
from .device import CouplingGraph, DeviceSpec, FluxModel, ModeSpec, zero_coupling_point
from .distortion import DistortionModel
from .pulses import PulseShapeSpec

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


_MODE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["label", "frequency", "anharmonicity"],
    "properties": {
        "label": {"enum": ["Q1", "C", "Q2"]},
        "frequency": {"type": "number"},
        "anharmonicity": {"type": "number"},
        "levels": {"type": "integer", "minimum": 3},
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "device"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "device": {
            "type": "object",
            "additionalProperties": False,
            "required": ["modes", "couplings"],
            "properties": {
                "modes": {"type": "array", "items": _MODE_SCHEMA, "minItems": 3, "maxItems": 3},
                "couplings": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["g_1c", "g_2c", "g_12"],
                    "properties": {
                        "g_1c": {"type": "number"},
                        "g_2c": {"type": "number"},
                        "g_12": {"type": "number"},
                    },
                },
                "flux_models": {
                    "type": "object",
                    "additionalProperties": False,
                    "patternProperties": {
                        "^(Q1|Q2|C)$": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["max_frequency", "anharmonicity"],
                            "properties": {
                                "max_frequency": {"type": "number"},
                                "anharmonicity": {"type": "number"},
                            },
                        }
                    },
                },
                "metadata": {"type": "object"},
                "coupler_at_zero_coupling": {"type": "boolean"},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt_ns": {"type": "number", "exclusiveMinimum": 0},
                "unitarity_tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "pulse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["square", "slepian", "cosine"]},
                "length_ns": {"type": "number", "exclusiveMinimum": 0},
                "idle_value": {"type": "number"},
                "peak_value": {"type": "number"},
                "parameterization": {"enum": ["coupler_frequency", "effective_coupling"]},
                "slepian_coefficients": {"type": "array", "items": {"type": "number"}},
            },
        },
        "gate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "q2_detune": {"type": ["number", "null"]},
                "compensate": {"type": "boolean"},
            },
        },
        "distortion": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gain": {"type": "number"},
                "settling_terms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["amplitude", "time_constant_ns"],
                        "properties": {
                            "amplitude": {"type": "number"},
                            "time_constant_ns": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "depolarizing_per_cycle": {"type": "number", "minimum": 0, "maximum": 1},
                "readout": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "f00": {"type": "array", "items": {"type": "number"}},
                        "f11": {"type": "array", "items": {"type": "number"}},
                    },
                },
            },
        },
        "benchmarking": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "depths": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "n_circuits": {"type": "integer", "minimum": 1},
                "shots": {"type": ["integer", "null"], "minimum": 1},
            },
        },
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
    },
}

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "device": {
        "modes": [
            {"label": "Q1", "frequency": 5.077, "anharmonicity": -0.235, "levels": 3},
            {"label": "C", "frequency": 7.0, "anharmonicity": -0.100, "levels": 3},
            {"label": "Q2", "frequency": 4.889, "anharmonicity": -0.235, "levels": 3},
        ],
        "couplings": {"g_1c": 0.090, "g_2c": 0.090, "g_12": 0.006},
        "flux_models": {
            "Q1": {"max_frequency": 5.299, "anharmonicity": -0.235},
            "Q2": {"max_frequency": 5.211, "anharmonicity": -0.235},
            "C": {"max_frequency": 7.0, "anharmonicity": -0.100},
        },
        "coupler_at_zero_coupling": True,
    },
    "solver": {"dt_ns": 0.05, "unitarity_tolerance": 1e-9},
    "pulse": {
        "family": "slepian",
        "length_ns": 45.0,
        "idle_value": 0.0,
        "peak_value": -0.022,
        "parameterization": "effective_coupling",
        "slepian_coefficients": [1.0],
    },
    "gate": {"q2_detune": -0.014, "compensate": True},
    "noise": {
        "depolarizing_per_cycle": 0.0,
        "readout": {"f00": [0.993, 0.996], "f11": [0.966, 0.974]},
    },
    "seed": 0,
    "output_dir": "czsim_out",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration plus the constructed domain objects."""

    raw: dict
    device: DeviceSpec
    dt: float
    unitarity_tolerance: float
    pulse: PulseShapeSpec
    q2_detune: float | None
    compensate: bool
    distortion: DistortionModel | None
    noise: NoiseSpec | None
    depths: tuple[int, ...]
    n_circuits: int
    shots: int | None
    seed: int
    output_dir: Path

    @property
    def config_hash(self) -> str:
        # output_dir is excluded so runs that only differ in where they
        # write are recognizably the same configuration.
        hashed = {k: v for k, v in self.raw.items() if k != "output_dir"}
        canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def meta(self) -> dict:
        return {"czsim_version": __version__, "config_hash": self.config_hash, "seed": self.seed}

    def header_lines(self) -> list[str]:
        return [f"{k}={v}" for k, v in self.meta().items()]


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None, fill_defaults: bool = True) -> RunConfig:
    """Load, validate, and materialize a run configuration.

    path=None uses the built-in defaults.  overrides are merged on top
    (CLI flags).  Unknown keys anywhere are schema errors.
    """
    if path is None:
        raw = dict(DEFAULT_CONFIG)
    else:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        with open(p) as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    if fill_defaults:
        raw = _merge(DEFAULT_CONFIG, raw)
    if overrides:
        raw = _merge(raw, overrides)
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message} (at {'/'.join(map(str, exc.path))})") from exc
    return _materialize(raw)


def _materialize(raw: dict) -> RunConfig:
    dev = raw["device"]
    modes = tuple(
        ModeSpec(m["label"], m["frequency"], m["anharmonicity"], m.get("levels", 3))
        for m in dev["modes"]
    )
    flux_models = {
        label: FluxModel(fm["max_frequency"], fm["anharmonicity"])
        for label, fm in dev.get("flux_models", {}).items()
    }
    device = DeviceSpec(modes, CouplingGraph(**dev["couplings"]), flux_models,
                        dev.get("metadata", {}))
    if dev.get("coupler_at_zero_coupling", False):
        device = device.with_frequencies(coupler=zero_coupling_point(device))

    solver = raw.get("solver", {})
    pulse_cfg = raw.get("pulse", {})
    pulse = PulseShapeSpec(
        family=pulse_cfg.get("family", "slepian"),
        length=pulse_cfg.get("length_ns", 45.0),
        idle_value=pulse_cfg.get("idle_value", 0.0),
        peak_value=pulse_cfg.get("peak_value", -0.022),
        parameterization=pulse_cfg.get("parameterization", "effective_coupling"),
        slepian_coefficients=tuple(pulse_cfg.get("slepian_coefficients", [1.0])),
    )
    gate = raw.get("gate", {})

    distortion = None
    if "distortion" in raw:
        d = raw["distortion"]
        distortion = DistortionModel(
            settling_terms=tuple(
                (t["amplitude"], t["time_constant_ns"]) for t in d.get("settling_terms", [])
            ),
            gain=d.get("gain", 1.0),
        )

    noise = None
    if "noise" in raw:
        n = raw["noise"]
        readout = n.get("readout")
        if readout:
            f00 = dict(enumerate(readout.get("f00", [1.0, 1.0])))
            f11 = dict(enumerate(readout.get("f11", [1.0, 1.0])))
            noise = NoiseSpec.from_fidelities(n.get("depolarizing_per_cycle", 0.0), f00, f11)
        else:
            noise = NoiseSpec(n.get("depolarizing_per_cycle", 0.0))

    bench = raw.get("benchmarking", {})
    return RunConfig(
        raw=raw,
        device=device,
        dt=solver.get("dt_ns", 0.05),
        unitarity_tolerance=solver.get("unitarity_tolerance", 1e-9),
        pulse=pulse,
        q2_detune=gate.get("q2_detune"),
        compensate=gate.get("compensate", True),
        distortion=distortion,
        noise=noise,
        depths=tuple(bench.get("depths", [1, 3, 5, 8, 12, 17, 23, 30])),
        n_circuits=bench.get("n_circuits", 50),
        shots=bench.get("shots"),
        seed=raw.get("seed", 0),
        output_dir=Path(raw.get("output_dir", "czsim_out")),
    )
