"""Experiment configuration: TOML loading, validation, and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .nodes import DiodeParams
from .reservoir import ReservoirConfig
from .signals import PulseParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


@dataclass(frozen=True)
class ExtractionConfig:
    mode: str = "spectral"  # spectral | virtual | hardware_preset | baseline
    centers_ghz: tuple | None = None  # None -> the 50-center emulation pool
    bandwidth: float = 0.2e9
    order: int = 2
    nodes_per_symbol: int = 62
    rc_time_constant: float = 2e-9
    rectifier: str = "ideal"

    def __post_init__(self):
        if self.mode not in ("spectral", "virtual", "hardware_preset", "baseline"):
            raise ConfigError(f"extraction.mode: unknown mode {self.mode!r}")
        if self.centers_ghz is not None:
            object.__setattr__(self, "centers_ghz", tuple(self.centers_ghz))

    def diode_params(self) -> DiodeParams:
        return DiodeParams(self.rc_time_constant, self.rectifier)


@dataclass(frozen=True)
class ReadoutSettings:
    lam: float | None = 1e-6  # None -> grid selection on a validation tail
    washout: int = 50
    train_fraction: float = 0.7

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigError("readout.train_fraction: must be in (0, 1)")
        if self.washout < 0:
            raise ConfigError("readout.washout: must be >= 0")


@dataclass(frozen=True)
class TaskSettings:
    kind: str = "parity"  # parity | narma2
    length: int = 2000
    k_max: int = 10
    seed: int = 1

    def __post_init__(self):
        if self.kind not in ("parity", "narma2"):
            raise ConfigError(f"task.kind: unknown task {self.kind!r}")
        if self.length < 3:
            raise ConfigError("task.length: must be >= 3")


@dataclass(frozen=True)
class SearchSettings:
    n_per_detector: int = 5
    n_trials: int = 10000
    top_k: int = 20
    fields_mT: tuple = ()  # bias fields for sweeps, in mT

    def __post_init__(self):
        object.__setattr__(self, "fields_mT", tuple(self.fields_mT))
        if self.n_per_detector < 1 or self.n_trials < 1 or self.top_k < 1:
            raise ConfigError("search: counts must be >= 1")


@dataclass(frozen=True)
class SpeechSettings:
    n_symbols: int = 100
    sample_length: int = 10000
    n_shuffles: int = 20
    train_samples: int = 400
    samples_per_class: int = 100
    n_classes: int = 5
    corpus_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    reservoir: ReservoirConfig = field(default_factory=ReservoirConfig)
    pulse: PulseParams = field(default_factory=lambda: PulseParams(5e-9, 0.375e-9, 0.375e-9))
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    readout: ReadoutSettings = field(default_factory=ReadoutSettings)
    task: TaskSettings = field(default_factory=TaskSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    speech: SpeechSettings = field(default_factory=SpeechSettings)
    drive_sample_rate: float = 16e9
    threads: int = 1
    output_dir: str = "out"


_SECTIONS = {
    "reservoir": ReservoirConfig,
    "pulse": PulseParams,
    "extraction": ExtractionConfig,
    "readout": ReadoutSettings,
    "task": TaskSettings,
    "search": SearchSettings,
    "speech": SpeechSettings,
}

_TOP_LEVEL = ("drive_sample_rate", "threads", "output_dir")


def _build_section(name, cls, data):
    fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"{name}.{key}: unknown field")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a table")
            kwargs[key] = _build_section(key, _SECTIONS[key], value)
        elif key in _TOP_LEVEL:
            kwargs[key] = value
        else:
            raise ConfigError(f"{key}: unknown field")
    cfg = ExperimentConfig(**kwargs)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: ExperimentConfig):
    if cfg.drive_sample_rate < 4.0 / cfg.pulse.ramp:
        raise ConfigError(
            "drive_sample_rate: too low to resolve pulse.ramp "
            f"(need >= {4.0 / cfg.pulse.ramp:g})"
        )
    if cfg.task.kind == "parity" and cfg.task.length <= cfg.task.k_max:
        raise ConfigError("task.length: must exceed task.k_max")
    if cfg.speech.sample_length % cfg.speech.n_symbols:
        raise ConfigError("speech.sample_length: must be a multiple of speech.n_symbols")
    if cfg.threads < 1:
        raise ConfigError("threads: must be >= 1")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc
    return config_from_dict(data)


def config_hash(cfg: ExperimentConfig) -> str:
    """Stable content hash over the fully resolved configuration."""
    blob = json.dumps(dataclasses.asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


CONFIG_TEMPLATE = """\
# sdrc experiment configuration (TOML)

drive_sample_rate = 16e9   # Hz, input waveform generation rate
threads = 1
output_dir = "out"

[reservoir]
bias_field = 0.1873        # T; resonance sits near 2 GHz here
n_modes = 32
mode_spacing = 30e6        # Hz
chi = 2e3                  # quadratic mixing strength (0 = linear medium)
noise_floor = 0.0
seed = 0

[pulse]
symbol_duration = 5e-9     # s
flat_top = 0.375e-9        # s
ramp = 0.375e-9            # s

[extraction]
mode = "spectral"          # spectral | virtual | hardware_preset | baseline
# centers_ghz = [1.0, 1.5, 2.0]   # omit for the 50-center pool (0.1..5.0 GHz)
nodes_per_symbol = 62      # virtual-node count per detector

[readout]
lam = 1e-6                 # ridge regularization; omit for grid selection
washout = 50
train_fraction = 0.7

[task]
kind = "parity"            # parity | narma2
length = 2000
k_max = 10
seed = 1

[search]
n_per_detector = 5
n_trials = 10000
top_k = 20
fields_mT = [147.3, 197.3, 247.3, 297.3, 347.5]

[speech]
n_symbols = 100
sample_length = 10000
n_shuffles = 20
train_samples = 400
samples_per_class = 100
n_classes = 5
"""
