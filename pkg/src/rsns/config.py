"""Experiment configuration: schema, defaults, presets, hashing.

Configuration is a flat record.  Values resolve in three layers (package
defaults, then a JSON config file, then command-line flags), unknown keys
are rejected with their path, and the SHA-256 of the fully resolved record
is embedded in every artifact so outputs are traceable to exact inputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

SUBCOMMANDS = (
    "resonances",
    "nonlin",
    "identities",
    "estimates",
    "strichartz",
    "simulate",
    "morawetz",
)


@dataclass
class ExperimentConfig:
    """One campaign's full input record.  All defaults are live values, not hints."""

    subcommand: str = "simulate"
    # mode window and box discretization
    window_k: int = 3
    box_l: float = 32.0
    grid_n: int = 128
    # time stepping
    dt: float = 1e-3
    t_end: float = 1.0
    diagnostics_stride: int = 10
    snapshot_stride: int = 0
    nonlinear_substeps: int = 1
    boundary_mass_threshold: float = 1e-4
    # initial data (simulate / morawetz): low-mode Gaussian bumps
    init_amplitude: float = 0.05
    init_width: float = 1.0
    init_velocity: tuple = (0.0, 0.0)
    # discrete campaigns
    beta_grid: tuple = (0.8, 0.875, 0.9, 0.95, 1.0)
    sequences: int = 100
    k_list: tuple = (4, 8, 16, 32)
    # torus campaigns
    n_list: tuple = (4, 8, 16, 32)
    trials: int = 20
    bilinear_n1_list: tuple = (16, 32, 64)
    bilinear_n2: int = 4
    # lattice circle campaign
    circles: int = 1000
    circle_a_lo: float = 1.0
    circle_a_hi: float = 100.0
    circle_a_points: int = 9
    circle_beta: float = 0.875
    # spectral-vs-direct verification windows
    nonlin_k_list: tuple = (2, 4, 8)
    # reproducibility and budgets
    seed: int = 0
    output_dir: str = "rsns-out"
    memory_cap_bytes: int = 2_000_000_000
    g2m_cap: int = 500_000_000

    def __post_init__(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(
                f"unknown subcommand {self.subcommand!r}; expected one of {SUBCOMMANDS}"
            )

    def resolved(self) -> dict:
        out = dataclasses.asdict(self)
        for key, val in out.items():
            if isinstance(val, tuple):
                out[key] = list(val)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_TUPLE_FIELDS = {
    f.name for f in fields(ExperimentConfig) if isinstance(f.default, tuple)
}


def _coerce(name: str, value):
    if name in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"config key '{name}' must be a list")
        return tuple(value)
    default = getattr(ExperimentConfig(), name)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config key '{name}' must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(value, bool):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"config key '{name}' must be an integer")
        if not isinstance(value, (int, float)):
            raise ConfigError(f"config key '{name}' must be an integer")
        return int(value)
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"config key '{name}' must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"config key '{name}' must be a string")
        return value
    return value


def config_from_sources(
    subcommand: str,
    file_path=None,
    preset: str | None = None,
    overrides: dict | None = None,
) -> ExperimentConfig:
    """Resolve defaults -> preset -> config file -> explicit overrides."""
    merged: dict = {"subcommand": subcommand}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    if file_path is not None:
        try:
            raw = json.loads(Path(file_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {file_path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {file_path} is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {file_path} must hold a JSON object")
        merged.update(raw)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    coerced = {k: _coerce(k, v) if k != "subcommand" else v for k, v in merged.items()}
    return ExperimentConfig(**coerced)


#: Named parameter bundles for the packaged experiment families.
PRESETS: dict[str, dict] = {
    # weakly nonlinear dispersing bundle: h1-weighted mass about 1e-2,
    # long enough to watch the free-flight settling before wrap-around
    "smalldata": {
        "window_k": 3,
        "box_l": 32.0,
        "grid_n": 96,
        "dt": 4e-3,
        "t_end": 6.0,
        "diagnostics_stride": 25,
        "snapshot_stride": 125,
        "init_amplitude": 0.032,
        "init_width": 1.0,
        "boundary_mass_threshold": 1e-4,
    },
    # order-1 data on a fine grid: the conservation/order measurement bundle
    "conservation": {
        "window_k": 3,
        "box_l": 32.0,
        "grid_n": 128,
        "dt": 1e-3,
        "t_end": 1.0,
        "diagnostics_stride": 10,
        "init_amplitude": 0.7,
        "init_width": 1.0,
    },
}
